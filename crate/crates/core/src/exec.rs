//! Execution mode for the data-parallel stages.
//!
//! With the `parallel` feature (on by default) [`Exec::Parallel`] runs on the
//! rayon pool; without it every stage falls back to a plain sequential loop.
//! Results are identical either way: ordered maps keep input order and
//! reductions are associative.

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this mode actually runs on multiple threads in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Maps `f` over `items`, preserving input order.
    pub fn map<T, U, F>(self, items: Vec<T>, f: F) -> Vec<U>
    where
        T: Send,
        U: Send,
        F: Fn(T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.into_par_iter().map(f).collect();
        }
        items.into_iter().map(f).collect()
    }

    /// Collects the `(key, value)` pairs `keys_of` yields for each item into
    /// one vector per key.
    pub fn group<T, K, V, FK, I>(self, items: &[T], keys_of: FK) -> BTreeMap<K, Vec<V>>
    where
        T: Sync,
        K: Ord + Send,
        V: Send,
        I: IntoIterator<Item = (K, V)>,
        FK: Fn(&T) -> I + Sync + Send,
    {
        let fold = |mut acc: BTreeMap<K, Vec<V>>, item: &T| {
            for (k, v) in keys_of(item) {
                acc.entry(k).or_default().push(v);
            }
            acc
        };
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items
                .par_iter()
                .fold(BTreeMap::new, fold)
                .reduce(BTreeMap::new, |mut a, b| {
                    for (k, mut vs) in b {
                        a.entry(k).or_default().append(&mut vs);
                    }
                    a
                });
        }
        items.iter().fold(BTreeMap::new(), fold)
    }

    /// Counts occurrences of each key `keys_of` yields.
    pub fn count<T, K, FK, I>(self, items: &[T], keys_of: FK) -> BTreeMap<K, usize>
    where
        T: Sync,
        K: Ord + Send,
        I: IntoIterator<Item = K>,
        FK: Fn(&T) -> I + Sync + Send,
    {
        let fold = |mut acc: BTreeMap<K, usize>, item: &T| {
            for k in keys_of(item) {
                *acc.entry(k).or_default() += 1;
            }
            acc
        };
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items
                .par_iter()
                .fold(BTreeMap::new, fold)
                .reduce(BTreeMap::new, |mut a, b| {
                    for (k, n) in b {
                        *a.entry(k).or_default() += n;
                    }
                    a
                });
        }
        items.iter().fold(BTreeMap::new(), fold)
    }

    /// Runs `f` inside a pool of at most `threads` workers when parallel.
    pub fn with_threads<R: Send>(self, threads: usize, f: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
                return pool.install(f);
            }
        }
        let _ = threads;
        f()
    }
}
