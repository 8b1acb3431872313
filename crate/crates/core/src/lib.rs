//! Fetch, parse and normalize USPTO weekly bulk patent grant files.
//!
//! Every era of the bulk data (fixed-tag text for 1976-2001, two generations
//! of XML afterwards) is parsed into the same nine-column [`PatentRecord`],
//! which the [`pipeline`] writes as CSV or JSON Lines and the [`analytics`]
//! module summarizes.

pub mod analytics;
pub mod aps;
pub mod exec;
pub mod fetch;
pub mod model;
pub mod pipeline;
pub mod xml;

pub use exec::Exec;
pub use model::{CalendarDate, IpcCode, PatentRecord, SourceFormat, WeekSpec};
