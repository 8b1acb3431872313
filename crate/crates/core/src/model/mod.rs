//! The unified patent record and the value types it is built from.

mod date;
mod ipc;
mod multivalue;
mod record;
mod week;

pub use date::{CalendarDate, DateError};
pub use ipc::{IpcCode, IpcError};
pub use multivalue::{join_multivalue, sanitize_field, split_multivalue, JoinError, DELIMITER};
pub use record::{PatentRecord, RecordBuilder, RecordError, CSV_HEADER, NO_CLAIMS};
pub use week::{grant_tuesdays, grant_weeks_in_year, SourceFormat, WeekError, WeekSpec, FIRST_YEAR};
