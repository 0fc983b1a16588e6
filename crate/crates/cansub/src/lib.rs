//! File formats, reports and sweeps around `cansub_core`.

pub mod format;
pub mod report;
pub mod sweep;
