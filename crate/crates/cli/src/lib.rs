//! Support library for the `l12lab` binary: the instance file format, the
//! run-record log, and the named verification suites. Kept as a library so
//! integration tests can exercise parsing and the suites directly.

pub mod format;
pub mod record;
pub mod suites;
