//! Monte-Carlo replication, reports, statistics helpers, and the
//! verification suite.

pub mod mc;
pub mod report;
pub mod stats;
pub mod verify;
