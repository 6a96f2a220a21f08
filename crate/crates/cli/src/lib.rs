//! Std side of the `terminators` pipeline: live HTTP backend, response cache,
//! scripted-backend files, thread-pool executor, run persistence, reports and
//! the command line.

pub mod cache;
pub mod cli;
pub mod exec;
pub mod live;
pub mod pipeline;
pub mod report;
pub mod script;
pub mod store;
