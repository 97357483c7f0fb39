//! Evaluation harness for the curation engine: Monte Carlo timing runs,
//! metadata overhead measurement, static-flow algorithm evaluation, model
//! training and stream replay.

pub mod error;
pub mod overhead;
pub mod replay;
pub mod report;
pub mod sim;
pub mod static_eval;
pub mod train;

pub use error::{EvalError, Result};
pub use report::{report_write, EvalReport};
