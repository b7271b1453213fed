//! Exact proportional-asymptotics calculator for the soft-margin SVM, plus a
//! finite-sample lab that checks its predictions.

pub mod calibration;
pub mod error;
pub mod gauss;
pub mod lab;
pub mod models;
pub mod report;
pub mod state;

pub use error::{Error, Result};
