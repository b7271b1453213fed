//! Finite-sample side: data from the label models, an exact hinge + ridge
//! SVM solver, and the statistics the limiting theory predicts.

mod dataset;
mod empirical;
pub mod io;
mod rng;
mod solver;
pub mod stats;

pub use dataset::{generate_dataset, generate_test_set, Dataset};
pub use empirical::{empirical_report, empirical_stats, test_error, EmpiricalStats};
pub use rng::{replicate_seed, SeedStream, Stream};
pub use solver::{count_boundary, fit_svm, BoundaryCount, DualCoordinateAscent, FitStatus, SvmFit, DEFAULT_EPS_DUAL};
