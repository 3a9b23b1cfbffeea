//! Agreement metrics and the statistical tests used to compare scoring models.

mod distributions;
mod kappa;

pub use distributions::{
    f1_cdf, f1_upper_tail, ln_gamma, regularized_incomplete_beta, t_cdf, t_two_sided_p,
};
pub use kappa::{qwk, ConfusionMatrix};
pub use tests::{
    paired_t_test, pearson_r, simple_regression, PairedTestResult, RegressionResult,
};
