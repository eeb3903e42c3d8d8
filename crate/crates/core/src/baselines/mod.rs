//! Comparison estimators: kernel ridge regression, trigonometric series regression
//! and a posterior-mean network under a uniform prior.

mod bayes;
mod kernel;
mod series;

pub use bayes::{bayes_fit, metropolis, BayesConfig, BayesModel, Chain, TraceRow};
pub use kernel::{
    cross_validate, fold_indices, gram, kernel_fit, CvOutcome, CvRow, Kernel, KernelConfig, KernelGrid,
    KernelModel,
};
pub use series::{series_cv, series_fit, trig_basis, SeriesModel};
