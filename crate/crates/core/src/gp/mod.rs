//! Gaussian-process surrogates: correlation kernels, maximum-likelihood
//! fitting of the scale parameter and kriging posteriors.

mod kernel;
mod model;

pub use kernel::{Kernel, KernelFamily, DEFAULT_NU};
pub use model::{
    fit_gp, fit_gp_with_kernel, BasisSpec, FitOptions, GpModel, GpSummary, INITIAL_JITTER,
    MAX_JITTER,
};
