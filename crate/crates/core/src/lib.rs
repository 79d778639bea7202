//! Dynamic latent space network models fitted by structured and fully
//! factorized coordinate-ascent variational inference on a fractional
//! posterior.

pub mod bessel;
pub mod chain;
pub mod engine;
pub mod error;
pub mod io;
pub mod likelihood;
pub mod linalg;
pub mod metrics;
pub mod mf;
pub mod model;
pub mod rng;
pub mod scales;
pub mod simulate;

pub use engine::{elbo_fixed_scale, elbo_fixed_scale_gaussian, fit, fit_from, sweep, sweep_smf};
pub use error::{Error, Result};
pub use model::{
    init_state, validate_series, BetaPosterior, BetaPrior, CanonicalGaussian, Family, FitResult,
    GaussianMoment, GigParams, IgParams, LikelihoodKind, ModelConfig, NetworkSeries, ScaleHyper,
    ScaleMode, Sigma0Posterior, TauPosterior, TraceRecord, VariationalState,
};
