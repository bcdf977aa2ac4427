//! Information-theoretic estimates and exact checks: discrete entropies and
//! decompositions, the data-processing chain, histogram estimators, the
//! variance bound, reconstruction-error bounds, and per-unit monitoring of
//! trained networks.

pub mod discrete;
pub mod estimate;
mod monitor;
pub mod reconstruction;

pub use discrete::{
    conditional_entropy, discrete_entropy, joint_from_map, verify_decompositions, verify_dpi,
    DecompositionReport, DiscreteJoint, DpiReport, MarkovChain, Stage,
};
pub use estimate::{
    entropy_given_labels, entropy_given_latent, gaussian_entropy, sample_entropy, variance_bound_check,
    weighted_sample_entropy, BinSpec, EntropyEstimate, Estimator, VarianceBoundReport,
};
pub use monitor::{monitor_conditional_entropy, LayerEntropyReport, UnitEntropy, MIN_CLASS_SAMPLES};
pub use reconstruction::{
    reconstruction_bounds_continuous, reconstruction_bounds_discrete, ContinuousReconstructionReport,
    DiscreteReconstructionReport, GaussianPair,
};
