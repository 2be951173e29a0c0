//! Graph-convolutional message passing studied as discrete gradient flows of a
//! parametric multi-particle energy.
//!
//! The crate provides dense normalized graph operators, the Dirichlet and
//! parametric energies with their gradients, steppers for a family of
//! linear and nonlinear feature evolutions, closed-form solutions with
//! low/high-frequency regime prediction, and independent oracles that check
//! all of the above numerically.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the tolerances in
//! the test-suite assume.

pub mod dynamics;
pub mod energy;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod predictor;
pub mod scalar;
pub mod verify;

pub use dynamics::{
    run_trajectory, spectral_filter_step, step_model, Activation, FeatureState, ModelSpec,
    StepRecord, Trajectory, Variant,
};
pub use energy::{
    dirichlet_energy, energy_decomposition, energy_gradient, lp_energy, make_weights,
    parametric_energy, rayleigh_quotient, EnergyBreakdown, WeightSet, WeightStyle,
};
pub use error::{Error, Result};
pub use graph::{normalized_adjacency, normalized_laplacian, Graph, GraphChecks, GraphKind};
pub use linalg::{spectral_decomposition, SpectralPair};
pub use predictor::{
    asymptotic_profile, classify_regime, closed_form_features, convergence_rates, Profile,
    Rates, Regime, RegimeReport,
};
pub use scalar::Scalar;
pub use verify::CheckReport;

/// Dense `n × d` (or `d × d`) matrix of `f64`.
pub type Mat = ndarray::Array2<f64>;
pub type Weights = WeightSet<f64>;
pub type Spectrum = SpectralPair<f64>;
pub type Model = ModelSpec<f64>;
pub type State = FeatureState<f64>;
pub type Traj = Trajectory<f64>;
pub type Report = RegimeReport<f64>;

/// Single-precision counterparts.
pub type Mat32 = ndarray::Array2<f32>;
pub type Weights32 = WeightSet<f32>;
pub type Model32 = ModelSpec<f32>;
