//! Explicit Euler steppers for every feature evolution in the lab and the
//! overflow-safe trajectory runner.

mod step;
mod trajectory;

pub use step::{spectral_filter_step, step_model};
pub use trajectory::{run_trajectory, FeatureState, StepRecord, Trajectory};

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};

use crate::energy::WeightSet;
use crate::error::{Error, Result};
use crate::linalg::{asymmetry, max_abs, symmetrize};
use crate::scalar::Scalar;

/// Default Euler step for the gradient-flow variants.
pub const DEFAULT_TAU: f64 = 0.5;

/// The evolution equation a [`ModelSpec`] integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `F + τ(−FΩ + ĀFW − F0W̃)`.
    GradientFlow,
    /// `F + τσ(−FΩ + ĀFW − F0W̃)`.
    GradientFlowNonlinear,
    /// `τ Ā F W`.
    NoResidual,
    /// `F + τ(−F diag(ω) + ĀFW − βF0)`.
    Graff,
    /// `F + τσ(−F diag(ω) + ĀFW − βF0)`.
    GraffNonlinear,
    /// `F − τΔF`.
    Heat,
    /// `Y − τ(ΔY + μ(Y − Y0))`.
    LabelPropagation,
    /// `F + τ(−ΔF + FΩ̃ + βF0)`; `β = 0` is the source-free model.
    Cgnn,
    /// `F − τ(I − D̃⁻¹Ã)F` on the graph with self-loops added.
    GrandLinear,
    /// `F − τ ΔF KᵀK`.
    PdeGcnD,
    /// `F − τ ΔF WᵀW`.
    Harmonic,
    /// `F − τ ΔF W`.
    LaplacianOmegaEqW,
    /// `F + τσ(−ΔF diag(ω))`.
    DiagNonlinear,
}

impl Variant {
    pub const ALL: [Variant; 13] = [
        Variant::GradientFlow,
        Variant::GradientFlowNonlinear,
        Variant::NoResidual,
        Variant::Graff,
        Variant::GraffNonlinear,
        Variant::Heat,
        Variant::LabelPropagation,
        Variant::Cgnn,
        Variant::GrandLinear,
        Variant::PdeGcnD,
        Variant::Harmonic,
        Variant::LaplacianOmegaEqW,
        Variant::DiagNonlinear,
    ];

    /// Whether one step commutes with a joint rescaling of state and source.
    pub fn is_linear(self) -> bool {
        !self.is_nonlinear()
    }

    pub fn is_nonlinear(self) -> bool {
        matches!(
            self,
            Variant::GradientFlowNonlinear | Variant::GraffNonlinear | Variant::DiagNonlinear
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::GradientFlow => "gradient_flow",
            Variant::GradientFlowNonlinear => "gradient_flow_nonlinear",
            Variant::NoResidual => "no_residual",
            Variant::Graff => "graff",
            Variant::GraffNonlinear => "graff_nonlinear",
            Variant::Heat => "heat",
            Variant::LabelPropagation => "label_propagation",
            Variant::Cgnn => "cgnn",
            Variant::GrandLinear => "grand_linear",
            Variant::PdeGcnD => "pde_gcn_d",
            Variant::Harmonic => "harmonic",
            Variant::LaplacianOmegaEqW => "laplacian_omega_eq_w",
            Variant::DiagNonlinear => "diag_nonlinear",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

/// Pointwise activation for the nonlinear variants.
#[derive(Debug, Clone, Copy)]
pub enum Activation<T> {
    Identity,
    Relu,
    Tanh,
    /// `x / (1 + |x|)`, odd and monotone.
    Softsign,
    Custom(fn(T) -> T),
}

impl<T: Scalar> Activation<T> {
    #[inline]
    pub fn apply(&self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(T::zero()),
            Activation::Tanh => x.tanh(),
            Activation::Softsign => x / (T::one() + x.abs()),
            Activation::Custom(f) => f(x),
        }
    }

    pub fn apply_all(&self, m: &Array2<T>) -> Array2<T> {
        m.mapv(|x| self.apply(x))
    }

    /// Checks `x σ(x) ≥ 0` on 1000 points spread over `[-10, 10]`.
    pub fn check_sign_condition(&self) -> Result<()> {
        const SAMPLES: usize = 1000;
        for k in 0..SAMPLES {
            let x = T::lit(-10.0 + 20.0 * k as f64 / (SAMPLES - 1) as f64);
            let y = self.apply(x);
            if !(x * y >= T::zero()) {
                return Err(Error::Hypothesis(format!(
                    "activation violates x·σ(x) >= 0 at x = {x} (σ(x) = {y})"
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Softsign => "softsign",
            Activation::Custom(_) => "custom",
        }
    }
}

impl<T> FromStr for Activation<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "linear" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "softsign" => Ok(Activation::Softsign),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

/// A fully parameterized evolution: variant, weights, step size and the
/// variant-specific extras.
#[derive(Debug, Clone)]
pub struct ModelSpec<T> {
    pub variant: Variant,
    pub weights: WeightSet<T>,
    pub tau: T,
    pub sigma: Activation<T>,
    /// Label-propagation penalty.
    pub mu: T,
    /// `KᵀK` for PDE-GCN_D.
    pub ktk: Option<Array2<T>>,
    /// `Ω̃` for CGNN.
    pub omega_tilde: Option<Array2<T>>,
}

impl<T: Scalar> ModelSpec<T> {
    pub fn new(variant: Variant, weights: WeightSet<T>, tau: T) -> Self {
        Self {
            variant,
            weights,
            tau,
            sigma: Activation::Identity,
            mu: T::zero(),
            ktk: None,
            omega_tilde: None,
        }
    }

    /// Simplified gradient flow `F + τĀFW`.
    pub fn gradient_flow(w: Array2<T>, tau: T) -> Result<Self> {
        Ok(Self::new(Variant::GradientFlow, WeightSet::from_w(w)?, tau))
    }

    pub fn with_sigma(mut self, sigma: Activation<T>) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_mu(mut self, mu: T) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_ktk(mut self, ktk: Array2<T>) -> Self {
        self.ktk = Some(ktk);
        self
    }

    pub fn with_omega_tilde(mut self, omega_tilde: Array2<T>) -> Self {
        self.omega_tilde = Some(omega_tilde);
        self
    }

    pub fn d(&self) -> usize {
        self.weights.d()
    }

    fn missing(&self, what: &str) -> Error {
        Error::Config(format!("variant {} requires {what}", self.variant))
    }

    /// Checks step size, required parameters and activation hypotheses.
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(Error::validation(format!("tau must be positive, got {}", self.tau)));
        }
        let d = self.d();
        let square_d = |m: &Array2<T>, what: &str| -> Result<()> {
            if m.dim() != (d, d) {
                return Err(Error::validation(format!("{what} must be {d}x{d}")));
            }
            Ok(())
        };
        match self.variant {
            Variant::GradientFlow | Variant::GradientFlowNonlinear | Variant::NoResidual => {
                self.weights.require_symmetric()?;
            }
            Variant::Graff | Variant::GraffNonlinear | Variant::DiagNonlinear => {
                if self.weights.omega_diag().is_none() {
                    return Err(self.missing("omega_diag"));
                }
            }
            Variant::LabelPropagation => {
                if self.mu < T::zero() {
                    return Err(Error::validation("label propagation needs mu >= 0"));
                }
            }
            Variant::Cgnn => {
                let ot = self.omega_tilde.as_ref().ok_or_else(|| self.missing("OmegaTilde"))?;
                square_d(ot, "OmegaTilde")?;
            }
            Variant::PdeGcnD => {
                let ktk = self.ktk.as_ref().ok_or_else(|| self.missing("KtK"))?;
                square_d(ktk, "KtK")?;
                if asymmetry(&ktk.view()) > T::tol(1e-12) * T::one().max(max_abs(&ktk.view())) {
                    return Err(Error::validation("KtK must be symmetric"));
                }
            }
            Variant::Heat
            | Variant::GrandLinear
            | Variant::Harmonic
            | Variant::LaplacianOmegaEqW => {}
        }
        if self.variant.is_nonlinear() {
            self.sigma.check_sign_condition()?;
        }
        Ok(())
    }

    /// Weights whose parametric energy is the natural energy of this variant,
    /// when one exists. Heat, label propagation and GRAND are handled separately.
    pub fn energy_weights(&self) -> Option<WeightSet<T>> {
        let d = self.d();
        let diag = |v: &Array1<T>| Array2::from_diag(v);
        let both = |m: Array2<T>| {
            WeightSet::zeros(d).with_w(m.clone()).and_then(|w| w.with_omega(m)).ok()
        };
        match self.variant {
            Variant::GradientFlow | Variant::GradientFlowNonlinear | Variant::NoResidual => {
                Some(self.weights.clone())
            }
            Variant::Graff | Variant::GraffNonlinear => {
                let omega = diag(self.weights.omega_diag()?);
                WeightSet::zeros(d)
                    .with_w(self.weights.w().clone())
                    .and_then(|w| w.with_omega(omega))
                    .and_then(|w| w.with_wtilde(Array2::eye(d) * self.weights.beta()))
                    .ok()
            }
            Variant::Cgnn => {
                let ot = symmetrize(&self.omega_tilde.as_ref()?.view());
                WeightSet::zeros(d)
                    .with_w(Array2::eye(d))
                    .and_then(|w| w.with_omega(Array2::eye(d) - ot))
                    .and_then(|w| w.with_wtilde(Array2::eye(d) * -self.weights.beta()))
                    .ok()
            }
            Variant::PdeGcnD => both(self.ktk.clone()?),
            Variant::Harmonic => both(self.weights.w().t().dot(self.weights.w())),
            Variant::LaplacianOmegaEqW => both(self.weights.w().clone()),
            Variant::DiagNonlinear => both(diag(self.weights.omega_diag()?)),
            Variant::Heat | Variant::LabelPropagation | Variant::GrandLinear => None,
        }
    }
}
