use ndarray::{Array2, ArrayView2};

use super::step::{check_inputs, raw_step};
use super::{ModelSpec, Variant};
use crate::energy::{dirichlet_energy, lp_energy, parametric_energy, WeightSet};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::frob_norm;
use crate::scalar::Scalar;

/// Features stored as a unit-norm direction and the log of the true norm.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureState<T> {
    pub direction: Array2<T>,
    pub log_scale: T,
}

impl<T: Scalar> FeatureState<T> {
    pub fn from_features(f: &ArrayView2<T>) -> Result<Self> {
        let norm = frob_norm(f);
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::validation(format!("feature norm must be positive and finite, got {norm}")));
        }
        Ok(Self {
            direction: f / norm,
            log_scale: norm.ln(),
        })
    }

    /// `exp(log_scale) · direction`; may overflow to infinity.
    pub fn features(&self) -> Array2<T> {
        &self.direction * self.log_scale.exp()
    }
}

/// Diagnostics recorded after each step (and once for the initial state).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord<T> {
    pub step: usize,
    pub time: T,
    pub rayleigh_quotient: T,
    /// Dirichlet energy of the unit direction.
    pub dirichlet_direction: T,
    /// The variant's own energy evaluated on the unit direction.
    pub parametric_energy_direction: T,
    pub log_scale: T,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    /// Records for steps `0..=m`.
    pub records: Vec<StepRecord<T>>,
    pub terminal: FeatureState<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn last(&self) -> &StepRecord<T> {
        self.records.last().expect("trajectories hold at least the initial record")
    }

    pub fn steps(&self) -> usize {
        self.records.len() - 1
    }
}

enum EnergyKind<T> {
    Parametric(WeightSet<T>),
    Dirichlet,
    LabelPropagation(T),
}

fn energy_kind<T: Scalar>(spec: &ModelSpec<T>) -> EnergyKind<T> {
    match spec.variant {
        Variant::LabelPropagation => EnergyKind::LabelPropagation(spec.mu),
        Variant::Heat | Variant::GrandLinear => EnergyKind::Dirichlet,
        _ => spec
            .energy_weights()
            .map(EnergyKind::Parametric)
            .unwrap_or(EnergyKind::Dirichlet),
    }
}

fn record<T: Scalar>(
    g: &Graph,
    kind: &EnergyKind<T>,
    step: usize,
    tau: T,
    dir: &ArrayView2<T>,
    src: &ArrayView2<T>,
    log_scale: T,
) -> Result<StepRecord<T>> {
    let dirichlet = dirichlet_energy(g, dir)?;
    let energy = match kind {
        EnergyKind::Parametric(w) => parametric_energy(g, dir, src, w)?,
        EnergyKind::Dirichlet => dirichlet,
        EnergyKind::LabelPropagation(mu) => lp_energy(g, dir, src, *mu)?,
    };
    Ok(StepRecord {
        step,
        time: T::lit(step as f64) * tau,
        rayleigh_quotient: dirichlet,
        dirichlet_direction: dirichlet,
        parametric_energy_direction: energy,
        log_scale,
    })
}

/// Runs `m` steps of `spec` from `f0`.
///
/// Linear variants are renormalized to unit norm after every step, with the
/// removed factor accumulated in `log_scale`; the source term is carried in
/// the same units, so the directions are exactly those of the unscaled
/// iteration. Nonlinear variants step on the true features and fail with a
/// numeric error naming the step if they leave the representable range.
pub fn run_trajectory<T: Scalar>(
    spec: &ModelSpec<T>,
    g: &Graph,
    f0: &ArrayView2<T>,
    m: usize,
) -> Result<Trajectory<T>> {
    spec.validate()?;
    check_inputs(spec, g, f0, f0)?;
    if m == 0 {
        return Err(Error::validation("a trajectory needs at least one step"));
    }
    let initial = FeatureState::from_features(f0).map_err(|_| {
        Error::validation("initial features must be nonzero and finite")
    })?;
    let kind = energy_kind(spec);
    let mut records = Vec::with_capacity(m + 1);

    if spec.variant.is_linear() {
        let mut dir = initial.direction;
        let mut log_scale = initial.log_scale;
        let mut src = dir.clone();
        records.push(record(g, &kind, 0, spec.tau, &dir.view(), &src.view(), log_scale)?);
        for step in 1..=m {
            let next = raw_step(spec, g, &dir.view(), &src.view());
            let norm = frob_norm(&next.view());
            if !(norm > T::zero()) || !norm.is_finite() {
                return Err(Error::numeric(format!(
                    "{} state norm became {norm} at step {step}",
                    spec.variant
                )));
            }
            dir = next / norm;
            src /= norm;
            log_scale += norm.ln();
            records.push(record(g, &kind, step, spec.tau, &dir.view(), &src.view(), log_scale)?);
        }
        Ok(Trajectory {
            records,
            terminal: FeatureState {
                direction: dir,
                log_scale,
            },
        })
    } else {
        let mut f = f0.to_owned();
        let mut state = initial;
        records.push(record(
            g,
            &kind,
            0,
            spec.tau,
            &state.direction.view(),
            &(f0 / state.log_scale.exp()).view(),
            state.log_scale,
        )?);
        for step in 1..=m {
            f = raw_step(spec, g, &f.view(), f0);
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::numeric(format!(
                    "{} overflowed at step {step}; reduce tau or the number of steps",
                    spec.variant
                )));
            }
            state = FeatureState::from_features(&f.view()).map_err(|_| {
                Error::numeric(format!("{} state vanished at step {step}", spec.variant))
            })?;
            let src = f0 / state.log_scale.exp();
            records.push(record(
                g,
                &kind,
                step,
                spec.tau,
                &state.direction.view(),
                &src.view(),
                state.log_scale,
            )?);
        }
        Ok(Trajectory {
            records,
            terminal: state,
        })
    }
}
