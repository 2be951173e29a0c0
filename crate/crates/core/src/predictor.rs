//! Closed-form solutions of the linear gradient flow, low/high-frequency
//! regime classification, convergence rates and predicted limits.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::dynamics::{FeatureState, ModelSpec, Variant};
use crate::energy::check_features;
use crate::error::{Error, Result};
use crate::graph::{Graph, Operators};
use crate::linalg::{asymmetry, check_square, frob_norm, max_abs, spectral_decomposition, SpectralPair, TIE_TOL};
use crate::scalar::Scalar;

/// Width of the band `|ρ₋ − μ_{d-1}| ≤ BOUNDARY_TOL` in which no regime is claimed.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Dominant-mode projections below this fraction of `‖F0‖` are rejected.
pub const DEGENERATE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// High-frequency dominant: the Rayleigh quotient tends to `λ_{n-1}`.
    Hfd,
    /// Low-frequency dominant: the Rayleigh quotient tends to zero.
    Lfd,
    Boundary,
    StepSizeViolated,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Hfd => "HFD",
            Regime::Lfd => "LFD",
            Regime::Boundary => "Boundary",
            Regime::StepSizeViolated => "StepSizeViolated",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport<T> {
    pub regime: Regime,
    /// `|μ₀|(λ_{n-1} − 1)` when `μ₀ < 0`, else zero.
    pub rho_minus: T,
    pub mu_top: T,
    pub mu_bottom: T,
    pub lambda_max: T,
    /// `2 / (τ(2 − λ_{n-1}))`, infinite on bipartite graphs.
    pub step_bound: T,
    pub tau: T,
    pub delta_hfd: Option<T>,
    pub epsilon_hfd: Option<T>,
    /// `(1 + τδ_HFD) / (1 + τρ₋)`.
    pub rate_ratio: Option<T>,
}

impl<T: Scalar> fmt::Display for RegimeReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "regime: {}", self.regime)?;
        writeln!(f, "lambda_max: {:?}", self.lambda_max)?;
        writeln!(f, "mu_bottom: {:?}", self.mu_bottom)?;
        writeln!(f, "mu_top: {:?}", self.mu_top)?;
        writeln!(f, "rho_minus: {:?}", self.rho_minus)?;
        writeln!(f, "tau: {:?}", self.tau)?;
        writeln!(f, "step_bound: {:?}", self.step_bound)?;
        let opt = |x: Option<T>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:?}"));
        writeln!(f, "delta_hfd: {}", opt(self.delta_hfd))?;
        writeln!(f, "epsilon_hfd: {}", opt(self.epsilon_hfd))?;
        write!(f, "rate_ratio: {}", opt(self.rate_ratio))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates<T> {
    pub delta_hfd: T,
    pub epsilon_hfd: T,
    /// Per-step contraction bound of everything outside the dominant block.
    pub ratio: T,
}

/// Predicted terminal behaviour of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile<T> {
    /// Unit-norm limiting direction (compare up to sign).
    pub direction: Array2<T>,
    /// Per-step growth of the norm along the dominant block.
    pub growth: T,
    /// The limiting features themselves, for flows that converge.
    pub limit: Option<Array2<T>>,
    pub regime: Option<Regime>,
}

fn require_symmetric<T: Scalar>(w: &ArrayView2<T>) -> Result<usize> {
    let d = check_square(w, "W")?;
    if asymmetry(w) > T::tol(1e-12) * T::one().max(max_abs(w)) {
        return Err(Error::validation("W must be symmetric"));
    }
    Ok(d)
}

struct Spectra<T> {
    graph: SpectralPair<T>,
    weights: SpectralPair<T>,
    lambda_max: T,
    bipartite: bool,
}

fn spectra<T: Scalar>(g: &Graph, w: &ArrayView2<T>) -> Result<Spectra<T>> {
    require_symmetric(w)?;
    g.require_connected()?;
    let ops = Operators::<T>::new(g)?;
    let graph = ops.spectrum()?.clone();
    let weights = spectral_decomposition(w)?;
    let bipartite = g.checks().bipartite;
    // exact on bipartite graphs, which makes the step bound infinite
    let lambda_max = if bipartite { T::lit(2.0) } else { graph.max() };
    Ok(Spectra {
        graph,
        weights,
        lambda_max,
        bipartite,
    })
}

/// Features of the simplified flow `F ← F + τĀFW` after `m` steps, evaluated
/// mode by mode as `(1 + τμ_r(1 − λ_ℓ))^m` in log-magnitude and sign form.
pub fn closed_form_features<T: Scalar>(
    g: &Graph,
    w: &ArrayView2<T>,
    tau: T,
    m: usize,
    f0: &ArrayView2<T>,
) -> Result<FeatureState<T>> {
    let d = require_symmetric(w)?;
    check_features(g, f0, "F0")?;
    if f0.ncols() != d {
        return Err(Error::validation("feature width does not match W"));
    }
    if m == 0 {
        return FeatureState::from_features(f0);
    }
    let ops = Operators::<T>::new(g)?;
    let lap = ops.spectrum()?;
    let wsp = spectral_decomposition(w)?;
    let phi = &lap.vectors;
    let psi = &wsp.vectors;
    let coeff = phi.t().dot(f0).dot(psi);

    let mm = T::lit(m as f64);
    let mut logs = Array2::from_elem(coeff.raw_dim(), T::neg_infinity());
    let mut signs = Array2::<T>::zeros(coeff.raw_dim());
    for ((l, r), &c) in coeff.indexed_iter() {
        let factor = T::one() + tau * wsp.values[r] * (T::one() - lap.values[l]);
        if c == T::zero() || factor == T::zero() {
            continue;
        }
        logs[[l, r]] = c.abs().ln() + mm * factor.abs().ln();
        let parity = if factor < T::zero() && m % 2 == 1 { -T::one() } else { T::one() };
        signs[[l, r]] = c.signum() * parity;
    }
    let top = logs.iter().copied().fold(T::neg_infinity(), T::max);
    if !top.is_finite() {
        return Err(Error::DegenerateInput("every mode of F0 is annihilated".into()));
    }
    let scaled = Array2::from_shape_fn(coeff.raw_dim(), |(l, r)| {
        signs[[l, r]] * (logs[[l, r]] - top).exp()
    });
    let f = phi.dot(&scaled).dot(&psi.t());
    let norm = frob_norm(&f.view());
    Ok(FeatureState {
        direction: f / norm,
        log_scale: top + norm.ln(),
    })
}

/// Evaluates the dominance and step-size conditions for the simplified flow.
///
/// Besides the two conditions for HFD, an LFD verdict also requires
/// `|μ₀| < 2/τ + μ_{d-1}`; without it the lowest mode oscillates with a
/// larger magnitude than the smooth one and the verdict is
/// [`Regime::StepSizeViolated`].
pub fn classify_regime<T: Scalar>(g: &Graph, w: &ArrayView2<T>, tau: T) -> Result<RegimeReport<T>> {
    if !(tau > T::zero()) {
        return Err(Error::validation("tau must be positive"));
    }
    let sp = spectra(g, w)?;
    let mut report = base_report(&sp, tau);
    if report.regime == Regime::Hfd {
        let rates = rates_from(&sp, &report);
        report.delta_hfd = Some(rates.delta_hfd);
        report.epsilon_hfd = Some(rates.epsilon_hfd);
        report.rate_ratio = Some(rates.ratio);
    }
    Ok(report)
}

fn base_report<T: Scalar>(sp: &Spectra<T>, tau: T) -> RegimeReport<T> {
    let lmax = sp.lambda_max;
    let mu0 = sp.weights.min();
    let mu_top = sp.weights.max();
    // only negative channel eigenvalues repel; with none, ρ₋ = 0
    let repulsion = (-mu0).max(T::zero());
    let rho = repulsion * (lmax - T::one());
    let step_bound = if sp.bipartite {
        T::infinity()
    } else {
        T::lit(2.0) / (tau * (T::lit(2.0) - lmax))
    };
    let regime = if (rho - mu_top).abs() <= T::lit(BOUNDARY_TOL) {
        Regime::Boundary
    } else if rho > mu_top {
        if repulsion < step_bound {
            Regime::Hfd
        } else {
            Regime::StepSizeViolated
        }
    } else if repulsion < T::lit(2.0) / tau + mu_top {
        Regime::Lfd
    } else {
        Regime::StepSizeViolated
    };
    RegimeReport {
        regime,
        rho_minus: rho,
        mu_top,
        mu_bottom: mu0,
        lambda_max: lmax,
        step_bound,
        tau,
        delta_hfd: None,
        epsilon_hfd: None,
        rate_ratio: None,
    }
}

/// Distance from the extreme eigenvalue to the next distinct one, or `None`
/// when every eigenvalue ties with the extreme.
fn gap_from_top<T: Scalar>(values: &Array1<T>, top: T) -> Option<T> {
    let tol = T::tol(TIE_TOL);
    values.iter().rev().find(|&&v| top - v > tol).map(|&v| top - v)
}

fn gap_from_bottom<T: Scalar>(values: &Array1<T>) -> Option<T> {
    let lo = values[0];
    let tol = T::tol(TIE_TOL);
    values.iter().find(|&&v| v - lo > tol).map(|&v| v - lo)
}

fn rates_from<T: Scalar>(sp: &Spectra<T>, report: &RegimeReport<T>) -> Rates<T> {
    let tau = report.tau;
    let rho = report.rho_minus;
    let abs_mu0 = report.mu_bottom.abs();
    let lmax = sp.lambda_max;
    let gap_lap = gap_from_top(&sp.graph.values, lmax);
    let gap_w = gap_from_bottom(&sp.weights.values);

    let mut delta = report.mu_top.max(abs_mu0 - T::lit(2.0) / tau);
    let mut eps = rho - report.mu_top;
    if let Some(gl) = gap_lap {
        delta = delta.max(rho - abs_mu0 * gl);
        eps = eps.min(abs_mu0 * gl);
    }
    if let Some(gw) = gap_w {
        delta = delta.max(rho - (lmax - T::one()) * gw);
        eps = eps.min(gw * (lmax - T::one()));
    }
    Rates {
        delta_hfd: delta,
        epsilon_hfd: eps,
        ratio: (T::one() + tau * delta) / (T::one() + tau * rho),
    }
}

/// Rates of convergence to the high-frequency block; a state error unless
/// the instance is HFD.
pub fn convergence_rates<T: Scalar>(g: &Graph, w: &ArrayView2<T>, tau: T) -> Result<Rates<T>> {
    if !(tau > T::zero()) {
        return Err(Error::validation("tau must be positive"));
    }
    let sp = spectra(g, w)?;
    let report = base_report(&sp, tau);
    if report.regime != Regime::Hfd {
        return Err(Error::State(format!(
            "convergence rates are defined in the HFD regime, instance is {}",
            report.regime
        )));
    }
    Ok(rates_from(&sp, &report))
}

/// `Φ_B Φ_Bᵀ F0 Ψ_B Ψ_Bᵀ` for the chosen graph and channel eigenvector blocks.
fn block_projection<T: Scalar>(
    f0: &ArrayView2<T>,
    phi: &SpectralPair<T>,
    rows: &[usize],
    psi: &SpectralPair<T>,
    cols: &[usize],
) -> Array2<T> {
    let pb = phi.vectors.select(Axis(1), rows);
    let qb = psi.vectors.select(Axis(1), cols);
    pb.dot(&pb.t().dot(f0).dot(&qb)).dot(&qb.t())
}

fn normalized<T: Scalar>(p: Array2<T>, f0: &ArrayView2<T>, what: &str) -> Result<Array2<T>> {
    let norm = frob_norm(&p.view());
    let scale = frob_norm(f0);
    if !(norm > T::lit(DEGENERATE_TOL) * scale) {
        return Err(Error::DegenerateInput(format!(
            "F0 has (almost) no component on the {what} ({norm} vs ‖F0‖ = {scale})"
        )));
    }
    Ok(p / norm)
}

/// Predicted terminal direction and per-step growth for the variants whose
/// long-time behaviour is known in closed form: the simplified gradient
/// flow (`Ω = W̃ = 0`), the residual-free flow on non-bipartite graphs,
/// heat diffusion, the linear GRAND flow and the harmonic flow.
pub fn asymptotic_profile<T: Scalar>(
    g: &Graph,
    spec: &ModelSpec<T>,
    f0: &ArrayView2<T>,
) -> Result<Profile<T>> {
    spec.validate()?;
    check_features(g, f0, "F0")?;
    if f0.ncols() != spec.d() {
        return Err(Error::validation("feature width does not match the model"));
    }
    g.require_connected()?;
    let tau = spec.tau;
    let w = spec.weights.w();
    match spec.variant {
        Variant::GradientFlow => {
            let zero = |m: &Array2<T>| m.iter().all(|&x| x == T::zero());
            if !zero(spec.weights.omega()) || !zero(spec.weights.wtilde()) {
                return Err(Error::Hypothesis(
                    "profiles are derived for the simplified flow with Omega = Wtilde = 0".into(),
                ));
            }
            let sp = spectra(g, &w.view())?;
            let report = base_report(&sp, tau);
            let (rows, cols, growth, what) = match report.regime {
                Regime::Hfd => (
                    sp.graph.top_block(),
                    sp.weights.bottom_block(),
                    T::one() + tau * report.rho_minus,
                    "highest graph frequency paired with the most negative channel",
                ),
                Regime::Lfd => (
                    sp.graph.bottom_block(),
                    sp.weights.top_block(),
                    T::one() + tau * report.mu_top,
                    "graph kernel paired with the most positive channel",
                ),
                other => {
                    return Err(Error::NoPrediction(format!(
                        "regime {other}: no asymptotic statement (rho_minus = {}, mu_top = {})",
                        report.rho_minus, report.mu_top
                    )))
                }
            };
            let p = block_projection(f0, &sp.graph, &rows, &sp.weights, &cols);
            Ok(Profile {
                direction: normalized(p, f0, what)?,
                growth,
                limit: None,
                regime: Some(report.regime),
            })
        }
        Variant::NoResidual => {
            if g.checks().bipartite {
                return Err(Error::Hypothesis(
                    "the residual-free flow is only LFD on non-bipartite graphs".into(),
                ));
            }
            let sp = spectra(g, &w.view())?;
            let top_abs = sp.weights.values.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
            if top_abs == T::zero() {
                return Err(Error::DegenerateInput("W is zero; the flow vanishes in one step".into()));
            }
            let tol = T::tol(TIE_TOL);
            let cols: Vec<usize> = (0..sp.weights.len())
                .filter(|&r| top_abs - sp.weights.values[r].abs() <= tol)
                .collect();
            let mixed = cols.iter().any(|&r| sp.weights.values[r] > T::zero())
                && cols.iter().any(|&r| sp.weights.values[r] < T::zero());
            if mixed {
                return Err(Error::NoPrediction(
                    "W has ±μ tied for the largest magnitude; the direction alternates".into(),
                ));
            }
            let p = block_projection(f0, &sp.graph, &sp.graph.bottom_block(), &sp.weights, &cols);
            Ok(Profile {
                direction: normalized(p, f0, "graph kernel paired with the largest |μ| channel")?,
                growth: tau * top_abs,
                limit: None,
                regime: Some(Regime::Lfd),
            })
        }
        Variant::Heat => {
            let ops = Operators::<T>::new(g)?;
            let lap = ops.spectrum()?;
            if tau * lap.max() >= T::lit(2.0) {
                return Err(Error::NoPrediction("tau >= 2/lambda_max; the heat step diverges".into()));
            }
            let phi0 = lap.vectors.column(0).to_owned().insert_axis(Axis(1));
            let limit = phi0.dot(&phi0.t().dot(f0));
            smoothing_profile(limit, f0)
        }
        Variant::GrandLinear => {
            if tau >= T::one() {
                return Err(Error::NoPrediction("tau >= 1; the random-walk step is not contractive".into()));
            }
            // stationary weights of the self-loop random walk are d_i + 1
            let weights: Array1<T> = g.degrees().iter().map(|&d| T::lit(d as f64 + 1.0)).collect();
            let total = weights.sum();
            let mean = weights.dot(f0) / total;
            let limit = Array2::from_shape_fn(f0.raw_dim(), |(_, c)| mean[c]);
            smoothing_profile(limit, f0)
        }
        Variant::Harmonic => {
            let ops = Operators::<T>::new(g)?;
            let lap = ops.spectrum()?;
            let wtw = w.t().dot(w);
            let msp = spectral_decomposition(&wtw.view())?;
            if tau * msp.max() * lap.max() >= T::lit(2.0) {
                return Err(Error::NoPrediction(
                    "tau * max eig(WᵀW) * lambda_max >= 2; the harmonic step diverges".into(),
                ));
            }
            let cut = T::tol(TIE_TOL) * T::one().max(msp.max());
            let live: Vec<usize> = (0..msp.len()).filter(|&r| msp.values[r] > cut).collect();
            let dead: Vec<usize> = (0..msp.len()).filter(|&r| msp.values[r] <= cut).collect();
            let proj = |idx: &[usize]| {
                let q = msp.vectors.select(Axis(1), idx);
                q.dot(&q.t())
            };
            let phi0 = lap.vectors.column(0).to_owned().insert_axis(Axis(1));
            let smooth = phi0.dot(&phi0.t().dot(f0)).dot(&proj(&live));
            let limit = smooth + f0.dot(&proj(&dead));
            smoothing_profile(limit, f0)
        }
        other => Err(Error::NoPrediction(format!("no closed-form profile for variant {other}"))),
    }
}

fn smoothing_profile<T: Scalar>(limit: Array2<T>, f0: &ArrayView2<T>) -> Result<Profile<T>> {
    let direction = normalized(limit.clone(), f0, "limit")?;
    Ok(Profile {
        direction,
        growth: T::one(),
        limit: Some(limit),
        regime: Some(Regime::Lfd),
    })
}
