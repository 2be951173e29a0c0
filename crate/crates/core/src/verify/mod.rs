//! Independent oracles and theorem checkers.
//!
//! The oracles here deliberately take the slow road: explicit `nd × nd`
//! Kronecker assemblies, finite differences and dense eigendecompositions,
//! so they share as little code as possible with the fast paths they check.

mod battery;
mod witness;

pub use battery::{
    cgnn_horizon_battery, closed_form_battery, curl_battery, default_suite, diag_sharpening_battery,
    filter_battery, gradient_battery, grand_battery, grand_irregular_info, harmonic_battery,
    heat_battery, hfd_battery, kronecker_battery, lfd_battery, monotonicity_battery,
    no_residual_battery, omega_eq_w_battery, pde_gcn_battery, replay, spectrum_battery, Measure,
};
pub use witness::Instance;

use std::fmt;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::{spectral_filter_step, step_model, ModelSpec};
use crate::energy::{check_features, energy_gradient, parametric_energy, WeightSet};
use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, Graph};
use crate::linalg::{frob_dot, frob_norm, kron, symmetric_eigenvalues, vec_cols};
use crate::scalar::Scalar;

/// Largest `n·d` for which the explicit Kronecker assembly is built.
pub const ASSEMBLY_LIMIT: usize = 4096;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-5;
pub const CURL_SYMMETRIC_TOL: f64 = 1e-8;
pub const CURL_ASYMMETRIC_MIN: f64 = 1e-6;
pub const MONOTONE_SLACK: f64 = 1e-9;
/// The continuous-time proxy is only meaningful for steps this small.
pub const PROXY_MAX_TAU: f64 = 1e-3;
pub const FILTER_TOL: f64 = 1e-12;

/// Outcome of one check. `passed` iff `max_error <= tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
    /// Serialized failing instance, replayable with [`replay`].
    pub witness: Option<String>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, max_error: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: max_error <= tolerance,
            max_error,
            tolerance,
            witness: None,
        }
    }

    /// Attaches `witness` if the check failed.
    pub fn with_witness(mut self, witness: impl FnOnce() -> String) -> Self {
        if !self.passed {
            self.witness = Some(witness());
        }
        self
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<40} max_error={:.3e} tol={:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.max_error,
            self.tolerance
        )
    }
}

fn to_f64<T: Scalar>(m: &ArrayView2<T>) -> Array2<f64> {
    m.mapv(|x| x.as_f64())
}

fn assembly_guard(n: usize, d: usize) -> Result<()> {
    if n * d > ASSEMBLY_LIMIT {
        return Err(Error::Resource(format!(
            "explicit assembly needs n·d <= {ASSEMBLY_LIMIT}, got {n}·{d} = {}",
            n * d
        )));
    }
    Ok(())
}

/// `Ω⊗I_n − W⊗Ā` as a dense `nd × nd` matrix acting on column-stacked `vec F`.
pub fn kronecker_assembly<T: Scalar>(g: &Graph, omega: &ArrayView2<T>, w: &ArrayView2<T>) -> Result<Array2<T>> {
    let n = g.n();
    let d = w.nrows();
    assembly_guard(n, d)?;
    let abar = normalized_adjacency::<T>(g)?;
    let eye = Array2::<T>::eye(n);
    Ok(kron(omega, &eye.view()) - kron(w, &abar.view()))
}

/// `⟨vec F, (Ω⊗I − W⊗Ā) vec F⟩ + 2⟨vec F, (W̃ᵀ⊗I) vec F0⟩` with every
/// Kronecker factor materialized.
pub fn kronecker_oracle_energy<T: Scalar>(
    g: &Graph,
    f: &ArrayView2<T>,
    f0: &ArrayView2<T>,
    w: &WeightSet<T>,
) -> Result<T> {
    check_features(g, f, "F")?;
    check_features(g, f0, "F0")?;
    let n = g.n();
    let d = w.d();
    if f.ncols() != d || f0.ncols() != d {
        return Err(Error::validation("feature width does not match weights"));
    }
    assembly_guard(n, d)?;
    let m = kronecker_assembly(g, &w.omega().view(), &w.w().view())?;
    let src = kron(&w.wtilde().t(), &Array2::<T>::eye(n).view());
    let x = vec_cols(f);
    let x0 = vec_cols(f0);
    Ok(x.dot(&m.dot(&x)) + T::lit(2.0) * x.dot(&src.dot(&x0)))
}

/// Central differences of [`parametric_energy`] against `−2 ·` [`energy_gradient`].
pub fn gradient_fd_check<T: Scalar>(
    g: &Graph,
    f: &ArrayView2<T>,
    f0: &ArrayView2<T>,
    w: &WeightSet<T>,
    h: T,
) -> Result<CheckReport> {
    gradient_fd_check_with(g, f, f0, w, h, energy_gradient)
}

/// [`gradient_fd_check`] with the analytic gradient supplied by the caller,
/// so deliberately broken gradients can be shown to fail.
pub fn gradient_fd_check_with<T, G>(
    g: &Graph,
    f: &ArrayView2<T>,
    f0: &ArrayView2<T>,
    w: &WeightSet<T>,
    h: T,
    gradient: G,
) -> Result<CheckReport>
where
    T: Scalar,
    G: Fn(&Graph, &ArrayView2<T>, &ArrayView2<T>, &WeightSet<T>) -> Result<Array2<T>>,
{
    if !(h >= T::lit(1e-7) && h <= T::lit(1e-3)) {
        return Err(Error::validation(format!("finite-difference step must lie in [1e-7, 1e-3], got {h}")));
    }
    let analytic = gradient(g, f, f0, w)? * T::lit(-2.0);
    let mut probe = f.to_owned();
    let mut worst = T::zero();
    for idx in ndarray::indices(f.raw_dim()) {
        let orig = probe[idx];
        probe[idx] = orig + h;
        let up = parametric_energy(g, &probe.view(), f0, w)?;
        probe[idx] = orig - h;
        let down = parametric_energy(g, &probe.view(), f0, w)?;
        probe[idx] = orig;
        let fd = (up - down) / (h + h);
        worst = worst.max((fd - analytic[idx]).abs());
    }
    let scale = T::one().max(frob_norm(&analytic.view()));
    let report = CheckReport::new("gradient_fd", (worst / scale).as_f64(), FD_TOL);
    Ok(report.with_witness(|| {
        Instance::new("gradient_fd", g.clone())
            .with_matrix("F", &to_f64(f))
            .with_matrix("F0", &to_f64(f0))
            .with_weights(w)
            .with_scalar("h", h.as_f64())
            .to_text()
    }))
}

/// Largest entry of `J − Jᵀ` for the finite-difference Jacobian of
/// `F ↦ −FΩ + ĀFW`. Zero (to roundoff) exactly when the map is a gradient field.
pub fn jacobian_asymmetry<T: Scalar>(g: &Graph, f: &ArrayView2<T>, w: &WeightSet<T>, h: T) -> Result<T> {
    check_features(g, f, "F")?;
    let n = g.n();
    let d = w.d();
    assembly_guard(n, d)?;
    let abar = normalized_adjacency::<T>(g)?;
    let field = |x: &Array2<T>| abar.dot(x).dot(w.w()) - x.dot(w.omega());
    let nd = n * d;
    let mut jac = Array2::<T>::zeros((nd, nd));
    let mut probe = f.to_owned();
    for c in 0..d {
        for r in 0..n {
            let orig = probe[[r, c]];
            probe[[r, c]] = orig + h;
            let up = vec_cols(&field(&probe).view());
            probe[[r, c]] = orig - h;
            let down = vec_cols(&field(&probe).view());
            probe[[r, c]] = orig;
            jac.column_mut(c * n + r).assign(&((up - down) / (h + h)));
        }
    }
    let mut worst = T::zero();
    for i in 0..nd {
        for j in (i + 1)..nd {
            worst = worst.max((jac[[i, j]] - jac[[j, i]]).abs());
        }
    }
    Ok(worst)
}

/// Curl test: passes when the Jacobian is symmetric to `1e-8`, i.e. the
/// flow is a gradient flow. Use `WeightSet::from_raw_unchecked` to feed
/// asymmetric weights.
pub fn curl_check<T: Scalar>(g: &Graph, f: &ArrayView2<T>, w: &WeightSet<T>, h: T) -> Result<CheckReport> {
    let asym = jacobian_asymmetry(g, f, w, h)?.as_f64();
    Ok(CheckReport::new("curl", asym, CURL_SYMMETRIC_TOL))
}

/// The two halves of the nonlinear monotonicity check.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    /// Most positive eigenvalue of `Ω⊗I − W⊗Ā`, or zero.
    pub c: f64,
    /// `E(t+τ) − E(t) − c‖F(t+τ) − F(t)‖² <= 1e-9` at every step.
    pub discrete: CheckReport,
    /// `E` nonincreasing within `1e-9·|E|`; only evaluated for `τ <= 1e-3`.
    pub proxy: Option<CheckReport>,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.discrete.passed && self.proxy.as_ref().is_none_or(|p| p.passed)
    }

    pub fn reports(&self) -> Vec<CheckReport> {
        let mut out = vec![self.discrete.clone()];
        out.extend(self.proxy.clone());
        out
    }

    /// Both halves folded into one report, normalized by their tolerances.
    pub fn combined(&self) -> CheckReport {
        let ratio = self
            .reports()
            .iter()
            .map(|r| r.max_error / r.tolerance)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut report = CheckReport::new("monotonicity", ratio, 1.0);
        report.witness = self.reports().into_iter().find_map(|r| r.witness);
        report
    }
}

/// Runs `m` steps of a nonlinear gradient-flow variant and certifies that
/// its energy decreases, both as the continuous-time proxy (small `τ`) and
/// as the discrete inequality with the constant `c` taken from the dense
/// eigendecomposition of the assembly.
pub fn monotonicity_detail<T: Scalar>(
    spec: &ModelSpec<T>,
    g: &Graph,
    f0: &ArrayView2<T>,
    m: usize,
) -> Result<MonotonicityReport> {
    if !spec.variant.is_nonlinear() {
        return Err(Error::validation(format!(
            "monotonicity is checked for the nonlinear variants, got {}",
            spec.variant
        )));
    }
    spec.validate()?;
    assembly_guard(g.n(), spec.d())?;
    let weights = spec.energy_weights().ok_or_else(|| {
        Error::validation(format!("variant {} has no parametric energy", spec.variant))
    })?;
    let assembly = kronecker_assembly(g, &weights.omega().view(), &weights.w().view())?;
    let c = symmetric_eigenvalues(&assembly.view())?
        .iter()
        .fold(T::zero(), |a, &v| a.max(v));

    let mut f = f0.to_owned();
    let mut energy = parametric_energy(g, &f.view(), f0, &weights)?;
    let mut worst_discrete = f64::NEG_INFINITY;
    let mut worst_proxy = f64::NEG_INFINITY;
    for _ in 0..m {
        let next = step_model(spec, g, &f.view(), f0)?;
        let next_energy = parametric_energy(g, &next.view(), f0, &weights)?;
        let diff = &next - &f;
        let rise = next_energy - energy;
        worst_discrete = worst_discrete.max((rise - c * frob_dot(&diff.view(), &diff.view())).as_f64());
        // roundoff floor for energies that pass through zero
        let floor = T::tol(0.0) * frob_dot(&f.view(), &f.view());
        worst_proxy = worst_proxy.max((rise / energy.abs().max(floor)).as_f64());
        f = next;
        energy = next_energy;
    }
    let witness = || {
        Instance::new("monotonicity", g.clone())
            .with_matrix("F0", &to_f64(f0))
            .with_weights(&spec.weights)
            .with_scalar("tau", spec.tau.as_f64())
            .with_scalar("steps", m as f64)
            .with_tag("variant", spec.variant.name())
            .with_tag("activation", spec.sigma.name())
            .to_text()
    };
    let discrete = CheckReport::new("monotonicity_discrete", worst_discrete, MONOTONE_SLACK).with_witness(witness);
    let proxy = (spec.tau.as_f64() <= PROXY_MAX_TAU)
        .then(|| CheckReport::new("monotonicity_proxy", worst_proxy, MONOTONE_SLACK).with_witness(witness));
    Ok(MonotonicityReport {
        c: c.as_f64(),
        discrete,
        proxy,
    })
}

/// [`monotonicity_detail`] folded into a single report.
pub fn monotonicity_check<T: Scalar>(
    spec: &ModelSpec<T>,
    g: &Graph,
    f0: &ArrayView2<T>,
    m: usize,
) -> Result<CheckReport> {
    Ok(monotonicity_detail(spec, g, f0, m)?.combined())
}

/// [`spectral_filter_step`] against the gradient-flow step on `trials`
/// seeded standard-normal feature matrices.
pub fn filter_equivalence_check(
    g: &Graph,
    w: &ArrayView2<f64>,
    tau: f64,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    let spec = ModelSpec::gradient_flow(w.to_owned(), tau)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let f = Array2::from_shape_fn((g.n(), w.nrows()), |_| StandardNormal.sample(&mut rng));
        let direct = step_model(&spec, g, &f.view(), &f.view())?;
        let filtered = spectral_filter_step(g, w, &f.view(), tau)?;
        let err = (&direct - &filtered).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        worst = worst.max(err);
    }
    Ok(CheckReport::new("filter_equivalence", worst, FILTER_TOL).with_witness(|| {
        Instance::new("filter_equivalence", g.clone())
            .with_matrix("W", &w.to_owned())
            .with_scalar("tau", tau)
            .with_scalar("trials", trials as f64)
            .with_scalar("seed", seed as f64)
            .to_text()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Activation, Variant};
    use crate::energy::dirichlet_energy;
    use crate::graph::GraphKind;
    use ndarray::array;

    fn normal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
    }

    fn sym(d: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let a = normal(d, d, rng);
        (&a + &a.t()) * 0.5
    }

    fn er(n: usize, seed: u64) -> Graph {
        Graph::generate(&GraphKind::ErdosRenyi { n, p: 0.4, seed }).unwrap()
    }

    #[test]
    fn kronecker_oracle_matches_trace_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst = 0.0f64;
        for k in 0..100 {
            let g = er(4 + k % 9, k as u64);
            let d = 1 + k % 4;
            let w = WeightSet::zeros(d)
                .with_w(sym(d, &mut rng))
                .unwrap()
                .with_omega(sym(d, &mut rng))
                .unwrap()
                .with_wtilde(normal(d, d, &mut rng))
                .unwrap();
            let f = normal(g.n(), d, &mut rng);
            let f0 = normal(g.n(), d, &mut rng);
            let oracle = kronecker_oracle_energy(&g, &f.view(), &f0.view(), &w).unwrap();
            let fast = parametric_energy(&g, &f.view(), &f0.view(), &w).unwrap();
            worst = worst.max((oracle - fast).abs() / oracle.abs().max(1.0));
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn kronecker_oracle_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = er(7, 3);
        let f = normal(7, 2, &mut rng);
        let id = WeightSet::zeros(2).with_w(Array2::eye(2)).unwrap().with_omega(Array2::eye(2)).unwrap();
        let e = kronecker_oracle_energy(&g, &f.view(), &f.view(), &id).unwrap();
        assert!((e - dirichlet_energy(&g, &f.view()).unwrap()).abs() < 1e-12);

        let w = WeightSet::from_w(sym(2, &mut rng)).unwrap().with_wtilde(normal(2, 2, &mut rng)).unwrap();
        let zero = Array2::zeros((7, 2));
        assert_eq!(kronecker_oracle_energy(&g, &zero.view(), &f.view(), &w).unwrap(), 0.0);
    }

    #[test]
    fn assembly_limit_is_a_resource_error() {
        let g = Graph::generate(&GraphKind::Cycle(2049)).unwrap();
        let f = Array2::<f64>::zeros((2049, 2));
        let err = kronecker_oracle_energy(&g, &f.view(), &f.view(), &WeightSet::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
    }

    #[test]
    fn gradient_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = er(8, 5);
        let f = normal(8, 3, &mut rng);
        let f0 = normal(8, 3, &mut rng);
        let plain = WeightSet::zeros(3).with_w(sym(3, &mut rng)).unwrap().with_omega(sym(3, &mut rng)).unwrap();
        let r = gradient_fd_check(&g, &f.view(), &f0.view(), &plain, FD_STEP).unwrap();
        assert!(r.passed && r.max_error < 1e-5, "{r}");

        let sourced = plain.clone().with_wtilde(normal(3, 3, &mut rng)).unwrap();
        let r = gradient_fd_check(&g, &f.view(), &f0.view(), &sourced, FD_STEP).unwrap();
        assert!(r.passed, "{r}");

        let r = gradient_fd_check(&g, &f.view(), &f0.view(), &WeightSet::zeros(3), FD_STEP).unwrap();
        assert_eq!(r.max_error, 0.0);

        assert!(gradient_fd_check(&g, &f.view(), &f0.view(), &plain, 1e-2).is_err());
    }

    #[test]
    fn sign_flipped_gradient_fails_with_witness() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = er(6, 2);
        let f = normal(6, 2, &mut rng);
        let w = WeightSet::from_w(sym(2, &mut rng)).unwrap();
        let broken = |g: &Graph, f: &ArrayView2<f64>, f0: &ArrayView2<f64>, w: &WeightSet<f64>| {
            energy_gradient(g, f, f0, w).map(|x| -x)
        };
        let r = gradient_fd_check_with(&g, &f.view(), &f.view(), &w, FD_STEP, broken).unwrap();
        assert!(!r.passed);
        let witness = r.witness.expect("failing checks carry a witness");
        let replayed = replay(&witness).unwrap();
        assert!(replayed.iter().all(|r| r.passed), "replay uses the real gradient");
    }

    #[test]
    fn curl_separates_symmetric_from_asymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = er(6, 1);
        let f = normal(6, 3, &mut rng);
        let sym_w = WeightSet::zeros(3).with_w(sym(3, &mut rng)).unwrap().with_omega(sym(3, &mut rng)).unwrap();
        let r = curl_check(&g, &f.view(), &sym_w, FD_STEP).unwrap();
        assert!(r.passed, "{r}");
        let raw = WeightSet::from_raw_unchecked(normal(3, 3, &mut rng), normal(3, 3, &mut rng), Array2::zeros((3, 3)));
        let asym = jacobian_asymmetry(&g, &f.view(), &raw, FD_STEP).unwrap();
        assert!(asym > CURL_ASYMMETRIC_MIN, "{asym}");
    }

    #[test]
    fn relu_flow_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = er(12, 4);
        let w = WeightSet::zeros(3).with_w(sym(3, &mut rng)).unwrap().with_omega(sym(3, &mut rng)).unwrap();
        let spec = ModelSpec::new(Variant::GradientFlowNonlinear, w, 1e-3).with_sigma(Activation::Relu);
        let rep = monotonicity_detail(&spec, &g, &normal(12, 3, &mut rng).view(), 200).unwrap();
        assert!(rep.passed(), "{:?}", rep);
        assert!(rep.proxy.is_some());
    }

    #[test]
    fn identity_activation_strictly_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = er(10, 8);
        let w = WeightSet::zeros(2).with_w(sym(2, &mut rng)).unwrap().with_omega(sym(2, &mut rng)).unwrap();
        let spec = ModelSpec::new(Variant::GradientFlowNonlinear, w, 1e-3);
        let rep = monotonicity_detail(&spec, &g, &normal(10, 2, &mut rng).view(), 50).unwrap();
        assert!(rep.proxy.as_ref().unwrap().max_error < 0.0);
    }

    #[test]
    fn large_step_distinguishes_discrete_bound_from_raw_decrease() {
        // Ω = 0, W = −I: the assembly is I⊗Ā with eigenvalues up to 1, so c = 1
        let g = Graph::generate(&GraphKind::CompleteBipartite(3, 3)).unwrap();
        let w = WeightSet::from_w(-Array2::<f64>::eye(1)).unwrap();
        let spec = ModelSpec::new(Variant::GradientFlowNonlinear, w, 3.0).with_sigma(Activation::Relu);
        let f0 = array![[1.0], [0.2], [-0.3], [0.5], [-1.0], [0.1]];
        let rep = monotonicity_detail(&spec, &g, &f0.view(), 3).unwrap();
        assert!((rep.c - 1.0).abs() < 1e-12);
        assert!(rep.discrete.passed, "{}", rep.discrete);
        assert!(rep.proxy.is_none());
    }

    #[test]
    fn bad_activation_is_a_hypothesis_error() {
        let g = er(5, 1);
        let spec = ModelSpec::new(Variant::GradientFlowNonlinear, WeightSet::<f64>::zeros(1), 1e-3)
            .with_sigma(Activation::Custom(|x| -x));
        let err = monotonicity_check(&spec, &g, &Array2::ones((5, 1)).view(), 5).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
    }

    #[test]
    fn filter_equivalence_examples() {
        let k23 = Graph::generate(&GraphKind::CompleteBipartite(2, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let w = sym(3, &mut rng);
        assert!(filter_equivalence_check(&k23, &w.view(), 0.5, 100, 1).unwrap().passed);
        assert!(filter_equivalence_check(&k23, &array![[-0.7]].view(), 0.5, 10, 2).unwrap().passed);
        let repeated = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -2.0]];
        assert!(filter_equivalence_check(&k23, &repeated.view(), 0.5, 20, 3).unwrap().passed);
    }
}
