//! Seeded property batteries over random instances.
//!
//! Every battery draws its instances from a seed, evaluates one check per
//! instance and folds the per-instance measures into one [`CheckReport`] per
//! measure name. A failing report carries the first failing instance as a
//! witness, which [`replay`] evaluates again from its text alone.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    filter_equivalence_check, gradient_fd_check, jacobian_asymmetry, kronecker_oracle_energy,
    monotonicity_detail, CheckReport, Instance, CURL_ASYMMETRIC_MIN, CURL_SYMMETRIC_TOL, FD_STEP,
};
use crate::dynamics::{run_trajectory, step_model, Activation, ModelSpec, Variant};
use crate::energy::{dirichlet_energy, parametric_energy, rayleigh_quotient, WeightSet};
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphKind, Operators};
use crate::linalg::{frob_norm, spectral_decomposition, symmetrize, SpectralPair};
use crate::predictor::{asymptotic_profile, classify_regime, closed_form_features, Regime};

/// Upper bound on the adaptive step counts of the regime batteries.
const MAX_STEPS: usize = 200_000;
/// Instance draws allowed per accepted instance before generation gives up.
const DRAW_BUDGET: usize = 400;

/// One measured quantity of one instance; passes iff `error <= tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub name: &'static str,
    pub error: f64,
    pub tolerance: f64,
}

fn measure(name: &'static str, error: f64, tolerance: f64) -> Measure {
    Measure { name, error, tolerance }
}

type InstanceCheck = fn(&Instance) -> Result<Vec<Measure>>;

fn check_for(kind: &str) -> Option<InstanceCheck> {
    Some(match kind {
        "kronecker_energy" => check_kronecker,
        "gradient_fd" => check_gradient,
        "curl" => check_curl,
        "monotonicity" => check_monotonicity,
        "filter_equivalence" => check_filter,
        "closed_form" => check_closed_form,
        "hfd" => check_hfd,
        "lfd" => check_lfd,
        "no_residual" => check_no_residual,
        "heat_smoothing" => check_heat,
        "pde_gcn" => check_pde_gcn,
        "cgnn" => check_cgnn,
        "grand" => check_grand,
        "harmonic" => check_harmonic,
        "omega_eq_w" => check_omega_eq_w,
        "diag_sharpening" => check_diag_sharpening,
        "spectrum" => check_spectrum,
        _ => return None,
    })
}

/// Re-evaluates a serialized instance and reports each of its measures.
pub fn replay(text: &str) -> Result<Vec<CheckReport>> {
    let inst = Instance::parse(text)?;
    let check = check_for(&inst.kind)
        .ok_or_else(|| Error::Config(format!("unknown witness kind `{}`", inst.kind)))?;
    Ok(check(&inst)?
        .into_iter()
        .map(|m| CheckReport::new(m.name, m.error, m.tolerance))
        .collect())
}

/// Runs every instance and aggregates per measure name, in order of first
/// appearance. A check that errors counts as an infinite error under the
/// instance kind's name.
fn run_battery(instances: &[Instance]) -> Vec<CheckReport> {
    let mut order: Vec<String> = Vec::new();
    let mut reports: BTreeMap<String, CheckReport> = BTreeMap::new();
    let mut fold = |name: &str, error: f64, tol: f64, inst: &Instance, note: Option<String>| {
        let entry = reports.entry(name.to_string()).or_insert_with(|| {
            order.push(name.to_string());
            CheckReport::new(name, f64::NEG_INFINITY, tol)
        });
        let failed = !(error <= tol);
        if failed || error > entry.max_error {
            entry.max_error = if error.is_nan() { f64::INFINITY } else { entry.max_error.max(error) };
        }
        entry.passed = entry.max_error <= entry.tolerance;
        if failed && entry.witness.is_none() {
            let mut text = inst.to_text();
            if let Some(note) = note {
                let body = text.split_once('\n').map_or("", |(_, b)| b).to_string();
                text = format!("# gel witness\n# error: {}\n{body}", note.replace('\n', " "));
            }
            entry.witness = Some(text);
        }
    };
    for inst in instances {
        match check_for(&inst.kind).map(|c| c(inst)) {
            Some(Ok(measures)) => {
                for m in measures {
                    fold(m.name, m.error, m.tolerance, inst, None);
                }
            }
            Some(Err(e)) => fold(&inst.kind, f64::INFINITY, 0.0, inst, Some(e.to_string())),
            None => fold(&inst.kind, f64::INFINITY, 0.0, inst, Some("unknown kind".into())),
        }
    }
    order.into_iter().filter_map(|name| reports.remove(&name)).collect()
}

// ---------------------------------------------------------------------------
// generators

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

fn sym_normal(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Array2<f64> {
    symmetrize(&normal(rng, d, d).view()) * scale
}

fn orthogonal(rng: &mut ChaCha8Rng, d: usize) -> Result<Array2<f64>> {
    Ok(spectral_decomposition(&sym_normal(rng, d, 1.0).view())?.vectors)
}

/// `Q diag(mu) Qᵀ` for a random orthogonal `Q`, symmetrized exactly.
fn with_spectrum(rng: &mut ChaCha8Rng, mu: &[f64]) -> Result<Array2<f64>> {
    let q = orthogonal(rng, mu.len())?;
    let scaled = &q * &Array1::from_vec(mu.to_vec());
    Ok(symmetrize(&scaled.dot(&q.t()).view()))
}

fn er_graph(rng: &mut ChaCha8Rng, n: (usize, usize), p: (f64, f64)) -> Result<Graph> {
    let n = rng.random_range(n.0..=n.1);
    let p = rng.random_range(p.0..p.1);
    Graph::generate(&GraphKind::ErdosRenyi { n, p, seed: rng.random() })
}

fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Result<Graph> {
    Graph::new(n, (1..n).map(|i| (rng.random_range(0..i), i)))
}

fn generation_failed(what: &str) -> Error {
    Error::Generation(format!("could not draw enough {what} instances in {DRAW_BUDGET} attempts each"))
}

// ---------------------------------------------------------------------------
// spectral helpers shared by the regime checks

struct ModeTable {
    lap: SpectralPair<f64>,
    wsp: SpectralPair<f64>,
}

impl ModeTable {
    fn new(g: &Graph, w: &Array2<f64>) -> Result<Self> {
        let ops = Operators::<f64>::new(g)?;
        let lap = ops.spectrum()?.clone();
        let wsp = spectral_decomposition(&w.view())?;
        Ok(Self { lap, wsp })
    }

    fn coefficients(&self, f: &ArrayView2<f64>) -> Array2<f64> {
        self.lap.vectors.t().dot(f).dot(&self.wsp.vectors)
    }

    /// `max |factor|` outside the block over `max |factor|` on it, and the
    /// off-block to on-block coefficient ratio of `f0`.
    fn dominance(
        &self,
        f0: &ArrayView2<f64>,
        rows: &[usize],
        cols: &[usize],
        factor: impl Fn(f64, f64) -> f64,
    ) -> (f64, f64) {
        let coeff = self.coefficients(f0);
        let (mut on, mut off) = (0.0f64, 0.0f64);
        let (mut on_c, mut off_c) = (0.0f64, 0.0f64);
        for ((l, r), &c) in coeff.indexed_iter() {
            let f = factor(self.lap.values[l], self.wsp.values[r]).abs();
            if rows.contains(&l) && cols.contains(&r) {
                on = on.max(f);
                on_c += c * c;
            } else {
                off = off.max(f);
                off_c += c * c;
            }
        }
        (off / on, (off_c / on_c).sqrt())
    }

    fn projector(&self, rows: &[usize], cols: &[usize]) -> (Array2<f64>, Array2<f64>) {
        let pb = self.lap.vectors.select(Axis(1), rows);
        let qb = self.wsp.vectors.select(Axis(1), cols);
        (pb.dot(&pb.t()), qb.dot(&qb.t()))
    }
}

/// Steps needed to shrink a residual ratio `e0` by `ratio` per step below `target`.
fn steps_to(ratio: f64, e0: f64, target: f64) -> Result<usize> {
    if e0 <= target {
        return Ok(1);
    }
    if !(ratio < 1.0) {
        return Err(Error::numeric(format!("subdominant ratio {ratio} does not contract")));
    }
    let m = ((target / e0).ln() / ratio.ln()).ceil() as usize + 5;
    if m > MAX_STEPS {
        return Err(Error::Resource(format!("needs {m} steps, above the cap of {MAX_STEPS}")));
    }
    Ok(m)
}

fn max_abs_diff(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    (a - b).iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn sign_free_diff(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    max_abs_diff(a, b).min(max_abs_diff(a, &(-b).view()))
}

fn steps_of(inst: &Instance) -> Result<usize> {
    let s = inst.scalar("steps")?;
    if !(s >= 1.0 && s.fract() == 0.0) {
        return Err(Error::Config(format!("steps must be a positive integer, got {s}")));
    }
    Ok(s as usize)
}

// ---------------------------------------------------------------------------
// instance checks

fn check_kronecker(inst: &Instance) -> Result<Vec<Measure>> {
    let g = &inst.graph;
    let f = inst.matrix("F")?;
    let f0 = inst.matrix("F0")?;
    let w = inst.weights()?;
    let oracle = kronecker_oracle_energy(g, &f.view(), &f0.view(), &w)?;
    let fast = parametric_energy(g, &f.view(), &f0.view(), &w)?;
    let err = (oracle - fast).abs() / oracle.abs().max(fast.abs()).max(f64::MIN_POSITIVE);
    Ok(vec![measure("kronecker_energy", err, 1e-10)])
}

fn check_gradient(inst: &Instance) -> Result<Vec<Measure>> {
    let f = inst.matrix("F")?;
    let f0 = inst.matrix("F0")?;
    let h = inst.scalar_or("h", FD_STEP);
    let r = gradient_fd_check(&inst.graph, &f.view(), &f0.view(), &inst.weights()?, h)?;
    Ok(vec![measure("gradient_fd", r.max_error, r.tolerance)])
}

/// Symmetric weights must give a symmetric Jacobian; asymmetric ones must
/// be detected, i.e. show an asymmetry of at least `1e-6`, reported as the
/// ratio `1e-6 / asymmetry` against tolerance 1.
fn check_curl(inst: &Instance) -> Result<Vec<Measure>> {
    let w = WeightSet::from_raw_unchecked(
        inst.matrix("W")?.clone(),
        inst.matrix("Omega")?.clone(),
        Array2::zeros(inst.matrix("W")?.dim()),
    );
    let f = inst.matrix("F")?;
    let asym = jacobian_asymmetry(&inst.graph, &f.view(), &w, inst.scalar_or("h", FD_STEP))?;
    Ok(match inst.tag("expect")? {
        "symmetric" => vec![measure("curl_symmetric", asym, CURL_SYMMETRIC_TOL)],
        "asymmetric" => vec![measure("curl_asymmetric", CURL_ASYMMETRIC_MIN / asym, 1.0)],
        other => return Err(Error::Config(format!("curl expectation `{other}`"))),
    })
}

fn check_monotonicity(inst: &Instance) -> Result<Vec<Measure>> {
    let variant: Variant = inst.tag("variant")?.parse()?;
    let sigma: Activation<f64> = inst.tag("activation")?.parse()?;
    let spec = ModelSpec::new(variant, inst.weights()?, inst.scalar("tau")?).with_sigma(sigma);
    let f0 = inst.matrix("F0")?;
    let detail = monotonicity_detail(&spec, &inst.graph, &f0.view(), steps_of(inst)?)?;
    let mut out = vec![measure("monotonicity_discrete", detail.discrete.max_error, detail.discrete.tolerance)];
    if let Some(p) = detail.proxy {
        out.push(measure("monotonicity_proxy", p.max_error, p.tolerance));
    }
    Ok(out)
}

fn check_filter(inst: &Instance) -> Result<Vec<Measure>> {
    let r = filter_equivalence_check(
        &inst.graph,
        &inst.matrix("W")?.view(),
        inst.scalar("tau")?,
        inst.scalar("trials")? as usize,
        inst.scalar("seed")? as u64,
    )?;
    Ok(vec![measure("filter_equivalence", r.max_error, r.tolerance)])
}

fn check_closed_form(inst: &Instance) -> Result<Vec<Measure>> {
    let g = &inst.graph;
    let w = inst.matrix("W")?;
    let f0 = inst.matrix("F0")?;
    let tau = inst.scalar("tau")?;
    let m = steps_of(inst)?;
    let cf = closed_form_features(g, &w.view(), tau, m, &f0.view())?;
    let traj = run_trajectory(&ModelSpec::gradient_flow(w.clone(), tau)?, g, &f0.view(), m)?;
    Ok(vec![
        measure(
            "closed_form_direction",
            max_abs_diff(&cf.direction.view(), &traj.terminal.direction.view()),
            1e-10,
        ),
        measure("closed_form_log_scale", (cf.log_scale - traj.terminal.log_scale).abs(), 1e-8),
    ])
}

/// Worst per-step contraction of the residual outside the dominant block,
/// measured on the normalized iteration while the residual exceeds `1e-5`.
fn worst_contraction(
    spec: &ModelSpec<f64>,
    g: &Graph,
    f0: &ArrayView2<f64>,
    proj: &(Array2<f64>, Array2<f64>),
    m: usize,
) -> Result<f64> {
    let residual = |f: &Array2<f64>| {
        let p = proj.0.dot(f).dot(&proj.1);
        frob_norm(&(f - &p).view()) / frob_norm(&p.view())
    };
    let mut f = f0 / frob_norm(f0);
    let mut e = residual(&f);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..m {
        if e < 1e-5 {
            break;
        }
        let next = step_model(spec, g, &f.view(), &f.view())?;
        f = &next / frob_norm(&next.view());
        let e_next = residual(&f);
        worst = worst.max(e_next / e);
        e = e_next;
    }
    Ok(worst)
}

fn check_hfd(inst: &Instance) -> Result<Vec<Measure>> {
    let g = &inst.graph;
    let w = inst.matrix("W")?;
    let f0 = inst.matrix("F0")?;
    let tau = inst.scalar("tau")?;
    let report = classify_regime(g, &w.view(), tau)?;
    if report.regime != Regime::Hfd {
        return Err(Error::State(format!("instance is {}, not HFD", report.regime)));
    }
    let modes = ModeTable::new(g, w)?;
    let rows = modes.lap.top_block();
    let cols = modes.wsp.bottom_block();
    let factor = |l: f64, mu: f64| 1.0 + tau * mu * (1.0 - l);
    let (ratio, e0) = modes.dominance(&f0.view(), &rows, &cols, factor);
    let m = steps_to(ratio, e0, 1e-10)?;
    let spec = ModelSpec::gradient_flow(w.clone(), tau)?;
    let traj = run_trajectory(&spec, g, &f0.view(), m)?;
    let profile = asymptotic_profile(g, &spec, &f0.view())?;
    let recs = &traj.records;
    let growth = recs[m].log_scale - recs[m - 1].log_scale;
    let contraction = worst_contraction(&spec, g, &f0.view(), &modes.projector(&rows, &cols), m)?;
    let bound = report.rate_ratio.ok_or_else(|| Error::State("HFD report without rates".into()))?;
    Ok(vec![
        measure("hfd_rayleigh_quotient", (recs[m].rayleigh_quotient - report.lambda_max).abs(), 1e-6),
        measure(
            "hfd_direction",
            sign_free_diff(&traj.terminal.direction.view(), &profile.direction.view()),
            1e-5,
        ),
        measure("hfd_growth", (growth - (1.0 + tau * report.rho_minus).ln()).abs(), 1e-6),
        measure("hfd_rate", contraction - bound, 1e-9),
    ])
}

fn check_lfd(inst: &Instance) -> Result<Vec<Measure>> {
    let g = &inst.graph;
    let w = inst.matrix("W")?;
    let f0 = inst.matrix("F0")?;
    let tau = inst.scalar("tau")?;
    let report = classify_regime(g, &w.view(), tau)?;
    if report.regime != Regime::Lfd {
        return Err(Error::State(format!("instance is {}, not LFD", report.regime)));
    }
    let modes = ModeTable::new(g, w)?;
    let rows = modes.lap.bottom_block();
    let cols = modes.wsp.top_block();
    let factor = |l: f64, mu: f64| 1.0 + tau * mu * (1.0 - l);
    let (ratio, e0) = modes.dominance(&f0.view(), &rows, &cols, factor);
    let m = steps_to(ratio, e0, 1e-10)?;
    let spec = ModelSpec::gradient_flow(w.clone(), tau)?;
    let traj = run_trajectory(&spec, g, &f0.view(), m)?;
    let profile = asymptotic_profile(g, &spec, &f0.view())?;
    let recs = &traj.records;
    let growth = recs[m].log_scale - recs[m - 1].log_scale;
    Ok(vec![
        measure("lfd_rayleigh_quotient", recs[m].rayleigh_quotient, 1e-6),
        measure(
            "lfd_direction",
            sign_free_diff(&traj.terminal.direction.view(), &profile.direction.view()),
            1e-5,
        ),
        measure("lfd_growth", (growth - (1.0 + tau * report.mu_top).ln()).abs(), 1e-6),
    ])
}

/// Off-kernel modes shrink by `max |1 − λ|` per step relative to the kernel
/// paired with the largest `|μ|`; returns that ratio and the initial
/// off-kernel to dominant coefficient ratio.
fn no_residual_dominance(modes: &ModeTable, f0: &ArrayView2<f64>) -> (f64, f64) {
    let kernel = modes.lap.bottom_block();
    let top = modes.wsp.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let coeff = modes.coefficients(f0);
    let (mut dominant, mut off, mut ratio) = (0.0f64, 0.0f64, 0.0f64);
    for ((l, r), &c) in coeff.indexed_iter() {
        if kernel.contains(&l) {
            if top - modes.wsp.values[r].abs() <= 1e-9 {
                dominant += c * c;
            }
        } else {
            off += c * c;
            ratio = ratio.max((1.0 - modes.lap.values[l]).abs());
        }
    }
    (ratio, (off / dominant).sqrt())
}

fn check_no_residual(inst: &Instance) -> Result<Vec<Measure>> {
    let g = &inst.graph;
    let w = inst.matrix("W")?;
    let f0 = inst.matrix("F0")?;
    let tau = inst.scalar("tau")?;
    if g.checks().bipartite {
        return Err(Error::Hypothesis("no-residual instances must be non-bipartite".into()));
    }
    let modes = ModeTable::new(g, w)?;
    let (ratio, e0) = no_residual_dominance(&modes, &f0.view());
    let m = steps_to(ratio, e0, 1e-6)?;
    let spec = ModelSpec::new(Variant::NoResidual, WeightSet::from_w(w.clone())?, tau);
    let traj = run_trajectory(&spec, g, &f0.view(), m)?;
    let mut out = vec![measure("no_residual_rayleigh_quotient", traj.last().rayleigh_quotient, 1e-6)];

    let report = classify_regime(g, &w.view(), tau)?;
    if report.regime == Regime::Hfd {
        let rows = modes.lap.top_block();
        let cols = modes.wsp.bottom_block();
        let factor = |l: f64, mu: f64| 1.0 + tau * mu * (1.0 - l);
        let (ratio, e0) = modes.dominance(&f0.view(), &rows, &cols, factor);
        let m = steps_to(ratio, e0, 1e-10)?;
        let gf = ModelSpec::gradient_flow(w.clone(), tau)?;
        let traj = run_trajectory(&gf, g, &f0.view(), m)?;
        out.push(measure(
            "no_residual_gradient_flow_hfd",
            (traj.last().rayleigh_quotient - report.lambda_max).abs(),
            1e-6,
        ));
    }
    Ok(out)
}

/// Worst relative per-step change `sign · (E_{k+1} − E_k) / E_k` of the
/// Dirichlet energy of the true features; positive values violate.
fn dirichlet_drift(spec: &ModelSpec<f64>, g: &Graph, f0: &Array2<f64>, m: usize, sign: f64) -> Result<f64> {
    let mut f = f0.clone();
    let mut e = dirichlet_energy(g, &f.view())?;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..m {
        f = step_model(spec, g, &f.view(), &f0.view())?;
        let next = dirichlet_energy(g, &f.view())?;
        worst = worst.max(sign * (next - e) / e.max(f64::MIN_POSITIVE));
        e = next;
    }
    Ok(worst)
}

fn check_heat(inst: &Instance) -> Result<Vec<Measure>> {
    let f0 = inst.matrix("F0")?;
    let spec = ModelSpec::new(Variant::Heat, WeightSet::zeros(f0.ncols()), inst.scalar("tau")?);
    let drift = dirichlet_drift(&spec, &inst.graph, f0, steps_of(inst)?, 1.0)?;
    Ok(vec![measure("heat_smoothing", drift, 1e-12)])
}

fn check_pde_gcn(inst: &Instance) -> Result<Vec<Measure>> {
    let f0 = inst.matrix("F0")?;
    let spec = ModelSpec::new(Variant::PdeGcnD, WeightSet::zeros(f0.ncols()), inst.scalar("tau")?)
        .with_ktk(inst.matrix("KtK")?.clone());
    let drift = dirichlet_drift(&spec, &inst.graph, f0, steps_of(inst)?, 1.0)?;
    Ok(vec![measure("pde_gcn_dirichlet", drift, 1e-12)])
}

/// Source-free CGNN run for the horizon `T = ln(1e8) / λ₁`.
fn check_cgnn(inst: &Instance) -> Result<Vec<Measure>> {
    let g = &inst.graph;
    let f0 = inst.matrix("F0")?;
    let tau = inst.scalar("tau")?;
    let ops = Operators::<f64>::new(g)?;
    let lap = ops.spectrum()?;
    let gap = lap.values[lap.bottom_block().len()];
    let horizon = 1e8f64.ln() / gap;
    let m = (horizon / tau).ceil() as usize;
    let spec = ModelSpec::new(Variant::Cgnn, WeightSet::zeros(f0.ncols()).with_beta(0.0), tau)
        .with_omega_tilde(inst.matrix("OmegaTilde")?.clone());
    let traj = run_trajectory(&spec, g, &f0.view(), m)?;
    Ok(vec![measure("cgnn_horizon_rayleigh_quotient", traj.last().rayleigh_quotient, 1e-6)])
}

/// GRAND-linear against the per-channel mean, arithmetic or `(d_i+1)`-weighted.
fn check_grand(inst: &Instance) -> Result<Vec<Measure>> {
    let g = &inst.graph;
    let f0 = inst.matrix("F0")?;
    let tau = inst.scalar("tau")?;
    let n = g.n();
    // D̃^{-1/2} Ã D̃^{-1/2} is similar to the random-walk matrix
    let dt: Vec<f64> = g.degrees().iter().map(|&d| d as f64 + 1.0).collect();
    let mut s = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        s[[i, i]] = 1.0 / dt[i];
    }
    for &(u, v) in g.edges() {
        let x = 1.0 / (dt[u] * dt[v]).sqrt();
        s[[u, v]] = x;
        s[[v, u]] = x;
    }
    let nu = spectral_decomposition(&s.view())?.values;
    let q = nu
        .iter()
        .take(n - 1)
        .fold(0.0f64, |a, &v| a.max((1.0 - tau * (1.0 - v)).abs()));
    let cond = (dt.iter().cloned().fold(0.0, f64::max) / dt.iter().cloned().fold(f64::INFINITY, f64::min)).sqrt();
    let m = steps_to(q, cond * frob_norm(&f0.view()), 1e-13)?;
    let spec = ModelSpec::new(Variant::GrandLinear, WeightSet::zeros(f0.ncols()), tau);
    let traj = run_trajectory(&spec, g, &f0.view(), m)?;
    let fm = traj.terminal.features();
    let (name, weights) = match inst.tag("weighting")? {
        "arithmetic" => ("grand_arithmetic_mean", Array1::from_elem(n, 1.0)),
        "degree" => ("grand_degree_weighted_mean", Array1::from_vec(dt)),
        other => return Err(Error::Config(format!("grand weighting `{other}`"))),
    };
    let mean = weights.dot(f0) / weights.sum();
    let target = Array2::from_shape_fn(f0.raw_dim(), |(_, c)| mean[c]);
    Ok(vec![measure(name, max_abs_diff(&fm.view(), &target.view()), 1e-8)])
}

/// Harmonic flow limit against `√d_i/√(2|E|) · φ₀ᵀF0 P₊ + F0 P₀`, with the
/// kernel projector `P₀` supplied by the generator.
fn check_harmonic(inst: &Instance) -> Result<Vec<Measure>> {
    let g = &inst.graph;
    let w = inst.matrix("W")?;
    let p0 = inst.matrix("P0")?;
    let f0 = inst.matrix("F0")?;
    let tau = inst.scalar("tau")?;
    let d = w.ncols();
    let total: f64 = g.degrees().iter().sum::<usize>() as f64;
    let phi0: Array1<f64> = g.degrees().iter().map(|&k| (k as f64 / total).sqrt()).collect();
    let plus = Array2::<f64>::eye(d) - p0;
    let coeff = phi0.dot(f0).insert_axis(Axis(0));
    let limit = phi0.clone().insert_axis(Axis(1)).dot(&coeff).dot(&plus) + f0.dot(p0);

    let modes = ModeTable::new(g, &w.t().dot(w))?;
    let live: Vec<usize> = (0..d).filter(|&r| modes.wsp.values[r] > 1e-9 * modes.wsp.max().max(1.0)).collect();
    let kernel = modes.lap.bottom_block();
    let q = (0..g.n())
        .filter(|l| !kernel.contains(l))
        .flat_map(|l| live.iter().map(move |&r| (l, r)))
        .fold(0.0f64, |a, (l, r)| a.max((1.0 - tau * modes.wsp.values[r] * modes.lap.values[l]).abs()));
    let m = steps_to(q, frob_norm(&f0.view()), 1e-12)?;
    let weights = WeightSet::from_raw_unchecked(w.clone(), Array2::zeros((d, d)), Array2::zeros((d, d)));
    let spec = ModelSpec::new(Variant::Harmonic, weights, tau);
    let traj = run_trajectory(&spec, g, &f0.view(), m)?;
    let name = match inst.tag("rank")? {
        "full" => "harmonic_full_rank_limit",
        _ => "harmonic_singular_limit",
    };
    Ok(vec![measure(name, max_abs_diff(&traj.terminal.features().view(), &limit.view()), 1e-6)])
}

/// `φ₀ᵀF` over 500 true steps at `tau`, then the HFD limit at `tau_hfd`.
fn check_omega_eq_w(inst: &Instance) -> Result<Vec<Measure>> {
    let g = &inst.graph;
    let w = inst.matrix("W")?;
    let f0 = inst.matrix("F0")?;
    let weights = WeightSet::from_w(w.clone())?;
    let spec = ModelSpec::new(Variant::LaplacianOmegaEqW, weights.clone(), inst.scalar("tau")?);
    let total: f64 = g.degrees().iter().sum::<usize>() as f64;
    let phi0: Array1<f64> = g.degrees().iter().map(|&k| (k as f64 / total).sqrt()).collect();
    let a0 = phi0.dot(f0);
    let mut f = f0.clone();
    let mut drift = 0.0f64;
    for _ in 0..steps_of(inst)? {
        f = step_model(&spec, g, &f.view(), &f0.view())?;
        drift = drift.max((&phi0.dot(&f) - &a0).iter().fold(0.0f64, |m, x| m.max(x.abs())));
    }
    let mut out = vec![measure("omega_eq_w_conservation", drift, 1e-9)];

    let tau_h = inst.scalar("tau_hfd")?;
    let modes = ModeTable::new(g, w)?;
    let rows = modes.lap.top_block();
    let cols = modes.wsp.bottom_block();
    let (ratio, e0) = modes.dominance(&f0.view(), &rows, &cols, |l, mu| 1.0 - tau_h * mu * l);
    let m = steps_to(ratio, e0, 1e-10)?;
    let hfd = ModelSpec::new(Variant::LaplacianOmegaEqW, weights, tau_h);
    let traj = run_trajectory(&hfd, g, &f0.view(), m)?;
    out.push(measure(
        "omega_eq_w_hfd",
        (traj.last().rayleigh_quotient - modes.lap.max()).abs(),
        1e-6,
    ));
    Ok(out)
}

fn check_diag_sharpening(inst: &Instance) -> Result<Vec<Measure>> {
    let f0 = inst.matrix("F0")?;
    let sigma: Activation<f64> = inst.tag("activation")?.parse()?;
    let weights = WeightSet::zeros(f0.ncols()).with_omega_diag(inst.vector("omega")?)?;
    let spec = ModelSpec::new(Variant::DiagNonlinear, weights, inst.scalar("tau")?).with_sigma(sigma);
    let drift = dirichlet_drift(&spec, &inst.graph, f0, steps_of(inst)?, -1.0)?;
    Ok(vec![measure("diag_sharpening", drift, 1e-12)])
}

/// `λ_{n-1} = 2` exactly for bipartite graphs and strictly below otherwise,
/// the latter reported as `1e-9 / (2 − λ_{n-1})` against tolerance 1.
fn check_spectrum(inst: &Instance) -> Result<Vec<Measure>> {
    let g = &inst.graph;
    let ops = Operators::<f64>::new(g)?;
    let lmax = ops.spectrum()?.max();
    Ok(if g.checks().bipartite {
        vec![measure("spectrum_bipartite_top", (lmax - 2.0).abs(), 1e-10)]
    } else {
        let gap = 2.0 - lmax;
        vec![measure("spectrum_nonbipartite_top", if gap > 0.0 { 1e-9 / gap } else { f64::INFINITY }, 1.0)]
    })
}

// ---------------------------------------------------------------------------
// batteries

/// Kronecker oracle against the trace form on 100 instances.
pub fn kronecker_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for _ in 0..100 {
        let g = er_graph(&mut r, (3, 12), (0.3, 0.9))?;
        let d = r.random_range(1..=4);
        let w = WeightSet::zeros(d)
            .with_w(sym_normal(&mut r, d, 1.0))?
            .with_omega(sym_normal(&mut r, d, 1.0))?
            .with_wtilde(normal(&mut r, d, d))?;
        out.push(
            Instance::new("kronecker_energy", g.clone())
                .with_matrix("F", &normal(&mut r, g.n(), d))
                .with_matrix("F0", &normal(&mut r, g.n(), d))
                .with_weights(&w),
        );
    }
    Ok(run_battery(&out))
}

/// Finite differences of the energy on 100 instances, a third with a source
/// term and a few with all weights zero.
pub fn gradient_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for i in 0..100 {
        let g = er_graph(&mut r, (3, 15), (0.2, 0.9))?;
        let d = r.random_range(1..=4);
        let mut w = WeightSet::zeros(d);
        if i % 10 != 9 {
            w = w.with_w(sym_normal(&mut r, d, 1.0))?.with_omega(sym_normal(&mut r, d, 1.0))?;
        }
        if i % 3 == 0 {
            w = w.with_wtilde(normal(&mut r, d, d))?;
        }
        out.push(
            Instance::new("gradient_fd", g.clone())
                .with_matrix("F", &normal(&mut r, g.n(), d))
                .with_matrix("F0", &normal(&mut r, g.n(), d))
                .with_weights(&w)
                .with_scalar("h", FD_STEP),
        );
    }
    Ok(run_battery(&out))
}

/// Curl test on 10 symmetric and 10 asymmetric weight pairs.
pub fn curl_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for i in 0..20 {
        let g = er_graph(&mut r, (3, 10), (0.3, 0.9))?;
        let d = r.random_range(2..=4);
        let symmetric = i % 2 == 0;
        let (w, omega) = if symmetric {
            (sym_normal(&mut r, d, 1.0), sym_normal(&mut r, d, 1.0))
        } else {
            (normal(&mut r, d, d), normal(&mut r, d, d))
        };
        out.push(
            Instance::new("curl", g.clone())
                .with_matrix("F", &normal(&mut r, g.n(), d))
                .with_matrix("W", &w)
                .with_matrix("Omega", &omega)
                .with_scalar("h", FD_STEP)
                .with_tag("expect", if symmetric { "symmetric" } else { "asymmetric" }),
        );
    }
    Ok(run_battery(&out))
}

/// Nonlinear monotonicity at `τ = 1e-3` over 200 steps on 20 instances,
/// cycling through ReLU, tanh and softsign; the last instance has `n·d = 1024`.
pub fn monotonicity_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let activations = ["relu", "tanh", "softsign"];
    let mut out = Vec::new();
    for i in 0..20 {
        let (g, d) = if i == 19 {
            (er_graph(&mut r, (128, 128), (0.05, 0.08))?, 8)
        } else {
            (er_graph(&mut r, (4, 30), (0.2, 0.7))?, r.random_range(1..=5))
        };
        let variant = if i % 4 == 3 { Variant::GraffNonlinear } else { Variant::GradientFlowNonlinear };
        let w = if variant == Variant::GraffNonlinear {
            let om: Array1<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
            WeightSet::zeros(d).with_w(sym_normal(&mut r, d, 0.5))?.with_omega_diag(om)?
        } else {
            WeightSet::zeros(d)
                .with_w(sym_normal(&mut r, d, 0.5))?
                .with_omega(sym_normal(&mut r, d, 0.5))?
        };
        out.push(
            Instance::new("monotonicity", g.clone())
                .with_matrix("F0", &normal(&mut r, g.n(), d))
                .with_weights(&w)
                .with_scalar("tau", 1e-3)
                .with_scalar("steps", 200.0)
                .with_tag("variant", variant.name())
                .with_tag("activation", activations[i % 3]),
        );
    }
    Ok(run_battery(&out))
}

/// Spectral filter against the direct step: 100 trials on `K_{2,3}`, the
/// scalar case, a repeated spectrum and random graphs.
pub fn filter_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let k23 = Graph::generate(&GraphKind::CompleteBipartite(2, 3))?;
    let mut out = vec![
        Instance::new("filter_equivalence", k23.clone())
            .with_matrix("W", &sym_normal(&mut r, 3, 1.0))
            .with_scalar("tau", 0.5)
            .with_scalar("trials", 100.0)
            .with_scalar("seed", seed as f64),
        Instance::new("filter_equivalence", k23.clone())
            .with_matrix("W", &Array2::from_elem((1, 1), -0.7))
            .with_scalar("tau", 0.5)
            .with_scalar("trials", 20.0)
            .with_scalar("seed", seed as f64),
        Instance::new("filter_equivalence", k23)
            .with_matrix("W", &with_spectrum(&mut r, &[-1.0, -1.0, 0.5, 0.5])?)
            .with_scalar("tau", 0.5)
            .with_scalar("trials", 20.0)
            .with_scalar("seed", seed as f64),
    ];
    for _ in 0..10 {
        let g = er_graph(&mut r, (4, 20), (0.2, 0.8))?;
        let d = r.random_range(1..=5);
        out.push(
            Instance::new("filter_equivalence", g)
                .with_matrix("W", &sym_normal(&mut r, d, 1.0))
                .with_scalar("tau", [0.25, 0.5, 1.0][r.random_range(0..3)])
                .with_scalar("trials", 10.0)
                .with_scalar("seed", r.random_range(0..1u64 << 32) as f64),
        );
    }
    Ok(run_battery(&out))
}

/// Closed form against the iteration on 50 instances with `n <= 30`,
/// `d <= 6`, `m <= 100` and `τ ∈ {0.25, 0.5, 1}`.
pub fn closed_form_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for i in 0..50 {
        let g = if i % 5 == 4 {
            let a = r.random_range(2..=8);
            let b = r.random_range(2..=8);
            Graph::generate(&GraphKind::CompleteBipartite(a, b))?
        } else {
            er_graph(&mut r, (3, 30), (0.15, 0.8))?
        };
        let d = r.random_range(1..=6);
        out.push(
            Instance::new("closed_form", g.clone())
                .with_matrix("W", &sym_normal(&mut r, d, 1.0))
                .with_matrix("F0", &normal(&mut r, g.n(), d))
                .with_scalar("tau", [0.25, 0.5, 1.0][i % 3])
                .with_scalar("steps", r.random_range(1..=100) as f64),
        );
    }
    Ok(run_battery(&out))
}

fn regime_graph(r: &mut ChaCha8Rng, attempt: usize) -> Result<Graph> {
    if attempt % 4 == 3 {
        let a = r.random_range(2..=6);
        let b = r.random_range(2..=6);
        Graph::generate(&GraphKind::CompleteBipartite(a, b))
    } else {
        er_graph(r, (6, 20), (0.3, 0.8))
    }
}

/// Draws `count` instances whose regime is `want` and whose dominant block
/// separates by at least the factor `0.97` per step.
fn regime_instances(seed: u64, count: usize, want: Regime) -> Result<Vec<Instance>> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    let mut attempt = 0;
    while out.len() < count {
        if attempt >= DRAW_BUDGET * count {
            return Err(generation_failed(&want.to_string()));
        }
        attempt += 1;
        let g = regime_graph(&mut r, attempt)?;
        let d = r.random_range(1..=5);
        let tau = [0.25, 0.5, 1.0][r.random_range(0..3)];
        let mut mu = vec![0.0f64; d];
        match want {
            Regime::Hfd => {
                let repel = r.random_range(0.8..2.0);
                mu[0] = -repel;
                for m in mu.iter_mut().skip(1) {
                    *m = r.random_range(-0.9..0.5) * repel;
                }
            }
            _ => {
                mu[0] = r.random_range(0.5..1.5);
                let top = mu[0];
                for m in mu.iter_mut().skip(1) {
                    *m = r.random_range(-1.0..0.9) * top;
                }
            }
        }
        let w = with_spectrum(&mut r, &mu)?;
        let f0 = normal(&mut r, g.n(), d);
        let report = classify_regime(&g, &w.view(), tau)?;
        if report.regime != want {
            continue;
        }
        let modes = ModeTable::new(&g, &w)?;
        let (rows, cols) = match want {
            Regime::Hfd => (modes.lap.top_block(), modes.wsp.bottom_block()),
            _ => (modes.lap.bottom_block(), modes.wsp.top_block()),
        };
        let (ratio, e0) = modes.dominance(&f0.view(), &rows, &cols, |l, mu| 1.0 + tau * mu * (1.0 - l));
        if ratio > 0.97 || !e0.is_finite() || e0 > 1e3 {
            continue;
        }
        let kind = if want == Regime::Hfd { "hfd" } else { "lfd" };
        out.push(
            Instance::new(kind, g)
                .with_matrix("W", &w)
                .with_matrix("F0", &f0)
                .with_scalar("tau", tau),
        );
    }
    Ok(out)
}

/// HFD realization and rate certification on 20 HFD instances.
pub fn hfd_battery(seed: u64) -> Result<Vec<CheckReport>> {
    Ok(run_battery(&regime_instances(seed, 20, Regime::Hfd)?))
}

/// LFD realization on 20 LFD instances.
pub fn lfd_battery(seed: u64) -> Result<Vec<CheckReport>> {
    Ok(run_battery(&regime_instances(seed, 20, Regime::Lfd)?))
}

/// Residual-free flow on 20 non-bipartite graphs; half the weight spectra
/// have a dominant negative eigenvalue, so the same weights are HFD under
/// the residual flow.
pub fn no_residual_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    let mut attempt = 0;
    while out.len() < 20 {
        if attempt >= DRAW_BUDGET * 20 {
            return Err(generation_failed("no-residual"));
        }
        attempt += 1;
        let g = er_graph(&mut r, (6, 16), (0.4, 0.8))?;
        if g.checks().bipartite {
            continue;
        }
        let d = r.random_range(1..=4);
        let w = if out.len() % 2 == 0 {
            let mut mu = vec![-r.random_range(1.5..2.5)];
            mu.extend((1..d).map(|_| r.random_range(-0.5..1.0)));
            with_spectrum(&mut r, &mu)?
        } else {
            sym_normal(&mut r, d, 1.0)
        };
        let f0 = normal(&mut r, g.n(), d);
        let modes = ModeTable::new(&g, &w)?;
        let (ratio, e0) = no_residual_dominance(&modes, &f0.view());
        if ratio > 0.95 || e0 > 1e3 {
            continue;
        }
        let tau = 0.5;
        let report = classify_regime(&g, &w.view(), tau)?;
        if report.regime == Regime::Hfd {
            let factor = |l: f64, mu: f64| 1.0 + tau * mu * (1.0 - l);
            let (q, e) = modes.dominance(&f0.view(), &modes.lap.top_block(), &modes.wsp.bottom_block(), factor);
            if q > 0.97 || e > 1e3 {
                continue;
            }
        }
        out.push(
            Instance::new("no_residual", g)
                .with_matrix("W", &w)
                .with_matrix("F0", &f0)
                .with_scalar("tau", tau),
        );
    }
    Ok(run_battery(&out))
}

/// Heat diffusion never raises the Dirichlet energy for `τ <= 1`: 100 instances.
pub fn heat_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for _ in 0..100 {
        let g = er_graph(&mut r, (3, 25), (0.15, 0.9))?;
        let d = r.random_range(1..=4);
        out.push(
            Instance::new("heat_smoothing", g.clone())
                .with_matrix("F0", &normal(&mut r, g.n(), d))
                .with_scalar("tau", r.random_range(0.05..1.0))
                .with_scalar("steps", 20.0),
        );
    }
    Ok(run_battery(&out))
}

/// PDE-GCN_D with `‖KᵀK‖ <= 1` at `τ = 1e-3` over 200 steps, 10 instances.
pub fn pde_gcn_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for _ in 0..10 {
        let g = er_graph(&mut r, (4, 25), (0.2, 0.8))?;
        let d = r.random_range(1..=4);
        let k = normal(&mut r, d, d);
        let ktk = symmetrize(&k.t().dot(&k).view());
        let top = spectral_decomposition(&ktk.view())?.max();
        out.push(
            Instance::new("pde_gcn", g.clone())
                .with_matrix("F0", &normal(&mut r, g.n(), d))
                .with_matrix("KtK", &(ktk / top))
                .with_scalar("tau", 1e-3)
                .with_scalar("steps", 200.0),
        );
    }
    Ok(run_battery(&out))
}

/// Source-free CGNN with symmetric `Ω̃` (eigenvalues in `[-1, 1]`) at `τ = 0.01`, 10 instances.
pub fn cgnn_horizon_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for _ in 0..10 {
        let g = er_graph(&mut r, (4, 20), (0.3, 0.9))?;
        let d = r.random_range(1..=4);
        let mu: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        out.push(
            Instance::new("cgnn", g.clone())
                .with_matrix("F0", &normal(&mut r, g.n(), d))
                .with_matrix("OmegaTilde", &with_spectrum(&mut r, &mu)?)
                .with_scalar("tau", 0.01),
        );
    }
    Ok(run_battery(&out))
}

/// GRAND-linear reaches the arithmetic channel means on regular graphs
/// (cycles, complete graphs, `K_{a,a}`), and the `(d_i+1)`-weighted means on
/// irregular ones.
pub fn grand_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let regular = [
        GraphKind::Cycle(5),
        GraphKind::Cycle(8),
        GraphKind::Complete(4),
        GraphKind::Complete(7),
        GraphKind::CompleteBipartite(3, 3),
        GraphKind::CompleteBipartite(5, 5),
    ];
    let mut out = Vec::new();
    for kind in &regular {
        let g = Graph::generate(kind)?;
        let d = r.random_range(1..=3);
        out.push(
            Instance::new("grand", g.clone())
                .with_matrix("F0", &normal(&mut r, g.n(), d))
                .with_scalar("tau", 0.5)
                .with_tag("weighting", "arithmetic"),
        );
    }
    for _ in 0..6 {
        let g = er_graph(&mut r, (5, 15), (0.3, 0.7))?;
        let d = r.random_range(1..=3);
        out.push(
            Instance::new("grand", g.clone())
                .with_matrix("F0", &normal(&mut r, g.n(), d))
                .with_scalar("tau", 0.5)
                .with_tag("weighting", "degree"),
        );
    }
    Ok(run_battery(&out))
}

/// On an irregular graph (a path on five nodes): distance of the GRAND
/// limit from the arithmetic mean and from the `(d_i+1)`-weighted mean.
pub fn grand_irregular_info(seed: u64) -> Result<(f64, f64)> {
    let mut r = rng(seed);
    let g = Graph::generate(&GraphKind::Path(5))?;
    let f0 = normal(&mut r, 5, 2);
    let base = Instance::new("grand", g).with_matrix("F0", &f0).with_scalar("tau", 0.5);
    let arith = check_grand(&base.clone().with_tag("weighting", "arithmetic"))?;
    let weighted = check_grand(&base.with_tag("weighting", "degree"))?;
    Ok((arith[0].error, weighted[0].error))
}

/// Harmonic flow limits for 5 full-rank and 5 singular `W`, with
/// `τ = 1 / (s_max² λ_max)`.
pub fn harmonic_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for i in 0..10 {
        let full = i < 5;
        let g = er_graph(&mut r, (4, 15), (0.4, 0.9))?;
        let d = r.random_range(2..=4);
        let u = orthogonal(&mut r, d)?;
        let v = orthogonal(&mut r, d)?;
        let dead = if full { 0 } else { r.random_range(1..d) };
        let s: Array1<f64> = (0..d).map(|k| if k < dead { 0.0 } else { r.random_range(0.5..1.5) }).collect();
        let w = (&u * &s).dot(&v.t());
        let vk = v.slice(ndarray::s![.., ..dead]).to_owned();
        let p0 = vk.dot(&vk.t());
        let smax = s.iter().cloned().fold(0.0, f64::max);
        let lmax = Operators::<f64>::new(&g)?.spectrum()?.max();
        out.push(
            Instance::new("harmonic", g.clone())
                .with_matrix("W", &w)
                .with_matrix("P0", &p0)
                .with_matrix("F0", &normal(&mut r, g.n(), d))
                .with_scalar("tau", 1.0 / (smax * smax * lmax))
                .with_tag("rank", if full { "full" } else { "singular" }),
        );
    }
    Ok(run_battery(&out))
}

/// `Ω = W` flow: channel means along `φ₀` conserved over 500 steps at
/// `τ = 0.01`, and HFD under a dominant negative eigenvalue; 5 instances.
pub fn omega_eq_w_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    let mut attempt = 0;
    while out.len() < 5 {
        if attempt >= DRAW_BUDGET * 5 {
            return Err(generation_failed("Omega = W"));
        }
        attempt += 1;
        let g = er_graph(&mut r, (5, 15), (0.3, 0.8))?;
        let d = r.random_range(1..=3);
        let mut mu = vec![-r.random_range(0.6..1.0)];
        mu.extend((1..d).map(|_| r.random_range(-0.4..1.0)));
        let w = with_spectrum(&mut r, &mu)?;
        let f0 = normal(&mut r, g.n(), d);
        let tau_h = 0.5;
        let modes = ModeTable::new(&g, &w)?;
        let (q, e0) = modes.dominance(&f0.view(), &modes.lap.top_block(), &modes.wsp.bottom_block(), |l, mu| {
            1.0 - tau_h * mu * l
        });
        if q > 0.97 || e0 > 1e3 {
            continue;
        }
        out.push(
            Instance::new("omega_eq_w", g)
                .with_matrix("W", &w)
                .with_matrix("F0", &(&f0 / frob_norm(&f0.view())))
                .with_scalar("tau", 0.01)
                .with_scalar("steps", 500.0)
                .with_scalar("tau_hfd", tau_h),
        );
    }
    Ok(run_battery(&out))
}

/// ReLU diagonal flow with `ω <= 0` at `τ = 1e-3` over 200 steps never
/// lowers the Dirichlet energy; 10 instances.
pub fn diag_sharpening_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for _ in 0..10 {
        let g = er_graph(&mut r, (4, 25), (0.2, 0.8))?;
        let d = r.random_range(1..=4);
        let omega = Array2::from_shape_fn((1, d), |_| -r.random_range(0.0..1.5));
        out.push(
            Instance::new("diag_sharpening", g.clone())
                .with_matrix("F0", &normal(&mut r, g.n(), d))
                .with_matrix("omega", &omega)
                .with_scalar("tau", 1e-3)
                .with_scalar("steps", 200.0)
                .with_tag("activation", "relu"),
        );
    }
    Ok(run_battery(&out))
}

/// `λ_{n-1} = 2` iff bipartite, over complete bipartite graphs, even and odd
/// cycles, paths, random trees, complete graphs and random graphs.
pub fn spectrum_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let mut graphs = vec![
        Graph::generate(&GraphKind::CompleteBipartite(2, 3))?,
        Graph::generate(&GraphKind::CompleteBipartite(5, 5))?,
        Graph::generate(&GraphKind::CompleteBipartite(1, 6))?,
        Graph::generate(&GraphKind::Cycle(6))?,
        Graph::generate(&GraphKind::Cycle(20))?,
        Graph::generate(&GraphKind::Cycle(5))?,
        Graph::generate(&GraphKind::Cycle(21))?,
        Graph::generate(&GraphKind::Path(7))?,
        Graph::generate(&GraphKind::Complete(3))?,
        Graph::generate(&GraphKind::Complete(8))?,
    ];
    for _ in 0..5 {
        let n = r.random_range(3..=25);
        graphs.push(random_tree(&mut r, n)?);
        graphs.push(er_graph(&mut r, (5, 25), (0.3, 0.9))?);
    }
    Ok(run_battery(&graphs.into_iter().map(|g| Instance::new("spectrum", g)).collect::<Vec<_>>()))
}

/// Every battery at seeds derived from `seed`, in a fixed order.
pub fn default_suite(seed: u64) -> Result<Vec<CheckReport>> {
    let batteries: [(u64, fn(u64) -> Result<Vec<CheckReport>>); 18] = [
        (1, kronecker_battery),
        (2, gradient_battery),
        (3, curl_battery),
        (4, monotonicity_battery),
        (5, filter_battery),
        (6, closed_form_battery),
        (7, hfd_battery),
        (8, lfd_battery),
        (9, no_residual_battery),
        (10, heat_battery),
        (11, pde_gcn_battery),
        (12, cgnn_horizon_battery),
        (13, grand_battery),
        (14, harmonic_battery),
        (15, omega_eq_w_battery),
        (16, diag_sharpening_battery),
        (17, spectrum_battery),
        (18, special_cases),
    ];
    let mut out = Vec::new();
    for (offset, battery) in batteries {
        out.extend(battery(seed.wrapping_mul(1000).wrapping_add(offset))?);
    }
    Ok(out)
}

/// Fixed small cases with known answers.
fn special_cases(seed: u64) -> Result<Vec<CheckReport>> {
    let mut r = rng(seed);
    let g = Graph::generate(&GraphKind::Cycle(7))?;
    let f = normal(&mut r, 7, 2);
    let f0 = normal(&mut r, 7, 2);
    let eye = WeightSet::zeros(2).with_w(Array2::eye(2))?.with_omega(Array2::eye(2))?;
    let dir = dirichlet_energy(&g, &f.view())?;
    let kron_dir = kronecker_oracle_energy(&g, &f.view(), &f0.view(), &eye)?;
    let zero_f = kronecker_oracle_energy(&g, &Array2::zeros((7, 2)).view(), &f0.view(), &eye)?;
    let zero_grad = gradient_fd_check(&g, &f.view(), &f0.view(), &WeightSet::zeros(2), FD_STEP)?;

    let k33 = Graph::generate(&GraphKind::CompleteBipartite(3, 3))?;
    let spec = ModelSpec::new(
        Variant::GradientFlowNonlinear,
        WeightSet::zeros(1).with_w(-Array2::eye(1))?,
        0.5,
    )
    .with_sigma(Activation::Relu);
    let mono = monotonicity_detail(&spec, &k33, &normal(&mut r, 6, 1).view(), 20)?;
    let rq = rayleigh_quotient(&g, &f.view())?;
    Ok(vec![
        CheckReport::new("kronecker_identity_weights_dirichlet", (kron_dir - dir).abs() / dir, 1e-10),
        CheckReport::new("kronecker_zero_features", zero_f.abs(), 0.0),
        CheckReport::new("gradient_fd_zero_weights", zero_grad.max_error, 0.0),
        CheckReport::new("monotonicity_large_step_discrete", mono.discrete.max_error, mono.discrete.tolerance),
        CheckReport::new("rayleigh_quotient_range", (-rq).max(rq - 2.0), 0.0),
    ])
}
