//! Config-driven runs: trajectory CSV, Rayleigh-quotient plot and a text report.

use std::fmt::Write as _;

use gel_core::verify::monotonicity_check;
use gel_core::{
    asymptotic_profile, classify_regime, normalized_laplacian, run_trajectory, spectral_decomposition,
    Activation, Error, Graph, Mat, Model, Regime, RegimeReport, Traj, Variant, Weights,
};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{parse_matrix_file, ConfigCheck, ExperimentConfig, GraphSource, InitSpec};
use crate::error::{read, write, CliError, Result};
use crate::plot::{LinePlot, Reference, Series};

pub const CSV_HEADER: &str = "step,time,rayleigh_quotient,dirichlet_direction,parametric_energy_direction,log_scale";

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub trajectory: Traj,
    pub regime: Option<RegimeReport<f64>>,
    pub lambda_max: f64,
    pub report: String,
    /// Every configured check passed.
    pub checks_passed: bool,
}

pub fn load_graph(src: &GraphSource) -> Result<Graph> {
    Ok(match src {
        GraphSource::Generator(kind) => Graph::generate(kind)?,
        GraphSource::File(path) => Graph::from_edge_list(&read(path)?)?,
    })
}

fn square(m: &Option<Mat>, d: usize, what: &str) -> Result<Mat> {
    match m {
        Some(m) if m.dim() != (d, d) => Err(Error::Validation(format!(
            "{what} is {}x{}, expected {d}x{d}",
            m.nrows(),
            m.ncols()
        ))
        .into()),
        Some(m) => Ok(m.clone()),
        None => Ok(Array2::zeros((d, d))),
    }
}

/// The model described by `cfg`. Weight matrices are taken as given; the
/// variants that need symmetric weights reject asymmetric ones.
pub fn build_spec(cfg: &ExperimentConfig) -> Result<Model> {
    let d = cfg.d;
    let mut weights = Weights::from_raw_unchecked(
        square(&cfg.w, d, "W")?,
        square(&cfg.omega, d, "Omega")?,
        square(&cfg.wtilde, d, "Wtilde")?,
    )
    .with_beta(cfg.beta);
    if let Some(om) = &cfg.omega_diag {
        weights = weights.with_omega_diag(om.clone())?;
    }
    let sigma: Activation<f64> = cfg.sigma.parse()?;
    let mut spec = Model::new(cfg.variant, weights, cfg.tau).with_sigma(sigma).with_mu(cfg.mu);
    if cfg.ktk.is_some() {
        spec = spec.with_ktk(square(&cfg.ktk, d, "KtK")?);
    }
    if cfg.omega_tilde.is_some() {
        spec = spec.with_omega_tilde(square(&cfg.omega_tilde, d, "OmegaTilde")?);
    }
    spec.validate()?;
    Ok(spec)
}

pub fn initial_features(init: &InitSpec, n: usize, d: usize) -> Result<Mat> {
    match init {
        InitSpec::RandomNormal(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok(Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng)))
        }
        InitSpec::OneHot(node) => {
            if *node >= n {
                return Err(Error::Validation(format!("one_hot node {node} out of range for {n} nodes")).into());
            }
            let mut f = Array2::zeros((n, d));
            f.row_mut(*node).fill(1.0);
            Ok(f)
        }
        InitSpec::File(path) => {
            let f = parse_matrix_file(&read(path)?).map_err(|msg| CliError::Config {
                path: path.display().to_string(),
                line: 0,
                key: "init".into(),
                msg,
            })?;
            if f.dim() != (n, d) {
                return Err(Error::Validation(format!(
                    "initial features are {}x{}, expected {n}x{d}",
                    f.nrows(),
                    f.ncols()
                ))
                .into());
            }
            Ok(f)
        }
    }
}

/// One row per record, 17 significant digits.
pub fn trajectory_csv(traj: &Traj) -> String {
    let mut out = String::with_capacity(96 * (traj.records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &traj.records {
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.step, r.time, r.rayleigh_quotient, r.dirichlet_direction, r.parametric_energy_direction, r.log_scale
        );
    }
    out
}

pub fn rq_series<'a>(label: &'a str, traj: &Traj) -> Series<'a> {
    Series {
        label,
        points: traj.records.iter().map(|r| (r.step as f64, r.rayleigh_quotient)).collect(),
    }
}

/// Largest normalized-Laplacian eigenvalue, exactly 2 on bipartite graphs.
pub fn lambda_max(g: &Graph) -> Result<f64> {
    if g.checks().bipartite {
        return Ok(2.0);
    }
    let lap = normalized_laplacian::<f64>(g)?;
    Ok(spectral_decomposition(&lap.view())?.max())
}

fn sign_free_error(a: &Mat, b: &Mat) -> f64 {
    let plus = (a - b).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let minus = (a + b).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    plus.min(minus)
}

/// Errors that mean "no statement applies" rather than a failed run.
fn is_note(e: &Error) -> bool {
    matches!(
        e,
        Error::Hypothesis(_) | Error::NoPrediction(_) | Error::DegenerateInput(_) | Error::State(_)
    )
}

fn regime_section(out: &mut String, cfg: &ExperimentConfig, g: &Graph, spec: &Model) -> Result<Option<RegimeReport<f64>>> {
    let _ = writeln!(out, "\n[regime]");
    let w = spec.weights.w();
    let classify = |out: &mut String| -> Result<Option<RegimeReport<f64>>> {
        match classify_regime(g, &w.view(), cfg.tau) {
            Ok(r) => {
                let _ = writeln!(out, "{r}");
                if r.regime == Regime::StepSizeViolated {
                    let _ = writeln!(out, "note: step-size condition violated; no regime claim");
                }
                Ok(Some(r))
            }
            Err(e) if matches!(e, Error::Validation(_)) => {
                let _ = writeln!(out, "not classified: {e}");
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    };
    match cfg.variant {
        Variant::GradientFlow | Variant::GradientFlowNonlinear => {
            let zero = |m: &Mat| m.iter().all(|&x| x == 0.0);
            if !zero(spec.weights.omega()) || !zero(spec.weights.wtilde()) || cfg.variant.is_nonlinear() {
                let _ = writeln!(out, "note: classification of the simplified linear flow F + tau*A*F*W");
            }
            classify(out)
        }
        Variant::NoResidual => {
            if g.checks().bipartite {
                let _ = writeln!(
                    out,
                    "hypothesis violated: the graph is bipartite; the residual-free flow is only \
                     guaranteed low-frequency dominant on non-bipartite graphs, so no regime is claimed"
                );
            } else {
                let _ = writeln!(
                    out,
                    "regime: LFD (residual-free flow on a non-bipartite graph: every W yields \
                     low-frequency dominance)"
                );
            }
            let _ = writeln!(out, "\nsame W under the residual gradient flow:");
            classify(out)?;
            Ok(None)
        }
        other => {
            let _ = writeln!(out, "not applicable to variant {other}");
            Ok(None)
        }
    }
}

fn profile_section(out: &mut String, g: &Graph, spec: &Model, f0: &Mat, traj: &Traj) -> Result<()> {
    let _ = writeln!(out, "\n[profile]");
    let supported = matches!(
        spec.variant,
        Variant::GradientFlow | Variant::NoResidual | Variant::Heat | Variant::GrandLinear | Variant::Harmonic
    );
    if !supported {
        let _ = writeln!(out, "no closed-form profile for variant {}", spec.variant);
        return Ok(());
    }
    let profile = match asymptotic_profile(g, spec, &f0.view()) {
        Ok(p) => p,
        Err(e) if is_note(&e) => {
            let _ = writeln!(out, "no prediction: {e}");
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    let recs = &traj.records;
    let measured = recs[recs.len() - 1].log_scale - recs[recs.len() - 2].log_scale;
    if let Some(r) = profile.regime {
        let _ = writeln!(out, "predicted_regime: {r}");
    }
    let _ = writeln!(out, "direction_error: {:e}", sign_free_error(&traj.terminal.direction, &profile.direction));
    let _ = writeln!(out, "predicted_log_growth: {:?}", profile.growth.ln());
    let _ = writeln!(out, "measured_log_growth: {measured:?}");
    if let Some(limit) = &profile.limit {
        let err = (&traj.terminal.features() - limit).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let _ = writeln!(out, "limit_error: {err:e}");
    }
    Ok(())
}

/// Runs the configured experiment and writes whichever outputs are configured.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let g = load_graph(&cfg.graph)?;
    let spec = build_spec(cfg)?;
    let f0 = initial_features(&cfg.init, g.n(), cfg.d)?;

    let mut check_lines = Vec::new();
    let mut checks_passed = true;
    for check in &cfg.checks {
        match check {
            ConfigCheck::Monotonicity => {
                let r = monotonicity_check(&spec, &g, &f0.view(), cfg.steps)?;
                checks_passed &= r.passed;
                check_lines.push(r.to_string());
            }
        }
    }

    let traj = run_trajectory(&spec, &g, &f0.view(), cfg.steps)?;
    let checks = g.checks();
    let mut report = String::new();
    let _ = writeln!(report, "gel experiment report");
    let graph_desc = match &cfg.graph {
        GraphSource::Generator(kind) => kind.to_string(),
        GraphSource::File(p) => p.display().to_string(),
    };
    let _ = writeln!(report, "graph: {graph_desc}");
    let _ = writeln!(
        report,
        "nodes: {}  edges: {}  connected: {}  bipartite: {}",
        g.n(),
        g.num_edges(),
        checks.connected,
        checks.bipartite
    );
    let _ = writeln!(report, "variant: {}  sigma: {}", cfg.variant, spec.sigma.name());
    let _ = writeln!(report, "tau: {}  steps: {}  d: {}", cfg.tau, cfg.steps, cfg.d);
    let init = match &cfg.init {
        InitSpec::RandomNormal(s) => format!("random_normal({s})"),
        InitSpec::OneHot(i) => format!("one_hot({i})"),
        InitSpec::File(p) => format!("file({})", p.display()),
    };
    let _ = writeln!(report, "init: {init}");

    let regime = if checks.connected {
        regime_section(&mut report, cfg, &g, &spec)?
    } else {
        let _ = writeln!(report, "\n[regime]\nnot classified: graph is disconnected");
        None
    };
    let lmax = match &regime {
        Some(r) => r.lambda_max,
        None => lambda_max(&g)?,
    };
    if checks.connected {
        profile_section(&mut report, &g, &spec, &f0, &traj)?;
    }

    let last = traj.last();
    let _ = writeln!(report, "\n[terminal]");
    let _ = writeln!(report, "lambda_max: {lmax:?}");
    let _ = writeln!(report, "rayleigh_quotient: {:?}", last.rayleigh_quotient);
    let _ = writeln!(report, "dirichlet_direction: {:?}", last.dirichlet_direction);
    let _ = writeln!(report, "log_scale: {:?}", last.log_scale);

    if !check_lines.is_empty() {
        let _ = writeln!(report, "\n[checks]");
        for line in &check_lines {
            let _ = writeln!(report, "{line}");
        }
    }

    if let Some(p) = &cfg.outputs.csv {
        write(p, &trajectory_csv(&traj))?;
    }
    if let Some(p) = &cfg.outputs.svg {
        let title = format!("{} on {graph_desc}", cfg.variant);
        let plot = LinePlot {
            title: &title,
            x_label: "step",
            y_label: "Rayleigh quotient",
            series: vec![rq_series(cfg.variant.name(), &traj)],
            reference: Some(Reference { label: "lambda_max", y: lmax }),
        };
        write(p, &plot.to_svg())?;
    }
    if let Some(p) = &cfg.outputs.report {
        write(p, &report)?;
    }
    Ok(ExperimentOutcome {
        trajectory: traj,
        regime,
        lambda_max: lmax,
        report,
        checks_passed,
    })
}
