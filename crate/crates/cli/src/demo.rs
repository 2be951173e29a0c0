//! Gradient flow against heat diffusion on a complete bipartite graph.
//!
//! With a repulsive channel the gradient flow sharpens towards the top
//! Laplacian eigenvector, which on `K_{a,b}` is constant in magnitude on each
//! part with opposite signs, while heat diffusion flattens to the kernel.
//! The graph size and initialization are free choices here, so this is a
//! qualitative reproduction of the behaviour, not of specific numbers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gel_core::{classify_regime, run_trajectory, Error, Graph, GraphKind, Model, Regime, Traj, Variant, Weights};
use ndarray::Array2;

use crate::config::InitSpec;
use crate::error::{write, Result};
use crate::experiment::{initial_features, rq_series, trajectory_csv};
use crate::plot::{LinePlot, Reference};

/// Tolerance of the Rayleigh-quotient clauses.
pub const DEMO_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct DemoParams {
    pub a: usize,
    pub b: usize,
    pub tau: f64,
    pub steps: usize,
    pub seed: u64,
    /// The single channel weight of the gradient flow.
    pub w: f64,
}

impl DemoParams {
    pub fn new(a: usize, b: usize, tau: f64, steps: usize, seed: u64) -> Self {
        Self { a, b, tau, steps, seed, w: -1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub gradient_flow: Traj,
    pub heat: Traj,
    pub regime: Regime,
    pub report: String,
    pub svg: String,
    /// Failed clauses, empty when every asserted clause holds.
    pub failures: Vec<String>,
}

impl DemoOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Writes `report.txt`, `rayleigh.svg`, `gradient_flow.csv` and `heat.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let files = [
            ("report.txt", self.report.clone()),
            ("rayleigh.svg", self.svg.clone()),
            ("gradient_flow.csv", trajectory_csv(&self.gradient_flow)),
            ("heat.csv", trajectory_csv(&self.heat)),
        ];
        let mut out = Vec::new();
        for (name, body) in files {
            let p = dir.join(name);
            write(&p, &body)?;
            out.push(p);
        }
        Ok(out)
    }
}

/// Sign of every entry of part `A` opposite to every entry of part `B`,
/// with no zero entries.
fn separates(direction: &Array2<f64>, a: usize) -> bool {
    let col = direction.column(0);
    let s = col[0].signum();
    col[0] != 0.0
        && col.iter().take(a).all(|&x| x != 0.0 && x.signum() == s)
        && col.iter().skip(a).all(|&x| x != 0.0 && x.signum() == -s)
}

fn clause(report: &mut String, failures: &mut Vec<String>, name: &str, ok: bool, detail: String) {
    let _ = writeln!(report, "{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    if !ok {
        failures.push(format!("{name}: {detail}"));
    }
}

pub fn preset_bipartite_demo(p: &DemoParams) -> Result<DemoOutcome> {
    if p.a < 2 || p.b < 2 {
        return Err(Error::Validation(format!("the demo needs a, b >= 2, got ({}, {})", p.a, p.b)).into());
    }
    let g = Graph::generate(&GraphKind::CompleteBipartite(p.a, p.b))?;
    let f0 = initial_features(&InitSpec::RandomNormal(p.seed), g.n(), 1)?;
    let w = Array2::from_elem((1, 1), p.w);
    let gf_spec = Model::gradient_flow(w.clone(), p.tau)?;
    let heat_spec = Model::new(Variant::Heat, Weights::zeros(1), p.tau);
    let regime = classify_regime(&g, &w.view(), p.tau)?;
    let gf = run_trajectory(&gf_spec, &g, &f0.view(), p.steps)?;
    let heat = run_trajectory(&heat_spec, &g, &f0.view(), p.steps)?;

    let mut report = String::new();
    let mut failures = Vec::new();
    let _ = writeln!(report, "gel bipartite demo");
    let _ = writeln!(
        report,
        "graph: complete_bipartite({},{})  tau: {}  steps: {}  seed: {}  W: [[{}]]",
        p.a, p.b, p.tau, p.steps, p.seed, p.w
    );
    let _ = writeln!(report, "\n[regime]\n{regime}");

    let gf_rq = gf.last().rayleigh_quotient;
    let heat_rq = heat.last().rayleigh_quotient;
    let _ = writeln!(report, "\n[assertions]");
    if regime.regime == Regime::Hfd {
        clause(
            &mut report,
            &mut failures,
            "(i) gradient-flow RQ -> 2",
            (gf_rq - 2.0).abs() <= DEMO_TOL,
            format!("rayleigh_quotient = {gf_rq:?}, |RQ - 2| = {:e}", (gf_rq - 2.0).abs()),
        );
    } else {
        let _ = writeln!(
            report,
            "SKIP (i) gradient-flow RQ -> 2: regime is {}, the high-frequency condition does not hold",
            regime.regime
        );
    }
    clause(&mut report, &mut failures, "(ii) heat RQ -> 0", heat_rq <= DEMO_TOL, format!("rayleigh_quotient = {heat_rq:e}"));
    if regime.regime == Regime::Hfd {
        let ok = separates(&gf.terminal.direction, p.a);
        clause(
            &mut report,
            &mut failures,
            "(iii) sign separation of the parts",
            ok,
            if ok {
                "terminal direction has one sign on each part, opposite across parts".to_string()
            } else {
                "terminal direction does not split the parts by sign".to_string()
            },
        );
    } else {
        let _ = writeln!(report, "SKIP (iii) sign separation of the parts: no high-frequency regime");
    }
    let _ = writeln!(report, "\n[terminal direction, gradient flow]");
    for (i, x) in gf.terminal.direction.column(0).iter().enumerate() {
        let part = if i < p.a { "A" } else { "B" };
        let _ = writeln!(report, "{i} {part} {x:.6e}");
    }

    let title = format!("complete_bipartite({},{}): gradient flow vs heat", p.a, p.b);
    let gf_label = format!("gradient flow, W = [[{}]]", p.w);
    let plot = LinePlot {
        title: &title,
        x_label: "step",
        y_label: "Rayleigh quotient",
        series: vec![rq_series(&gf_label, &gf), rq_series("heat", &heat)],
        reference: Some(Reference { label: "lambda_max = 2", y: 2.0 }),
    };
    Ok(DemoOutcome {
        gradient_flow: gf,
        heat,
        regime: regime.regime,
        report,
        svg: plot.to_svg(),
        failures,
    })
}
