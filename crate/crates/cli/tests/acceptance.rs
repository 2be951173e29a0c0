//! The twelve acceptance criteria, one line each. Exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use gel_cli::demo::{preset_bipartite_demo, DemoParams};
use gel_core::verify::{
    cgnn_horizon_battery, closed_form_battery, curl_battery, diag_sharpening_battery, gradient_battery,
    grand_battery, grand_irregular_info, harmonic_battery, hfd_battery, lfd_battery, monotonicity_battery,
    no_residual_battery, omega_eq_w_battery, pde_gcn_battery,
};
use gel_core::{CheckReport, Result};

const SEED: u64 = 20;

struct Outcome {
    passed: bool,
    detail: String,
}

/// Every report passes and the expected measures are all present.
fn judge(reports: &[CheckReport], names: &[&str]) -> Outcome {
    let mut missing = Vec::new();
    let mut failed = Vec::new();
    let mut parts = Vec::new();
    for name in names {
        match reports.iter().find(|r| r.name == *name) {
            None => missing.push(*name),
            Some(r) => {
                if !r.passed {
                    failed.push(*name);
                }
                parts.push(format!("{name} {:.1e}/{:.0e}", r.max_error, r.tolerance));
            }
        }
    }
    let stray: Vec<_> = reports.iter().filter(|r| !r.passed && !names.contains(&r.name.as_str())).collect();
    let mut detail = parts.join(", ");
    if !missing.is_empty() {
        detail += &format!("; missing {missing:?}");
    }
    if !failed.is_empty() {
        detail += &format!("; failed {failed:?}");
    }
    for r in &stray {
        detail += &format!("; failed {}", r.name);
    }
    Outcome { passed: missing.is_empty() && failed.is_empty() && stray.is_empty(), detail }
}

fn timed(limit: Option<Duration>, body: impl FnOnce() -> Result<Outcome>) -> Outcome {
    let start = Instant::now();
    let mut out = match body() {
        Ok(o) => o,
        Err(e) => Outcome { passed: false, detail: format!("error: {e}") },
    };
    let elapsed = start.elapsed();
    out.detail += &format!(" [{:.2}s", elapsed.as_secs_f64());
    if let Some(limit) = limit {
        out.detail += &format!(" < {}s", limit.as_secs());
        if elapsed >= limit {
            out.passed = false;
            out.detail += " exceeded";
        }
    }
    out.detail += "]";
    out
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn main() -> ExitCode {
    let mut hfd_reports = Vec::new();
    let criteria: Vec<(&str, Outcome)> = vec![
        (
            "closed-form equivalence",
            timed(secs(10), || {
                Ok(judge(&closed_form_battery(SEED + 1)?, &["closed_form_direction", "closed_form_log_scale"]))
            }),
        ),
        (
            "HFD realization",
            timed(secs(20), || {
                hfd_reports = hfd_battery(SEED + 2)?;
                let core: Vec<_> = hfd_reports.iter().filter(|r| r.name != "hfd_rate").cloned().collect();
                Ok(judge(&core, &["hfd_rayleigh_quotient", "hfd_direction", "hfd_growth"]))
            }),
        ),
        (
            "LFD realization",
            timed(None, || {
                Ok(judge(&lfd_battery(SEED + 3)?, &["lfd_rayleigh_quotient", "lfd_direction", "lfd_growth"]))
            }),
        ),
        (
            "rate certification",
            timed(None, || {
                let rate: Vec<_> = hfd_reports.iter().filter(|r| r.name == "hfd_rate").cloned().collect();
                Ok(judge(&rate, &["hfd_rate"]))
            }),
        ),
        (
            "residual-free flow",
            timed(None, || {
                Ok(judge(
                    &no_residual_battery(SEED + 5)?,
                    &["no_residual_rayleigh_quotient", "no_residual_gradient_flow_hfd"],
                ))
            }),
        ),
        (
            "gradient-flow identity",
            timed(None, || {
                let mut r = gradient_battery(SEED + 6)?;
                r.extend(curl_battery(SEED + 6)?);
                Ok(judge(&r, &["gradient_fd", "curl_symmetric", "curl_asymmetric"]))
            }),
        ),
        (
            "nonlinear monotonicity",
            timed(secs(30), || {
                Ok(judge(&monotonicity_battery(SEED + 7)?, &["monotonicity_discrete", "monotonicity_proxy"]))
            }),
        ),
        (
            "comparison models",
            timed(None, || {
                let mut r = pde_gcn_battery(SEED + 8)?;
                r.extend(cgnn_horizon_battery(SEED + 8)?);
                r.extend(grand_battery(SEED + 8)?);
                let (arith, weighted) = grand_irregular_info(SEED + 8)?;
                let mut o = judge(
                    &r,
                    &[
                        "pde_gcn_dirichlet",
                        "cgnn_horizon_rayleigh_quotient",
                        "grand_arithmetic_mean",
                        "grand_degree_weighted_mean",
                    ],
                );
                o.detail += &format!(
                    "; info: on an irregular path the limit misses the arithmetic mean by {arith:.1e} \
                     and the degree-weighted mean by {weighted:.1e}"
                );
                Ok(o)
            }),
        ),
        (
            "harmonic-flow limit",
            timed(None, || {
                Ok(judge(&harmonic_battery(SEED + 9)?, &["harmonic_full_rank_limit", "harmonic_singular_limit"]))
            }),
        ),
        (
            "Omega = W conservation",
            timed(None, || {
                Ok(judge(&omega_eq_w_battery(SEED + 10)?, &["omega_eq_w_conservation", "omega_eq_w_hfd"]))
            }),
        ),
        (
            "bipartite demo",
            timed(secs(5), || {
                let out = preset_bipartite_demo(&DemoParams::new(5, 5, 0.5, 80, 1))
                    .map_err(|e| gel_core::Error::State(e.to_string()))?;
                let asserted = out.report.lines().filter(|l| l.starts_with("PASS (")).count();
                Ok(Outcome {
                    passed: out.passed() && asserted == 3,
                    detail: if out.passed() {
                        format!("{asserted} of 3 clauses asserted and passed")
                    } else {
                        out.failures.join("; ")
                    },
                })
            }),
        ),
        (
            "diagonal nonlinear sharpening",
            timed(None, || Ok(judge(&diag_sharpening_battery(SEED + 12)?, &["diag_sharpening"]))),
        ),
    ];

    let mut failures = 0;
    for (k, (name, o)) in criteria.iter().enumerate() {
        println!("{} criterion {:>2}: {name}: {}", if o.passed { "PASS" } else { "FAIL" }, k + 1, o.detail);
        failures += usize::from(!o.passed);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
