use ndarray::{Array2, ArrayView2};

use super::{ModelSpec, Variant};
use crate::energy::{check_features, gradient_field, WeightSet};
use crate::error::{Error, Result};
use crate::graph::{apply_adjacency, apply_laplacian, Graph};
use crate::linalg::{asymmetry, check_square, max_abs, spectral_decomposition};
use crate::scalar::Scalar;

/// One explicit Euler step of `spec.variant` from `f`, with `f0` as the
/// source (initial) state.
///
/// Linear variants are plain matrix arithmetic; nothing is normalized. A
/// non-finite result is reported as [`Error::Numeric`]; use
/// [`run_trajectory`](super::run_trajectory) for long horizons.
pub fn step_model<T: Scalar>(
    spec: &ModelSpec<T>,
    g: &Graph,
    f: &ArrayView2<T>,
    f0: &ArrayView2<T>,
) -> Result<Array2<T>> {
    spec.validate()?;
    check_inputs(spec, g, f, f0)?;
    let out = raw_step(spec, g, f, f0);
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric(format!(
            "{} step produced a non-finite value; use run_trajectory, which rescales",
            spec.variant
        )));
    }
    Ok(out)
}

pub(super) fn check_inputs<T: Scalar>(
    spec: &ModelSpec<T>,
    g: &Graph,
    f: &ArrayView2<T>,
    f0: &ArrayView2<T>,
) -> Result<()> {
    check_features(g, f, "F")?;
    check_features(g, f0, "F0")?;
    let d = spec.d();
    if f.ncols() != d || f0.ncols() != d {
        return Err(Error::validation(format!(
            "feature width mismatch: F is {}, F0 is {}, weights are {d}",
            f.ncols(),
            f0.ncols()
        )));
    }
    g.require_no_isolated()
}

/// The update itself, assuming a validated spec and consistent shapes.
pub(super) fn raw_step<T: Scalar>(
    spec: &ModelSpec<T>,
    g: &Graph,
    f: &ArrayView2<T>,
    src: &ArrayView2<T>,
) -> Array2<T> {
    let tau = spec.tau;
    let w = &spec.weights;
    let euler = |rhs: Array2<T>| &rhs * tau + f;
    let activated = |rhs: Array2<T>| &spec.sigma.apply_all(&rhs) * tau + f;
    match spec.variant {
        Variant::GradientFlow => euler(gradient_field(g, f, src, w)),
        Variant::GradientFlowNonlinear => activated(gradient_field(g, f, src, w)),
        Variant::NoResidual => apply_adjacency(g, f).dot(w.w()) * tau,
        Variant::Graff => euler(graff_field(g, f, src, w)),
        Variant::GraffNonlinear => activated(graff_field(g, f, src, w)),
        Variant::Heat => euler(-apply_laplacian(g, f)),
        Variant::LabelPropagation => {
            let mut rhs = apply_laplacian(g, f);
            rhs.scaled_add(spec.mu, f);
            rhs.scaled_add(-spec.mu, src);
            euler(-rhs)
        }
        Variant::Cgnn => {
            let ot = spec.omega_tilde.as_ref().expect("validated");
            let mut rhs = f.dot(ot) - apply_laplacian(g, f);
            rhs.scaled_add(w.beta(), src);
            euler(rhs)
        }
        Variant::GrandLinear => euler(-apply_rw_self_loop_laplacian(g, f)),
        Variant::PdeGcnD => {
            euler(-apply_laplacian(g, f).dot(spec.ktk.as_ref().expect("validated")))
        }
        Variant::Harmonic => euler(-apply_laplacian(g, f).dot(&w.w().t().dot(w.w()))),
        Variant::LaplacianOmegaEqW => euler(-apply_laplacian(g, f).dot(w.w())),
        Variant::DiagNonlinear => {
            let omega = w.omega_diag().expect("validated");
            let mut rhs = -apply_laplacian(g, f);
            for (mut col, &om) in rhs.columns_mut().into_iter().zip(omega.iter()) {
                col *= om;
            }
            activated(rhs)
        }
    }
}

/// `−F diag(ω) + ĀFW − βF0`.
fn graff_field<T: Scalar>(
    g: &Graph,
    f: &ArrayView2<T>,
    src: &ArrayView2<T>,
    w: &WeightSet<T>,
) -> Array2<T> {
    let omega = w.omega_diag().expect("validated");
    let mut rhs = apply_adjacency(g, f).dot(w.w());
    for ((mut out, fc), &om) in rhs.columns_mut().into_iter().zip(f.columns()).zip(omega.iter()) {
        out.scaled_add(-om, &fc);
    }
    rhs.scaled_add(-w.beta(), src);
    rhs
}

/// `(I − D̃⁻¹Ã) F` with `Ã = A + I`, computed from the edge list.
fn apply_rw_self_loop_laplacian<T: Scalar>(g: &Graph, f: &ArrayView2<T>) -> Array2<T> {
    let mut walk = f.to_owned();
    for &(u, v) in g.edges() {
        walk.row_mut(u).scaled_add(T::one(), &f.row(v));
        walk.row_mut(v).scaled_add(T::one(), &f.row(u));
    }
    for (mut row, &d) in walk.rows_mut().into_iter().zip(g.degrees()) {
        row /= T::lit(d as f64 + 1.0);
    }
    f - &walk
}

/// `F + τĀFW` evaluated channel by channel in the eigenbasis of `W`:
/// `Z = FΨ`, `z_r ← z_r + τμ_r Ā z_r`, then `F = ZΨᵀ`.
pub fn spectral_filter_step<T: Scalar>(
    g: &Graph,
    w: &ArrayView2<T>,
    f: &ArrayView2<T>,
    tau: T,
) -> Result<Array2<T>> {
    let d = check_square(w, "W")?;
    if asymmetry(w) > T::tol(1e-12) * T::one().max(max_abs(w)) {
        return Err(Error::validation("W must be symmetric for the spectral filter view"));
    }
    check_features(g, f, "F")?;
    if f.ncols() != d {
        return Err(Error::validation("feature width does not match W"));
    }
    g.require_no_isolated()?;
    let sp = spectral_decomposition(w)?;
    let z = f.dot(&sp.vectors);
    let mut filtered = apply_adjacency(g, &z.view());
    for (mut col, &mu) in filtered.columns_mut().into_iter().zip(sp.values.iter()) {
        col *= tau * mu;
    }
    filtered += &z;
    Ok(filtered.dot(&sp.vectors.t()))
}
