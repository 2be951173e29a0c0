//! Energy functionals over node features, their gradients, the
//! attraction/repulsion split of the parametric energy, and channel-mixing
//! weight constructors.
//!
//! Features are `n × d` matrices with one row per node. Every quadratic form
//! is evaluated through `n × d` products; nothing here materializes an
//! `nd × nd` Kronecker matrix.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::graph::{apply_adjacency, apply_laplacian, Graph};
use crate::linalg::{asymmetry, check_square, frob_dot, max_abs, spectral_decomposition, symmetrize};
use crate::scalar::Scalar;

/// Eigenvalues of `W` with magnitude below this go to neither `Θ₊` nor `Θ₋`.
pub const SPLIT_ZERO_TOL: f64 = 1e-12;

/// Channel-mixing parameters of the parametric energy and its flows.
///
/// `W` and `Ω` are symmetrized on the way in; missing pieces are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet<T> {
    w: Array2<T>,
    omega: Array2<T>,
    wtilde: Array2<T>,
    omega_diag: Option<Array1<T>>,
    beta: T,
}

impl<T: Scalar> WeightSet<T> {
    /// All-zero weights on `d` channels.
    pub fn zeros(d: usize) -> Self {
        Self {
            w: Array2::zeros((d, d)),
            omega: Array2::zeros((d, d)),
            wtilde: Array2::zeros((d, d)),
            omega_diag: None,
            beta: T::zero(),
        }
    }

    /// Weights with the given `W` (symmetrized) and everything else zero.
    pub fn from_w(w: Array2<T>) -> Result<Self> {
        let d = check_square(&w.view(), "W")?;
        Self::zeros(d).with_w(w)
    }

    pub fn with_w(mut self, w: Array2<T>) -> Result<Self> {
        self.check_dim(&w.view(), "W")?;
        self.w = symmetrize(&w.view());
        Ok(self)
    }

    pub fn with_omega(mut self, omega: Array2<T>) -> Result<Self> {
        self.check_dim(&omega.view(), "Omega")?;
        self.omega = symmetrize(&omega.view());
        Ok(self)
    }

    pub fn with_wtilde(mut self, wtilde: Array2<T>) -> Result<Self> {
        self.check_dim(&wtilde.view(), "Wtilde")?;
        self.wtilde = wtilde;
        Ok(self)
    }

    pub fn with_omega_diag(mut self, omega: Array1<T>) -> Result<Self> {
        if omega.len() != self.d() {
            return Err(Error::validation(format!(
                "omega_diag has length {}, expected {}",
                omega.len(),
                self.d()
            )));
        }
        self.omega_diag = Some(omega);
        Ok(self)
    }

    pub fn with_beta(mut self, beta: T) -> Self {
        self.beta = beta;
        self
    }

    /// Stores `W` and `Ω` as given, skipping symmetrization. Only useful for
    /// exercising the symmetry checks of the gradient routines.
    pub fn from_raw_unchecked(w: Array2<T>, omega: Array2<T>, wtilde: Array2<T>) -> Self {
        Self {
            w,
            omega,
            wtilde,
            omega_diag: None,
            beta: T::zero(),
        }
    }

    fn check_dim(&self, m: &ArrayView2<T>, what: &str) -> Result<()> {
        let d = check_square(m, what)?;
        if d != self.d() {
            return Err(Error::validation(format!("{what} is {d}x{d}, expected {0}x{0}", self.d())));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.w.nrows()
    }

    pub fn w(&self) -> &Array2<T> {
        &self.w
    }

    pub fn omega(&self) -> &Array2<T> {
        &self.omega
    }

    pub fn wtilde(&self) -> &Array2<T> {
        &self.wtilde
    }

    pub fn omega_diag(&self) -> Option<&Array1<T>> {
        self.omega_diag.as_ref()
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    /// Fails unless `W` and `Ω` are symmetric to `1e-12` (relative to their size).
    pub fn require_symmetric(&self) -> Result<()> {
        for (name, m) in [("W", &self.w), ("Omega", &self.omega)] {
            let scale = T::one().max(max_abs(&m.view()));
            let skew = asymmetry(&m.view());
            if skew > T::tol(1e-12) * scale {
                return Err(Error::validation(format!(
                    "{name} must be symmetric for a gradient flow (max |M - Mᵀ| = {skew})"
                )));
            }
        }
        Ok(())
    }
}

/// How to build a symmetric channel-mixing matrix.
#[derive(Debug, Clone)]
pub enum WeightStyle<T> {
    /// `(W + Wᵀ) / 2`.
    Symmetrize(Array2<T>),
    /// `diag(v)`.
    Diagonal(Array1<T>),
    /// `diag(w) + W⁰` with `w_α = q_α Σ_β |W⁰_αβ| + r_α`; `W⁰` symmetric with zero diagonal.
    DiagonallyDominant {
        w0: Array2<T>,
        q: Array1<T>,
        r: Array1<T>,
    },
}

pub fn make_weights<T: Scalar>(style: &WeightStyle<T>, d: usize) -> Result<Array2<T>> {
    let out = match style {
        WeightStyle::Symmetrize(raw) => {
            if raw.dim() != (d, d) {
                return Err(Error::validation(format!("expected a {d}x{d} matrix")));
            }
            symmetrize(&raw.view())
        }
        WeightStyle::Diagonal(v) => {
            if v.len() != d {
                return Err(Error::validation(format!("expected {d} diagonal entries")));
            }
            Array2::from_diag(v)
        }
        WeightStyle::DiagonallyDominant { w0, q, r } => {
            if w0.dim() != (d, d) || q.len() != d || r.len() != d {
                return Err(Error::validation(format!(
                    "diagonally-dominant weights need a {d}x{d} W0 and length-{d} q, r"
                )));
            }
            if w0.diag().iter().any(|&x| x != T::zero()) {
                return Err(Error::validation("W0 must have a zero diagonal"));
            }
            if asymmetry(&w0.view()) > T::tol(1e-12) * T::one().max(max_abs(&w0.view())) {
                return Err(Error::validation("W0 must be symmetric"));
            }
            let row_mass = w0.map(|x| x.abs()).sum_axis(Axis(1));
            let w: Array1<T> = (0..d).map(|a| q[a] * row_mass[a] + r[a]).collect();
            Array2::from_diag(&w) + w0
        }
    };
    Ok(out)
}

pub(crate) fn check_features<T>(g: &Graph, f: &ArrayView2<T>, what: &str) -> Result<()> {
    if f.nrows() != g.n() {
        return Err(Error::validation(format!(
            "{what} has {} rows but the graph has {} nodes",
            f.nrows(),
            g.n()
        )));
    }
    Ok(())
}

fn check_pair<T>(g: &Graph, f: &ArrayView2<T>, f0: &ArrayView2<T>, d: usize) -> Result<()> {
    check_features(g, f, "F")?;
    check_features(g, f0, "F0")?;
    if f.ncols() != d || f0.ncols() != d {
        return Err(Error::validation(format!(
            "feature width mismatch: F is {}, F0 is {}, weights are {d}",
            f.ncols(),
            f0.ncols()
        )));
    }
    Ok(())
}

/// `½ Σ_{(i,j) ordered} ‖f_j/√d_j − f_i/√d_i‖²`, equal to `trace(Fᵀ Δ F)`.
pub fn dirichlet_energy<T: Scalar>(g: &Graph, f: &ArrayView2<T>) -> Result<T> {
    check_features(g, f, "F")?;
    g.require_no_isolated()?;
    let energy = edge_quadratic(g, f, |row| row.dot(&row));
    debug_assert!({
        let trace = frob_dot(f, &apply_laplacian(g, f).view());
        let scale = T::one().max(frob_dot(f, f));
        (trace - energy).abs() <= T::tol(1e-10) * scale
    });
    Ok(energy)
}

/// `½ Σ_{(i,j) ordered} q((∇F)_ij)` with `(∇F)_ij = f_j/√d_j − f_i/√d_i`.
fn edge_quadratic<T: Scalar>(g: &Graph, f: &ArrayView2<T>, q: impl Fn(ArrayView1<T>) -> T) -> T {
    let inv_sqrt: Vec<T> = g
        .degrees()
        .iter()
        .map(|&d| T::one() / T::lit(d as f64).sqrt())
        .collect();
    let mut total = T::zero();
    for (i, j) in g.ordered_pairs() {
        let diff = &f.row(j) * inv_sqrt[j] - &f.row(i) * inv_sqrt[i];
        total += q(diff.view());
    }
    total * T::lit(0.5)
}

/// `E^Dir(F) / ‖F‖²`.
pub fn rayleigh_quotient<T: Scalar>(g: &Graph, f: &ArrayView2<T>) -> Result<T> {
    let norm2 = frob_dot(f, f);
    if norm2 == T::zero() {
        return Err(Error::validation("Rayleigh quotient of a zero feature matrix"));
    }
    Ok(dirichlet_energy(g, f)? / norm2)
}

/// `⟨vec F, (Ω⊗I − W⊗Ā) vec F⟩ + 2 ⟨F, F0 W̃⟩`.
///
/// The source term pairs `F` with `F0 W̃` so that `−½∇` of this scalar is
/// exactly [`energy_gradient`].
pub fn parametric_energy<T: Scalar>(
    g: &Graph,
    f: &ArrayView2<T>,
    f0: &ArrayView2<T>,
    w: &WeightSet<T>,
) -> Result<T> {
    check_pair(g, f, f0, w.d())?;
    g.require_no_isolated()?;
    let prop = apply_adjacency(g, f);
    let self_term = frob_dot(f, &f.dot(w.omega()).view());
    let edge_term = frob_dot(f, &prop.dot(w.w()).view());
    let source = frob_dot(f, &f0.dot(w.wtilde()).view());
    Ok(self_term - edge_term + T::lit(2.0) * source)
}

/// `E^Dir(Y) + μ ‖Y − Y0‖²`.
pub fn lp_energy<T: Scalar>(g: &Graph, y: &ArrayView2<T>, y0: &ArrayView2<T>, mu: T) -> Result<T> {
    if mu < T::zero() {
        return Err(Error::validation(format!("label propagation needs mu >= 0, got {mu}")));
    }
    check_pair(g, y, y0, y.ncols())?;
    let diff = y - y0;
    Ok(dirichlet_energy(g, y)? + mu * frob_dot(&diff.view(), &diff.view()))
}

/// `−½ ∇_F E_θ = −F Ω + Ā F W − F0 W̃`.
pub fn energy_gradient<T: Scalar>(
    g: &Graph,
    f: &ArrayView2<T>,
    f0: &ArrayView2<T>,
    w: &WeightSet<T>,
) -> Result<Array2<T>> {
    w.require_symmetric()?;
    check_pair(g, f, f0, w.d())?;
    g.require_no_isolated()?;
    Ok(gradient_field(g, f, f0, w))
}

/// The right-hand side `−FΩ + ĀFW − F0W̃` without any symmetry requirement.
pub(crate) fn gradient_field<T: Scalar>(
    g: &Graph,
    f: &ArrayView2<T>,
    f0: &ArrayView2<T>,
    w: &WeightSet<T>,
) -> Array2<T> {
    let mut out = apply_adjacency(g, f).dot(w.w());
    out -= &f.dot(w.omega());
    out -= &f0.dot(w.wtilde());
    out
}

/// Terms of the parametric energy (without source) split by edge interaction sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown<T> {
    /// `Σ_i ⟨f_i, (Ω − W) f_i⟩`.
    pub graph_independent: T,
    /// `½ Σ ‖Θ₊ (∇F)_ij‖²` over ordered edges.
    pub attraction: T,
    /// `½ Σ ‖Θ₋ (∇F)_ij‖²` over ordered edges.
    pub repulsion: T,
    pub total: T,
}

/// Splits `W = Θ₊ᵀΘ₊ − Θ₋ᵀΘ₋` by eigenvalue sign and evaluates each edge term.
pub fn energy_decomposition<T: Scalar>(
    g: &Graph,
    f: &ArrayView2<T>,
    w: &WeightSet<T>,
) -> Result<EnergyBreakdown<T>> {
    if w.wtilde().iter().any(|&x| x != T::zero()) {
        return Err(Error::validation(
            "the attraction/repulsion split is defined for a zero source (Wtilde = 0)",
        ));
    }
    check_features(g, f, "F")?;
    if f.ncols() != w.d() {
        return Err(Error::validation("feature width does not match weights"));
    }
    g.require_no_isolated()?;

    let sp = spectral_decomposition(&w.w().view())?;
    let cut = T::tol(SPLIT_ZERO_TOL);
    let part = |positive: bool| -> Array2<T> {
        // rows √|μ| ψᵀ for the eigenvalues of one sign
        let rows: Vec<usize> = (0..sp.len())
            .filter(|&k| {
                let mu = sp.values[k];
                if positive { mu > cut } else { mu < -cut }
            })
            .collect();
        let mut theta = Array2::zeros((rows.len(), w.d()));
        for (r, &k) in rows.iter().enumerate() {
            let s = sp.values[k].abs().sqrt();
            theta.row_mut(r).assign(&(&sp.vectors.column(k) * s));
        }
        theta
    };
    let theta_plus = part(true);
    let theta_minus = part(false);

    let attraction = edge_quadratic(g, f, |grad| {
        let p = theta_plus.dot(&grad);
        p.dot(&p)
    });
    let repulsion = edge_quadratic(g, f, |grad| {
        let p = theta_minus.dot(&grad);
        p.dot(&p)
    });
    let local = w.omega() - w.w();
    let graph_independent = frob_dot(f, &f.dot(&local).view());
    Ok(EnergyBreakdown {
        graph_independent,
        attraction,
        repulsion,
        total: graph_independent + attraction - repulsion,
    })
}

/// `½ Σ_{(i,j) ordered} ‖W (∇F)_ij‖² = trace(Fᵀ Δ F WᵀW)`.
pub fn weighted_dirichlet_energy<T: Scalar>(
    g: &Graph,
    f: &ArrayView2<T>,
    w: &ArrayView2<T>,
) -> Result<T> {
    check_features(g, f, "F")?;
    g.require_no_isolated()?;
    Ok(edge_quadratic(g, f, |grad| {
        let p = w.dot(&grad);
        p.dot(&p)
    }))
}
