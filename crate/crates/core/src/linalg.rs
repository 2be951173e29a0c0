//! Dense symmetric eigendecomposition and Kronecker/vectorization helpers.
//!
//! The eigensolver is the classical Householder tridiagonalization followed by
//! the implicit QL iteration (EISPACK `tred2`/`tql2`), written against
//! [`Scalar`] so it runs in `f32` and `f64` alike. It is deterministic and
//! single-threaded.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Absolute tolerance under which adjacent sorted eigenvalues are treated as
/// one degenerate level.
pub const TIE_TOL: f64 = 1e-9;

/// Maximum QL sweeps per eigenvalue before giving up.
const MAX_QL_ITER: usize = 64;

/// Ascending eigenvalues and column-orthonormal eigenvectors of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair<T> {
    pub values: Array1<T>,
    pub vectors: Array2<T>,
}

impl<T: Scalar> SpectralPair<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> T {
        self.values[0]
    }

    pub fn max(&self) -> T {
        self.values[self.len() - 1]
    }

    /// Indices of the eigenvalues tied with the smallest one.
    pub fn bottom_block(&self) -> Vec<usize> {
        let lo = self.min();
        let tol = T::tol(TIE_TOL);
        (0..self.len()).take_while(|&i| self.values[i] - lo <= tol).collect()
    }

    /// Indices of the eigenvalues tied with the largest one.
    pub fn top_block(&self) -> Vec<usize> {
        let hi = self.max();
        let tol = T::tol(TIE_TOL);
        let mut idx: Vec<usize> = (0..self.len())
            .rev()
            .take_while(|&i| hi - self.values[i] <= tol)
            .collect();
        idx.reverse();
        idx
    }

    /// Indices whose eigenvalue lies within the tie tolerance of `value`.
    pub fn block_at(&self, value: T) -> Vec<usize> {
        let tol = T::tol(TIE_TOL);
        (0..self.len())
            .filter(|&i| (self.values[i] - value).abs() <= tol)
            .collect()
    }

    /// `Φ diag(values) Φᵀ`.
    pub fn reconstruct(&self) -> Array2<T> {
        let mut scaled = self.vectors.clone();
        for (mut col, &v) in scaled.axis_iter_mut(Axis(1)).zip(self.values.iter()) {
            col.mapv_inplace(|x| x * v);
        }
        scaled.dot(&self.vectors.t())
    }
}

/// Largest absolute entry of `m - mᵀ`.
pub fn asymmetry<T: Scalar>(m: &ArrayView2<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    worst
}

pub fn max_abs<T: Scalar>(m: &ArrayView2<T>) -> T {
    m.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

/// `(m + mᵀ) / 2`.
pub fn symmetrize<T: Scalar>(m: &ArrayView2<T>) -> Array2<T> {
    let half = T::lit(0.5);
    let mut out = m.to_owned();
    out.zip_mut_with(&m.t(), |a, &b| *a = (*a + b) * half);
    out
}

pub(crate) fn check_square<T>(m: &ArrayView2<T>, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::validation(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

fn check_symmetric_input<T: Scalar>(m: &ArrayView2<T>) -> Result<Array2<T>> {
    let n = check_square(m, "matrix")?;
    if n == 0 {
        return Err(Error::validation("cannot decompose an empty matrix"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("matrix has non-finite entries"));
    }
    let scale = T::one().max(max_abs(m));
    let skew = asymmetry(m);
    if skew > T::tol(1e-12) * scale {
        return Err(Error::validation(format!(
            "matrix is not symmetric (max |m - mᵀ| = {skew})"
        )));
    }
    Ok(symmetrize(m))
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are ascending; each eigenvector is flipped so that its entry of
/// largest magnitude is positive (the first such entry when several tie).
pub fn spectral_decomposition<T: Scalar>(m: &ArrayView2<T>) -> Result<SpectralPair<T>> {
    let a = check_symmetric_input(m)?;
    let n = a.nrows();
    let mut v: Vec<T> = a.iter().copied().collect();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(n, &mut v, &mut d, &mut e, true);
    // tql2 rotates columns of V; work on Vᵀ so those columns are contiguous rows.
    let mut vt = transpose_flat(n, &v);
    tql2(n, &mut d, &mut e, Some(&mut vt))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues"));

    let values = Array1::from_iter(order.iter().map(|&i| d[i]));
    let mut vectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        let row = &vt[src * n..(src + 1) * n];
        for k in 0..n {
            vectors[[k, col]] = row[k];
        }
    }
    fix_signs(&mut vectors);
    Ok(SpectralPair { values, vectors })
}

/// Ascending eigenvalues only; skips eigenvector accumulation.
pub fn symmetric_eigenvalues<T: Scalar>(m: &ArrayView2<T>) -> Result<Array1<T>> {
    let a = check_symmetric_input(m)?;
    let n = a.nrows();
    let mut v: Vec<T> = a.iter().copied().collect();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(n, &mut v, &mut d, &mut e, false);
    tql2(n, &mut d, &mut e, None)?;
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(Array1::from_vec(d))
}

fn fix_signs<T: Scalar>(vectors: &mut Array2<T>) {
    for mut col in vectors.axis_iter_mut(Axis(1)) {
        let peak = col.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()));
        if peak == T::zero() {
            continue;
        }
        let cutoff = peak * (T::one() - T::tol(1e-9));
        let lead = col
            .iter()
            .copied()
            .find(|x| x.abs() >= cutoff)
            .expect("peak entry exists");
        if lead < T::zero() {
            col.mapv_inplace(|x| -x);
        }
    }
}

fn transpose_flat<T: Copy>(n: usize, v: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(v[i * n + j]);
        }
    }
    out
}

/// Householder reduction of the row-major symmetric matrix `v` to tridiagonal
/// form. On exit `d` holds the diagonal, `e[1..]` the subdiagonal and, when
/// `vectors` is set, `v` the accumulated orthogonal transformation.
fn tred2<T: Scalar>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T], vectors: bool) {
    let idx = |i: usize, j: usize| i * n + j;
    let zero = T::zero();

    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = zero;
                v[idx(j, i)] = zero;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }

            for j in 0..i {
                f = d[j];
                v[idx(j, i)] = f;
                g = e[j] + v[idx(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[idx(k, j)] * d[k];
                    e[k] += v[idx(k, j)] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[idx(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = zero;
            }
        }
        d[i] = h;
    }

    if vectors {
        for i in 0..n.saturating_sub(1) {
            v[idx(n - 1, i)] = v[idx(i, i)];
            v[idx(i, i)] = T::one();
            let h = d[i + 1];
            if h != zero {
                for k in 0..=i {
                    d[k] = v[idx(k, i + 1)] / h;
                }
                for j in 0..=i {
                    let mut g = zero;
                    for k in 0..=i {
                        g += v[idx(k, i + 1)] * v[idx(k, j)];
                    }
                    for k in 0..=i {
                        v[idx(k, j)] -= g * d[k];
                    }
                }
            }
            for k in 0..=i {
                v[idx(k, i + 1)] = zero;
            }
        }
        for j in 0..n {
            d[j] = v[idx(n - 1, j)];
            v[idx(n - 1, j)] = zero;
        }
        v[idx(n - 1, n - 1)] = T::one();
    } else {
        // Without accumulation the diagonal is read straight off the reduced matrix.
        for j in 0..n {
            d[j] = v[idx(j, j)];
        }
    }
    e[0] = zero;
}

/// Implicit QL on the tridiagonal matrix (`d`, `e`). `vt`, when given, holds the
/// transposed transformation from [`tred2`] and is rotated in place.
fn tql2<T: Scalar>(n: usize, d: &mut [T], e: &mut [T], mut vt: Option<&mut Vec<T>>) -> Result<()> {
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITER {
                    return Err(Error::numeric(format!(
                        "eigensolver failed to converge for eigenvalue {l}"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    if let Some(vt) = vt.as_deref_mut() {
                        let (head, tail) = vt.split_at_mut((i + 1) * n);
                        let row_i = &mut head[i * n..];
                        let row_next = &mut tail[..n];
                        for k in 0..n {
                            let hk = row_next[k];
                            row_next[k] = s * row_i[k] + c * hk;
                            row_i[k] = c * row_i[k] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    Ok(())
}

/// Kronecker product `a ⊗ b`.
pub fn kron<T: Scalar>(a: &ArrayView2<T>, b: &ArrayView2<T>) -> Array2<T> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == T::zero() {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Column-stacking vectorization: `vec(F)[c·n + r] = F[r, c]`.
pub fn vec_cols<T: Scalar>(f: &ArrayView2<T>) -> Array1<T> {
    f.t().iter().copied().collect()
}

/// Inverse of [`vec_cols`] for an `rows × cols` matrix.
pub fn unvec_cols<T: Scalar>(v: &Array1<T>, rows: usize, cols: usize) -> Array2<T> {
    assert_eq!(v.len(), rows * cols, "length mismatch in unvec");
    let mut out = Array2::zeros((rows, cols));
    for c in 0..cols {
        for r in 0..rows {
            out[[r, c]] = v[c * rows + r];
        }
    }
    out
}

/// Frobenius inner product `⟨a, b⟩ = trace(aᵀ b)`.
pub fn frob_dot<T: Scalar>(a: &ArrayView2<T>, b: &ArrayView2<T>) -> T {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

pub fn frob_norm<T: Scalar>(a: &ArrayView2<T>) -> T {
    frob_dot(a, a).sqrt()
}

/// `u vᵀ` for column vectors `u` and `v`.
pub fn outer<T: Scalar>(u: &ndarray::ArrayView1<T>, v: &ndarray::ArrayView1<T>) -> Array2<T> {
    let mut out = Array2::zeros((u.len(), v.len()));
    for (i, &ui) in u.iter().enumerate() {
        for (j, &vj) in v.iter().enumerate() {
            out[[i, j]] = ui * vj;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = Array2::from_shape_fn((n, n), |_| StandardNormal.sample(&mut rng));
        symmetrize(&raw.view())
    }

    fn check_pair(m: &Array2<f64>, sp: &SpectralPair<f64>) {
        let n = m.nrows();
        let gram = sp.vectors.t().dot(&sp.vectors);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-10, "gram[{i},{j}]");
            }
        }
        let resid = &sp.reconstruct() - m;
        assert!(frob_norm(&resid.view()) <= 1e-10 * frob_norm(&m.view()).max(1.0));
        for w in sp.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let sp = spectral_decomposition(&Array2::<f64>::eye(3).view()).unwrap();
        assert_eq!(sp.values.to_vec(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_by_two_laplacian() {
        let m: Array2<f64> = array![[1.0, -1.0], [-1.0, 1.0]];
        let sp = spectral_decomposition(&m.view()).unwrap();
        assert!(sp.values[0].abs() < 1e-14);
        assert!((sp.values[1] - 2.0).abs() < 1e-14);
        let s = 0.5f64.sqrt();
        assert!((sp.vectors[[0, 0]] - s).abs() < 1e-14);
        assert!((sp.vectors[[1, 0]] - s).abs() < 1e-14);
        // (1,-1)/√2: entries tie in magnitude, the first one is made positive
        assert!((sp.vectors[[0, 1]] - s).abs() < 1e-14);
        assert!((sp.vectors[[1, 1]] + s).abs() < 1e-14);
    }

    #[test]
    fn diagonal_input() {
        let m = array![[3.0, 0.0], [0.0, -1.0]];
        let sp = spectral_decomposition(&m.view()).unwrap();
        assert_eq!(sp.values.to_vec(), vec![-1.0, 3.0]);
        assert_eq!(sp.vectors, array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn one_by_one() {
        let sp = spectral_decomposition(&array![[-2.5]].view()).unwrap();
        assert_eq!(sp.values[0], -2.5);
        assert_eq!(sp.vectors[[0, 0]], 1.0);
    }

    #[test]
    fn random_symmetric_round_trip() {
        for (n, seed) in [(2, 1), (5, 2), (17, 3), (40, 4), (90, 5)] {
            let m = random_symmetric(n, seed);
            let sp = spectral_decomposition(&m.view()).unwrap();
            check_pair(&m, &sp);
            let vals = symmetric_eigenvalues(&m.view()).unwrap();
            for (a, b) in vals.iter().zip(sp.values.iter()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn repeated_eigenvalues() {
        let mut m = Array2::<f64>::eye(6) * 2.0;
        m[[0, 0]] = -1.0;
        m[[5, 5]] = -1.0;
        // rotate by a random orthogonal basis to hide the structure
        let q = spectral_decomposition(&random_symmetric(6, 9).view()).unwrap().vectors;
        let hidden = q.dot(&m).dot(&q.t());
        let sp = spectral_decomposition(&hidden.view()).unwrap();
        check_pair(&hidden, &sp);
        assert_eq!(sp.bottom_block(), vec![0, 1]);
        assert_eq!(sp.top_block(), vec![2, 3, 4, 5]);
    }

    #[test]
    fn f32_decomposition() {
        let m = random_symmetric(8, 11).mapv(|x| x as f32);
        let sp = spectral_decomposition(&m.view()).unwrap();
        let resid = &sp.reconstruct() - &m;
        assert!(frob_norm(&resid.view()) < 1e-4);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = array![[0.0, 1.0], [0.0, 0.0]];
        assert!(matches!(
            spectral_decomposition(&m.view()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn kronecker_vec_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_symmetric(4, 1);
        let b = random_symmetric(3, 2);
        let f = Array2::from_shape_fn((4, 3), |_| StandardNormal.sample(&mut rng));
        let lhs = vec_cols(&a.dot(&f).dot(&b.t()).view());
        let rhs = kron(&b.view(), &a.view()).dot(&vec_cols(&f.view()));
        for (x, y) in lhs.iter().zip(rhs.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(unvec_cols(&vec_cols(&f.view()), 4, 3), f);
    }
}
