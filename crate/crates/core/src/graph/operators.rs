use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView2};

use super::Graph;
use crate::error::Result;
use crate::linalg::{spectral_decomposition, SpectralPair};
use crate::scalar::Scalar;

/// `D^{-1/2} A D^{-1/2}`.
pub fn normalized_adjacency<T: Scalar>(g: &Graph) -> Result<Array2<T>> {
    g.require_no_isolated()?;
    let inv_sqrt: Vec<T> = g
        .degrees()
        .iter()
        .map(|&d| T::one() / T::lit(d as f64).sqrt())
        .collect();
    let mut a = Array2::zeros((g.n(), g.n()));
    for &(u, v) in g.edges() {
        let w = inv_sqrt[u] * inv_sqrt[v];
        a[[u, v]] = w;
        a[[v, u]] = w;
    }
    Ok(a)
}

/// `Ā F` computed edge by edge, without forming `Ā`.
pub fn apply_adjacency<T: Scalar>(g: &Graph, f: &ArrayView2<T>) -> Array2<T> {
    let inv_sqrt: Vec<T> = g
        .degrees()
        .iter()
        .map(|&d| T::one() / T::lit(d as f64).sqrt())
        .collect();
    let mut out = Array2::zeros(f.raw_dim());
    for &(u, v) in g.edges() {
        let w = inv_sqrt[u] * inv_sqrt[v];
        out.row_mut(u).scaled_add(w, &f.row(v));
        out.row_mut(v).scaled_add(w, &f.row(u));
    }
    out
}

/// `Δ F = F − Ā F`.
pub fn apply_laplacian<T: Scalar>(g: &Graph, f: &ArrayView2<T>) -> Array2<T> {
    &f.view() - &apply_adjacency(g, f)
}

/// `Δ = I − D^{-1/2} A D^{-1/2}`.
pub fn normalized_laplacian<T: Scalar>(g: &Graph) -> Result<Array2<T>> {
    let a = normalized_adjacency::<T>(g)?;
    Ok(Array2::eye(g.n()) - a)
}

/// `I − D̃⁻¹ Ã` with `Ã = A + I`, the random-walk Laplacian of the
/// self-loop-augmented graph.
pub fn random_walk_laplacian_with_self_loops<T: Scalar>(g: &Graph) -> Array2<T> {
    let n = g.n();
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        p[[i, i]] = T::one() / T::lit(g.degrees()[i] as f64 + 1.0);
    }
    for &(u, v) in g.edges() {
        p[[u, v]] = T::one() / T::lit(g.degrees()[u] as f64 + 1.0);
        p[[v, u]] = T::one() / T::lit(g.degrees()[v] as f64 + 1.0);
    }
    Array2::eye(n) - p
}

/// The unit kernel vector of `Δ`: entries `√(d_i / 2|E|)`.
pub fn sqrt_degree_profile<T: Scalar>(g: &Graph) -> Array1<T> {
    let two_e = T::lit(2.0 * g.num_edges() as f64);
    g.degrees()
        .iter()
        .map(|&d| (T::lit(d as f64) / two_e).sqrt())
        .collect()
}

/// Dense operators of one graph, with the Laplacian spectrum computed on demand.
#[derive(Debug)]
pub struct Operators<T> {
    graph: Graph,
    adjacency: Array2<T>,
    laplacian: Array2<T>,
    spectrum: OnceLock<SpectralPair<T>>,
    rw_laplacian: OnceLock<Array2<T>>,
}

impl<T: Scalar> Operators<T> {
    pub fn new(g: &Graph) -> Result<Self> {
        let adjacency = normalized_adjacency(g)?;
        let laplacian = Array2::eye(g.n()) - &adjacency;
        Ok(Self {
            graph: g.clone(),
            adjacency,
            laplacian,
            spectrum: OnceLock::new(),
            rw_laplacian: OnceLock::new(),
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn adjacency(&self) -> &Array2<T> {
        &self.adjacency
    }

    pub fn laplacian(&self) -> &Array2<T> {
        &self.laplacian
    }

    pub fn rw_laplacian(&self) -> &Array2<T> {
        self.rw_laplacian
            .get_or_init(|| random_walk_laplacian_with_self_loops(&self.graph))
    }

    /// Eigendecomposition of `Δ`; the kernel vector is replaced by the exact
    /// degree profile so downstream projections do not inherit solver noise.
    pub fn spectrum(&self) -> Result<&SpectralPair<T>> {
        if let Some(sp) = self.spectrum.get() {
            return Ok(sp);
        }
        let mut sp = spectral_decomposition(&self.laplacian.view())?;
        if self.graph.checks().connected {
            let phi0 = sqrt_degree_profile::<T>(&self.graph);
            sp.values[0] = T::zero();
            sp.vectors.column_mut(0).assign(&phi0);
        }
        Ok(self.spectrum.get_or_init(|| sp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphKind;
    use ndarray::array;

    fn close(a: &Array2<f64>, b: &Array2<f64>, tol: f64) -> bool {
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn k2_adjacency() {
        let g = Graph::from_edge_list("0 1").unwrap();
        let a: Array2<f64> = normalized_adjacency(&g).unwrap();
        assert_eq!(a, array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn triangle_adjacency_is_half() {
        let g = Graph::generate(&GraphKind::Cycle(3)).unwrap();
        let a: Array2<f64> = normalized_adjacency(&g).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.0 } else { 0.5 };
                assert!((a[[i, j]] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn k22_adjacency() {
        let g = Graph::generate(&GraphKind::CompleteBipartite(2, 2)).unwrap();
        let a: Array2<f64> = normalized_adjacency(&g).unwrap();
        let want = array![
            [0.0, 0.0, 0.5, 0.5],
            [0.0, 0.0, 0.5, 0.5],
            [0.5, 0.5, 0.0, 0.0],
            [0.5, 0.5, 0.0, 0.0]
        ];
        assert!(close(&a, &want, 1e-15));
    }

    #[test]
    fn isolated_node_is_named() {
        let g = Graph::new(3, [(0, 1)]).unwrap();
        let err = normalized_laplacian::<f64>(&g).unwrap_err().to_string();
        assert!(err.contains("node 2"), "{err}");
    }

    #[test]
    fn k2_laplacian_spectrum() {
        let g = Graph::from_edge_list("0 1").unwrap();
        let l: Array2<f64> = normalized_laplacian(&g).unwrap();
        assert_eq!(l, array![[1.0, -1.0], [-1.0, 1.0]]);
        let ops = Operators::<f64>::new(&g).unwrap();
        let sp = ops.spectrum().unwrap();
        assert!(sp.values[0].abs() < 1e-14 && (sp.values[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn k22_laplacian_spectrum() {
        let g = Graph::generate(&GraphKind::CompleteBipartite(2, 2)).unwrap();
        let ops = Operators::<f64>::new(&g).unwrap();
        let vals = &ops.spectrum().unwrap().values;
        for (got, want) in vals.iter().zip([0.0, 1.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_is_degree_profile() {
        let g = Graph::generate(&GraphKind::ErdosRenyi { n: 15, p: 0.3, seed: 4 }).unwrap();
        let l: Array2<f64> = normalized_laplacian(&g).unwrap();
        let raw = spectral_decomposition(&l.view()).unwrap();
        let phi0 = sqrt_degree_profile::<f64>(&g);
        assert!(raw.values[0].abs() < 1e-10);
        let overlap: f64 = raw.vectors.column(0).dot(&phi0);
        assert!((overlap.abs() - 1.0).abs() < 1e-10);
        assert!(l.dot(&phi0).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn sparse_apply_matches_dense() {
        let g = Graph::generate(&GraphKind::ErdosRenyi { n: 9, p: 0.5, seed: 2 }).unwrap();
        let f = Array2::from_shape_fn((9, 3), |(i, j)| (i as f64 * 0.7 - j as f64).sin());
        let dense: Array2<f64> = normalized_adjacency(&g).unwrap();
        assert!(close(&apply_adjacency(&g, &f.view()), &dense.dot(&f), 1e-14));
        let lap: Array2<f64> = normalized_laplacian(&g).unwrap();
        assert!(close(&apply_laplacian(&g, &f.view()), &lap.dot(&f), 1e-14));
    }

    #[test]
    fn random_walk_rows_sum_to_zero() {
        let g = Graph::generate(&GraphKind::Path(5)).unwrap();
        let l: Array2<f64> = random_walk_laplacian_with_self_loops(&g);
        for row in l.rows() {
            assert!(row.sum().abs() < 1e-15);
        }
        assert!((l[[0, 0]] - 0.5).abs() < 1e-15);
    }
}
