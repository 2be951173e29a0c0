//! Randomized invariants of the operators, energies and steppers.

use gel_core::graph::sqrt_degree_profile;
use gel_core::linalg::{frob_norm, kron, vec_cols};
use gel_core::verify::kronecker_oracle_energy;
use gel_core::{
    closed_form_features, dirichlet_energy, normalized_laplacian, parametric_energy,
    rayleigh_quotient, run_trajectory, spectral_decomposition, step_model, Graph, GraphKind, Mat,
    ModelSpec, Variant, WeightSet,
};
use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal(seed: u64, rows: usize, cols: usize) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut rng))
}

fn sym(seed: u64, d: usize) -> Mat {
    let m = normal(seed, d, d);
    (&m + &m.t()) * 0.5
}

fn graph() -> impl Strategy<Value = Graph> {
    (3usize..20, 0.2f64..0.9, any::<u64>())
        .prop_filter_map("disconnected", |(n, p, seed)| {
            Graph::generate(&GraphKind::ErdosRenyi { n, p, seed }).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_spectrum_lies_in_unit_band(g in graph()) {
        let lap = normalized_laplacian::<f64>(&g).unwrap();
        let sp = spectral_decomposition(&lap.view()).unwrap();
        prop_assert!(sp.min().abs() < 1e-12);
        prop_assert!(sp.max() <= 2.0 + 1e-12);
        let phi0 = sqrt_degree_profile::<f64>(&g).insert_axis(ndarray::Axis(1));
        prop_assert!(dirichlet_energy(&g, &phi0.view()).unwrap().abs() < 1e-14);
    }

    #[test]
    fn top_frequency_is_two_exactly_on_bipartite_graphs(g in graph()) {
        let lap = normalized_laplacian::<f64>(&g).unwrap();
        let top = spectral_decomposition(&lap.view()).unwrap().max();
        if g.checks().bipartite {
            prop_assert!((top - 2.0).abs() < 1e-10);
        } else {
            prop_assert!(top < 2.0 - 1e-10);
        }
    }

    #[test]
    fn dirichlet_energy_is_the_laplacian_quadratic_form(g in graph(), d in 1usize..4, seed in any::<u64>()) {
        let f = normal(seed, g.n(), d);
        let lap = normalized_laplacian::<f64>(&g).unwrap();
        let dense = (&f * &lap.dot(&f)).sum();
        let e = dirichlet_energy(&g, &f.view()).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert!((e - dense).abs() <= 1e-12 * dense.abs().max(1.0));
    }

    #[test]
    fn rayleigh_quotient_is_scale_free(g in graph(), d in 1usize..4, seed in any::<u64>(), s in 1e-3f64..1e3) {
        let f = normal(seed, g.n(), d);
        let rq = rayleigh_quotient(&g, &f.view()).unwrap();
        let scaled = rayleigh_quotient(&g, &(&f * s).view()).unwrap();
        prop_assert!((0.0..=2.0 + 1e-12).contains(&rq));
        prop_assert!((rq - scaled).abs() < 1e-12);
    }

    #[test]
    fn parametric_energy_matches_explicit_kronecker_form(g in graph(), d in 1usize..4, seed in any::<u64>()) {
        let w = WeightSet::zeros(d)
            .with_w(sym(seed ^ 1, d)).unwrap()
            .with_omega(sym(seed ^ 2, d)).unwrap()
            .with_wtilde(normal(seed ^ 3, d, d)).unwrap();
        let f = normal(seed ^ 4, g.n(), d);
        let f0 = normal(seed ^ 5, g.n(), d);
        let fast = parametric_energy(&g, &f.view(), &f0.view(), &w).unwrap();
        let oracle = kronecker_oracle_energy(&g, &f.view(), &f0.view(), &w).unwrap();
        prop_assert!((fast - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
    }

    #[test]
    fn gradient_flow_step_is_kronecker_matrix_vector_product(g in graph(), d in 1usize..4, seed in any::<u64>()) {
        let w = sym(seed, d);
        let tau = 0.5;
        let f = normal(seed ^ 9, g.n(), d);
        let spec = ModelSpec::gradient_flow(w.clone(), tau).unwrap();
        let next = step_model(&spec, &g, &f.view(), &f.view()).unwrap();
        let abar = gel_core::normalized_adjacency::<f64>(&g).unwrap();
        let op = Array2::<f64>::eye(g.n() * d) + kron(&w.view(), &abar.view()) * tau;
        let expect = op.dot(&vec_cols(&f.view()));
        let diff = &vec_cols(&next.view()) - &expect;
        prop_assert!(diff.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn closed_form_tracks_iteration(g in graph(), d in 1usize..4, seed in any::<u64>(), m in 1usize..60) {
        let w = sym(seed, d);
        let f0 = normal(seed ^ 7, g.n(), d);
        let cf = closed_form_features(&g, &w.view(), 0.5, m, &f0.view()).unwrap();
        let spec = ModelSpec::gradient_flow(w, 0.5).unwrap();
        let traj = run_trajectory(&spec, &g, &f0.view(), m).unwrap();
        let err = frob_norm(&(&cf.direction - &traj.terminal.direction).view());
        prop_assert!(err < 1e-10, "direction error {err}");
        prop_assert!((cf.log_scale - traj.terminal.log_scale).abs() < 1e-8);
    }

    #[test]
    fn trajectories_are_deterministic(g in graph(), seed in any::<u64>()) {
        let f0 = normal(seed, g.n(), 2);
        let spec = ModelSpec::new(Variant::Heat, WeightSet::zeros(2), 0.3);
        let a = run_trajectory(&spec, &g, &f0.view(), 10).unwrap();
        let b = run_trajectory(&spec, &g, &f0.view(), 10).unwrap();
        prop_assert_eq!(a.records, b.records);
    }
}

#[test]
fn complete_bipartite_and_even_cycles_reach_two() {
    for kind in [
        GraphKind::CompleteBipartite(2, 3),
        GraphKind::CompleteBipartite(5, 5),
        GraphKind::Cycle(4),
        GraphKind::Cycle(10),
        GraphKind::Path(6),
    ] {
        let g = Graph::generate(&kind).unwrap();
        let lap = normalized_laplacian::<f64>(&g).unwrap();
        let top = spectral_decomposition(&lap.view()).unwrap().max();
        assert!((top - 2.0).abs() < 1e-12, "{kind}: {top}");
    }
    for kind in [GraphKind::Cycle(5), GraphKind::Complete(4)] {
        let g = Graph::generate(&kind).unwrap();
        let lap = normalized_laplacian::<f64>(&g).unwrap();
        let top = spectral_decomposition(&lap.view()).unwrap().max();
        assert!(top < 2.0 - 1e-3, "{kind}: {top}");
    }
}
