use gel_core::{classify_regime, run_trajectory, Graph, GraphKind, Mat32, Model32, Regime};

#[test]
fn f32_gradient_flow_separates_bipartite_parts() {
    let g = Graph::generate(&GraphKind::CompleteBipartite(3, 4)).unwrap();
    let w = Mat32::from_elem((1, 1), -1.0);
    let report = classify_regime(&g, &w.view(), 0.5f32).unwrap();
    assert_eq!(report.regime, Regime::Hfd);
    let f0 = Mat32::from_shape_fn((7, 1), |(i, _)| 1.0 + 0.1 * i as f32);
    let spec = Model32::gradient_flow(w, 0.5).unwrap();
    let traj = run_trajectory(&spec, &g, &f0.view(), 60).unwrap();
    assert!((traj.last().rayleigh_quotient - 2.0).abs() < 1e-4);
    let dir = &traj.terminal.direction;
    let left = dir[[0, 0]].signum();
    assert!((0..3).all(|i| dir[[i, 0]].signum() == left));
    assert!((3..7).all(|i| dir[[i, 0]].signum() == -left));
}

#[test]
fn f32_heat_flattens() {
    let g = Graph::generate(&GraphKind::Cycle(5)).unwrap();
    let f0 = Mat32::from_shape_fn((5, 2), |(i, j)| (i * 2 + j) as f32 - 4.0);
    let spec = Model32::new(gel_core::Variant::Heat, gel_core::Weights32::zeros(2), 0.5);
    let traj = run_trajectory(&spec, &g, &f0.view(), 200).unwrap();
    assert!(traj.last().rayleigh_quotient < 1e-4);
}
