use pcrle::graph::{build_graph, connected_components, laplacian_apply, sobolev_seminorm, Kernel};
use pcrle::linalg::dot;
use pcrle::rng::SeedSequence;
use pcrle::sampling::{sample_cluster_model, sample_uniform_cube};
use rand::Rng;

#[test]
fn apply_matches_dense_matrix() {
    let mut rng = SeedSequence::new(4).stream(1);
    for kernel in [Kernel::Boxcar, Kernel::Triangular, Kernel::TruncatedQuadratic] {
        let pts = sample_uniform_cube(50, 2, &mut rng).unwrap();
        let g = build_graph(&pts, 0.4, kernel, 2).unwrap();
        let dense = g.to_dense();
        let u: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = laplacian_apply(&g, &u).unwrap();
        let slow = &dense * nalgebra::DVector::from_column_slice(&u);
        let scale = slow.norm();
        for i in 0..50 {
            assert!((fast[i] - slow[i]).abs() <= 1e-12 * scale, "{kernel:?} row {i}");
        }
    }
}

#[test]
fn second_order_seminorm_two_ways() {
    let mut rng = SeedSequence::new(5).stream(1);
    let pts = sample_uniform_cube(120, 1, &mut rng).unwrap();
    let g = build_graph(&pts, 0.1, Kernel::Boxcar, 1).unwrap();
    let f: Vec<f64> = pts.rows().map(|x| (3.0 * x[0]).sin()).collect();
    let lf = laplacian_apply(&g, &f).unwrap();
    let direct = dot(&lf, &lf) / 120.0;
    // fᵀ L² f through the dense matrix.
    let l = g.to_dense();
    let fv = nalgebra::DVector::from_column_slice(&f);
    let via_dense = (fv.transpose() * &l * &l * &fv)[0] / 120.0;
    let s2 = sobolev_seminorm(&g, &f, 2).unwrap();
    assert!((s2 - direct).abs() <= 1e-12 * direct);
    assert!((s2 - via_dense).abs() <= 1e-10 * direct);
    assert_eq!(sobolev_seminorm(&g, &vec![2.0; 120], 3).unwrap(), 0.0);
}

#[test]
fn cluster_components_match_membership() {
    let r = 0.05;
    for seed in 0..5 {
        let mut rng = SeedSequence::new(seed).stream(2);
        let pts = sample_cluster_model(2000, r, &mut rng).unwrap();
        let g = build_graph(&pts, r / 2.0, Kernel::Boxcar, 1).unwrap();
        let c = connected_components(&g);
        assert_eq!(c.count, 2, "seed {seed}");
        let left: Vec<bool> = pts.rows().map(|x| x[0] < 0.5).collect();
        let label_left = c.labels[left.iter().position(|&b| b).unwrap()];
        for (i, &l) in left.iter().enumerate() {
            assert_eq!(c.labels[i] == label_left, l);
        }
    }
}
