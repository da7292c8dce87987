//! Invariant checks shared by the property-test suite and the acceptance
//! harness. Each check runs a deterministic proptest runner (or a fixed
//! Monte-Carlo design) and returns a one-line summary or a failure message.
#![allow(dead_code)]

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use pcrle::experiments::{run_estimation_sweep, SweepConfig};
use pcrle::graph::{
    build_graph, build_graph_brute_force, connected_components, sobolev_seminorm, Kernel, NeighborhoodGraph,
};
use pcrle::linalg::{dot, norm, sym_eig_sorted};
use pcrle::regress::{fixed_graph_error_bound, in_sample_mse, pcr_le_fit, pcr_le_test};
use pcrle::rng::SeedSequence;
use pcrle::sampling::{
    add_noise, sample_circle_manifold, sample_cluster_model, sample_uniform_cube, DesignModel, EigenBasis, PointCloud,
    RegressionFunction,
};
use pcrle::sparsify::{certify_sigma, default_test_vectors, sparsify_uniform};
use pcrle::spectra::{smallest_eigenpairs, EigenOptions, SolverKind};
use pcrle::tune::{choose_K, choose_eps, Task, TuningRule};

pub type Check = Result<String, String>;

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> std::result::Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn kernel_of(i: usize) -> Kernel {
    [Kernel::Boxcar, Kernel::Triangular, Kernel::TruncatedQuadratic][i % 3]
}

fn gaussian(rng: &mut impl rand::Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect()
}

/// Random graph on uniform cube points; `eps_frac` scales the radius between
/// very sparse and nearly complete.
fn random_graph(seed: u64, n: usize, d: usize, eps_frac: f64, kernel: usize) -> NeighborhoodGraph {
    let mut rng = SeedSequence::new(seed).stream(11);
    let p = sample_uniform_cube(n, d, &mut rng).unwrap();
    let eps = eps_frac * 2.0 * (d as f64).sqrt();
    build_graph(&p, eps, kernel_of(kernel), d).unwrap()
}

fn graph_strategy(max_n: usize) -> impl Strategy<Value = (u64, usize, usize, f64, usize)> {
    (any::<u64>(), 5..=max_n, 1usize..=3, 0.03f64..0.6, 0usize..3)
}

// ---------------------------------------------------------------- sampling

pub fn sampler_determinism() -> Check {
    run(
        48,
        (any::<u64>(), 1usize..300, 0usize..3, 1usize..4),
        |(seed, n, model, d)| {
            let design = match model {
                0 => DesignModel::Cube { d },
                1 => DesignModel::Circle { d: d + 1 },
                _ => DesignModel::Cluster { r: 0.1 },
            };
            let draw = || {
                let mut rng = SeedSequence::new(seed).replication(3, 5);
                let p = design.sample(n, &mut rng).unwrap();
                let y = add_noise(&vec![0.0; n], 1.0, &mut rng);
                (p, y)
            };
            let (a, ya) = draw();
            let (b, yb) = draw();
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(a.coords()), bits(b.coords()));
            prop_assert_eq!(bits(&ya), bits(&yb));
            Ok(())
        },
    )?;
    Ok("48 seeds, bitwise identical".into())
}

pub fn sampler_supports() -> Check {
    run(
        48,
        (any::<u64>(), 1usize..2000, 0.005f64..=0.25, 2usize..6),
        |(seed, n, r, d)| {
            let mut rng = SeedSequence::new(seed).stream(1);
            let c = sample_cluster_model(n, r, &mut rng).unwrap();
            for x in c.rows() {
                prop_assert!((0.0..=1.0).contains(&x[0]));
                prop_assert!(
                    !(x[0] > 0.5 - r && x[0] < 0.5 + r),
                    "point {} in gap of half-width {}",
                    x[0],
                    r
                );
            }
            let s = sample_circle_manifold(n, d, &mut rng).unwrap();
            for x in s.rows() {
                prop_assert!((norm(x) - 1.0).abs() <= 1e-12);
                prop_assert!(x[2..].iter().all(|&v| v == 0.0));
            }
            let q = sample_uniform_cube(n, d, &mut rng).unwrap();
            prop_assert!(q.coords().iter().all(|v| (-1.0..=1.0).contains(v)));
            Ok(())
        },
    )?;
    Ok("48 cases: gap empty, circle unit norm, cube in range".into())
}

/// Tensor midpoint quadrature for the uniform density on `[-1, 1]^d`.
pub fn eigenfunction_orthonormality() -> Check {
    let m: usize = 200;
    let mut worst = 0.0f64;
    for d in 1..=2usize {
        let all = pcrle::sampling::cube_multi_indices(d, 6usize.pow(d as u32) + 10);
        let idx: Vec<Vec<usize>> = all.into_iter().filter(|k| k.iter().all(|&v| v <= 5)).collect();
        let nodes: Vec<f64> = (0..m).map(|i| -1.0 + (2 * i + 1) as f64 / m as f64).collect();
        let mut coords = Vec::new();
        let total = m.pow(d as u32);
        for t in 0..total {
            let mut rem = t;
            for _ in 0..d {
                coords.push(nodes[rem % m]);
                rem /= m;
            }
        }
        let pts = PointCloud::flat(d, coords).unwrap();
        let vals = DMatrix::from_fn(total, idx.len(), |i, j| {
            pcrle::sampling::cube_eigenfunction(&idx[j], pts.row(i))
        });
        let gram = vals.tr_mul(&vals) / total as f64;
        for a in 0..idx.len() {
            for b in 0..idx.len() {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((gram[(a, b)] - target).abs());
            }
        }
    }
    if worst <= 1e-4 {
        Ok(format!("max |<ψ_j,ψ_k> - δ| = {worst:.2e}"))
    } else {
        Err(format!("orthonormality error {worst:.2e} > 1e-4"))
    }
}

// ------------------------------------------------------------------- graph

pub fn laplacian_symmetry_psd() -> Check {
    run(
        40,
        (graph_strategy(150), any::<u64>()),
        |((seed, n, d, frac, k), vs)| {
            let g = random_graph(seed, n, d, frac, k);
            let mut rng = SeedSequence::new(vs).stream(2);
            let bound = g.norm_bound();
            let mut lu = vec![0.0; n];
            let mut lv = vec![0.0; n];
            for _ in 0..5 {
                let u = gaussian(&mut rng, n);
                let v = gaussian(&mut rng, n);
                g.apply_into(&u, &mut lu);
                g.apply_into(&v, &mut lv);
                let asym = (dot(&u, &lv) - dot(&v, &lu)).abs();
                prop_assert!(asym <= 1e-10 * norm(&u) * norm(&v) * bound.max(f64::MIN_POSITIVE));
            }
            for _ in 0..100 {
                let f = gaussian(&mut rng, n);
                g.apply_into(&f, &mut lu);
                prop_assert!(dot(&f, &lu) / n as f64 >= -1e-12);
            }
            Ok(())
        },
    )?;
    Ok("40 graphs: symmetric, PSD on 100 vectors each".into())
}

pub fn dirichlet_identity() -> Check {
    run(
        60,
        (graph_strategy(200), any::<u64>()),
        |((seed, n, d, frac, k), fs)| {
            let g = random_graph(seed, n, d, frac, k);
            let f = gaussian(&mut SeedSequence::new(fs).stream(3), n);
            let op = sobolev_seminorm(&g, &f, 1).unwrap();
            let edge: f64 = g
                .edges()
                .iter()
                .map(|&(i, j, w)| w * (f[i as usize] - f[j as usize]).powi(2))
                .sum::<f64>()
                * g.prefactor()
                / n as f64;
            prop_assert!(
                (op - edge).abs() <= 1e-10 * edge.abs().max(f64::MIN_POSITIVE),
                "{op} vs {edge}"
            );
            Ok(())
        },
    )?;
    Ok("60 graphs: operator seminorm = edge sum to 1e-10".into())
}

pub fn spatial_index_equivalence() -> Check {
    run(
        60,
        (any::<u64>(), 2usize..=500, 1usize..=5, 0.01f64..0.8, 0usize..3),
        |(seed, n, d, frac, k)| {
            let p = sample_uniform_cube(n, d, &mut SeedSequence::new(seed).stream(4)).unwrap();
            let eps = frac * 2.0;
            let a = build_graph(&p, eps, kernel_of(k), d).unwrap();
            let b = build_graph_brute_force(&p, eps, kernel_of(k), d).unwrap();
            prop_assert_eq!(a.edges(), b.edges());
            Ok(())
        },
    )?;
    // Lattice points put many pairs exactly at distance ε.
    run(30, (2usize..12, 1usize..=3, 1usize..4), |(side, d, step)| {
        let mut coords = Vec::new();
        let total = side.pow(d as u32);
        for t in 0..total {
            let mut rem = t;
            for _ in 0..d {
                coords.push((rem % side) as f64 * 0.25);
                rem /= side;
            }
        }
        let p = PointCloud::flat(d, coords).unwrap();
        let eps = 0.25 * step as f64;
        let a = build_graph(&p, eps, Kernel::Boxcar, d).unwrap();
        let b = build_graph_brute_force(&p, eps, Kernel::Boxcar, d).unwrap();
        prop_assert_eq!(a.edges(), b.edges());
        Ok(())
    })?;
    Ok("60 random + 30 lattice instances: binned = brute force".into())
}

// ----------------------------------------------------------------- spectra

/// Largest sine of the principal angles between two orthonormal blocks.
fn max_sin_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let r = b - a * (a.transpose() * b);
    r.singular_values().iter().cloned().fold(0.0, f64::max)
}

pub struct OracleStats {
    pub worst_value: f64,
    pub worst_angle: f64,
    pub graphs: usize,
}

/// Sparse path against dense eigendecomposition on fuzz graphs with
/// `n ≤ 200`. Eigenvalues are grouped into clusters of (numerically) equal
/// values; angles are measured per cluster lying entirely within the first
/// `K`.
pub fn solver_oracle(graphs: usize) -> Result<OracleStats, String> {
    let mut worst_value = 0.0f64;
    let mut worst_angle = 0.0f64;
    let mut rng = SeedSequence::new(0x0a11ce).stream(7);
    use rand::Rng;
    let opts = EigenOptions {
        solver: SolverKind::Lanczos,
        ..EigenOptions::default()
    };
    for case in 0..graphs {
        let n = rng.random_range(30..=200usize);
        let d = rng.random_range(1..=3usize);
        let frac = rng.random_range(0.04..0.5);
        let g = random_graph(rng.random(), n, d, frac, case);
        let k = rng.random_range(1..=24usize.min(n - 1));
        let s = smallest_eigenpairs(&g, k, &opts).map_err(|e| format!("case {case}: {e}"))?;
        let (vals, vecs) = sym_eig_sorted(g.to_dense());
        for j in 0..k {
            worst_value = worst_value.max((s.eigenvalues()[j] - vals[j]).abs());
        }
        let scale = vals[n - 1].abs().max(1.0);
        let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * scale;
        let mut start = 0;
        while start < k {
            let mut end = start + 1;
            while end < n && same(vals[end], vals[end - 1]) {
                end += 1;
            }
            if end <= k {
                let dv = vecs.columns(start, end - start).into_owned();
                let sv = s.eigenvectors().columns(start, end - start).into_owned();
                worst_angle = worst_angle.max(max_sin_angle(&dv, &sv));
            }
            start = end;
        }
    }
    Ok(OracleStats {
        worst_value,
        worst_angle,
        graphs,
    })
}

pub fn solver_oracle_check(graphs: usize) -> Check {
    let st = solver_oracle(graphs)?;
    let msg = format!(
        "{} graphs: max |Δλ| = {:.2e}, max sin angle = {:.2e}",
        st.graphs, st.worst_value, st.worst_angle
    );
    if st.worst_value <= 1e-8 && st.worst_angle <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn monotone_k() -> Check {
    let opts = EigenOptions {
        solver: SolverKind::Lanczos,
        ..EigenOptions::default()
    };
    run(
        24,
        (graph_strategy(400), 1usize..12, 1usize..12),
        |((seed, n, d, frac, kern), k, extra)| {
            let g = random_graph(seed, n.max(30), d, frac, kern);
            let k = k.min(g.n() - 1);
            let k2 = (k + extra).min(g.n());
            let a = smallest_eigenpairs(&g, k, &opts).unwrap();
            let b = smallest_eigenpairs(&g, k2, &opts).unwrap();
            for j in 0..k {
                prop_assert!(
                    (a.eigenvalues()[j] - b.eigenvalues()[j]).abs() <= 1e-8,
                    "λ_{} {} vs {}",
                    j + 1,
                    a.eigenvalues()[j],
                    b.eigenvalues()[j]
                );
            }
            Ok(())
        },
    )?;
    Ok("24 graphs: leading eigenvalues agree to 1e-8".into())
}

pub fn residual_certification() -> Check {
    run(
        30,
        (graph_strategy(400), 1usize..20, any::<bool>()),
        |((seed, n, d, frac, kern), k, lanczos)| {
            let g = random_graph(seed, n, d, frac, kern);
            let k = k.min(g.n());
            let opts = EigenOptions {
                solver: if lanczos && k < g.n() {
                    SolverKind::Lanczos
                } else {
                    SolverKind::Dense
                },
                ..EigenOptions::default()
            };
            let s = smallest_eigenpairs(&g, k, &opts).unwrap();
            let bound = opts.tol * g.norm_bound().max(f64::MIN_POSITIVE);
            let mut lv = vec![0.0; g.n()];
            for j in 0..k {
                let v = s.vector(j);
                g.apply_into(v, &mut lv);
                let r: f64 = lv
                    .iter()
                    .zip(v)
                    .map(|(a, b)| (a - s.eigenvalues()[j] * b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                prop_assert!(r <= bound, "pair {}: residual {r:e} > {bound:e}", j + 1);
                prop_assert!((norm(v) - 1.0).abs() < 1e-12);
            }
            prop_assert!(s.residual_tol <= bound);
            Ok(())
        },
    )?;
    Ok("30 spectra: every pair within tol·‖L‖ by direct application".into())
}

// ----------------------------------------------------------------- regress

fn spectrum_with_gap(g: &NeighborhoodGraph, k: usize) -> Option<pcrle::spectra::LaplacianSpectrum> {
    let k1 = (k + 1).min(g.n());
    let s = smallest_eigenpairs(g, k1, &EigenOptions::default()).ok()?;
    if k1 > k {
        let (a, b) = (s.eigenvalues()[k - 1], s.eigenvalues()[k]);
        if b - a <= 1e-6 * g.norm_bound().max(1.0) {
            return None;
        }
    }
    s.truncated(k).ok()
}

pub fn projection_idempotence() -> Check {
    run(
        40,
        (graph_strategy(250), 0usize..15, any::<u64>()),
        |((seed, n, d, frac, kern), k, ys)| {
            let g = random_graph(seed, n, d, frac, kern);
            let k = k.min(g.n());
            let s = smallest_eigenpairs(&g, k.max(1), &EigenOptions::default()).unwrap();
            let y = gaussian(&mut SeedSequence::new(ys).stream(5), g.n());
            let f1 = pcr_le_fit(&s, &y, k).unwrap().fitted;
            let f2 = pcr_le_fit(&s, &f1, k).unwrap().fitted;
            for (a, b) in f1.iter().zip(&f2) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + norm(&y)), "{a} vs {b}");
            }
            Ok(())
        },
    )?;
    Ok("40 cases: refitting the fit is a no-op".into())
}

pub fn scale_invariance() -> Check {
    run(
        40,
        (graph_strategy(250), 1usize..15, -6.0f64..6.0, any::<u64>()),
        |((seed, n, d, frac, kern), k, logc, ys)| {
            let g = random_graph(seed, n, d, frac, kern);
            let k = k.min(g.n());
            let gc = g.scaled(logc.exp()).unwrap();
            let (Some(s), Some(sc)) = (spectrum_with_gap(&g, k), spectrum_with_gap(&gc, k)) else {
                return Err(TestCaseError::reject("no spectral gap at K"));
            };
            let y = gaussian(&mut SeedSequence::new(ys).stream(6), g.n());
            let f = pcr_le_fit(&s, &y, k).unwrap().fitted;
            let fc = pcr_le_fit(&sc, &y, k).unwrap().fitted;
            for (a, b) in f.iter().zip(&fc) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + norm(&y)), "{a} vs {b}");
            }
            Ok(())
        },
    )?;
    Ok("40 cases: fits unchanged when weights are rescaled".into())
}

pub fn statistic_consistency() -> Check {
    run(
        40,
        (graph_strategy(250), 1usize..15, any::<u64>()),
        |((seed, n, d, frac, kern), k, ys)| {
            let g = random_graph(seed, n, d, frac, kern);
            let k = k.min(g.n());
            let s = smallest_eigenpairs(&g, k, &EigenOptions::default()).unwrap();
            let y = gaussian(&mut SeedSequence::new(ys).stream(8), g.n());
            let fit = pcr_le_fit(&s, &y, k).unwrap();
            let t = pcr_le_test(&s, &y, k, 0.05).unwrap();
            let mse = in_sample_mse(&fit.fitted, &vec![0.0; g.n()]).unwrap();
            prop_assert!((t.statistic - mse).abs() <= 1e-12 * (1.0 + mse));
            Ok(())
        },
    )?;
    Ok("40 cases: test statistic = ‖f̂‖_n²".into())
}

/// Frequency over `instances` designs (n = 50, s = 1, uniform on [-1, 1])
/// of the event `‖f̂ - f0‖_n² > ⟨L f0, f0⟩_n / λ_{K+1} + 5K/n`, per K.
pub fn fixed_graph_bound_frequencies(instances: usize) -> Vec<(usize, f64)> {
    let n = 50;
    let rule = TuningRule::new(Task::Estimation, n, 1, 1, 1.0);
    let eps = choose_eps(&rule, choose_K(&rule).unwrap()).unwrap();
    let f0 = RegressionFunction::Eigenfunction {
        basis: EigenBasis::Cube { dim: 1 },
        index: 3,
        amplitude: 1.0,
        smoothness: 1.0,
    };
    let seq = SeedSequence::new(0x1e33a1);
    let mut counts = [0usize; 5];
    for i in 0..instances as u64 {
        let mut rng = seq.replication(9, i);
        let p = sample_uniform_cube(n, 1, &mut rng).unwrap();
        let truth = f0.evaluate(&p);
        let y = add_noise(&truth, 1.0, &mut rng);
        let g = build_graph(&p, eps, Kernel::Boxcar, 1).unwrap();
        let s = smallest_eigenpairs(&g, 6, &EigenOptions::default()).unwrap();
        for k in 1..=5 {
            let err = in_sample_mse(&pcr_le_fit(&s, &y, k).unwrap().fitted, &truth).unwrap();
            let bound = fixed_graph_error_bound(&g, &s, &truth, k, 1).unwrap();
            if err > bound {
                counts[k - 1] += 1;
            }
        }
    }
    (1..=5).map(|k| (k, counts[k - 1] as f64 / instances as f64)).collect()
}

pub fn fixed_graph_bound(instances: usize) -> Check {
    let freqs = fixed_graph_bound_frequencies(instances);
    let ok = freqs.iter().all(|&(k, f)| f <= (-(k as f64)).exp() + 0.05);
    let msg = format!(
        "{instances} instances, violation freq by K: {}",
        freqs
            .iter()
            .map(|(k, f)| format!("K={k}:{f:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn null_mean_statistic() -> Check {
    let n = 300;
    let k = 6;
    let p = sample_uniform_cube(n, 1, &mut SeedSequence::new(21).stream(0)).unwrap();
    let g = build_graph(&p, 0.05, Kernel::Boxcar, 1).unwrap();
    let s = smallest_eigenpairs(&g, k, &EigenOptions::default()).unwrap();
    let reps = 4000;
    let seq = SeedSequence::new(22);
    let stats: Vec<f64> = (0..reps)
        .map(|i| {
            let y = add_noise(&vec![0.0; n], 1.0, &mut seq.replication(1, i));
            pcr_le_test(&s, &y, k, 0.05).unwrap().statistic
        })
        .collect();
    let (mean, se) = pcrle::experiments::stats::mean_se(&stats);
    let target = k as f64 / n as f64;
    let msg = format!("mean {mean:.5} vs K/n = {target:.5}, se {se:.1e}");
    if (mean - target).abs() <= 3.0 * se {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn cluster_exactness() -> Check {
    run(
        40,
        (any::<u64>(), 50usize..800, 0.03f64..0.25, any::<u64>()),
        |(seed, n, r, ys)| {
            let mut rng = SeedSequence::new(seed).stream(12);
            let p = sample_cluster_model(n, r, &mut rng).unwrap();
            let g = build_graph(&p, r, Kernel::Boxcar, 1).unwrap();
            let comps = connected_components(&g);
            let left: Vec<bool> = p.rows().map(|x| x[0] < 0.5).collect();
            let matches =
                comps.count == 2 && (0..n).all(|i| (comps.labels[i] == comps.labels[0]) == (left[i] == left[0]));
            prop_assume!(matches);
            let y = gaussian(&mut SeedSequence::new(ys).stream(13), n);
            let s = smallest_eigenpairs(&g, 2, &EigenOptions::default()).unwrap();
            let fit = pcr_le_fit(&s, &y, 2).unwrap().fitted;
            let mean = |side: bool| {
                let v: Vec<f64> = (0..n).filter(|&i| left[i] == side).map(|i| y[i]).collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            let (ml, mr) = (mean(true), mean(false));
            for i in 0..n {
                let m = if left[i] { ml } else { mr };
                prop_assert!((fit[i] - m).abs() <= 1e-10, "vertex {i}: {} vs {m}", fit[i]);
            }
            Ok(())
        },
    )?;
    Ok("40 two-component draws: K=2 fit equals per-cluster means".into())
}

// -------------------------------------------------------------------- tune

pub fn tuning_properties() -> Check {
    run(
        200,
        (
            1usize..100_000,
            1usize..100_000,
            1usize..6,
            1u32..4,
            0.1f64..10.0,
            0.1f64..10.0,
            any::<bool>(),
        ),
        |(n1, n2, d, s, m1, m2, testing)| {
            let task = if testing { Task::Testing } else { Task::Estimation };
            let (na, nb) = (n1.min(n2), n1.max(n2));
            let (ma, mb) = (m1.min(m2), m1.max(m2));
            if !testing {
                let k = |n, m| choose_K(&TuningRule::new(task, n, d, s, m)).unwrap();
                prop_assert!(k(na, ma) <= k(nb, ma));
                prop_assert!(k(na, ma) <= k(na, mb));
            }
            let rule = TuningRule::new(task, nb, d, s, mb);
            let k = choose_K(&rule).unwrap();
            let (lo, hi) = rule.eps_bracket(k).unwrap();
            match choose_eps(&rule, k) {
                Ok(e) => prop_assert!(lo <= e && e <= hi, "{lo} <= {e} <= {hi}"),
                Err(_) => prop_assert!(lo > hi),
            }
            Ok(())
        },
    )?;
    Ok("200 cases: K monotone in n and M; ε inside its bracket".into())
}

// ---------------------------------------------------------------- sparsify

pub fn sparsifier_unbiasedness() -> Check {
    let p = sample_uniform_cube(150, 2, &mut SeedSequence::new(31).stream(0)).unwrap();
    let g = build_graph(&p, 0.4, Kernel::Triangular, 2).unwrap();
    let mut rng = SeedSequence::new(32).stream(0);
    let us: Vec<Vec<f64>> = (0..4).map(|_| gaussian(&mut rng, g.n())).collect();
    let reps = 400;
    let mut lu = vec![0.0; g.n()];
    let mut worst = 0.0f64;
    for keep in [0.3, 0.7] {
        let mut forms = vec![Vec::with_capacity(reps); us.len()];
        for i in 0..reps as u64 {
            let h = sparsify_uniform(&g, keep, &mut SeedSequence::new(33).replication(1, i)).unwrap();
            for (j, u) in us.iter().enumerate() {
                h.apply_into(u, &mut lu);
                forms[j].push(dot(u, &lu));
            }
        }
        for (j, u) in us.iter().enumerate() {
            g.apply_into(u, &mut lu);
            let exact = dot(u, &lu);
            let (mean, se) = pcrle::experiments::stats::mean_se(&forms[j]);
            let z = (mean - exact).abs() / se;
            worst = worst.max(z);
        }
    }
    let msg = format!("8 quadratic forms over 400 draws, max |z| = {worst:.2}");
    if worst <= 3.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Over 20 designs, mean sparsified PCR-LE error against `σ²` times the dense
/// error, with two standard errors of slack.
pub fn sigma_degradation() -> Check {
    let n = 400;
    let rule = TuningRule::new(Task::Estimation, n, 1, 1, 1.0);
    let k = choose_K(&rule).unwrap();
    let eps = choose_eps(&rule, k).unwrap();
    let f0 = RegressionFunction::Eigenfunction {
        basis: EigenBasis::Cube { dim: 1 },
        index: k,
        amplitude: 1.0,
        smoothness: 1.0,
    };
    let seq = SeedSequence::new(41);
    let mut diffs = Vec::new();
    let mut max_sigma = 1.0f64;
    for i in 0..20u64 {
        let mut rng = seq.replication(2, i);
        let p = sample_uniform_cube(n, 1, &mut rng).unwrap();
        let truth = f0.evaluate(&p);
        let y = add_noise(&truth, 1.0, &mut rng);
        let g = build_graph(&p, eps, Kernel::Boxcar, 1).unwrap();
        let h = sparsify_uniform(&g, 0.9, &mut rng).unwrap();
        let tv = default_test_vectors(&g, &mut rng).map_err(|e| e.to_string())?;
        let sigma = certify_sigma(&g, &h, &tv, None)
            .map_err(|e| e.to_string())?
            .sigma_observed;
        if !sigma.is_finite() {
            continue;
        }
        max_sigma = max_sigma.max(sigma);
        let opts = EigenOptions::default();
        let dense = in_sample_mse(
            &pcr_le_fit(&smallest_eigenpairs(&g, k, &opts).unwrap(), &y, k)
                .unwrap()
                .fitted,
            &truth,
        )
        .unwrap();
        let sparse = in_sample_mse(
            &pcr_le_fit(&smallest_eigenpairs(&h, k, &opts).unwrap(), &y, k)
                .unwrap()
                .fitted,
            &truth,
        )
        .unwrap();
        diffs.push(sparse - sigma * sigma * dense);
    }
    if diffs.len() < 20 {
        return Err(format!("only {} of 20 instances had finite σ", diffs.len()));
    }
    let (mean, se) = pcrle::experiments::stats::mean_se(&diffs);
    let msg = format!("20 instances, max σ = {max_sigma:.3}, mean(sparse - σ² dense) = {mean:.2e} (se {se:.1e})");
    if mean <= 2.0 * se {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ------------------------------------------------------------- experiments

pub fn sweep_reproducibility() -> Check {
    let mut cfg = SweepConfig::new(DesignModel::Cube { d: 1 }, vec![150, 300, 600], 77);
    cfg.replications = 6;
    cfg.methods = pcrle::regress::Method::ALL.to_vec();
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = serial
        .install(|| run_estimation_sweep(&cfg))
        .map_err(|e| e.to_string())?;
    let b = wide.install(|| run_estimation_sweep(&cfg)).map_err(|e| e.to_string())?;
    let c = serial
        .install(|| run_estimation_sweep(&cfg))
        .map_err(|e| e.to_string())?;
    if a == b && a == c {
        Ok("1-thread and 4-thread runs identical".into())
    } else {
        Err("sweep results differ across runs or thread counts".into())
    }
}

/// Every invariant suite, in order, for the acceptance harness.
pub fn all_invariants() -> Vec<(&'static str, Check)> {
    vec![
        ("sampler determinism", sampler_determinism()),
        ("sampler supports", sampler_supports()),
        ("eigenfunction orthonormality", eigenfunction_orthonormality()),
        ("Laplacian symmetry and PSD", laplacian_symmetry_psd()),
        ("Dirichlet identity", dirichlet_identity()),
        ("spatial-index equivalence", spatial_index_equivalence()),
        ("solver oracle equivalence", solver_oracle_check(20)),
        ("monotone K", monotone_k()),
        ("residual certification", residual_certification()),
        ("projection idempotence", projection_idempotence()),
        ("Laplacian-scale invariance", scale_invariance()),
        ("statistic consistency", statistic_consistency()),
        ("fixed-graph bound", fixed_graph_bound(200)),
        ("null mean of statistic", null_mean_statistic()),
        ("cluster exactness", cluster_exactness()),
        ("tuning monotonicity and bracket", tuning_properties()),
        ("sparsifier unbiasedness", sparsifier_unbiasedness()),
        ("σ-degradation bound", sigma_degradation()),
        ("sweep reproducibility", sweep_reproducibility()),
    ]
}
