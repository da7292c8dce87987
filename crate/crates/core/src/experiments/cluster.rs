use serde::{Deserialize, Serialize};

use super::{run_replications, stats::mean_se};
use crate::error::{Error, Result};
use crate::graph::{build_graph, connected_components, Kernel};
use crate::regress::{in_sample_mse, kernel_smoothing_fit, pcr_le_fit, uniform_least_squares_path, Method};
use crate::rng::{stream_id, SeedSequence};
use crate::sampling::{add_noise, sample_cluster_model, EigenBasis, RegressionFunction};
use crate::spectra::{smallest_eigenpairs, EigenOptions};

fn default_noise() -> f64 {
    1.0
}
fn default_ls_max_k() -> usize {
    150
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub n: usize,
    pub theta: f64,
    pub r: f64,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    /// Kernel-smoothing bandwidths searched by the oracle; empty selects 40
    /// geometrically spaced values in `[1/n, 1/2]`.
    #[serde(default)]
    pub bandwidths: Vec<f64>,
    /// Least squares is tuned over `K = 1..=ls_max_k` cosines.
    #[serde(default = "default_ls_max_k")]
    pub ls_max_k: usize,
    #[serde(default)]
    pub eigen: EigenOptions,
}

impl ClusterConfig {
    pub fn new(n: usize, theta: f64, r: f64, replications: usize, seed: u64) -> Self {
        Self {
            n,
            theta,
            r,
            replications,
            seed,
            noise_sd: 1.0,
            bandwidths: Vec::new(),
            ls_max_k: default_ls_max_k(),
            eigen: EigenOptions::default(),
        }
    }

    fn bandwidth_grid(&self) -> Vec<f64> {
        if !self.bandwidths.is_empty() {
            return self.bandwidths.clone();
        }
        let lo = 1.0 / self.n as f64;
        let hi = 0.5f64;
        (0..40).map(|j| lo * (hi / lo).powf(j as f64 / 39.0)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub method: String,
    pub mean_risk: f64,
    pub se: f64,
    /// Selected tuning value (`K` or bandwidth) for the oracle-tuned methods.
    pub tuning: Option<f64>,
    pub ratio_to_pcr_le: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub n: usize,
    pub theta: f64,
    pub r: f64,
    pub replications: usize,
    pub rows: Vec<ClusterRow>,
    /// Fraction of replications whose graph split exactly into the two clusters.
    pub two_component_rate: f64,
    /// PCR-LE mean risk over replications with the two-component split.
    pub pcr_le_risk_two_component: f64,
    /// High-probability risk bound for PCR-LE with `K = 2`, `ε = r/2`.
    pub risk_bound: f64,
    /// Oracle kernel-smoothing risk divided by `min{1/(rn), θ/√n}`.
    pub ks_lower_constant: Option<f64>,
    pub ks_curve: Vec<(f64, f64)>,
    pub ls_curve: Vec<(usize, f64)>,
}

impl ClusterReport {
    pub fn risk(&self, method: Method) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method.name())
            .map(|r| r.mean_risk)
    }
}

/// `(6θ^2 + 1/n)(8/r) e^{-nr/8} + 1/n`.
pub fn cluster_risk_bound(n: usize, theta: f64, r: f64) -> f64 {
    let n = n as f64;
    (6.0 * theta * theta + 1.0 / n) * (8.0 / r) * (-n * r / 8.0).exp() + 1.0 / n
}

struct Rep {
    pcr: f64,
    two: bool,
    ks: Vec<f64>,
    ls: Vec<f64>,
}

/// Mean in-sample risk of PCR-LE (`K = 2`, `ε = r/2`) against kernel
/// smoothing and cosine least squares, each tuned by the oracle to the grid
/// value with the smallest mean risk.
pub fn run_cluster_comparison(cfg: &ClusterConfig) -> Result<ClusterReport> {
    let n = cfg.n;
    if n < 4 || cfg.replications == 0 {
        return Err(Error::invalid(
            "cluster comparison needs n >= 4 and at least one replication",
        ));
    }
    if !(cfg.r > 0.0 && cfg.r <= 0.25) {
        return Err(Error::invalid(format!("cluster separation {} outside (0, 1/4]", cfg.r)));
    }
    if !cfg.theta.is_finite() || !(cfg.noise_sd >= 0.0) {
        return Err(Error::invalid("theta and noise_sd must be finite, noise nonnegative"));
    }
    let hs = cfg.bandwidth_grid();
    if hs.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(Error::invalid("bandwidths must be positive"));
    }
    let kmax = cfg.ls_max_k.clamp(1, n);
    let f0 = RegressionFunction::PiecewiseCluster { theta: cfg.theta };
    let seq = SeedSequence::new(cfg.seed);
    let eps = cfg.r / 2.0;
    let (reps, failures) = run_replications(cfg.replications, |i| {
        let mut rng = seq.replication(stream_id("cluster", n), i);
        let points = sample_cluster_model(n, cfg.r, &mut rng)?;
        let truth = f0.evaluate(&points);
        let y = add_noise(&truth, cfg.noise_sd, &mut rng);
        let g = build_graph(&points, eps, Kernel::Boxcar, 1)?;
        let comps = connected_components(&g);
        let two = comps.count == 2 && {
            let left = |i: usize| points.row(i)[0] < 0.5;
            (0..n).all(|i| (comps.labels[i] == comps.labels[0]) == (left(i) == left(0)))
        };
        let spectrum = smallest_eigenpairs(&g, 2, &cfg.eigen)?;
        let pcr = in_sample_mse(&pcr_le_fit(&spectrum, &y, 2)?.fitted, &truth)?;
        let ks = hs
            .iter()
            .map(|&h| in_sample_mse(&kernel_smoothing_fit(&points, &y, h, Kernel::Boxcar)?.fitted, &truth))
            .collect::<Result<Vec<f64>>>()?;
        let phi = EigenBasis::UnitInterval.design_matrix(&points, kmax);
        let ls = uniform_least_squares_path(&phi, &y)?
            .iter()
            .map(|f| match f {
                Some(f) => in_sample_mse(f, &truth),
                None => Ok(f64::INFINITY),
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Rep { pcr, two, ks, ls })
    })?;
    if reps.is_empty() {
        return Err(Error::NotConverged {
            solver: "cluster comparison",
            iterations: failures,
            residual: f64::NAN,
        });
    }
    let used = reps.len();
    let pcr: Vec<f64> = reps.iter().map(|r| r.pcr).collect();
    let (pcr_mean, pcr_se) = mean_se(&pcr);
    let two: Vec<f64> = reps.iter().filter(|r| r.two).map(|r| r.pcr).collect();
    let curve = |get: &dyn Fn(&Rep) -> f64| -> (f64, f64) { mean_se(&reps.iter().map(get).collect::<Vec<f64>>()) };
    let ks_stats: Vec<(f64, f64)> = (0..hs.len()).map(|j| curve(&|r: &Rep| r.ks[j])).collect();
    let ls_len = reps.iter().map(|r| r.ls.len()).min().unwrap_or(0);
    let ls_stats: Vec<(f64, f64)> = (0..ls_len).map(|j| curve(&|r: &Rep| r.ls[j])).collect();
    let best = |v: &[(f64, f64)]| {
        (0..v.len())
            .min_by(|&a, &b| v[a].0.total_cmp(&v[b].0))
            .expect("nonempty grid")
    };
    let jk = best(&ks_stats);
    let jl = best(&ls_stats);
    let ratio = |m: f64| m / pcr_mean;
    let rows = vec![
        ClusterRow {
            method: Method::PcrLe.name().into(),
            mean_risk: pcr_mean,
            se: pcr_se,
            tuning: Some(2.0),
            ratio_to_pcr_le: 1.0,
        },
        ClusterRow {
            method: Method::KernelSmoothing.name().into(),
            mean_risk: ks_stats[jk].0,
            se: ks_stats[jk].1,
            tuning: Some(hs[jk]),
            ratio_to_pcr_le: ratio(ks_stats[jk].0),
        },
        ClusterRow {
            method: Method::UniformLs.name().into(),
            mean_risk: ls_stats[jl].0,
            se: ls_stats[jl].1,
            tuning: Some((jl + 1) as f64),
            ratio_to_pcr_le: ratio(ls_stats[jl].0),
        },
    ];
    let floor = (1.0 / (cfg.r * n as f64)).min(cfg.theta.abs() / (n as f64).sqrt());
    Ok(ClusterReport {
        n,
        theta: cfg.theta,
        r: cfg.r,
        replications: used,
        rows,
        two_component_rate: two.len() as f64 / used as f64,
        pcr_le_risk_two_component: mean_se(&two).0,
        risk_bound: cluster_risk_bound(n, cfg.theta, cfg.r),
        ks_lower_constant: (floor > 0.0).then(|| ks_stats[jk].0 / floor),
        ks_curve: hs.iter().zip(&ks_stats).map(|(&h, s)| (h, s.0)).collect(),
        ls_curve: ls_stats.iter().enumerate().map(|(j, s)| (j + 1, s.0)).collect(),
    })
}
