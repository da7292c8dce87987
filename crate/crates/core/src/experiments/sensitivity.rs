use serde::{Deserialize, Serialize};

use super::{estimation, run_replications, stats::mean_se, SweepConfig};
use crate::error::{Error, Result};
use crate::graph::build_graph;
use crate::regress::{in_sample_mse, pcr_le_fit};
use crate::rng::{stream_id, SeedSequence};
use crate::sampling::add_noise;
use crate::spectra::smallest_eigenpairs;
use crate::tune::Task;

/// Which tuning parameter a sensitivity curve varies, and over which values.
/// An empty list selects the default grid: `K = 1..=50`, or seven
/// geometrically spaced radii spanning the admissible bracket.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "parameter", content = "values")]
pub enum Vary {
    #[serde(rename = "K")]
    K(Vec<usize>),
    #[serde(rename = "eps")]
    Eps(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub value: f64,
    pub mean: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub parameter: String,
    pub n: usize,
    /// Rule-based values held fixed while the other parameter varies.
    #[serde(rename = "K")]
    pub k: usize,
    pub eps: f64,
    pub bracket: (f64, f64),
    pub rows: Vec<CurvePoint>,
    pub replications: usize,
    pub failures: usize,
}

impl SensitivityCurve {
    /// Index of the smallest mean.
    pub fn argmin(&self) -> usize {
        (0..self.rows.len())
            .min_by(|&a, &b| self.rows[a].mean.total_cmp(&self.rows[b].mean))
            .unwrap_or(0)
    }
}

/// PCR-LE in-sample MSE as one tuning parameter varies with the other held at
/// its rule-based value. Uses the single sample size in `cfg.n_grid`.
pub fn run_tuning_sensitivity(cfg: &SweepConfig, vary: &Vary) -> Result<SensitivityCurve> {
    cfg.validate()?;
    if cfg.n_grid.len() != 1 {
        return Err(Error::invalid("a sensitivity curve uses exactly one sample size"));
    }
    let n = cfg.n_grid[0];
    let plan = estimation::plan(cfg, n)?;
    let bracket = cfg.rule(Task::Estimation, n).eps_bracket(plan.k)?;
    let dim = cfg.design.intrinsic_dim();
    let seq = SeedSequence::new(cfg.seed);
    let (parameter, values, outcomes) = match vary {
        Vary::K(ks) => {
            let ks: Vec<usize> = if ks.is_empty() {
                (1..=50.min(n)).collect()
            } else {
                ks.clone()
            };
            if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > n) {
                return Err(Error::invalid(format!("K = {bad} outside 1..={n}")));
            }
            let kmax = *ks.iter().max().ok_or_else(|| Error::invalid("empty K grid"))?;
            let run = run_replications(cfg.replications, |i| {
                let mut rng = seq.replication(stream_id("sensitivity-K", n), i);
                let points = cfg.design.sample(n, &mut rng)?;
                let truth = plan.truth.evaluate(&points);
                let y = add_noise(&truth, cfg.noise_sd, &mut rng);
                let g = build_graph(&points, plan.eps, cfg.tuning.kernel, dim)?;
                let spectrum = smallest_eigenpairs(&g, kmax, &cfg.eigen)?;
                ks.iter()
                    .map(|&k| in_sample_mse(&pcr_le_fit(&spectrum, &y, k)?.fitted, &truth))
                    .collect::<Result<Vec<f64>>>()
            })?;
            ("K", ks.iter().map(|&k| k as f64).collect::<Vec<f64>>(), run)
        }
        Vary::Eps(es) => {
            let es: Vec<f64> = if es.is_empty() {
                let (lo, hi) = bracket;
                if lo > hi {
                    return Err(Error::EmptyBracket { lower: lo, upper: hi });
                }
                (0..7).map(|j| lo * (hi / lo).powf(j as f64 / 6.0)).collect()
            } else {
                es.clone()
            };
            if let Some(&bad) = es.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
                return Err(Error::invalid(format!("radius {bad} must be positive")));
            }
            let run = run_replications(cfg.replications, |i| {
                let mut rng = seq.replication(stream_id("sensitivity-eps", n), i);
                let points = cfg.design.sample(n, &mut rng)?;
                let truth = plan.truth.evaluate(&points);
                let y = add_noise(&truth, cfg.noise_sd, &mut rng);
                es.iter()
                    .map(|&e| {
                        let g = build_graph(&points, e, cfg.tuning.kernel, dim)?;
                        let spectrum = smallest_eigenpairs(&g, plan.k, &cfg.eigen)?;
                        in_sample_mse(&pcr_le_fit(&spectrum, &y, plan.k)?.fitted, &truth)
                    })
                    .collect::<Result<Vec<f64>>>()
            })?;
            ("eps", es, run)
        }
    };
    let (mses, failures) = outcomes;
    if mses.is_empty() {
        return Err(Error::NotConverged {
            solver: "sensitivity sweep",
            iterations: failures,
            residual: f64::NAN,
        });
    }
    let rows = values
        .iter()
        .enumerate()
        .map(|(j, &value)| {
            let col: Vec<f64> = mses.iter().map(|r| r[j]).collect();
            let (mean, se) = mean_se(&col);
            CurvePoint { value, mean, se }
        })
        .collect();
    Ok(SensitivityCurve {
        parameter: parameter.to_string(),
        n,
        k: plan.k,
        eps: plan.eps,
        bracket,
        rows,
        replications: mses.len(),
        failures,
    })
}
