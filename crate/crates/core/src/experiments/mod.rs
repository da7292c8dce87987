//! Monte-Carlo protocols: estimation and testing rate sweeps, tuning
//! sensitivity curves and the two-cluster comparison.
//!
//! Every replication draws from its own generator
//! (`SeedSequence::replication(stream, i)`), so results are a deterministic
//! function of the configuration regardless of thread count.

mod cluster;
mod estimation;
pub mod output;
mod sensitivity;
pub mod stats;
mod testing;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cluster::{cluster_risk_bound, run_cluster_comparison, ClusterConfig, ClusterReport, ClusterRow};
pub use estimation::run_estimation_sweep;
pub use sensitivity::{run_tuning_sensitivity, CurvePoint, SensitivityCurve, Vary};
pub use stats::{fit_log_log_slope, LogLogFit};
pub use testing::run_testing_sweep;

use crate::error::{Error, Result};
use crate::graph::Kernel;
use crate::regress::Method;
use crate::sampling::{DesignModel, EigenBasis, RegressionFunction};
use crate::spectra::EigenOptions;
use crate::tune::{choose_K, choose_eps, Task, TuningRule};

/// Regression function used by estimation sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TruthSpec {
    /// `M / ρ_K^{s/2} ψ_K` with `K` the tuned eigenvector count at each `n`.
    #[default]
    RuleEigenfunction,
    /// `M / ρ_k^{s/2} ψ_k` for a fixed index.
    Eigenfunction {
        index: usize,
    },
    /// `amplitude · Σ_{k=2}^{terms+1} ρ_k^{-decay} ψ_k`.
    EigenfunctionSum {
        decay: f64,
        amplitude: f64,
        terms: usize,
    },
    Constant {
        value: f64,
    },
}

/// Optional replacements for the rule-based tuning parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningOverrides {
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub c0: f64,
    #[serde(rename = "C0")]
    pub big_c0: f64,
    pub kernel: Kernel,
    /// Kernel-smoothing bandwidth; defaults to `(M^2 n)^{-1/(2s+d)}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    /// Laplacian-smoothing penalty; defaults to `1/ρ_K`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Largest alternative index scanned by testing sweeps; defaults to `2K`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_alternative: Option<usize>,
}

impl Default for TuningOverrides {
    fn default() -> Self {
        Self {
            k: None,
            eps: None,
            c0: 1.0,
            big_c0: 1.0,
            kernel: Kernel::Boxcar,
            bandwidth: None,
            lambda: None,
            max_alternative: None,
        }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::PcrLe, Method::SpectralSeries]
}
fn default_m() -> f64 {
    1.0
}
fn default_s() -> u32 {
    1
}
fn default_reps() -> usize {
    100
}
fn default_a() -> f64 {
    0.05
}
fn default_b() -> f64 {
    0.5
}

/// Everything a sweep needs; serialized verbatim into run manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub design: DesignModel,
    #[serde(default = "default_s")]
    pub s: u32,
    #[serde(rename = "M", default = "default_m")]
    pub m: f64,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_reps")]
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub tuning: TuningOverrides,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_m")]
    pub noise_sd: f64,
    #[serde(default)]
    pub truth: TruthSpec,
    #[serde(default)]
    pub eigen: EigenOptions,
    /// Testing sweeps also report thresholds recalibrated under the null.
    #[serde(default)]
    pub calibrate: bool,
}

impl SweepConfig {
    /// Defaults: PCR-LE and spectral series, s = 1, M = 1, 100 replications.
    pub fn new(design: DesignModel, n_grid: Vec<usize>, seed: u64) -> Self {
        Self {
            methods: default_methods(),
            design,
            s: 1,
            m: 1.0,
            n_grid,
            replications: 100,
            seed,
            tuning: TuningOverrides::default(),
            a: 0.05,
            b: 0.5,
            noise_sd: 1.0,
            truth: TruthSpec::default(),
            eigen: EigenOptions::default(),
            calibrate: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::invalid("n grid is empty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("n grid must be strictly ascending"));
        }
        if self.n_grid[0] < 2 {
            return Err(Error::invalid("sample sizes must be at least 2"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods requested"));
        }
        if self.s == 0 || !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::invalid("s must be positive and M positive and finite"));
        }
        if !(self.a > 0.0 && self.a < 1.0) || !(self.b > 0.0 && self.b < 1.0) {
            return Err(Error::invalid("levels a and b must lie in (0, 1)"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid("noise_sd must be finite and nonnegative"));
        }
        if let DesignModel::Cluster { .. } = self.design {
            return Err(Error::invalid(
                "the cluster design has its own protocol (cluster comparison)",
            ));
        }
        if self.design.ambient_dim() == 0 {
            return Err(Error::invalid("design dimension must be positive"));
        }
        if matches!(self.design, DesignModel::Circle { d } if d < 2) {
            return Err(Error::invalid("circle design needs d >= 2"));
        }
        if self.tuning.k == Some(0) {
            return Err(Error::invalid("K override must be positive"));
        }
        if let Some(e) = self.tuning.eps {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::invalid("eps override must be positive"));
            }
        }
        Ok(())
    }

    fn rule(&self, task: Task, n: usize) -> TuningRule {
        let mut rule = TuningRule::new(task, n, self.design.intrinsic_dim(), self.s, self.m);
        rule.c0 = self.tuning.c0;
        rule.big_c0 = self.tuning.big_c0;
        rule
    }

    /// Tuned `(K, ε)` at sample size `n`. `K` is extended to the end of its
    /// eigenvalue cluster in the population basis, so a degenerate
    /// eigenspace is never split.
    pub fn tuned(&self, task: Task, n: usize) -> Result<(usize, f64)> {
        let rule = self.rule(task, n);
        let k = match self.tuning.k {
            Some(k) => k,
            None => cluster_end(self.design.basis(), choose_K(&rule)?),
        }
        .min(n);
        let eps = match self.tuning.eps {
            Some(e) => e,
            None => choose_eps(&rule, k)?,
        };
        Ok((k, eps))
    }

    fn truth(&self, k: usize) -> Result<RegressionFunction> {
        let basis = self.design.basis();
        Ok(match self.truth {
            TruthSpec::RuleEigenfunction => RegressionFunction::Eigenfunction {
                basis,
                index: k,
                amplitude: self.m,
                smoothness: self.s as f64,
            },
            TruthSpec::Eigenfunction { index } => {
                if index == 0 {
                    return Err(Error::invalid("eigenfunction indices start at 1"));
                }
                RegressionFunction::Eigenfunction {
                    basis,
                    index,
                    amplitude: self.m,
                    smoothness: self.s as f64,
                }
            }
            TruthSpec::EigenfunctionSum {
                decay,
                amplitude,
                terms,
            } => RegressionFunction::EigenfunctionSum {
                basis,
                decay,
                amplitude,
                terms,
            },
            TruthSpec::Constant { value } => RegressionFunction::Constant(value),
        })
    }
}

/// Last index (1-based) whose population eigenvalue equals that of `k`.
pub fn cluster_end(basis: EigenBasis, k: usize) -> usize {
    let mut count = k + 8;
    loop {
        let vals = basis.eigenvalues(count);
        let target = vals[k - 1];
        let same = |v: f64| (v - target).abs() <= 1e-9 * target.abs().max(1.0);
        if let Some(pos) = (k..count).find(|&i| !same(vals[i])) {
            return pos;
        }
        count *= 2;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    Estimation,
    Testing,
}

/// Mean in-sample MSE (estimation) or critical radius (testing) at one `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub n: usize,
    pub value: f64,
    /// Standard error of `value`; `None` for critical radii.
    pub se: Option<f64>,
    pub replications: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub method: String,
    #[serde(flatten)]
    pub fit: LogLogFit,
}

/// Tuned parameters at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningRow {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub eps: f64,
}

/// Monte-Carlo type-II error against one alternative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub method: String,
    pub n: usize,
    /// Alternative eigenfunction index; `None` is the null.
    pub index: Option<usize>,
    pub norm_sq: f64,
    pub type_two: f64,
}

/// Empirical type-I error and its binomial standard error at level `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub method: String,
    pub n: usize,
    pub threshold: f64,
    pub type_one: f64,
    pub binomial_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub rows: Vec<SummaryRow>,
    pub slopes: Vec<SlopeRow>,
    /// Minimax exponent for the intrinsic dimension.
    pub reference_slope: f64,
    pub tuning: Vec<TuningRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub power: Vec<PowerRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub calibration: Vec<CalibrationRow>,
}

impl SweepResult {
    pub fn slope(&self, method: &str) -> Option<f64> {
        self.slopes.iter().find(|s| s.method == method).map(|s| s.fit.slope)
    }

    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a SummaryRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }
}

/// Slopes for every method with at least three usable grid points.
fn slopes_from_rows(rows: &[SummaryRow], methods: &[String]) -> Vec<SlopeRow> {
    methods
        .iter()
        .filter_map(|m| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| &r.method == m && r.value.is_finite() && r.value > 0.0)
                .map(|r| (r.n as f64, r.value))
                .collect();
            if pts.len() < 3 {
                return None;
            }
            fit_log_log_slope(&pts)
                .ok()
                .map(|fit| SlopeRow { method: m.clone(), fit })
        })
        .collect()
}

/// Runs `work(i)` for every replication, in parallel, returning outcomes in
/// index order. Numerical failures are counted and dropped; any other error
/// aborts the sweep.
fn run_replications<T: Send>(reps: usize, work: impl Fn(u64) -> Result<T> + Sync) -> Result<(Vec<T>, usize)> {
    let outcomes: Vec<Result<T>> = (0..reps as u64).into_par_iter().map(&work).collect();
    let mut ok = Vec::with_capacity(reps);
    let mut failures = 0;
    for o in outcomes {
        match o {
            Ok(v) => ok.push(v),
            Err(e) if e.is_numerical() => failures += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((ok, failures))
}
