use super::{
    run_replications, slopes_from_rows, stats::mean_se, SummaryRow, SweepConfig, SweepKind, SweepResult, TuningRow,
};
use crate::error::{Error, Result};
use crate::graph::build_graph;
use crate::regress::{
    in_sample_mse, kernel_smoothing_fit, laplacian_smoothing_fit, pcr_le_fit, spectral_series_fit,
    uniform_least_squares_fit, Method,
};
use crate::rng::{stream_id, SeedSequence};
use crate::sampling::{add_noise, RegressionFunction};
use crate::spectra::smallest_eigenpairs;
use crate::tune::Task;

/// Per-`n` parameters shared by all replications.
pub(super) struct Plan {
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub truth: RegressionFunction,
    pub bandwidth: f64,
    pub lambda: f64,
}

pub(super) fn plan(cfg: &SweepConfig, n: usize) -> Result<Plan> {
    let (k, eps) = cfg.tuned(Task::Estimation, n)?;
    let d = cfg.design.intrinsic_dim() as f64;
    let bandwidth = cfg
        .tuning
        .bandwidth
        .unwrap_or_else(|| (cfg.m * cfg.m * n as f64).powf(-1.0 / (2.0 * cfg.s as f64 + d)));
    let rho = cfg.design.basis().mode(k).eigenvalue();
    let lambda = cfg.tuning.lambda.unwrap_or(if rho > 0.0 { 1.0 / rho } else { 1.0 });
    Ok(Plan {
        n,
        k,
        eps,
        truth: cfg.truth(k)?,
        bandwidth,
        lambda,
    })
}

/// In-sample MSE of each configured method on one freshly drawn dataset.
fn replication(cfg: &SweepConfig, plan: &Plan, index: u64) -> Result<Vec<f64>> {
    let mut rng = SeedSequence::new(cfg.seed).replication(stream_id("estimation", plan.n), index);
    let points = cfg.design.sample(plan.n, &mut rng)?;
    let truth = plan.truth.evaluate(&points);
    let y = add_noise(&truth, cfg.noise_sd, &mut rng);
    let needs_graph = cfg
        .methods
        .iter()
        .any(|m| matches!(m, Method::PcrLe | Method::LaplacianSmoothing));
    let graph = if needs_graph {
        Some(build_graph(
            &points,
            plan.eps,
            cfg.tuning.kernel,
            cfg.design.intrinsic_dim(),
        )?)
    } else {
        None
    };
    let spectrum = if cfg.methods.contains(&Method::PcrLe) {
        Some(smallest_eigenpairs(
            graph.as_ref().expect("graph built"),
            plan.k,
            &cfg.eigen,
        )?)
    } else {
        None
    };
    let basis = cfg.design.basis();
    let mut out = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let fitted = match method {
            Method::PcrLe => pcr_le_fit(spectrum.as_ref().expect("spectrum"), &y, plan.k)?.fitted,
            Method::SpectralSeries => spectral_series_fit(&basis.design_matrix(&points, plan.k), &y, plan.k)?.fitted,
            Method::UniformLs => uniform_least_squares_fit(&basis.design_matrix(&points, plan.k), &y)?.fitted,
            Method::KernelSmoothing => kernel_smoothing_fit(&points, &y, plan.bandwidth, cfg.tuning.kernel)?.fitted,
            Method::LaplacianSmoothing => {
                laplacian_smoothing_fit(graph.as_ref().expect("graph"), &y, plan.lambda, 1e-10)?.fitted
            }
        };
        out.push(in_sample_mse(&fitted, &truth)?);
    }
    Ok(out)
}

/// Mean in-sample MSE per method and sample size, with log-log slopes
/// against the estimation exponent `-2s/(2s+d)`.
pub fn run_estimation_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut tuning = Vec::new();
    for &n in &cfg.n_grid {
        let plan = plan(cfg, n)?;
        let (mses, failures) = run_replications(cfg.replications, |i| replication(cfg, &plan, i))?;
        if mses.is_empty() {
            return Err(Error::NotConverged {
                solver: "estimation sweep",
                iterations: failures,
                residual: f64::NAN,
            });
        }
        tuning.push(TuningRow {
            n,
            k: plan.k,
            eps: plan.eps,
        });
        for (j, method) in cfg.methods.iter().enumerate() {
            let vals: Vec<f64> = mses.iter().map(|r| r[j]).collect();
            let (mean, se) = mean_se(&vals);
            rows.push(SummaryRow {
                method: method.name().to_string(),
                n,
                value: mean,
                se: Some(se),
                replications: vals.len(),
                failures,
            });
        }
    }
    let names: Vec<String> = cfg.methods.iter().map(|m| m.name().to_string()).collect();
    let (s, d) = (cfg.s as f64, cfg.design.intrinsic_dim() as f64);
    Ok(SweepResult {
        kind: SweepKind::Estimation,
        slopes: slopes_from_rows(&rows, &names),
        rows,
        reference_slope: -2.0 * s / (2.0 * s + d),
        tuning,
        power: Vec::new(),
        calibration: Vec::new(),
    })
}
