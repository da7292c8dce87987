use super::{
    run_replications, slopes_from_rows, stats::empirical_threshold, CalibrationRow, PowerRow, SummaryRow, SweepConfig,
    SweepKind, SweepResult, TuningRow,
};
use crate::error::{Error, Result};
use crate::graph::build_graph;
use crate::regress::{pcr_le_test, spectral_series_test, test_threshold, Method};
use crate::rng::{stream_id, SeedSequence};
use crate::sampling::{add_noise, Mode};
use crate::spectra::smallest_eigenpairs;
use crate::tune::Task;

struct Plan {
    n: usize,
    k: usize,
    eps: f64,
    /// Alternative modes `ψ_2, ψ_3, ...` with their prefactors `M/ρ^{s/2}`.
    alternatives: Vec<(Mode, f64)>,
}

/// `stats[method][alt]`, with `alt = 0` the null and `alt = j` alternative
/// `ψ_{j+1}`.
fn replication(cfg: &SweepConfig, plan: &Plan, index: u64) -> Result<Vec<Vec<f64>>> {
    let n = plan.n;
    let mut rng = SeedSequence::new(cfg.seed).replication(stream_id("testing", n), index);
    let points = cfg.design.sample(n, &mut rng)?;
    let spectrum = if cfg.methods.contains(&Method::PcrLe) {
        let g = build_graph(&points, plan.eps, cfg.tuning.kernel, cfg.design.intrinsic_dim())?;
        Some(smallest_eigenpairs(&g, plan.k, &cfg.eigen)?)
    } else {
        None
    };
    let phi = cfg.design.basis().design_matrix(&points, plan.k);
    let mut stats = vec![Vec::with_capacity(plan.alternatives.len() + 1); cfg.methods.len()];
    let zero = vec![0.0; n];
    for alt in 0..=plan.alternatives.len() {
        let truth: Vec<f64> = if alt == 0 {
            zero.clone()
        } else {
            let (mode, c) = &plan.alternatives[alt - 1];
            points.rows().map(|x| c * mode.eval(x)).collect()
        };
        let y = add_noise(&truth, cfg.noise_sd, &mut rng);
        for (j, method) in cfg.methods.iter().enumerate() {
            let t = match method {
                Method::PcrLe => pcr_le_test(spectrum.as_ref().expect("spectrum"), &y, plan.k, cfg.a)?.statistic,
                Method::SpectralSeries => spectral_series_test(&phi, &y, plan.k, cfg.a)?.statistic,
                other => return Err(Error::invalid(format!("{other} has no test statistic"))),
            };
            stats[j].push(t);
        }
    }
    Ok(stats)
}

/// Type-II error scan over single-eigenfunction alternatives and the
/// resulting critical radius per method and sample size, with slopes against
/// the testing exponent `-4s/(4s+d)`.
pub fn run_testing_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    if let Some(m) = cfg
        .methods
        .iter()
        .find(|m| !matches!(m, Method::PcrLe | Method::SpectralSeries))
    {
        return Err(Error::invalid(format!("{m} has no test statistic")));
    }
    let basis = cfg.design.basis();
    let reps = cfg.replications;
    let mut rows = Vec::new();
    let mut power = Vec::new();
    let mut calibration = Vec::new();
    let mut tuning = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for &n in &cfg.n_grid {
        let (k, eps) = cfg.tuned(Task::Testing, n)?;
        let kmax = cfg.tuning.max_alternative.unwrap_or(2 * k).max(2);
        let alternatives = basis.modes(kmax)[1..]
            .iter()
            .map(|m| {
                let rho = m.eigenvalue();
                (m.clone(), cfg.m / rho.powf(cfg.s as f64 / 2.0))
            })
            .collect();
        let plan = Plan {
            n,
            k,
            eps,
            alternatives,
        };
        let (outcomes, failures) = run_replications(reps, |i| replication(cfg, &plan, i))?;
        if outcomes.is_empty() {
            return Err(Error::NotConverged {
                solver: "testing sweep",
                iterations: failures,
                residual: f64::NAN,
            });
        }
        tuning.push(TuningRow { n, k, eps });
        let used = outcomes.len();
        let closed = test_threshold(k, n, cfg.a)?;
        for (j, method) in cfg.methods.iter().enumerate() {
            let column = |alt: usize| -> Vec<f64> { outcomes.iter().map(|o| o[j][alt]).collect() };
            let mut modes = vec![(method.name().to_string(), closed)];
            if cfg.calibrate {
                modes.push((
                    format!("{}-calibrated", method.name()),
                    empirical_threshold(&column(0), cfg.a),
                ));
            }
            for (label, threshold) in modes {
                if !labels.contains(&label) {
                    labels.push(label.clone());
                }
                let reject_rate =
                    |alt: usize| column(alt).iter().filter(|&&t| t >= threshold).count() as f64 / used as f64;
                let type_one = reject_rate(0);
                calibration.push(CalibrationRow {
                    method: label.clone(),
                    n,
                    threshold,
                    type_one,
                    binomial_se: (cfg.a * (1.0 - cfg.a) / used as f64).sqrt(),
                });
                power.push(PowerRow {
                    method: label.clone(),
                    n,
                    index: None,
                    norm_sq: 0.0,
                    type_two: 1.0 - type_one,
                });
                let mut critical = f64::NAN;
                for (alt, (_, c)) in plan.alternatives.iter().enumerate() {
                    let norm_sq = c * c;
                    let type_two = 1.0 - reject_rate(alt + 1);
                    power.push(PowerRow {
                        method: label.clone(),
                        n,
                        index: Some(alt + 2),
                        norm_sq,
                        type_two,
                    });
                    if type_two <= cfg.b && !(critical <= norm_sq) {
                        critical = norm_sq;
                    }
                }
                rows.push(SummaryRow {
                    method: label,
                    n,
                    value: critical,
                    se: None,
                    replications: used,
                    failures,
                });
            }
        }
    }
    let (s, d) = (cfg.s as f64, cfg.design.intrinsic_dim() as f64);
    Ok(SweepResult {
        kind: SweepKind::Testing,
        slopes: slopes_from_rows(&rows, &labels),
        rows,
        reference_slope: -4.0 * s / (4.0 * s + d),
        tuning,
        power,
        calibration,
    })
}
