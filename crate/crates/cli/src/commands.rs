use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use pcrle::experiments::{
    output, run_cluster_comparison, run_estimation_sweep, run_testing_sweep, run_tuning_sensitivity, ClusterConfig,
    SweepConfig, SweepKind, SweepResult, Vary,
};
use pcrle::graph::build_graph;
use pcrle::regress::{self, Method};
use pcrle::rng::{stream_id, SeedSequence};
use pcrle::sampling::{make_responses, Dataset, DesignModel, EigenBasis, RegressionFunction};
use pcrle::sparsify::{certify_sigma, default_test_vectors, sparsify_uniform};
use pcrle::spectra::{smallest_eigenpairs, EigenOptions, LaplacianSpectrum, SolverKind};
use pcrle::tune::{choose_K, choose_eps, Task, TuningRule};
use serde::Serialize;
use serde_json::{json, Value};

use crate::manifest::Run;
use crate::plot::{Chart, Series};
use crate::{
    BasisArg, CliError, ClusterArgs, DesignArg, FitArgs, Global, ModelArgs, SampleArgs, SolverArg, SparsifyArgs,
    SweepArgs, TestArgs, TruthArg,
};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn resolve(g: &Global, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        g.out_dir.join(p)
    }
}

/// `fit.csv` -> `fit.<ext>`
fn sibling(p: &Path, ext: &str) -> PathBuf {
    p.with_extension(ext)
}

fn read_data(path: &Path, intrinsic_dim: Option<usize>) -> Result<Dataset, CliError> {
    let f = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(Dataset::read_csv(BufReader::new(f), intrinsic_dim)?)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> pcrle::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn sample(g: &Global, a: &SampleArgs) -> Result<(), CliError> {
    let seed = g.seed.unwrap_or(0);
    let design = match a.design {
        DesignArg::Cube => DesignModel::Cube { d: a.dim },
        DesignArg::Circle => DesignModel::Circle { d: a.dim },
        DesignArg::Cluster => DesignModel::Cluster { r: a.r },
    };
    let truth = match a.truth {
        TruthArg::Eigenfunction => {
            if a.index == 0 {
                return Err(usage("--index counts from 1"));
            }
            RegressionFunction::Eigenfunction {
                basis: design.basis(),
                index: a.index,
                amplitude: a.m,
                smoothness: a.s as f64,
            }
        }
        TruthArg::Cluster => RegressionFunction::PiecewiseCluster { theta: a.theta },
        TruthArg::Constant => RegressionFunction::Constant(a.value),
    };
    let mut rng = SeedSequence::new(seed).stream(stream_id("sample", a.n));
    let points = design.sample(a.n, &mut rng)?;
    let data = make_responses(&points, &truth, a.noise_sd, &mut rng)?;

    let out = resolve(g, &a.out);
    let config = json!({
        "design": design,
        "n": a.n,
        "truth": format!("{truth:?}"),
        "noise_sd": a.noise_sd,
    });
    let summary = json!({
        "n": data.len(),
        "ambient_dim": data.ambient_dim(),
        "intrinsic_dim": data.intrinsic_dim(),
        "truth_norm_sq": truth.squared_norm(),
    });
    let mut run = Run::new("sample", config, seed, sibling(&out, "manifest.json"));
    run.write(&out, &csv_bytes(|b| data.write_csv(b))?)?;
    run.write_json(&sibling(&out, "json"), &summary)?;
    run.finish()
}

/// Key-value pairs from `--auto-tune`.
#[derive(Debug, Clone, Copy, Serialize)]
struct AutoTune {
    s: u32,
    #[serde(rename = "M")]
    m: f64,
    c0: f64,
    #[serde(rename = "C0")]
    big_c0: f64,
}

fn parse_auto_tune(items: &[String]) -> Result<AutoTune, CliError> {
    let mut t = AutoTune {
        s: 1,
        m: 1.0,
        c0: 1.0,
        big_c0: 1.0,
    };
    for item in items {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("--auto-tune expects KEY=VALUE, got `{item}`")))?;
        let bad = || usage(format!("--auto-tune: bad value `{v}` for `{k}`"));
        match k {
            "s" => t.s = v.parse().map_err(|_| bad())?,
            "M" => t.m = v.parse().map_err(|_| bad())?,
            "c0" => t.c0 = v.parse().map_err(|_| bad())?,
            "C0" => t.big_c0 = v.parse().map_err(|_| bad())?,
            _ => return Err(usage(format!("--auto-tune: unknown key `{k}` (expected s, M, c0, C0)"))),
        }
    }
    Ok(t)
}

/// Tuning parameters after filling gaps from the rules.
#[derive(Debug, Default, Serialize)]
struct Resolved {
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    auto_tune: Option<AutoTune>,
}

struct Tuner {
    rule: Option<TuningRule>,
    auto: Option<AutoTune>,
}

impl Tuner {
    fn new(m: &ModelArgs, task: Task, n: usize, dim: usize) -> Result<Self, CliError> {
        let auto = m.auto_tune.as_deref().map(parse_auto_tune).transpose()?;
        let rule = auto.map(|t| TuningRule {
            c0: t.c0,
            big_c0: t.big_c0,
            ..TuningRule::new(task, n, dim, t.s, t.m)
        });
        Ok(Self { rule, auto })
    }

    fn k(&self, given: Option<usize>, method: Method) -> Result<usize, CliError> {
        match (given, &self.rule) {
            (Some(k), _) => Ok(k),
            (None, Some(rule)) => Ok(choose_K(rule)?),
            (None, None) => Err(usage(format!("{method} needs --k (or --auto-tune)"))),
        }
    }

    fn eps(&self, given: Option<f64>, k: usize, method: Method) -> Result<f64, CliError> {
        match (given, &self.rule) {
            (Some(e), _) => Ok(e),
            (None, Some(rule)) => Ok(choose_eps(rule, k.max(1))?),
            (None, None) => Err(usage(format!("{method} needs --eps (or --auto-tune)"))),
        }
    }
}

fn basis_for(arg: Option<BasisArg>, data: &Dataset, method: Method) -> Result<EigenBasis, CliError> {
    match arg {
        Some(BasisArg::Cube) => Ok(EigenBasis::Cube {
            dim: data.ambient_dim(),
        }),
        Some(BasisArg::Circle) if data.ambient_dim() >= 2 => Ok(EigenBasis::Circle),
        Some(BasisArg::Circle) => Err(usage("the circle basis needs at least two coordinates")),
        Some(BasisArg::Interval) => Ok(EigenBasis::UnitInterval),
        None => Err(usage(format!("{method} needs --basis"))),
    }
}

fn eigen_options(m: &ModelArgs, seed: u64) -> EigenOptions {
    EigenOptions {
        seed,
        tol: m.eigen_tol,
        solver: match m.solver {
            SolverArg::Auto => SolverKind::Auto,
            SolverArg::Dense => SolverKind::Dense,
            SolverArg::Lanczos => SolverKind::Lanczos,
        },
        ..EigenOptions::default()
    }
}

fn spectrum_for(data: &Dataset, eps: f64, k: usize, m: &ModelArgs, seed: u64) -> Result<LaplacianSpectrum, CliError> {
    let graph = build_graph(&data.points, eps, m.kernel, data.intrinsic_dim())?;
    Ok(smallest_eigenpairs(
        &graph,
        k.clamp(1, data.len()),
        &eigen_options(m, seed),
    )?)
}

fn model_config(method: Method, m: &ModelArgs, r: &Resolved) -> Value {
    json!({
        "method": method,
        "input": m.input.display().to_string(),
        "kernel": m.kernel,
        "basis": m.basis.map(|b| format!("{b:?}").to_lowercase()),
        "intrinsic_dim": m.intrinsic_dim,
        "solver": format!("{:?}", m.solver).to_lowercase(),
        "eigen_tol": m.eigen_tol,
        "tuning": r,
    })
}

pub fn fit(g: &Global, a: &FitArgs) -> Result<(), CliError> {
    let seed = g.seed.unwrap_or(EigenOptions::default().seed);
    let m = &a.model;
    let data = read_data(&m.input, m.intrinsic_dim)?;
    let (n, d) = (data.len(), data.intrinsic_dim());
    let tuner = Tuner::new(m, Task::Estimation, n, d)?;
    let mut r = Resolved {
        auto_tune: tuner.auto,
        ..Resolved::default()
    };
    let y = &data.responses;
    let fit = match a.method {
        Method::PcrLe => {
            let k = tuner.k(m.k, a.method)?;
            let eps = tuner.eps(m.eps, k, a.method)?;
            (r.k, r.eps) = (Some(k), Some(eps));
            let spectrum = spectrum_for(&data, eps, k, m, seed)?;
            regress::pcr_le_fit(&spectrum, y, k)?.with_eps(eps)
        }
        Method::SpectralSeries | Method::UniformLs => {
            let k = tuner.k(m.k, a.method)?;
            r.k = Some(k);
            let phi = basis_for(m.basis, &data, a.method)?.design_matrix(&data.points, k);
            if a.method == Method::SpectralSeries {
                regress::spectral_series_fit(&phi, y, k)?
            } else {
                regress::uniform_least_squares_fit(&phi, y)?
            }
        }
        Method::KernelSmoothing => {
            let h = match (a.bandwidth, tuner.auto) {
                (Some(h), _) => h,
                (None, Some(t)) => (t.m * t.m * n as f64).powf(-1.0 / (2.0 * t.s as f64 + d as f64)),
                (None, None) => return Err(usage("kernel-smoothing needs --bandwidth (or --auto-tune)")),
            };
            r.bandwidth = Some(h);
            regress::kernel_smoothing_fit(&data.points, y, h, m.kernel)?
        }
        Method::LaplacianSmoothing => {
            let kk = if a.lambda.is_some() && m.eps.is_some() {
                1
            } else {
                tuner.k(m.k, a.method)?
            };
            let eps = tuner.eps(m.eps, kk, a.method)?;
            let graph = build_graph(&data.points, eps, m.kernel, d)?;
            let lam = match a.lambda {
                Some(l) => l,
                None => {
                    // 1/λ_K of the graph Laplacian.
                    let spec = smallest_eigenpairs(&graph, kk.clamp(1, n), &eigen_options(m, seed))?;
                    let top = *spec.eigenvalues().last().expect("nonempty");
                    if top <= 0.0 {
                        return Err(usage("graph is too disconnected to pick λ; pass --lambda"));
                    }
                    r.k = Some(kk);
                    1.0 / top
                }
            };
            (r.eps, r.lambda) = (Some(eps), Some(lam));
            regress::laplacian_smoothing_fit(&graph, y, lam, a.tol)?
        }
    };

    let out = resolve(g, &a.out);
    let mut run = Run::new(
        "fit",
        model_config(a.method, m, &r),
        seed,
        sibling(&out, "manifest.json"),
    );
    let has_truth = data.truth.iter().all(|t| t.is_finite());
    let csv = {
        let dim = data.ambient_dim();
        let mut s = String::new();
        for j in 1..=dim {
            s.push_str(&format!("x{j},"));
        }
        s.push_str("y,fitted\n");
        for (i, x) in data.points.rows().enumerate() {
            for v in x {
                s.push_str(&format!("{v},"));
            }
            s.push_str(&format!("{},{}\n", y[i], fit.fitted[i]));
        }
        s
    };
    let mut result = serde_json::to_value(&fit)?;
    if has_truth {
        result["in_sample_mse"] = json!(regress::in_sample_mse(&fit.fitted, &data.truth)?);
    }
    run.write(&out, csv.as_bytes())?;
    run.write_json(&sibling(&out, "json"), &result)?;
    run.finish()
}

pub fn test(g: &Global, a: &TestArgs) -> Result<(), CliError> {
    let seed = g.seed.unwrap_or(EigenOptions::default().seed);
    let m = &a.model;
    let data = read_data(&m.input, m.intrinsic_dim)?;
    let tuner = Tuner::new(m, Task::Testing, data.len(), data.intrinsic_dim())?;
    let mut r = Resolved {
        auto_tune: tuner.auto,
        ..Resolved::default()
    };
    let y = &data.responses;
    let k = tuner.k(m.k, a.method)?;
    r.k = Some(k);
    let result = match a.method {
        Method::PcrLe => {
            let eps = tuner.eps(m.eps, k, a.method)?;
            r.eps = Some(eps);
            let spectrum = spectrum_for(&data, eps, k, m, seed)?;
            regress::pcr_le_test(&spectrum, y, k, a.a)?
        }
        Method::SpectralSeries => {
            let phi = basis_for(m.basis, &data, a.method)?.design_matrix(&data.points, k);
            regress::spectral_series_test(&phi, y, k, a.a)?
        }
        other => {
            return Err(usage(format!(
                "no test is defined for {other}; use pcr-le or spectral-series"
            )))
        }
    };
    let mut config = model_config(a.method, m, &r);
    config["a"] = json!(a.a);
    let out = resolve(g, &a.out);
    let csv = format!(
        "method,n,K,statistic,threshold,reject\n{},{},{},{},{},{}\n",
        result.method, result.n, result.k, result.statistic, result.threshold, result.reject
    );
    let mut run = Run::new("test", config, seed, sibling(&out, "manifest.json"));
    run.write_json(&sibling(&out, "json"), &result)?;
    run.write(&sibling(&out, "csv"), csv.as_bytes())?;
    run.finish()
}

/// On-disk sweep config: the experiment config plus a `task` selector and,
/// for sensitivity curves, a `vary` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SweepTask {
    Estimation,
    Testing,
    Sensitivity,
}

fn parse_sweep(text: &str, seed: Option<u64>) -> Result<(SweepTask, SweepConfig, Option<Vary>), CliError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| usage(format!("config: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| usage("config: expected a JSON object"))?;
    let task = match obj.remove("task") {
        Some(t) => serde_json::from_value(t).map_err(|e| usage(format!("config `task`: {e}")))?,
        None => SweepTask::Estimation,
    };
    let vary = obj
        .remove("vary")
        .map(serde_json::from_value::<Vary>)
        .transpose()
        .map_err(|e| usage(format!("config `vary`: {e}")))?;
    if let Some(s) = seed {
        obj.insert("seed".into(), json!(s));
    }
    let cfg: SweepConfig = serde_json::from_value(value).map_err(|e| usage(format!("config: {e}")))?;
    cfg.validate()?;
    match (task, &vary) {
        (SweepTask::Sensitivity, None) => return Err(usage("config: a sensitivity sweep needs `vary`")),
        (SweepTask::Estimation | SweepTask::Testing, Some(_)) => {
            return Err(usage("config: `vary` only applies to task \"sensitivity\""))
        }
        (SweepTask::Sensitivity, Some(_)) if cfg.n_grid.len() != 1 => {
            return Err(usage("config: a sensitivity sweep uses exactly one n in `n_grid`"))
        }
        _ => {}
    }
    Ok((task, cfg, vary))
}

fn sweep_chart(r: &SweepResult) -> String {
    let (title, y_label) = match r.kind {
        SweepKind::Estimation => ("Estimation error", "mean squared error"),
        SweepKind::Testing => ("Critical radius", "critical radius"),
    };
    let mut names: Vec<&str> = Vec::new();
    for row in &r.rows {
        if !names.contains(&row.method.as_str()) {
            names.push(&row.method);
        }
    }
    let series = names
        .iter()
        .map(|m| Series {
            label: m.to_string(),
            points: r.rows_for(m).map(|row| (row.n as f64, row.value)).collect(),
        })
        .collect();
    Chart {
        title,
        x_label: "n",
        y_label,
        series,
        reference_slope: Some(r.reference_slope),
    }
    .render()
}

pub fn sweep(g: &Global, a: &SweepArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| usage(format!("{}: {e}", a.config.display())))?;
    let (task, cfg, vary) = parse_sweep(&text, g.seed)?;
    let mut config = serde_json::to_value(&cfg)?;
    config["task"] = json!(task);
    if let Some(v) = &vary {
        config["vary"] = serde_json::to_value(v)?;
    }
    let dir = &g.out_dir;
    let mut run = Run::new("sweep", config, cfg.seed, dir.join("manifest.json"));
    if a.dry_run {
        return run.dry_run().finish();
    }
    match task {
        SweepTask::Estimation | SweepTask::Testing => {
            let r = if task == SweepTask::Estimation {
                run_estimation_sweep(&cfg)?
            } else {
                run_testing_sweep(&cfg)?
            };
            run.write(
                &dir.join("results.csv"),
                &csv_bytes(|b| output::write_summary_csv(&r, b))?,
            )?;
            run.write(
                &dir.join("slopes.csv"),
                &csv_bytes(|b| output::write_slopes_csv(&r, b))?,
            )?;
            if task == SweepTask::Testing {
                run.write(&dir.join("power.csv"), &csv_bytes(|b| output::write_power_csv(&r, b))?)?;
                run.write(
                    &dir.join("calibration.csv"),
                    &csv_bytes(|b| output::write_calibration_csv(&r, b))?,
                )?;
            }
            run.write(&dir.join("plot.svg"), sweep_chart(&r).as_bytes())?;
        }
        SweepTask::Sensitivity => {
            let vary = vary.expect("checked in parse_sweep");
            let curve = run_tuning_sensitivity(&cfg, &vary)?;
            run.write(
                &dir.join("results.csv"),
                &csv_bytes(|b| output::write_curve_csv(&curve, b))?,
            )?;
            let chart = Chart {
                title: "Tuning sensitivity",
                x_label: &curve.parameter,
                y_label: "mean squared error",
                series: vec![Series {
                    label: Method::PcrLe.name().into(),
                    points: curve.rows.iter().map(|p| (p.value, p.mean)).collect(),
                }],
                reference_slope: None,
            };
            run.write(&dir.join("plot.svg"), chart.render().as_bytes())?;
        }
    }
    run.finish()
}

pub fn cluster_demo(g: &Global, a: &ClusterArgs) -> Result<(), CliError> {
    let seed = g.seed.unwrap_or(0);
    let mut cfg = ClusterConfig::new(a.n, a.theta, a.r, a.reps, seed);
    cfg.noise_sd = a.noise_sd;
    let report = run_cluster_comparison(&cfg)?;
    let out = resolve(g, &a.out);
    let mut run = Run::new(
        "cluster-demo",
        serde_json::to_value(&cfg)?,
        seed,
        sibling(&out, "manifest.json"),
    );
    run.write(&out, &csv_bytes(|b| output::write_cluster_csv(&report, b))?)?;
    run.write_json(&sibling(&out, "json"), &report)?;
    run.finish()
}

pub fn sparsify(g: &Global, a: &SparsifyArgs) -> Result<(), CliError> {
    let seed = g.seed.unwrap_or(0);
    let data = read_data(&a.input, a.intrinsic_dim)?;
    let graph = build_graph(&data.points, a.eps, a.kernel, data.intrinsic_dim())?;
    let mut rng = SeedSequence::new(seed).stream(stream_id("sparsify", graph.n()));
    let sparse = sparsify_uniform(&graph, a.keep, &mut rng)?;
    let tests = default_test_vectors(&graph, &mut rng)?;
    let report = certify_sigma(&graph, &sparse, &tests, a.sigma_target)?;
    let config = json!({
        "input": a.input.display().to_string(),
        "eps": a.eps,
        "kernel": a.kernel,
        "keep": a.keep,
        "sigma_target": a.sigma_target,
    });
    let out = resolve(g, &a.out);
    let mut edges = Vec::new();
    sparse.write_edge_list(&mut edges)?;
    let mut run = Run::new("sparsify", config, seed, sibling(&out, "manifest.json"));
    run.write(&out, &edges)?;
    run.write_json(&sibling(&out, "json"), &report)?;
    run.finish()
}
