//! Estimators and signal-detection tests.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::{build_graph, sobolev_seminorm, Kernel, NeighborhoodGraph};
use crate::linalg::{conjugate_gradient, dot, mean_sq_diff, LinearOperator};
use crate::sampling::PointCloud;
use crate::spectra::LaplacianSpectrum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PcrLe,
    SpectralSeries,
    KernelSmoothing,
    UniformLs,
    LaplacianSmoothing,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::PcrLe,
        Method::SpectralSeries,
        Method::KernelSmoothing,
        Method::UniformLs,
        Method::LaplacianSmoothing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::PcrLe => "pcr-le",
            Method::SpectralSeries => "spectral-series",
            Method::KernelSmoothing => "kernel-smoothing",
            Method::UniformLs => "uniform-ls",
            Method::LaplacianSmoothing => "laplacian-smoothing",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }
}

/// Tuning parameters that produced a fit; unused ones are `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub method: Method,
    #[serde(skip)]
    pub fitted: Vec<f64>,
    pub tuning: Tuning,
    /// Trace of the smoother matrix where it is cheap to compute.
    pub degrees_of_freedom: Option<f64>,
    /// Basis coefficients for the series methods.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub rank_deficient: bool,
    pub n: usize,
    /// `‖f̂‖_n^2`
    pub fitted_norm_sq: f64,
    pub fitted_mean: f64,
}

impl FitResult {
    fn new(method: Method, fitted: Vec<f64>, tuning: Tuning, degrees_of_freedom: Option<f64>) -> Self {
        let n = fitted.len();
        let fitted_norm_sq = dot(&fitted, &fitted) / n as f64;
        let fitted_mean = fitted.iter().sum::<f64>() / n as f64;
        Self {
            method,
            fitted,
            tuning,
            degrees_of_freedom,
            coefficients: None,
            rank_deficient: false,
            n,
            fitted_norm_sq,
            fitted_mean,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.tuning.eps = Some(eps);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: Method,
    pub statistic: f64,
    pub threshold: f64,
    pub level: f64,
    pub reject: bool,
    #[serde(rename = "K")]
    pub k: usize,
    pub n: usize,
}

impl TestResult {
    fn new(method: Method, statistic: f64, threshold: f64, level: f64, k: usize, n: usize) -> Self {
        Self {
            method,
            statistic,
            threshold,
            level,
            reject: statistic >= threshold,
            k,
            n,
        }
    }
}

/// `K/n + (1/n) √(2K/a)`.
pub fn test_threshold(k: usize, n: usize, a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::invalid(format!("level {a} must lie in (0, 1)")));
    }
    let (k, n) = (k as f64, n as f64);
    Ok(k / n + (2.0 * k / a).sqrt() / n)
}

/// `⟨Y, v_k⟩` for `k < K`.
pub fn eigen_coefficients(spectrum: &LaplacianSpectrum, y: &[f64], k: usize) -> Result<Vec<f64>> {
    check_len(spectrum.n(), y.len())?;
    if k > spectrum.k() {
        return Err(Error::invalid(format!(
            "K = {k} exceeds the {} available eigenpairs",
            spectrum.k()
        )));
    }
    Ok((0..k).map(|c| dot(spectrum.vector(c), y)).collect())
}

/// Projection of `Y` onto the first `K` eigenvectors.
pub fn pcr_le_fit(spectrum: &LaplacianSpectrum, y: &[f64], k: usize) -> Result<FitResult> {
    let coef = eigen_coefficients(spectrum, y, k)?;
    let mut fitted = vec![0.0; y.len()];
    for (c, &a) in coef.iter().enumerate() {
        crate::linalg::axpy(a, spectrum.vector(c), &mut fitted);
    }
    let tuning = Tuning {
        k: Some(k),
        ..Tuning::default()
    };
    let mut out = FitResult::new(Method::PcrLe, fitted, tuning, Some(k as f64));
    out.coefficients = Some(coef);
    Ok(out)
}

/// `T̂ = (1/n) Σ_{k ≤ K} ⟨Y, v_k⟩^2` against `t_a`.
pub fn pcr_le_test(spectrum: &LaplacianSpectrum, y: &[f64], k: usize, a: f64) -> Result<TestResult> {
    if k == 0 {
        return Err(Error::invalid("test needs K ≥ 1"));
    }
    let n = y.len();
    let threshold = test_threshold(k, n, a)?;
    let coef = eigen_coefficients(spectrum, y, k)?;
    let stat = coef.iter().map(|c| c * c).sum::<f64>() / n as f64;
    Ok(TestResult::new(Method::PcrLe, stat, threshold, a, k, n))
}

fn check_basis(basis_values: &DMatrix<f64>, y: &[f64], k: usize) -> Result<()> {
    check_len(basis_values.nrows(), y.len())?;
    if k > basis_values.ncols() {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: basis_values.ncols(),
        });
    }
    Ok(())
}

/// `ã_k = (1/n) Σ_i Y_i ψ_k(X_i)` for the first `K` columns.
pub fn spectral_coefficients(basis_values: &DMatrix<f64>, y: &[f64], k: usize) -> Result<Vec<f64>> {
    check_basis(basis_values, y, k)?;
    let n = y.len() as f64;
    Ok((0..k).map(|c| dot(basis_values.column(c).as_slice(), y) / n).collect())
}

pub fn spectral_series_fit(basis_values: &DMatrix<f64>, y: &[f64], k: usize) -> Result<FitResult> {
    let coef = spectral_coefficients(basis_values, y, k)?;
    let mut fitted = vec![0.0; y.len()];
    for (c, &a) in coef.iter().enumerate() {
        crate::linalg::axpy(a, basis_values.column(c).as_slice(), &mut fitted);
    }
    let tuning = Tuning {
        k: Some(k),
        ..Tuning::default()
    };
    let mut out = FitResult::new(Method::SpectralSeries, fitted, tuning, Some(k as f64));
    out.coefficients = Some(coef);
    Ok(out)
}

/// `T̃ = Σ_k ã_k^2` against `t_a`.
pub fn spectral_series_test(basis_values: &DMatrix<f64>, y: &[f64], k: usize, a: f64) -> Result<TestResult> {
    if k == 0 {
        return Err(Error::invalid("test needs K ≥ 1"));
    }
    let threshold = test_threshold(k, y.len(), a)?;
    let coef = spectral_coefficients(basis_values, y, k)?;
    let stat = coef.iter().map(|c| c * c).sum();
    Ok(TestResult::new(Method::SpectralSeries, stat, threshold, a, k, y.len()))
}

/// Kernel-weighted local average over `‖X_j - X_i‖ ≤ h`, the point itself
/// included; zero where the total weight vanishes.
pub fn kernel_smoothing_fit(points: &PointCloud, y: &[f64], h: f64, kernel: Kernel) -> Result<FitResult> {
    check_len(points.len(), y.len())?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("bandwidth {h} must be positive")));
    }
    let (fitted, df) = if points.dim() == 1 && kernel == Kernel::Boxcar {
        boxcar_smooth_1d(points.coords(), y, h)
    } else {
        let g = build_graph(points, h, kernel, points.intrinsic_dim())?;
        let self_w = kernel.eval(0.0);
        let mut fitted = vec![0.0; y.len()];
        let mut df = 0.0;
        for i in 0..y.len() {
            let mut num = self_w * y[i];
            let mut den = self_w;
            for (j, w) in g.neighbors(i) {
                num += w * y[j];
                den += w;
            }
            if den > 0.0 {
                fitted[i] = num / den;
                df += self_w / den;
            }
        }
        (fitted, df)
    };
    let tuning = Tuning {
        bandwidth: Some(h),
        ..Tuning::default()
    };
    Ok(FitResult::new(Method::KernelSmoothing, fitted, tuning, Some(df)))
}

/// Sorted prefix sums; each window is found by binary search.
fn boxcar_smooth_1d(x: &[f64], y: &[f64], h: f64) -> (Vec<f64>, f64) {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let mut prefix = vec![0.0; n + 1];
    for (r, &i) in order.iter().enumerate() {
        prefix[r + 1] = prefix[r] + y[i];
    }
    let mut fitted = vec![0.0; n];
    let mut df = 0.0;
    for (r, &i) in order.iter().enumerate() {
        let xi = xs[r];
        // Same closed-ball test as the graph builder: |x_j - x_i| ≤ h.
        let lo = xs[..=r].partition_point(|&v| !((xi - v).abs() <= h));
        let hi = r + xs[r..].partition_point(|&v| (v - xi).abs() <= h);
        let count = (hi - lo) as f64;
        fitted[i] = (prefix[hi] - prefix[lo]) / count;
        df += 1.0 / count;
    }
    (fitted, df)
}

/// Orthogonal projection of `Y` onto the span of the columns of `phi`.
pub fn uniform_least_squares_fit(phi: &DMatrix<f64>, y: &[f64]) -> Result<FitResult> {
    check_len(phi.nrows(), y.len())?;
    let k = phi.ncols();
    if k > phi.nrows() {
        return Err(Error::invalid(format!("K = {k} exceeds n = {}", phi.nrows())));
    }
    let yv = DVector::from_column_slice(y);
    if k == 0 {
        let tuning = Tuning {
            k: Some(0),
            ..Tuning::default()
        };
        return Ok(FitResult::new(Method::UniformLs, vec![0.0; y.len()], tuning, Some(0.0)));
    }
    let qr = phi.clone().col_piv_qr();
    let r = qr.r();
    let r00 = r[(0, 0)].abs();
    let tol = r00 * 1e-12 * (phi.nrows().max(k) as f64);
    let rank = (0..k).take_while(|&i| r[(i, i)].abs() > tol).count();
    let q = qr.q();
    let qr_cols = q.columns(0, rank);
    let fitted = qr_cols * (qr_cols.transpose() * &yv);
    let deficient = rank < k;
    let coef = if deficient {
        phi.clone()
            .svd(true, true)
            .solve(&yv, tol)
            .map_err(|e| Error::invalid(format!("pseudo-inverse failed: {e}")))?
    } else {
        let rhs = q.tr_mul(&yv);
        let mut x = r
            .solve_upper_triangular(&rhs)
            .ok_or_else(|| Error::invalid("least-squares solve failed on a full-rank design"))?;
        qr.p().inv_permute_rows(&mut x);
        x
    };
    let tuning = Tuning {
        k: Some(k),
        ..Tuning::default()
    };
    let mut out = FitResult::new(Method::UniformLs, fitted.as_slice().to_vec(), tuning, Some(rank as f64));
    out.coefficients = Some(coef.as_slice().to_vec());
    out.rank_deficient = deficient;
    Ok(out)
}

/// In-sample least-squares fits on the nested column prefixes `1..=kmax` of
/// `phi`, from one Householder factorization. Entry `k - 1` holds the fit on
/// the first `k` columns; `None` marks a prefix whose columns are dependent.
pub fn uniform_least_squares_path(phi: &DMatrix<f64>, y: &[f64]) -> Result<Vec<Option<Vec<f64>>>> {
    check_len(phi.nrows(), y.len())?;
    let kmax = phi.ncols().min(phi.nrows());
    let qr = phi.columns(0, kmax).into_owned().qr();
    let r = qr.r();
    let q = qr.q();
    let scale = (0..kmax).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    let mut out = Vec::with_capacity(kmax);
    let mut fitted = vec![0.0; y.len()];
    let mut ok = true;
    for k in 0..kmax {
        let qk = q.column(k);
        let c = dot(qk.as_slice(), y);
        crate::linalg::axpy(c, qk.as_slice(), &mut fitted);
        ok &= r[(k, k)].abs() > 1e-10 * scale;
        out.push(ok.then(|| fitted.clone()));
    }
    Ok(out)
}

struct Shifted<'a> {
    g: &'a NeighborhoodGraph,
    lam: f64,
}

impl LinearOperator for Shifted<'_> {
    fn size(&self) -> usize {
        self.g.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.g.apply_into(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi + self.lam * *yi;
        }
    }
}

/// Solves `(I + λL) f = Y` by conjugate gradient.
pub fn laplacian_smoothing_fit(g: &NeighborhoodGraph, y: &[f64], lam: f64, tol: f64) -> Result<FitResult> {
    check_len(g.n(), y.len())?;
    if !(lam >= 0.0 && lam.is_finite()) {
        return Err(Error::invalid(format!("penalty {lam} must be finite and nonnegative")));
    }
    let tuning = Tuning {
        lambda: Some(lam),
        eps: Some(g.eps()),
        ..Tuning::default()
    };
    if lam == 0.0 {
        return Ok(FitResult::new(Method::LaplacianSmoothing, y.to_vec(), tuning, None));
    }
    let op = Shifted { g, lam };
    let (f, _) = conjugate_gradient(&op, y, tol, (20 * g.n()).max(2000))?;
    Ok(FitResult::new(Method::LaplacianSmoothing, f, tuning, None))
}

/// `(1/n) Σ (fitted_i - truth_i)^2`.
pub fn in_sample_mse(fitted: &[f64], truth: &[f64]) -> Result<f64> {
    check_len(fitted.len(), truth.len())?;
    if fitted.is_empty() {
        return Err(Error::invalid("empty vectors"));
    }
    Ok(mean_sq_diff(fitted, truth))
}

/// Conditional-on-design bound `⟨L^s f0, f0⟩_n / λ_{K+1}^s + 5K/n` on the
/// PCR-LE in-sample error, which holds with probability at least `1 - e^{-K}`.
pub fn fixed_graph_error_bound(
    g: &NeighborhoodGraph,
    spectrum: &LaplacianSpectrum,
    truth: &[f64],
    k: usize,
    s: u32,
) -> Result<f64> {
    if k >= spectrum.k() {
        return Err(Error::invalid(format!(
            "bound needs λ_(K+1): K = {k} but only {} eigenpairs",
            spectrum.k()
        )));
    }
    let semi = sobolev_seminorm(g, truth, s)?;
    let n = truth.len() as f64;
    let lam = spectrum.eigenvalues()[k];
    let bias = if semi == 0.0 { 0.0 } else { semi / lam.powi(s as i32) };
    Ok(bias + 5.0 * k as f64 / n)
}
