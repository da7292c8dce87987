//! Design points, regression functions, and noisy responses.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Row-major cloud of `n` points in `R^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    intrinsic_dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, intrinsic_dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("ambient dimension must be positive"));
        }
        if intrinsic_dim == 0 || intrinsic_dim > dim {
            return Err(Error::invalid(format!(
                "intrinsic dimension {intrinsic_dim} must lie in 1..={dim}"
            )));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} coordinates do not form a nonempty set of {dim}-dimensional points",
                coords.len()
            )));
        }
        Ok(Self {
            dim,
            intrinsic_dim,
            coords,
        })
    }

    /// Flat cloud (intrinsic dimension equals ambient dimension).
    pub fn flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        Self::new(dim, dim, coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Design points with responses `Y_i = f0(X_i) + w_i` and the noiseless truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub points: PointCloud,
    pub responses: Vec<f64>,
    pub truth: Vec<f64>,
}

impl Dataset {
    pub fn new(points: PointCloud, responses: Vec<f64>, truth: Vec<f64>) -> Result<Self> {
        check_len(points.len(), responses.len())?;
        check_len(points.len(), truth.len())?;
        Ok(Self {
            points,
            responses,
            truth,
        })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.points.dim()
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.points.intrinsic_dim()
    }

    /// Writes the `x1..xd,y,f0` CSV layout.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let d = self.ambient_dim();
        let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        header.push("f0".into());
        w.write_record(&header).map_err(csv_err)?;
        let mut record = Vec::with_capacity(d + 2);
        for (i, x) in self.points.rows().enumerate() {
            record.clear();
            record.extend(x.iter().map(|v| v.to_string()));
            record.push(self.responses[i].to_string());
            record.push(self.truth[i].to_string());
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `x1..xd,y,f0` layout. The `f0` column is optional; when it is
    /// absent the truth is filled with NaN.
    pub fn read_csv<R: Read>(reader: R, intrinsic_dim: Option<usize>) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = r.headers().map_err(csv_err)?.clone();
        let names: Vec<&str> = header.iter().collect();
        let has_truth = names.last() == Some(&"f0");
        let y_col = if has_truth {
            names.len().saturating_sub(2)
        } else {
            names.len().saturating_sub(1)
        };
        if names.get(y_col) != Some(&"y") || y_col == 0 {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header x1..xd,y[,f0], got `{}`", names.join(",")),
            });
        }
        for (j, name) in names[..y_col].iter().enumerate() {
            if *name != format!("x{}", j + 1) {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("column {} should be `x{}`, got `{name}`", j + 1, j + 1),
                });
            }
        }
        let d = y_col;
        let mut coords = Vec::new();
        let mut responses = Vec::new();
        let mut truth = Vec::new();
        for record in r.records() {
            let record = record.map_err(csv_err)?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != names.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", names.len(), record.len()),
                });
            }
            let parse = |j: usize| -> Result<f64> {
                let field = &record[j];
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("field {} (`{field}`) is not a number", j + 1),
                })?;
                if j < d && !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("coordinate `{field}` is not finite"),
                    });
                }
                Ok(v)
            };
            for j in 0..d {
                coords.push(parse(j)?);
            }
            responses.push(parse(d)?);
            truth.push(if has_truth { parse(d + 1)? } else { f64::NAN });
        }
        if responses.is_empty() {
            return Err(Error::Parse {
                line: 2,
                message: "no data rows".into(),
            });
        }
        let points = PointCloud::new(d, intrinsic_dim.unwrap_or(d), coords)?;
        Dataset::new(points, responses, truth)
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// `n` i.i.d. points uniform on `[-1, 1]^d`.
pub fn sample_uniform_cube<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<PointCloud> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("sample size and dimension must be positive"));
    }
    let coords = (0..n * d).map(|_| rng.random_range(-1.0..=1.0)).collect();
    PointCloud::flat(d, coords)
}

/// `n` points uniform on `Q1 ∪ Q2` with `Q1 = [0, 1/2 - r]`, `Q2 = [1/2 + r, 1]`.
pub fn sample_cluster_model<R: Rng + ?Sized>(n: usize, r: f64, rng: &mut R) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    if !(r > 0.0 && r <= 0.25) {
        return Err(Error::invalid(format!("cluster separation {r} outside (0, 1/4]")));
    }
    let half = 0.5 - r;
    let coords = (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(0.0..=2.0 * half);
            if u <= half {
                u
            } else {
                u + 2.0 * r
            }
        })
        .collect();
    PointCloud::flat(1, coords)
}

/// `n` points uniform on the unit circle in the first two coordinates of `R^d`.
pub fn sample_circle_manifold<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    if d < 2 {
        return Err(Error::invalid(format!(
            "circle needs ambient dimension at least 2, got {d}"
        )));
    }
    let mut coords = vec![0.0; n * d];
    for row in coords.chunks_exact_mut(d) {
        let t: f64 = rng.random_range(0.0..2.0 * PI);
        let (s, c) = t.sin_cos();
        row[0] = c;
        row[1] = s;
    }
    PointCloud::new(d, 1, coords)
}

/// Design distributions used by the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum DesignModel {
    /// Uniform on `[-1, 1]^d`.
    Cube { d: usize },
    /// Uniform on the unit circle embedded in `R^d`.
    Circle { d: usize },
    /// Two uniform clusters on `[0, 1]` separated by a gap of width `2r`.
    Cluster { r: f64 },
}

impl DesignModel {
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<PointCloud> {
        match *self {
            DesignModel::Cube { d } => sample_uniform_cube(n, d, rng),
            DesignModel::Circle { d } => sample_circle_manifold(n, d, rng),
            DesignModel::Cluster { r } => sample_cluster_model(n, r, rng),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match *self {
            DesignModel::Cube { d } | DesignModel::Circle { d } => d,
            DesignModel::Cluster { .. } => 1,
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match *self {
            DesignModel::Cube { d } => d,
            DesignModel::Circle { .. } | DesignModel::Cluster { .. } => 1,
        }
    }

    /// Orthonormal eigenbasis of the Laplacian of the design distribution.
    pub fn basis(&self) -> EigenBasis {
        match *self {
            DesignModel::Cube { d } => EigenBasis::Cube { dim: d },
            DesignModel::Circle { .. } => EigenBasis::Circle,
            DesignModel::Cluster { .. } => EigenBasis::UnitInterval,
        }
    }
}

/// `∏ φ_{k_i}(x_i)` with `φ_0 = 1` and `φ_k(t) = √2 cos(kπ(t+1)/2)` on `[-1, 1]`.
pub fn cube_eigenfunction(multi_index: &[usize], x: &[f64]) -> f64 {
    multi_index
        .iter()
        .zip(x)
        .map(|(&k, &t)| {
            if k == 0 {
                1.0
            } else {
                SQRT_2 * (k as f64 * PI * (t + 1.0) / 2.0).cos()
            }
        })
        .product()
}

/// Neumann eigenvalue `Σ (k_i π / 2)^2` of a cube multi-index.
pub fn cube_eigenvalue(multi_index: &[usize]) -> f64 {
    let s: usize = multi_index.iter().map(|k| k * k).sum();
    s as f64 * (PI / 2.0).powi(2)
}

/// The first `count` multi-indices on `[-1,1]^dim` in ascending eigenvalue
/// order, ties broken lexicographically.
pub fn cube_multi_indices(dim: usize, count: usize) -> Vec<Vec<usize>> {
    if count == 0 {
        return Vec::new();
    }
    let mut side = (count as f64).powf(1.0 / dim as f64).ceil() as usize + 1;
    loop {
        let base = side + 1;
        let total = base.pow(dim as u32);
        let mut all: Vec<Vec<usize>> = (0..total)
            .map(|mut code| {
                let mut idx = vec![0usize; dim];
                for slot in idx.iter_mut().rev() {
                    *slot = code % base;
                    code /= base;
                }
                idx
            })
            .collect();
        all.sort_by(|a, b| {
            let sa: usize = a.iter().map(|k| k * k).sum();
            let sb: usize = b.iter().map(|k| k * k).sum();
            sa.cmp(&sb).then_with(|| a.cmp(b))
        });
        // Any index outside [0, side]^dim has squared norm at least (side+1)^2.
        if all.len() >= count {
            let last: usize = all[count - 1].iter().map(|k| k * k).sum();
            if last < (side + 1) * (side + 1) {
                all.truncate(count);
                return all;
            }
        }
        side += 1;
    }
}

/// Orthonormal eigenbases with known eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenBasis {
    /// Neumann cosines on `[-1, 1]^dim`.
    Cube { dim: usize },
    /// Fourier modes `1, √2 cos θ, √2 sin θ, √2 cos 2θ, ...` on the unit circle.
    Circle,
    /// Neumann cosines `√2 cos(kπx)` on `[0, 1]`.
    UnitInterval,
}

/// One basis function with its eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    Cube(Vec<usize>),
    Fourier { frequency: usize, sine: bool },
    Interval(usize),
}

impl Mode {
    pub fn eigenvalue(&self) -> f64 {
        match self {
            Mode::Cube(k) => cube_eigenvalue(k),
            Mode::Fourier { frequency, .. } => (*frequency * *frequency) as f64,
            Mode::Interval(k) => (*k as f64 * PI).powi(2),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Mode::Cube(k) => cube_eigenfunction(k, x),
            Mode::Fourier { frequency: 0, .. } => 1.0,
            Mode::Fourier { frequency, sine } => {
                let t = x[1].atan2(x[0]) * *frequency as f64;
                SQRT_2 * if *sine { t.sin() } else { t.cos() }
            }
            Mode::Interval(0) => 1.0,
            Mode::Interval(k) => SQRT_2 * (*k as f64 * PI * x[0]).cos(),
        }
    }
}

impl EigenBasis {
    /// The first `count` modes, ascending in eigenvalue.
    pub fn modes(&self, count: usize) -> Vec<Mode> {
        match *self {
            EigenBasis::Cube { dim } => cube_multi_indices(dim, count).into_iter().map(Mode::Cube).collect(),
            EigenBasis::Circle => (0..count)
                .map(|i| Mode::Fourier {
                    frequency: i.div_ceil(2),
                    sine: i > 0 && i % 2 == 0,
                })
                .collect(),
            EigenBasis::UnitInterval => (0..count).map(Mode::Interval).collect(),
        }
    }

    /// Mode number `index` (1-based, so `index = 1` is the constant function).
    pub fn mode(&self, index: usize) -> Mode {
        assert!(index >= 1, "basis functions are indexed from 1");
        self.modes(index).pop().expect("nonempty")
    }

    /// `n × count` matrix with entries `ψ_k(X_i)`.
    pub fn design_matrix(&self, points: &PointCloud, count: usize) -> DMatrix<f64> {
        let modes = self.modes(count);
        DMatrix::from_fn(points.len(), count, |i, k| modes[k].eval(points.row(i)))
    }

    /// Eigenvalues of the first `count` modes.
    pub fn eigenvalues(&self, count: usize) -> Vec<f64> {
        self.modes(count).iter().map(Mode::eigenvalue).collect()
    }
}

/// Regression functions used by the experiments.
#[derive(Clone)]
pub enum RegressionFunction {
    /// `M / ρ_k^{s/2} · ψ_k`, whose order-`s` spectral seminorm equals `M`.
    /// For the constant mode (`ρ = 0`) the prefactor is `M`.
    Eigenfunction {
        basis: EigenBasis,
        index: usize,
        amplitude: f64,
        smoothness: f64,
    },
    /// `a · Σ_{k=2}^{terms+1} ρ_k^{-decay} ψ_k`.
    EigenfunctionSum {
        basis: EigenBasis,
        decay: f64,
        amplitude: f64,
        terms: usize,
    },
    /// `+θ` left of 1/2 and `-θ` right of it.
    PiecewiseCluster {
        theta: f64,
    },
    Constant(f64),
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for RegressionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegressionFunction::Eigenfunction {
                basis,
                index,
                amplitude,
                smoothness,
            } => f
                .debug_struct("Eigenfunction")
                .field("basis", basis)
                .field("index", index)
                .field("amplitude", amplitude)
                .field("smoothness", smoothness)
                .finish(),
            RegressionFunction::EigenfunctionSum {
                basis,
                decay,
                amplitude,
                terms,
            } => f
                .debug_struct("EigenfunctionSum")
                .field("basis", basis)
                .field("decay", decay)
                .field("amplitude", amplitude)
                .field("terms", terms)
                .finish(),
            RegressionFunction::PiecewiseCluster { theta } => {
                f.debug_struct("PiecewiseCluster").field("theta", theta).finish()
            }
            RegressionFunction::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            RegressionFunction::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

fn eigen_prefactor(eigenvalue: f64, amplitude: f64, smoothness: f64) -> f64 {
    if eigenvalue > 0.0 {
        amplitude / eigenvalue.powf(smoothness / 2.0)
    } else {
        amplitude
    }
}

impl RegressionFunction {
    /// Multiplier in front of `ψ_k` for the single-eigenfunction family.
    pub fn prefactor(&self) -> Option<f64> {
        match self {
            RegressionFunction::Eigenfunction {
                basis,
                index,
                amplitude,
                smoothness,
            } => Some(eigen_prefactor(
                basis.mode(*index).eigenvalue(),
                *amplitude,
                *smoothness,
            )),
            _ => None,
        }
    }

    /// Analytic `‖f‖_P^2` under the design distribution, when known.
    pub fn squared_norm(&self) -> Option<f64> {
        match self {
            RegressionFunction::Eigenfunction { .. } => self.prefactor().map(|c| c * c),
            RegressionFunction::EigenfunctionSum {
                basis,
                decay,
                amplitude,
                terms,
            } => Some(
                basis.modes(terms + 1)[1..]
                    .iter()
                    .map(|m| amplitude * amplitude * m.eigenvalue().powf(-2.0 * decay))
                    .sum(),
            ),
            RegressionFunction::PiecewiseCluster { theta } => Some(theta * theta),
            RegressionFunction::Constant(c) => Some(c * c),
            RegressionFunction::Custom(_) => None,
        }
    }

    /// `f(X_i)` for every design point.
    pub fn evaluate(&self, points: &PointCloud) -> Vec<f64> {
        match self {
            RegressionFunction::Eigenfunction {
                basis,
                index,
                amplitude,
                smoothness,
            } => {
                let mode = basis.mode(*index);
                let c = eigen_prefactor(mode.eigenvalue(), *amplitude, *smoothness);
                points.rows().map(|x| c * mode.eval(x)).collect()
            }
            RegressionFunction::EigenfunctionSum {
                basis,
                decay,
                amplitude,
                terms,
            } => {
                let modes = basis.modes(terms + 1);
                let weights: Vec<f64> = modes[1..]
                    .iter()
                    .map(|m| amplitude * m.eigenvalue().powf(-decay))
                    .collect();
                points
                    .rows()
                    .map(|x| modes[1..].iter().zip(&weights).map(|(m, w)| w * m.eval(x)).sum())
                    .collect()
            }
            RegressionFunction::PiecewiseCluster { theta } => points
                .rows()
                .map(|x| if x[0] < 0.5 { *theta } else { -*theta })
                .collect(),
            RegressionFunction::Constant(c) => vec![*c; points.len()],
            RegressionFunction::Custom(f) => points.rows().map(|x| f(x)).collect(),
        }
    }
}

/// Attaches `truth_i = f(X_i)` and `Y_i = truth_i + noise_sd · z_i`.
pub fn make_responses<R: Rng + ?Sized>(
    points: &PointCloud,
    f: &RegressionFunction,
    noise_sd: f64,
    rng: &mut R,
) -> Result<Dataset> {
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::invalid(format!(
            "noise level {noise_sd} must be finite and nonnegative"
        )));
    }
    let truth = f.evaluate(points);
    let responses = add_noise(&truth, noise_sd, rng);
    Dataset::new(points.clone(), responses, truth)
}

/// `truth + noise_sd · z` with `z` i.i.d. standard normal.
pub fn add_noise<R: Rng + ?Sized>(truth: &[f64], noise_sd: f64, rng: &mut R) -> Vec<f64> {
    truth
        .iter()
        .map(|&t| {
            let z: f64 = rng.sample(StandardNormal);
            t + noise_sd * z
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSequence;

    fn rng(seed: u64) -> crate::rng::SimRng {
        SeedSequence::new(seed).stream(1)
    }

    /// Midpoint rule on `[-1, 1]` normalised to the uniform density.
    fn quad_1d(f: impl Fn(f64) -> f64, m: usize) -> f64 {
        let h = 2.0 / m as f64;
        (0..m).map(|i| f(-1.0 + (i as f64 + 0.5) * h)).sum::<f64>() * h / 2.0
    }

    #[test]
    fn cube_single_point_in_support() {
        let p = sample_uniform_cube(1, 3, &mut rng(0)).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p.row(0).iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn cube_mean_near_zero() {
        let p = sample_uniform_cube(10_000, 1, &mut rng(1)).unwrap();
        let mean: f64 = p.coords().iter().sum::<f64>() / 1e4;
        assert!(mean.abs() < 4.0 * (2.0 / (12.0f64 * 1e4).sqrt()), "mean = {mean}");
    }

    #[test]
    fn cube_sampler_deterministic_and_rejects_zero() {
        let a = sample_uniform_cube(50, 2, &mut rng(9)).unwrap();
        let b = sample_uniform_cube(50, 2, &mut rng(9)).unwrap();
        assert_eq!(a, b);
        assert!(sample_uniform_cube(0, 2, &mut rng(9)).is_err());
        assert!(sample_uniform_cube(3, 0, &mut rng(9)).is_err());
    }

    #[test]
    fn cluster_support_and_balance() {
        let r = 0.1;
        let p = sample_cluster_model(10_000, r, &mut rng(2)).unwrap();
        assert!(p
            .coords()
            .iter()
            .all(|&x| !(x > 0.5 - r && x < 0.5 + r) && (0.0..=1.0).contains(&x)));
        let frac = p.coords().iter().filter(|&&x| x <= 0.5 - r).count() as f64 / 1e4;
        assert!((frac - 0.5).abs() <= 0.02, "fraction in Q1 = {frac}");
        assert!(sample_cluster_model(10, 0.3, &mut rng(2)).is_err());
        assert!(sample_cluster_model(10, 0.0, &mut rng(2)).is_err());
    }

    #[test]
    fn circle_embedding() {
        let p = sample_circle_manifold(10_000, 3, &mut rng(3)).unwrap();
        assert_eq!(p.intrinsic_dim(), 1);
        for x in p.rows() {
            assert!(((x[0] * x[0] + x[1] * x[1]).sqrt() - 1.0).abs() < 1e-12);
            assert_eq!(x[2], 0.0);
        }
        let mean: f64 = p.rows().map(|x| x[0]).sum::<f64>() / 1e4;
        assert!(mean.abs() < 4.0 / (2.0f64 * 1e4).sqrt());
        assert!(sample_circle_manifold(5, 1, &mut rng(3)).is_err());
    }

    #[test]
    fn eigenfunction_values() {
        assert_eq!(cube_eigenfunction(&[0, 0, 0], &[0.3, -0.2, 0.9]), 1.0);
        assert!((cube_eigenfunction(&[1], &[-1.0]) - SQRT_2).abs() < 1e-15);
        let ip = quad_1d(
            |t| cube_eigenfunction(&[2], &[t]) * cube_eigenfunction(&[0], &[t]),
            100_000,
        );
        assert!(ip.abs() < 1e-4);
    }

    #[test]
    fn cube_orthonormality_by_quadrature() {
        // Tensor midpoint rule; exact for these trigonometric products up to round-off.
        for dim in 1..=2usize {
            let m = if dim == 1 { 4000 } else { 400 };
            let idx_max = 5usize;
            let all: Vec<Vec<usize>> = cube_multi_indices(dim, (idx_max + 1).pow(dim as u32))
                .into_iter()
                .filter(|k| k.iter().all(|&v| v <= idx_max))
                .collect();
            let h = 2.0 / m as f64;
            let nodes: Vec<f64> = (0..m).map(|i| -1.0 + (i as f64 + 0.5) * h).collect();
            let grid: Vec<Vec<f64>> = if dim == 1 {
                nodes.iter().map(|&t| vec![t]).collect()
            } else {
                nodes
                    .iter()
                    .flat_map(|&s| nodes.iter().map(move |&t| vec![s, t]))
                    .collect()
            };
            let w = 1.0 / grid.len() as f64;
            let vals: Vec<Vec<f64>> = all
                .iter()
                .map(|k| grid.iter().map(|x| cube_eigenfunction(k, x)).collect())
                .collect();
            for a in 0..all.len() {
                for b in a..all.len() {
                    let ip: f64 = vals[a].iter().zip(&vals[b]).map(|(u, v)| u * v).sum::<f64>() * w;
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((ip - expect).abs() < 1e-4, "{:?} {:?} -> {ip}", all[a], all[b]);
                }
            }
        }
    }

    #[test]
    fn multi_index_order() {
        let idx = cube_multi_indices(2, 6);
        assert_eq!(
            idx,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1], vec![0, 2], vec![2, 0]]
        );
        let one = cube_multi_indices(1, 4);
        assert_eq!(one, vec![vec![0], vec![1], vec![2], vec![3]]);
        let evs: Vec<f64> = cube_multi_indices(3, 40).iter().map(|k| cube_eigenvalue(k)).collect();
        assert!(evs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn circle_modes() {
        let modes = EigenBasis::Circle.modes(5);
        let evs: Vec<f64> = modes.iter().map(Mode::eigenvalue).collect();
        assert_eq!(evs, vec![0.0, 1.0, 1.0, 4.0, 4.0]);
        let x = [0.0, 1.0];
        assert!((modes[1].eval(&x)).abs() < 1e-15);
        assert!((modes[2].eval(&x) - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_and_constant_mean() {
        let p = sample_uniform_cube(10_000, 1, &mut rng(4)).unwrap();
        let f = RegressionFunction::Eigenfunction {
            basis: EigenBasis::Cube { dim: 1 },
            index: 3,
            amplitude: 1.0,
            smoothness: 1.0,
        };
        let d = make_responses(&p, &f, 0.0, &mut rng(5)).unwrap();
        assert_eq!(d.responses, d.truth);
        let z = make_responses(&p, &RegressionFunction::Constant(0.0), 1.0, &mut rng(6)).unwrap();
        let mean: f64 = z.responses.iter().sum::<f64>() / 1e4;
        assert!(mean.abs() < 0.04);
        assert!(make_responses(&p, &f, -1.0, &mut rng(6)).is_err());
    }

    #[test]
    fn eigenfunction_norm_monte_carlo_vs_quadrature() {
        // index 3 in ascending order is φ_2 with ρ = π^2; truth = M/ρ^{s/2} φ_2.
        let p = sample_uniform_cube(10_000, 1, &mut rng(7)).unwrap();
        let f = RegressionFunction::Eigenfunction {
            basis: EigenBasis::Cube { dim: 1 },
            index: 3,
            amplitude: 1.0,
            smoothness: 1.0,
        };
        let d = make_responses(&p, &f, 0.0, &mut rng(8)).unwrap();
        let rho = PI * PI;
        let mc: f64 = d.truth.iter().map(|t| t * t).sum::<f64>() / 1e4;
        let psi_sq_mean: f64 = p.rows().map(|x| cube_eigenfunction(&[2], x).powi(2)).sum::<f64>() / 1e4;
        assert!((mc - psi_sq_mean / rho).abs() < 1e-12);
        let quad = quad_1d(|t| cube_eigenfunction(&[2], &[t]).powi(2), 100_000) / rho;
        assert!((quad - 1.0 / rho).abs() < 1e-8);
        assert!(
            (mc - quad).abs() < 4.0 * (0.5f64).sqrt() / rho / 100.0,
            "mc {mc} quad {quad}"
        );
        assert!((f.squared_norm().unwrap() - 1.0 / rho).abs() < 1e-15);
    }

    #[test]
    fn piecewise_cluster_values() {
        let p = PointCloud::flat(1, vec![0.1, 0.39, 0.61, 0.95]).unwrap();
        let v = RegressionFunction::PiecewiseCluster { theta: 5.0 }.evaluate(&p);
        assert_eq!(v, vec![5.0, 5.0, -5.0, -5.0]);
    }

    #[test]
    fn csv_roundtrip_and_errors() {
        let p = sample_uniform_cube(5, 2, &mut rng(10)).unwrap();
        let d = make_responses(&p, &RegressionFunction::Constant(1.5), 1.0, &mut rng(11)).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,y,f0\n"));
        let back = Dataset::read_csv(&buf[..], None).unwrap();
        assert_eq!(back, d);

        let bad = "x1,y,f0\n0.1,1,1\n0.2,oops,1\n";
        match Dataset::read_csv(bad.as_bytes(), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
