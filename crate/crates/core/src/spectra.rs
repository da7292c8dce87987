//! Smallest eigenpairs of the graph Laplacian.
//!
//! The null space is handled exactly: the normalized indicator vectors of the
//! connected components are eigenvectors with eigenvalue zero, so they are
//! emitted first (ordered by smallest vertex) and the iterative solver works on
//! their orthogonal complement. The nonzero part comes from a thick-restart
//! block Lanczos iteration with full reorthogonalization, or from a dense
//! symmetric eigendecomposition for small graphs.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{connected_components, NeighborhoodGraph};
use crate::linalg::{axpy, norm, orthonormalize, project_block, scale, sym_eig_sorted, Block};
use crate::rng::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Dense below `dense_threshold`, Lanczos otherwise.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    /// Residual tolerance relative to the Gershgorin bound on `‖L‖`.
    pub tol: f64,
    pub solver: SolverKind,
    pub dense_threshold: usize,
    pub block_size: usize,
    /// Krylov basis size before a restart; `None` picks one from `K`.
    pub max_basis: Option<usize>,
    pub max_restarts: usize,
    /// Seed for the random starting block.
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            solver: SolverKind::Auto,
            dense_threshold: 300,
            block_size: 8,
            max_basis: None,
            max_restarts: 200,
            seed: 0x5eed_1a9c,
        }
    }
}

/// `K` smallest eigenpairs in ascending order with orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct LaplacianSpectrum {
    eigenvalues: Vec<f64>,
    vectors: Block,
    /// Largest `‖L v_k - λ_k v_k‖₂` over the returned pairs.
    pub residual_tol: f64,
    pub graph_fingerprint: u64,
    pub null_dim: usize,
    pub iterations: usize,
}

impl LaplacianSpectrum {
    pub fn n(&self) -> usize {
        self.vectors.n
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        self.vectors.col(k)
    }

    pub fn vectors(&self) -> &Block {
        &self.vectors
    }

    pub fn eigenvectors(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.vectors.n, self.vectors.cols, &self.vectors.data)
    }

    /// Keeps the first `k` pairs.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k > self.k() {
            return Err(Error::invalid(format!(
                "only {} eigenpairs available, asked for {k}",
                self.k()
            )));
        }
        let mut out = self.clone();
        out.eigenvalues.truncate(k);
        out.vectors.truncate(k);
        Ok(out)
    }

    /// Builds a spectrum from externally computed pairs, e.g. a dense oracle.
    pub fn from_parts(
        eigenvalues: Vec<f64>,
        vectors: Block,
        residual_tol: f64,
        graph_fingerprint: u64,
    ) -> Result<Self> {
        if vectors.cols != eigenvalues.len() {
            return Err(Error::DimensionMismatch {
                expected: eigenvalues.len(),
                found: vectors.cols,
            });
        }
        Ok(Self {
            eigenvalues,
            vectors,
            residual_tol,
            graph_fingerprint,
            null_dim: 0,
            iterations: 0,
        })
    }

    /// `k,lambda` rows with 1-based `k`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,lambda")?;
        for (k, l) in self.eigenvalues.iter().enumerate() {
            writeln!(w, "{},{}", k + 1, l)?;
        }
        Ok(())
    }

    /// Eigenvector matrix, one row per vertex and columns `v1..vK`.
    pub fn write_vectors_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.k()).map(|k| format!("v{k}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.k()).map(|k| self.vectors.col(k)[i].to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Flips `v` so its first coordinate of non-negligible magnitude is positive.
fn fix_sign(v: &mut [f64]) {
    let big = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-8 * big) {
        if first < 0.0 {
            scale(-1.0, v);
        }
    }
}

fn residual(g: &NeighborhoodGraph, lambda: f64, v: &[f64], work: &mut [f64]) -> f64 {
    g.apply_into(v, work);
    axpy(-lambda, v, work);
    norm(work)
}

/// The `K` smallest eigenpairs of `L`.
pub fn smallest_eigenpairs(g: &NeighborhoodGraph, k: usize, opts: &EigenOptions) -> Result<LaplacianSpectrum> {
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "requested {k} eigenpairs of a {n}-vertex graph"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("eigen tolerance must be positive"));
    }
    let comps = connected_components(g);
    let mut null = Block::zeros(n, 0);
    for members in comps.members() {
        let mut v = vec![0.0; n];
        let w = 1.0 / (members.len() as f64).sqrt();
        for i in members {
            v[i] = w;
        }
        null.push_col(&v);
    }
    let null_dim = null.cols;
    let want = k.saturating_sub(null_dim);
    let mut values = vec![0.0; k.min(null_dim)];
    let mut vectors = null;
    vectors.truncate(k.min(null_dim));
    let mut iterations = 0;

    if want > 0 {
        let dense = match opts.solver {
            SolverKind::Dense => true,
            SolverKind::Lanczos => false,
            SolverKind::Auto => n <= opts.dense_threshold,
        };
        let (theta, mut y) = if dense {
            dense_complement(g, null_dim, want)
        } else {
            let (t, y, it) = lanczos_complement(g, &vectors_for_deflation(&vectors, g, &comps), want, opts)?;
            iterations = it;
            (t, y)
        };
        for c in 0..y.cols {
            fix_sign(y.col_mut(c));
            vectors.push_col(y.col(c));
        }
        values.extend(theta);
    }

    let mut work = vec![0.0; n];
    let mut worst = 0.0f64;
    for c in 0..vectors.cols {
        worst = worst.max(residual(g, values[c], vectors.col(c), &mut work));
    }
    Ok(LaplacianSpectrum {
        eigenvalues: values,
        vectors,
        residual_tol: worst,
        graph_fingerprint: g.fingerprint(),
        null_dim,
        iterations,
    })
}

/// Full indicator basis of the null space (the returned spectrum may only keep
/// some of them when `K` is smaller than the component count).
fn vectors_for_deflation(kept: &Block, g: &NeighborhoodGraph, comps: &crate::graph::Components) -> Block {
    if kept.cols == comps.count {
        return kept.clone();
    }
    let mut full = Block::zeros(g.n(), 0);
    for members in comps.members() {
        let mut v = vec![0.0; g.n()];
        let w = 1.0 / (members.len() as f64).sqrt();
        for i in members {
            v[i] = w;
        }
        full.push_col(&v);
    }
    full
}

fn dense_complement(g: &NeighborhoodGraph, null_dim: usize, want: usize) -> (Vec<f64>, Block) {
    let n = g.n();
    let (vals, vecs) = sym_eig_sorted(g.to_dense());
    let mut y = Block::zeros(n, 0);
    let mut theta = Vec::with_capacity(want);
    for c in null_dim..null_dim + want {
        y.push_col(vecs.column(c).as_slice());
        theta.push(vals[c].max(0.0));
    }
    (theta, y)
}

fn random_vector(rng: &mut SimRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn zero_tiny_columns(block: &mut Block, floor: f64) {
    for c in 0..block.cols {
        if norm(block.col(c)) < floor {
            block.col_mut(c).iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

/// Thick-restart block Lanczos on the orthogonal complement of `deflate`.
/// Returns the `want` smallest Ritz pairs there and the number of operator
/// applications.
///
/// The Rayleigh matrix `H = Qᵀ L Q` is accumulated explicitly from the
/// projections computed during full reorthogonalization, so restarts and
/// random refills never invalidate it. Between restarts `L Q = Q H + R E`
/// where `R` is the orthogonalized residual of the newest block, which gives
/// Ritz residual norms from a `b × b` Gram matrix.
fn lanczos_complement(
    g: &NeighborhoodGraph,
    deflate: &Block,
    want: usize,
    opts: &EigenOptions,
) -> Result<(Vec<f64>, Block, usize)> {
    let n = g.n();
    let n_eff = n - deflate.cols;
    debug_assert!(want >= 1 && want <= n_eff);
    let norm_l = g.norm_bound().max(f64::MIN_POSITIVE);
    let tol_abs = opts.tol * norm_l;
    let floor = 1e-14 * norm_l;
    let b = opts.block_size.clamp(1, n_eff);
    let round_up = |x: usize| x.div_ceil(b) * b;
    let m_max = round_up(opts.max_basis.unwrap_or((3 * want).max(want + 128)).max(want + 2 * b)).min(n_eff);
    let keep = round_up(want + (m_max - want) / 3)
        .min(m_max.saturating_sub(b))
        .max(want);

    let mut rng = SimRng::seed_from_u64(opts.seed);
    let mut refill_rng = SimRng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut fresh = |_c: usize| random_vector(&mut refill_rng, n);

    let mut q = Block::zeros(n, 0);
    let mut h = DMatrix::<f64>::zeros(m_max, m_max);
    let mut pending = Block::zeros(n, 0);
    for _ in 0..b {
        pending.push_col(&random_vector(&mut rng, n));
    }
    orthonormalize(&mut pending, &[deflate], 1e-10, &mut fresh);

    let mut matvecs = 0usize;
    let mut next_check = (2 * want).max(want + 2 * b).min(m_max);
    let mut restarts = 0usize;
    let mut best_res = f64::INFINITY;
    let mut restart_dim = 0usize;

    loop {
        let (theta, s, wperp, converged) = loop {
            let dim0 = q.cols;
            let p = pending.cols;
            let mut wperp = g.apply_block(&pending);
            matvecs += p;
            q.append(&pending);
            let dim = q.cols;
            // Local step against the two newest blocks (all of the basis
            // right after a restart), then one full pass, then a second full
            // pass only if it removed a large share of some column.
            let local_start = if dim0 <= restart_dim { 0 } else { dim0.saturating_sub(b) };
            let local = q.tail(local_start);
            let mut c = DMatrix::<f64>::zeros(dim, p);
            project_block(deflate, &mut wperp);
            let cl = project_block(&local, &mut wperp);
            c.view_mut((local_start, 0), (dim - local_start, p)).copy_from(&cl);
            let before: Vec<f64> = (0..p).map(|j| norm(wperp.col(j))).collect();
            project_block(deflate, &mut wperp);
            c += project_block(&q, &mut wperp);
            if (0..p).any(|j| norm(wperp.col(j)) < 0.5 * before[j]) {
                project_block(deflate, &mut wperp);
                project_block(&q, &mut wperp);
            }
            for col in 0..p {
                for i in 0..dim0 {
                    h[(i, dim0 + col)] = c[(i, col)];
                    h[(dim0 + col, i)] = c[(i, col)];
                }
                for c2 in 0..p {
                    h[(dim0 + c2, dim0 + col)] = 0.5 * (c[(dim0 + c2, col)] + c[(dim0 + col, c2)]);
                }
            }

            let full = dim >= n_eff;
            if full || dim >= next_check || dim >= m_max {
                let (theta, s) = sym_eig_sorted(h.view((0, 0), (dim, dim)).into_owned());
                let gram = wperp.gram(&wperp);
                let mut worst = 0.0f64;
                for k in 0..want {
                    let tail = DMatrix::from_fn(p, 1, |r, _| s[(dim0 + r, k)]);
                    let r2 = (tail.transpose() * &gram * &tail)[(0, 0)];
                    worst = worst.max(r2.max(0.0).sqrt());
                }
                best_res = best_res.min(worst);
                next_check = ((dim as f64 * 1.5).ceil() as usize).max(dim + b);
                let converged = worst <= tol_abs || full;
                if converged || dim >= m_max {
                    break (theta, s, wperp, converged);
                }
            }

            let room = (m_max - dim).min(n_eff - dim).min(b);
            let mut next = wperp;
            next.truncate(room);
            zero_tiny_columns(&mut next, floor);
            orthonormalize(&mut next, &[deflate, &q], 1e-8, &mut fresh);
            pending = next;
        };

        let dim = q.cols;
        if converged {
            let sel = s.view((0, 0), (dim, want)).into_owned();
            let y = q.times(&sel);
            let mut work = vec![0.0; n];
            let mut worst = 0.0f64;
            for c in 0..want {
                worst = worst.max(residual(g, theta[c], y.col(c), &mut work));
            }
            if worst <= tol_abs || dim >= n_eff {
                let vals = theta[..want].iter().map(|t| t.max(0.0)).collect();
                return Ok((vals, y, matvecs));
            }
        }
        restarts += 1;
        if restarts > opts.max_restarts {
            return Err(Error::NotConverged {
                solver: "block Lanczos",
                iterations: matvecs,
                residual: best_res,
            });
        }

        // Thick restart on the `keep` smallest Ritz vectors.
        let kk = keep.min(dim - 1).max(want);
        let sel = s.view((0, 0), (dim, kk)).into_owned();
        q = q.times(&sel);
        h.fill(0.0);
        for i in 0..kk {
            h[(i, i)] = theta[i];
        }
        let room = (m_max - kk).min(n_eff - kk).min(b);
        let mut next = wperp;
        next.truncate(room);
        zero_tiny_columns(&mut next, floor);
        orthonormalize(&mut next, &[deflate, &q], 1e-8, &mut fresh);
        pending = next;
        next_check = (kk + 2 * b).max(((kk as f64) * 1.5).ceil() as usize).min(m_max);
        restart_dim = kk;
    }
}

/// Least-squares slope of `log λ_k` against `log k` over `k ∈ [2, K]`,
/// skipping nonpositive eigenvalues. Returns 0 when fewer than two usable
/// eigenvalues remain.
pub fn eigenvalue_scaling_check(spectrum: &LaplacianSpectrum) -> Result<f64> {
    if spectrum.k() < 10 {
        return Err(Error::invalid(format!(
            "scaling check needs at least 10 eigenvalues, got {}",
            spectrum.k()
        )));
    }
    let pts: Vec<(f64, f64)> = spectrum
        .eigenvalues()
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &l)| l > 0.0)
        .map(|(i, &l)| (((i + 1) as f64).ln(), l.ln()))
        .collect();
    if pts.len() < 2 {
        return Ok(0.0);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(if slope.abs() < 1e-12 { 0.0 } else { slope })
}
