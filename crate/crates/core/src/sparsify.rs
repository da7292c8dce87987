//! Uniform edge sparsification and a finite-sample check of spectral closeness.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NeighborhoodGraph;
use crate::linalg::{dot, norm, scale};
use crate::spectra::{smallest_eigenpairs, EigenOptions};

/// Keeps each edge independently with probability `p` and divides kept
/// weights by `p`, so every quadratic form is preserved in expectation.
pub fn sparsify_uniform<R: Rng + ?Sized>(
    g: &NeighborhoodGraph,
    keep_prob: f64,
    rng: &mut R,
) -> Result<NeighborhoodGraph> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(Error::invalid(format!("keep probability {keep_prob} outside (0, 1]")));
    }
    let edges = if keep_prob == 1.0 {
        g.edges().to_vec()
    } else {
        g.edges()
            .iter()
            .filter(|_| rng.random::<f64>() < keep_prob)
            .map(|&(i, j, w)| (i, j, w / keep_prob))
            .collect()
    };
    NeighborhoodGraph::from_edges(g.n(), g.eps(), g.kernel(), g.intrinsic_dim(), edges)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsifyReport {
    pub original_edges: usize,
    pub kept_edges: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_target: Option<f64>,
    /// Largest two-sided ratio of quadratic forms over the test set; a lower
    /// bound on the true σ. Serialized as `null` when infinite.
    #[serde(with = "infinite_as_null")]
    pub sigma_observed: f64,
    pub tested: usize,
    pub skipped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meets_target: Option<bool>,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

fn quad(g: &NeighborhoodGraph, u: &[f64], work: &mut [f64]) -> f64 {
    g.apply_into(u, work);
    dot(u, work)
}

/// `σ = max_u max(uᵀLu / uᵀL̃u, uᵀL̃u / uᵀLu)` over `test_vectors`. Pairs of
/// (numerically) zero forms are skipped; a zero against a nonzero form gives
/// an infinite σ.
pub fn certify_sigma(
    g: &NeighborhoodGraph,
    g_sparse: &NeighborhoodGraph,
    test_vectors: &[Vec<f64>],
    sigma_target: Option<f64>,
) -> Result<SparsifyReport> {
    if g.n() != g_sparse.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: g_sparse.n(),
        });
    }
    let mut work = vec![0.0; g.n()];
    let mut sigma = 1.0f64;
    let mut skipped = 0;
    let mut tested = 0;
    let bound = g.norm_bound().max(g_sparse.norm_bound());
    for u in test_vectors {
        crate::error::check_len(g.n(), u.len())?;
        let unorm = norm(u);
        if unorm == 0.0 {
            return Err(Error::invalid("test vectors must be nonzero"));
        }
        let zero = 1e-12 * bound * unorm * unorm;
        let a = quad(g, u, &mut work);
        let b = quad(g_sparse, u, &mut work);
        let (az, bz) = (a.abs() <= zero, b.abs() <= zero);
        if az && bz {
            skipped += 1;
            continue;
        }
        tested += 1;
        if az || bz {
            sigma = f64::INFINITY;
        } else {
            sigma = sigma.max(a / b).max(b / a);
        }
    }
    Ok(SparsifyReport {
        original_edges: g.edge_count(),
        kept_edges: g_sparse.edge_count(),
        sigma_target,
        sigma_observed: sigma,
        tested,
        skipped,
        meets_target: sigma_target.map(|t| sigma <= t),
    })
}

/// The first 10 eigenvectors of `L` (fewer on tiny graphs) followed by 10
/// random unit vectors.
pub fn default_test_vectors<R: Rng + ?Sized>(g: &NeighborhoodGraph, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let k = 10.min(g.n());
    let spectrum = smallest_eigenpairs(g, k, &EigenOptions::default())?;
    let mut out: Vec<Vec<f64>> = (0..k).map(|c| spectrum.vector(c).to_vec()).collect();
    for _ in 0..10 {
        let mut v: Vec<f64> = (0..g.n()).map(|_| rng.sample(StandardNormal)).collect();
        let s = norm(&v);
        scale(1.0 / s, &mut v);
        out.push(v);
    }
    Ok(out)
}
