//! Closed-form choices of the graph radius and the number of eigenvectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Estimation,
    Testing,
}

/// Inputs to the tuning formulas. `dim` is the ambient dimension for flat
/// designs and the intrinsic dimension for manifold designs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningRule {
    pub task: Task,
    pub n: usize,
    pub dim: usize,
    pub s: u32,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(default = "one")]
    pub c0: f64,
    #[serde(default = "one", rename = "C0")]
    pub big_c0: f64,
}

fn one() -> f64 {
    1.0
}

impl TuningRule {
    pub fn new(task: Task, n: usize, dim: usize, s: u32, m: f64) -> Self {
        Self {
            task,
            n,
            dim,
            s,
            m,
            c0: 1.0,
            big_c0: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.dim == 0 || self.s == 0 {
            return Err(Error::invalid("n, dim and s must all be positive"));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::invalid(format!("Sobolev radius {} must be positive", self.m)));
        }
        if !(self.c0 > 0.0 && self.big_c0 > 0.0) {
            return Err(Error::invalid("radius constants must be positive"));
        }
        Ok(())
    }

    /// Exponent applied to `M^2 n` in the eigenvector count.
    pub fn k_exponent(&self) -> f64 {
        let (d, s) = (self.dim as f64, self.s as f64);
        match self.task {
            Task::Estimation => d / (2.0 * s + d),
            Task::Testing => 2.0 * d / (4.0 * s + d),
        }
    }

    /// `[lower, upper]` admissible radii for a given `K`.
    pub fn eps_bracket(&self, k: usize) -> Result<(f64, f64)> {
        self.validate()?;
        if k == 0 {
            return Err(Error::invalid("K must be positive"));
        }
        let (n, d) = (self.n as f64, self.dim as f64);
        let mut lower = (n.ln().max(0.0) / n).powf(1.0 / d);
        if self.s > 1 {
            let extra = (self.m * self.m * n).powf(-1.0 / (2.0 * (self.s as f64 - 1.0) + d));
            lower = lower.max(extra);
        }
        lower *= self.big_c0;
        let upper = self.c0 * (k as f64).powf(-1.0 / d).min(1.0);
        Ok((lower, upper))
    }
}

/// `min{⌊(M^2 n)^e⌋ ∨ 1, n}` with the task-dependent exponent `e`.
#[allow(non_snake_case)]
pub fn choose_K(rule: &TuningRule) -> Result<usize> {
    rule.validate()?;
    let x = (rule.m * rule.m * rule.n as f64).powf(rule.k_exponent());
    // Guard against powf landing just below an exact integer.
    let k = (x * (1.0 + 1e-12)).floor();
    let k = if k.is_finite() && k >= 1.0 {
        k.min(rule.n as f64) as usize
    } else {
        1
    };
    Ok(k.clamp(1, rule.n))
}

/// Geometric mean of the admissible radius bracket.
pub fn choose_eps(rule: &TuningRule, k: usize) -> Result<f64> {
    let (lower, upper) = rule.eps_bracket(k)?;
    if lower > upper {
        return Err(Error::EmptyBracket { lower, upper });
    }
    Ok((lower * upper).sqrt())
}
