//! Tail risk measures built from scaled positive-part losses.
//!
//! With `l_i(x) = x+ / alpha_i` the inner problems are piecewise linear
//! pinball objectives solved exactly by breakpoint enumeration, and the
//! regions are translated scaled copies of the comparison set. For unit
//! index, zero threshold level, and the orthant comparison set this is the
//! classical (set-valued) average value at risk.
//!
//! Orientation note: the convention here prices the loss `-X - s`, so the
//! objective is `s + (r/alpha) E[(-X - s)+]` and its minimizers are upper
//! quantiles of `-X`. Writing the inner problem with `(s - X)+` and `+s`
//! instead would make it unbounded below for every constant position, so
//! that reading is rejected.

use crate::config::NumericConfig;
use crate::error::{Error, Result};
use crate::loss::{LossSpec, VectorLossSpec};
use crate::poly::{Polyhedron, ThresholdData};
use crate::space::{FiniteProbSpace, RandomVector};

/// Scaled positive-part model: per-coordinate tail levels, index vector,
/// and a threshold.
#[derive(Debug, Clone)]
pub struct AvarSpec {
    alpha: Vec<f64>,
    r: Vec<f64>,
    thresh: ThresholdData,
}

impl AvarSpec {
    pub fn new(alpha: Vec<f64>, r: Vec<f64>, thresh: ThresholdData) -> Result<Self> {
        let m = thresh.dim();
        if alpha.len() != m || r.len() != m {
            return Err(Error::dimension("tail level, index, and threshold dims differ"));
        }
        for (i, &a) in alpha.iter().enumerate() {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::invalid(format!(
                    "tail level component {i} must lie in (0, 1], got {a}"
                )));
            }
        }
        for (i, (&ri, &ai)) in r.iter().zip(&alpha).enumerate() {
            if !ri.is_finite() || ri < ai {
                return Err(Error::precondition(format!(
                    "index component {i} must be finite and at least the tail level"
                )));
            }
        }
        for (i, &x0) in thresh.x0().iter().enumerate() {
            // The loss range is [0, +inf); the level must be interior.
            if !(x0 > 0.0) {
                return Err(Error::precondition(format!(
                    "threshold component {i} must be strictly positive"
                )));
            }
        }
        Ok(AvarSpec { alpha, r, thresh })
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn thresh(&self) -> &ThresholdData {
        &self.thresh
    }

    /// The equivalent generic loss vector, for cross-checks.
    pub fn losses(&self) -> VectorLossSpec {
        VectorLossSpec::new(
            self.alpha
                .iter()
                .map(|&a| LossSpec::scaled_positive_part(a).unwrap())
                .collect(),
        )
        .unwrap()
    }
}

/// Exact minimum of the pinball objective `s + (r/a) E[(-X - s)+]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PinballSolution {
    pub value: f64,
    /// Smallest minimizer among the objective's breakpoints. When the
    /// objective is flat to the left of every breakpoint (index equal to
    /// the tail level) the smallest breakpoint is reported.
    pub minimizer: f64,
}

/// The objective is convex piecewise linear with breakpoints at `-x_k`, and
/// its slope left of the smallest breakpoint is `1 - r/a <= 0`, so some
/// breakpoint attains the minimum. Ascending scan with strict improvement
/// keeps the smallest one.
pub fn pinball_min(
    space: &FiniteProbSpace,
    x: &[f64],
    alpha: f64,
    r: f64,
) -> Result<PinballSolution> {
    if x.len() != space.len() {
        return Err(Error::dimension("position column length mismatch"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("tail level must lie in (0, 1]"));
    }
    if !r.is_finite() || r < alpha {
        return Err(Error::precondition("index must be finite and at least the tail level"));
    }
    let mut kinks: Vec<f64> = x.iter().map(|&xk| -xk).collect();
    kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    kinks.dedup();
    let ratio = r / alpha;
    let objective = |s: f64| -> f64 {
        s + ratio
            * space
                .probs()
                .iter()
                .zip(x)
                .map(|(p, &xk)| p * (-xk - s).max(0.0))
                .sum::<f64>()
    };
    let mut best_s = kinks[0];
    let mut best_v = objective(best_s);
    for &s in &kinks[1..] {
        let v = objective(s);
        if v < best_v {
            best_v = v;
            best_s = s;
        }
    }
    Ok(PinballSolution {
        value: best_v,
        minimizer: best_s,
    })
}

/// Scalar tail risk `pinball minimum - r x0`. For unit index and zero
/// level this is the classical average value at risk of the loss `-X` at
/// the given tail level.
pub fn avar_scalar(
    space: &FiniteProbSpace,
    x: &[f64],
    alpha: f64,
    r: f64,
    x0: f64,
) -> Result<PinballSolution> {
    let base = pinball_min(space, x, alpha, r)?;
    Ok(PinballSolution {
        value: base.value - r * x0,
        minimizer: base.minimizer,
    })
}

/// The tail risk region: componentwise pinball minima plus the scaled
/// comparison set. Equals the componentwise-divergence region translated by
/// the scaled threshold level.
pub fn avar_region(x: &RandomVector, spec: &AvarSpec) -> Result<Polyhedron> {
    let m = spec.dim();
    if x.dim() != m {
        return Err(Error::dimension("position and spec dims differ"));
    }
    let mut shift = Vec::with_capacity(m);
    for i in 0..m {
        let sol = pinball_min(x.space(), &x.column(i), spec.alpha[i], spec.r[i])?;
        shift.push(sol.value);
    }
    Ok(spec
        .thresh
        .comparison_set()
        .scale_diag(&spec.r)?
        .translate(&shift))
}

/// Classical discrete tail mean of the loss `-X` at level `alpha`: average
/// of the worst `alpha` probability mass.
pub fn tail_mean(space: &FiniteProbSpace, x: &[f64], alpha: f64, _cfg: &NumericConfig) -> Result<f64> {
    if x.len() != space.len() {
        return Err(Error::dimension("position column length mismatch"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("tail level must lie in (0, 1]"));
    }
    let mut losses: Vec<(f64, f64)> = x
        .iter()
        .zip(space.probs())
        .map(|(&xk, &p)| (-xk, p))
        .collect();
    losses.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut remaining = alpha;
    let mut total = 0.0;
    for (loss, p) in losses {
        if remaining <= 0.0 {
            break;
        }
        let take = p.min(remaining);
        total += take * loss;
        remaining -= take;
    }
    Ok(total / alpha)
}
