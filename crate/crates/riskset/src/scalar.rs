//! Scalar risk measures and their dual penalties.
//!
//! Shortfall risk is the smallest capital `s` making the expected loss of
//! the shifted position acceptable:
//!
//! ```text
//! shortfall(X) = inf { s : E[l(-X - s)] <= x0 }
//! ```
//!
//! Divergence risk at index `lambda > 0` is the optimized certainty
//! equivalent
//!
//! ```text
//! divergence(X) = inf_s ( s + lambda E[l(-X - s)] ) - lambda x0,
//! ```
//!
//! which is `-inf` exactly when `lambda` lies outside the reciprocal domain
//! of the conjugate generator; that dichotomy is part of the contract and
//! is reported as a distinct variant, never as a float sentinel.
//!
//! Inner problems are solved exactly by breakpoint enumeration when the
//! loss is piecewise linear, and by bracketed golden-section descent on the
//! smooth exponential family. Minimal penalty functions come from the
//! divergence functional: exact for the divergence measure, a 1-D infimum
//! over the admissible index interval for the shortfall measure.

use crate::config::NumericConfig;
use crate::divergence::DivergenceSpec;
use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::optim::{
    bisect_smallest_feasible, expand_derivative_bracket, golden_min, grid_then_golden_min,
    logspace,
};
use crate::space::FiniteProbSpace;
use crate::xreal::{weighted_sum, Finite, PosInf, XReal};

/// Outcome of a scalar risk computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarRiskResult {
    pub value: f64,
    /// Argmin of the inner problem; equals `value` for shortfall risk.
    pub minimizer_s: f64,
    pub iterations: u32,
}

/// Divergence risk value with the `-inf` branch kept separate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarDivergenceRisk {
    /// The index lies outside the admissible interval.
    MinusInf,
    Value(ScalarRiskResult),
}

impl ScalarDivergenceRisk {
    pub fn value(&self) -> XReal {
        match self {
            ScalarDivergenceRisk::MinusInf => XReal::NegInf,
            ScalarDivergenceRisk::Value(r) => Finite(r.value),
        }
    }

    pub fn as_result(&self) -> Option<&ScalarRiskResult> {
        match self {
            ScalarDivergenceRisk::MinusInf => None,
            ScalarDivergenceRisk::Value(r) => Some(r),
        }
    }
}

/// `E[l(-x_k - s)]` over the atoms, `+inf` if any atom leaves the domain.
pub fn expected_loss(
    space: &FiniteProbSpace,
    x: &[f64],
    loss: &LossSpec,
    s: f64,
) -> XReal {
    let vals: Vec<XReal> = x.iter().map(|&xk| loss.eval(-xk - s)).collect();
    weighted_sum(space.probs(), &vals)
}

fn check_column(space: &FiniteProbSpace, x: &[f64]) -> Result<()> {
    if x.len() != space.len() {
        return Err(Error::dimension(format!(
            "position has {} atoms but the space has {}",
            x.len(),
            space.len()
        )));
    }
    Ok(())
}

/// Smallest `s` with `E[l(-X - s)] <= x0`, by bisection on the
/// nonincreasing expected-loss map.
///
/// The bracket comes from the monotone tail bounds: at
/// `s = -ess inf X - l_inv(x0)` every atom is acceptable, at
/// `s = -ess sup X - l_inv(x0)` none is strictly better than the threshold.
pub fn shortfall_scalar(
    space: &FiniteProbSpace,
    x: &[f64],
    loss: &LossSpec,
    x0: f64,
    cfg: &NumericConfig,
) -> Result<ScalarRiskResult> {
    check_column(space, x)?;
    if !loss.threshold_in_range(x0) {
        return Err(Error::precondition(format!(
            "threshold {x0} is outside the interior of the loss range"
        )));
    }
    let linv = loss.inverse(x0)?;
    let ess_sup = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ess_inf = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let lo = -ess_sup - linv;
    let mut hi = -ess_inf - linv;
    let feasible = |s: f64| match expected_loss(space, x, loss, s) {
        Finite(v) => v <= x0,
        XReal::NegInf => true,
        PosInf => false,
    };
    // The upper end is feasible by construction; guard against summation
    // roundoff by nudging outward if it is not.
    let mut guard = 0;
    while !feasible(hi) && guard < 8 {
        hi += 1e-9 * (1.0 + hi.abs());
        guard += 1;
    }
    let (s, iterations) =
        bisect_smallest_feasible(feasible, lo, hi, cfg.bisect_tol, cfg.bisect_max_iter);
    Ok(ScalarRiskResult {
        value: s,
        minimizer_s: s,
        iterations,
    })
}

/// `inf_s ( s + lambda E[l(-X - s)] )` and its smallest minimizer.
fn inner_oce(
    space: &FiniteProbSpace,
    x: &[f64],
    loss: &LossSpec,
    lambda: f64,
    cfg: &NumericConfig,
) -> (f64, f64, u32) {
    let objective = |s: f64| {
        Finite(s).add(expected_loss(space, x, loss, s).scale(lambda))
    };
    if loss.is_piecewise_linear() {
        // The objective is piecewise linear in s with kinks exactly where
        // an atom crosses a loss kink; the minimum sits on one of them.
        // Ascending evaluation plus strict improvement picks the smallest
        // minimizer on flat stretches.
        let mut candidates: Vec<f64> = Vec::new();
        for &xk in x {
            for kappa in loss.kinks() {
                candidates.push(-xk - kappa);
            }
        }
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        candidates.dedup();
        if candidates.is_empty() {
            let v = objective(0.0).expect_finite("affine objective");
            return (v, 0.0, 1);
        }
        let mut best_s = f64::NAN;
        let mut best = PosInf;
        let mut evals = 0;
        for &s in &candidates {
            let v = objective(s);
            evals += 1;
            if v < best {
                best = v;
                best_s = s;
            }
        }
        (best.expect_finite("inner objective"), best_s, evals)
    } else {
        // Smooth case: bracket the derivative sign change, then contract.
        let ess_sup = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ess_inf = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let deriv = |s: f64| {
            let mean: f64 = space
                .probs()
                .iter()
                .zip(x)
                .map(|(p, &xk)| p * loss.derivative(-xk - s))
                .sum();
            1.0 - lambda * mean
        };
        let (a, b) = expand_derivative_bracket(deriv, -ess_sup - 1.0, -ess_inf + 1.0, 64);
        let (s, v) = golden_min(objective, a, b, cfg.golden_iters);
        (v.expect_finite("inner objective"), s, cfg.golden_iters)
    }
}

/// Divergence risk at index `lambda`, `-inf` when the index is
/// inadmissible.
pub fn divergence_risk_scalar(
    space: &FiniteProbSpace,
    x: &[f64],
    loss: &LossSpec,
    lambda: f64,
    x0: f64,
    cfg: &NumericConfig,
) -> Result<ScalarDivergenceRisk> {
    check_column(space, x)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("index must be positive, got {lambda}")));
    }
    let g = DivergenceSpec::new(loss.clone());
    if !g.one_over_dom().contains(lambda) {
        return Ok(ScalarDivergenceRisk::MinusInf);
    }
    let (inner, s, iterations) = inner_oce(space, x, loss, lambda, cfg);
    Ok(ScalarDivergenceRisk::Value(ScalarRiskResult {
        value: inner - lambda * x0,
        minimizer_s: s,
        iterations,
    }))
}

/// The scaled divergence of a density column against the base measure:
/// `sum_k p_k lambda g(q_k / lambda)`.
pub fn divergence_functional(
    g: &DivergenceSpec,
    lambda: f64,
    space: &FiniteProbSpace,
    q: &[f64],
) -> Result<XReal> {
    check_column(space, q)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("index must be positive, got {lambda}")));
    }
    let vals: Vec<XReal> = q.iter().map(|&qk| g.eval_scaled(lambda, qk)).collect();
    Ok(weighted_sum(space.probs(), &vals))
}

/// Minimal penalty of the divergence risk measure at a test density:
/// divergence plus `lambda x0`, exactly.
pub fn penalty_divergence_scalar(
    loss: &LossSpec,
    lambda: f64,
    x0: f64,
    space: &FiniteProbSpace,
    q: &[f64],
) -> Result<XReal> {
    let g = DivergenceSpec::new(loss.clone());
    let i = divergence_functional(&g, lambda, space, q)?;
    Ok(i.add(Finite(lambda * x0)))
}

/// Minimal penalty of the shortfall risk measure: the infimum of the
/// divergence penalties over all admissible indices, taken over a log grid
/// with golden-section refinement.
pub fn penalty_shortfall_scalar(
    loss: &LossSpec,
    x0: f64,
    space: &FiniteProbSpace,
    q: &[f64],
    cfg: &NumericConfig,
) -> Result<XReal> {
    check_column(space, q)?;
    let g = DivergenceSpec::new(loss.clone());
    let (window, exact) = g.one_over_dom().search_window(cfg.lambda_clip);
    let mut grid: Vec<f64> = exact;
    if let Some((a, b)) = window {
        grid.extend(logspace(a, b, cfg.lambda_grid));
    }
    grid.retain(|l| g.one_over_dom().contains(*l));
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::precondition(
            "no admissible index values inside the search window",
        ));
    }
    let f = |lambda: f64| {
        let vals: Vec<XReal> = q.iter().map(|&qk| g.eval_scaled(lambda, qk)).collect();
        weighted_sum(space.probs(), &vals).add(Finite(lambda * x0))
    };
    let (_, best) = grid_then_golden_min(f, &grid, cfg.golden_iters);
    Ok(best)
}
