//! Scalar and vector loss functions.
//!
//! A loss function here is convex, nondecreasing, lower semicontinuous,
//! finite at 0, and not constant on its effective domain. Three families are
//! built in:
//!
//! * `Exponential { beta }`: `l(x) = (exp(beta x) - 1) / beta`, `beta > 0`.
//! * `ScaledPositivePart { alpha }`: `l(x) = max(x, 0) / alpha`,
//!   `alpha` in `(0, 1]`.
//! * `PiecewiseLinear`: anchored at `l(0)`, slopes nondecreasing and
//!   nonnegative, optionally cut off at a finite right endpoint of the
//!   domain (evaluation is `+inf` beyond it).
//!
//! The Fenchel conjugate of each family is available in
//! [`crate::divergence`]; the pairing is a bijection, so divergences carry
//! enough data to evaluate and to recover their loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::xreal::{Finite, PosInf, XReal};

/// Loss function families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LossKind {
    /// `(exp(beta x) - 1) / beta` with `beta > 0`.
    Exponential { beta: f64 },
    /// `max(x, 0) / alpha` with `alpha` in `(0, 1]`.
    ScaledPositivePart { alpha: f64 },
    /// Convex piecewise-linear loss.
    ///
    /// `slopes.len() == breakpoints.len() + 1`; `slopes[j]` applies between
    /// `breakpoints[j-1]` and `breakpoints[j]` (unbounded at the ends). The
    /// value is anchored by `l(0) = at_zero`. A finite `right_endpoint`
    /// bounds the domain from the right.
    PiecewiseLinear {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
        at_zero: f64,
        right_endpoint: Option<f64>,
    },
}

/// Validated scalar loss function.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    kind: LossKind,
    /// Values at the breakpoints, for piecewise-linear kinds.
    bk_values: Vec<f64>,
}

impl LossSpec {
    /// Validates a loss description.
    ///
    /// Rejects non-monotone or non-convex data and losses that are constant
    /// on their domain (those have no strictly increasing part to invert).
    pub fn new(kind: LossKind) -> Result<Self> {
        match &kind {
            LossKind::Exponential { beta } => {
                if !beta.is_finite() || *beta <= 0.0 {
                    return Err(Error::invalid(format!(
                        "exponential loss needs beta > 0, got {beta}"
                    )));
                }
            }
            LossKind::ScaledPositivePart { alpha } => {
                if !alpha.is_finite() || *alpha <= 0.0 || *alpha > 1.0 {
                    return Err(Error::invalid(format!(
                        "scaled positive part needs alpha in (0, 1], got {alpha}"
                    )));
                }
            }
            LossKind::PiecewiseLinear {
                breakpoints,
                slopes,
                at_zero,
                right_endpoint,
            } => {
                if slopes.len() != breakpoints.len() + 1 {
                    return Err(Error::invalid(format!(
                        "piecewise-linear loss needs one more slope than breakpoints, got {} slopes for {} breakpoints",
                        slopes.len(),
                        breakpoints.len()
                    )));
                }
                if !at_zero.is_finite() {
                    return Err(Error::invalid("anchor value l(0) must be finite"));
                }
                for win in breakpoints.windows(2) {
                    if !(win[0] < win[1]) {
                        return Err(Error::invalid(
                            "breakpoints must be finite and strictly increasing",
                        ));
                    }
                }
                if breakpoints.iter().any(|b| !b.is_finite()) {
                    return Err(Error::invalid(
                        "breakpoints must be finite and strictly increasing",
                    ));
                }
                for (j, s) in slopes.iter().enumerate() {
                    if !s.is_finite() || *s < 0.0 {
                        return Err(Error::invalid(format!(
                            "slope {j} is {s}; slopes must be finite and >= 0"
                        )));
                    }
                }
                for win in slopes.windows(2) {
                    if win[0] > win[1] {
                        return Err(Error::invalid("slopes must be nondecreasing (convexity)"));
                    }
                }
                if let Some(re) = right_endpoint {
                    if !re.is_finite() {
                        return Err(Error::invalid("right endpoint must be finite when given"));
                    }
                    if *re < 0.0 {
                        return Err(Error::invalid(
                            "right endpoint must be >= 0 so that 0 stays in the domain",
                        ));
                    }
                    if let Some(&last) = breakpoints.last() {
                        if *re < last {
                            return Err(Error::invalid(
                                "right endpoint must not cut breakpoints off the domain",
                            ));
                        }
                    }
                }
                // Not constant on the domain: some active slope is positive.
                if slopes.iter().all(|&s| s == 0.0) {
                    return Err(Error::invalid("loss is constant on its domain"));
                }
            }
        }
        let bk_values = match &kind {
            LossKind::PiecewiseLinear {
                breakpoints,
                slopes,
                at_zero,
                ..
            } => pwl_breakpoint_values(breakpoints, slopes, *at_zero),
            _ => Vec::new(),
        };
        Ok(LossSpec { kind, bk_values })
    }

    pub fn exponential(beta: f64) -> Result<Self> {
        Self::new(LossKind::Exponential { beta })
    }

    pub fn scaled_positive_part(alpha: f64) -> Result<Self> {
        Self::new(LossKind::ScaledPositivePart { alpha })
    }

    pub fn kind(&self) -> &LossKind {
        &self.kind
    }

    /// Evaluates the loss; `+inf` outside the domain.
    ///
    /// # Examples
    ///
    /// ```
    /// use riskset::loss::LossSpec;
    /// use riskset::xreal::Finite;
    ///
    /// let exp = LossSpec::exponential(1.0).unwrap();
    /// assert_eq!(exp.eval(0.0), Finite(0.0));
    ///
    /// let spp = LossSpec::scaled_positive_part(0.5).unwrap();
    /// assert_eq!(spp.eval(-3.0), Finite(0.0));
    /// assert_eq!(spp.eval(1.0), Finite(2.0));
    /// ```
    pub fn eval(&self, x: f64) -> XReal {
        match &self.kind {
            LossKind::Exponential { beta } => {
                XReal::from_f64(((beta * x).exp() - 1.0) / beta)
            }
            LossKind::ScaledPositivePart { alpha } => Finite(x.max(0.0) / alpha),
            LossKind::PiecewiseLinear {
                breakpoints,
                slopes,
                at_zero,
                right_endpoint,
            } => {
                if let Some(re) = right_endpoint {
                    if x > *re {
                        return PosInf;
                    }
                }
                Finite(pwl_eval(breakpoints, slopes, *at_zero, &self.bk_values, x))
            }
        }
    }

    /// Right derivative. Outside the domain the value is meaningless;
    /// callers stay inside.
    pub fn derivative(&self, x: f64) -> f64 {
        match &self.kind {
            LossKind::Exponential { beta } => (beta * x).exp(),
            LossKind::ScaledPositivePart { alpha } => {
                if x < 0.0 {
                    0.0
                } else {
                    1.0 / alpha
                }
            }
            LossKind::PiecewiseLinear {
                breakpoints,
                slopes,
                ..
            } => {
                let j = breakpoints.partition_point(|&b| b <= x);
                slopes[j]
            }
        }
    }

    /// Upper end of the domain: the right endpoint if bounded, else `+inf`.
    pub fn dom_sup(&self) -> XReal {
        match &self.kind {
            LossKind::PiecewiseLinear {
                right_endpoint: Some(re),
                ..
            } => Finite(*re),
            _ => PosInf,
        }
    }

    /// Infimum of the range (`lim` at `-inf`); `-inf` when the smallest
    /// slope is positive.
    pub fn range_inf(&self) -> XReal {
        match &self.kind {
            LossKind::Exponential { beta } => Finite(-1.0 / beta),
            LossKind::ScaledPositivePart { .. } => Finite(0.0),
            LossKind::PiecewiseLinear {
                breakpoints,
                slopes,
                at_zero,
                ..
            } => {
                if slopes[0] > 0.0 {
                    XReal::NegInf
                } else if breakpoints.is_empty() {
                    // All slopes zero is rejected at construction.
                    Finite(*at_zero)
                } else {
                    // Constant up to the first breakpoint with positive slope.
                    let t = slopes.iter().position(|&s| s > 0.0).unwrap();
                    // slopes[t] starts at breakpoints[t - 1]; t >= 1 here.
                    Finite(self.bk_values[t - 1])
                }
            }
        }
    }

    /// Supremum of the range (`lim` at the right end of the domain).
    pub fn range_sup(&self) -> XReal {
        match &self.kind {
            LossKind::Exponential { .. } | LossKind::ScaledPositivePart { .. } => PosInf,
            LossKind::PiecewiseLinear {
                right_endpoint, ..
            } => match right_endpoint {
                None => PosInf,
                Some(re) => self.eval(*re),
            },
        }
    }

    /// Whether `x0` sits in the interior of the range, the precondition for
    /// shortfall thresholds.
    pub fn threshold_in_range(&self, x0: f64) -> bool {
        Finite(x0) > self.range_inf() && Finite(x0) < self.range_sup()
    }

    /// Inverse on the interior of the range. Unique there: level sets of a
    /// convex nondecreasing function are singletons above the infimum of the
    /// range.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        if !self.threshold_in_range(v) {
            return Err(Error::precondition(format!(
                "{v} lies outside the interior of the loss range"
            )));
        }
        match &self.kind {
            LossKind::Exponential { beta } => Ok((1.0 + beta * v).ln() / beta),
            LossKind::ScaledPositivePart { alpha } => Ok(alpha * v),
            LossKind::PiecewiseLinear {
                breakpoints,
                slopes,
                ..
            } => {
                // Walk segments left to right until the value is bracketed.
                if breakpoints.is_empty() {
                    // Pure linear: v = at_zero + s x.
                    let at_zero = self.eval(0.0).expect_finite("pwl at 0");
                    return Ok((v - at_zero) / slopes[0]);
                }
                let k = breakpoints.len();
                if v <= self.bk_values[0] {
                    debug_assert!(slopes[0] > 0.0);
                    return Ok(breakpoints[0] - (self.bk_values[0] - v) / slopes[0]);
                }
                for j in 1..k {
                    if v <= self.bk_values[j] {
                        return Ok(breakpoints[j - 1]
                            + (v - self.bk_values[j - 1]) / slopes[j]);
                    }
                }
                debug_assert!(slopes[k] > 0.0);
                Ok(breakpoints[k - 1] + (v - self.bk_values[k - 1]) / slopes[k])
            }
        }
    }

    /// Smallest slope (derivative limit at `-inf`).
    pub fn min_slope(&self) -> f64 {
        match &self.kind {
            LossKind::Exponential { .. } => 0.0,
            LossKind::ScaledPositivePart { .. } => 0.0,
            LossKind::PiecewiseLinear { slopes, .. } => slopes[0],
        }
    }

    /// Largest slope; `+inf` for the exponential family.
    pub fn max_slope(&self) -> XReal {
        match &self.kind {
            LossKind::Exponential { .. } => PosInf,
            LossKind::ScaledPositivePart { alpha } => Finite(1.0 / alpha),
            LossKind::PiecewiseLinear {
                slopes,
                right_endpoint,
                ..
            } => {
                if right_endpoint.is_some() {
                    // Bounded domain: the conjugate grows affinely past the
                    // last slope, so every index above it is admissible.
                    PosInf
                } else {
                    Finite(*slopes.last().unwrap())
                }
            }
        }
    }

    /// True for the families solved exactly by breakpoint enumeration.
    pub fn is_piecewise_linear(&self) -> bool {
        matches!(
            self.kind,
            LossKind::ScaledPositivePart { .. } | LossKind::PiecewiseLinear { .. }
        )
    }

    /// Kink locations of a piecewise-linear loss, including a bounded right
    /// endpoint. Empty for smooth losses.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.kind {
            LossKind::Exponential { .. } => Vec::new(),
            LossKind::ScaledPositivePart { .. } => vec![0.0],
            LossKind::PiecewiseLinear {
                breakpoints,
                right_endpoint,
                ..
            } => {
                let mut ks = breakpoints.clone();
                if let Some(re) = right_endpoint {
                    if ks.last() != Some(re) {
                        ks.push(*re);
                    }
                }
                ks
            }
        }
    }

    /// Affine segments `(slope, intercept)` of a piecewise-linear loss such
    /// that `l(x) = max_j (slope_j * x + intercept_j)` on the domain.
    /// `None` for smooth losses.
    pub fn affine_majorants(&self) -> Option<Vec<(f64, f64)>> {
        match &self.kind {
            LossKind::Exponential { .. } => None,
            LossKind::ScaledPositivePart { alpha } => {
                Some(vec![(0.0, 0.0), (1.0 / alpha, 0.0)])
            }
            LossKind::PiecewiseLinear {
                breakpoints,
                slopes,
                at_zero,
                ..
            } => {
                if breakpoints.is_empty() {
                    return Some(vec![(slopes[0], *at_zero)]);
                }
                let mut segs = Vec::with_capacity(slopes.len());
                for (j, &s) in slopes.iter().enumerate() {
                    // Segment j passes through the breakpoint that starts or
                    // ends it.
                    let (bx, bv) = if j == 0 {
                        (breakpoints[0], self.bk_values[0])
                    } else {
                        (breakpoints[j - 1], self.bk_values[j - 1])
                    };
                    segs.push((s, bv - s * bx));
                }
                Some(segs)
            }
        }
    }
}

/// Values of the piecewise-linear loss at its breakpoints.
fn pwl_breakpoint_values(breakpoints: &[f64], slopes: &[f64], at_zero: f64) -> Vec<f64> {
    if breakpoints.is_empty() {
        return Vec::new();
    }
    // Cumulate relative to the first breakpoint, then anchor at 0.
    let mut rel = vec![0.0; breakpoints.len()];
    for j in 1..breakpoints.len() {
        rel[j] = rel[j - 1] + slopes[j] * (breakpoints[j] - breakpoints[j - 1]);
    }
    let rel_at_zero = pwl_rel_eval(breakpoints, slopes, &rel, 0.0);
    rel.iter().map(|v| v - rel_at_zero + at_zero).collect()
}

/// Piecewise-linear value relative to the cached breakpoint values.
fn pwl_rel_eval(breakpoints: &[f64], slopes: &[f64], rel: &[f64], x: f64) -> f64 {
    let j = breakpoints.partition_point(|&b| b <= x);
    if j == 0 {
        rel[0] + slopes[0] * (x - breakpoints[0])
    } else {
        rel[j - 1] + slopes[j] * (x - breakpoints[j - 1])
    }
}

fn pwl_eval(breakpoints: &[f64], slopes: &[f64], at_zero: f64, bk_values: &[f64], x: f64) -> f64 {
    if breakpoints.is_empty() {
        return at_zero + slopes[0] * x;
    }
    pwl_rel_eval(breakpoints, slopes, bk_values, x)
}

/// Componentwise vector loss function.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorLossSpec {
    components: Vec<LossSpec>,
}

impl VectorLossSpec {
    pub fn new(components: Vec<LossSpec>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("vector loss needs at least one component"));
        }
        Ok(VectorLossSpec { components })
    }

    /// Same loss in every component.
    pub fn replicate(loss: LossSpec, m: usize) -> Result<Self> {
        Self::new(vec![loss; m])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &LossSpec {
        &self.components[i]
    }

    pub fn components(&self) -> &[LossSpec] {
        &self.components
    }

    pub fn is_piecewise_linear(&self) -> bool {
        self.components.iter().all(LossSpec::is_piecewise_linear)
    }
}
