//! Tagged extended reals.
//!
//! Infinite values are distinct enum variants, never float sentinels, so the
//! dichotomies in the risk-measure contracts (a value of `-inf` versus a
//! finite value) survive serialization and comparison.
//!
//! Arithmetic follows the conventions used throughout the crate:
//! `(+inf) * 0 = 0` for scalar scaling, and a weighted sum with any `+inf`
//! term is `+inf` even under a zero weight (the product ordering treats
//! `+inf` as a top element).

use std::cmp::Ordering;
use std::fmt;

/// Extended real number: `-inf`, a finite `f64`, or `+inf`.
///
/// Finite payloads must not be NaN; constructors in this crate reject NaN at
/// the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum XReal {
    NegInf,
    Finite(f64),
    PosInf,
}

pub use XReal::{Finite, NegInf, PosInf};

impl XReal {
    /// Wraps an `f64`, mapping IEEE infinities to the tagged variants.
    ///
    /// Panics on NaN: NaN has no place in the ordered arithmetic below.
    pub fn from_f64(x: f64) -> Self {
        assert!(!x.is_nan(), "XReal::from_f64 received NaN");
        if x == f64::INFINITY {
            PosInf
        } else if x == f64::NEG_INFINITY {
            NegInf
        } else {
            Finite(x)
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Finite(_))
    }

    pub fn is_pos_inf(self) -> bool {
        matches!(self, PosInf)
    }

    pub fn is_neg_inf(self) -> bool {
        matches!(self, NegInf)
    }

    /// Finite payload, if any.
    pub fn finite(self) -> Option<f64> {
        match self {
            Finite(x) => Some(x),
            _ => None,
        }
    }

    /// Finite payload or a panic; for call sites that have already checked.
    pub fn expect_finite(self, ctx: &str) -> f64 {
        match self {
            Finite(x) => x,
            other => panic!("expected finite value in {ctx}, got {other}"),
        }
    }

    /// Lossy conversion for display and CSV export.
    pub fn to_f64(self) -> f64 {
        match self {
            NegInf => f64::NEG_INFINITY,
            Finite(x) => x,
            PosInf => f64::INFINITY,
        }
    }

    /// Sum of two extended reals.
    ///
    /// Panics on `(+inf) + (-inf)`; the algorithms in this crate never form
    /// that combination.
    pub fn add(self, other: XReal) -> XReal {
        match (self, other) {
            (Finite(a), Finite(b)) => Finite(a + b),
            (PosInf, NegInf) | (NegInf, PosInf) => {
                panic!("indeterminate sum (+inf) + (-inf)")
            }
            (PosInf, _) | (_, PosInf) => PosInf,
            (NegInf, _) | (_, NegInf) => NegInf,
        }
    }

    /// Scales by a finite nonnegative factor with the convention
    /// `0 * (+/-inf) = 0`.
    pub fn scale(self, c: f64) -> XReal {
        assert!(c >= 0.0 && c.is_finite(), "scale factor must be finite and >= 0");
        if c == 0.0 {
            return Finite(0.0);
        }
        match self {
            NegInf => NegInf,
            Finite(x) => Finite(c * x),
            PosInf => PosInf,
        }
    }

    pub fn neg(self) -> XReal {
        match self {
            NegInf => PosInf,
            Finite(x) => Finite(-x),
            PosInf => NegInf,
        }
    }

    pub fn min(self, other: XReal) -> XReal {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: XReal) -> XReal {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl fmt::Display for XReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegInf => write!(f, "-inf"),
            Finite(x) => write!(f, "{x}"),
            PosInf => write!(f, "+inf"),
        }
    }
}

impl PartialOrd for XReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let rank = |v: &XReal| match v {
            NegInf => 0u8,
            Finite(_) => 1,
            PosInf => 2,
        };
        match (self, other) {
            (Finite(a), Finite(b)) => a.partial_cmp(b),
            _ => rank(self).partial_cmp(&rank(other)),
        }
    }
}

/// `sum_i w_i x_i` over extended reals with nonnegative finite weights.
///
/// Any `+inf` term forces the result to `+inf` regardless of its weight
/// (top-element convention); otherwise `0 * (-inf) = 0` applies and the
/// remaining terms are summed.
pub fn weighted_sum(weights: &[f64], values: &[XReal]) -> XReal {
    assert_eq!(weights.len(), values.len(), "weighted_sum length mismatch");
    if values.iter().any(|v| v.is_pos_inf()) {
        return PosInf;
    }
    let mut acc = XReal::Finite(0.0);
    for (&w, &v) in weights.iter().zip(values) {
        acc = acc.add(v.scale(w));
    }
    acc
}

/// `x * ln(x)` extended by continuity with `0 * ln(0) = 0`; `-inf` for `x < 0`
/// (the convention `ln(y) = -inf` for `y <= 0` composed with a positive factor
/// never arises; negative arguments are rejected upstream).
pub fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}
