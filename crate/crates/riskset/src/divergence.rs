//! Divergence generators as Fenchel conjugates of loss functions.
//!
//! For a loss `l` the generator is `g(y) = sup_x (x y - l(x))`. Because `l`
//! is nondecreasing and finite at 0, `g` is nonnegative outside `y >= 0`
//! only in the trivial sense: `g = +inf` for `y < 0`. Each [`LossSpec`]
//! family has a closed-form conjugate:
//!
//! * exponential: `g(y) = (y ln y - y + 1) / beta` on `y >= 0`;
//! * scaled positive part: the indicator of `[0, 1/alpha]`;
//! * piecewise linear: piecewise linear on `[s_min, s_max]`, evaluated as a
//!   maximum of affine forms anchored at the loss breakpoints, with an
//!   affine tail past `s_max` when the loss domain is bounded.
//!
//! The pairing is a bijection. A `DivergenceSpec` stores its loss and can
//! hand it back, so nothing is lost in either direction.

use crate::error::{Error, Result};
use crate::loss::{LossKind, LossSpec};
use crate::xreal::{xlnx, Finite, PosInf, XReal};

/// Absolute-plus-relative slack for domain boundary checks, so densities
/// that land on the boundary after division survive roundoff.
const EDGE_TOL: f64 = 1e-12;

fn at_most(y: f64, bound: f64) -> bool {
    y <= bound + EDGE_TOL * bound.abs().max(1.0)
}

fn at_least(y: f64, bound: f64) -> bool {
    y >= bound - EDGE_TOL * bound.abs().max(1.0)
}

/// Divergence generator paired with its loss function.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceSpec {
    loss: LossSpec,
}

impl DivergenceSpec {
    pub fn new(loss: LossSpec) -> Self {
        DivergenceSpec { loss }
    }

    /// The loss this generator is conjugate to.
    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    /// Evaluates `g(y)`; `+inf` outside the domain.
    ///
    /// # Examples
    ///
    /// ```
    /// use riskset::divergence::DivergenceSpec;
    /// use riskset::loss::LossSpec;
    /// use riskset::xreal::{Finite, PosInf};
    ///
    /// let g = DivergenceSpec::new(LossSpec::exponential(1.0).unwrap());
    /// assert_eq!(g.eval(1.0), Finite(0.0));
    /// assert_eq!(g.eval(0.0), Finite(1.0));
    /// assert_eq!(g.eval(-0.5), PosInf);
    ///
    /// let ind = DivergenceSpec::new(LossSpec::scaled_positive_part(0.5).unwrap());
    /// assert_eq!(ind.eval(1.7), Finite(0.0));
    /// assert_eq!(ind.eval(2.3), PosInf);
    /// ```
    pub fn eval(&self, y: f64) -> XReal {
        match self.loss.kind() {
            LossKind::Exponential { beta } => {
                if y < 0.0 {
                    PosInf
                } else {
                    Finite((xlnx(y) - y + 1.0) / beta)
                }
            }
            LossKind::ScaledPositivePart { alpha } => {
                if at_least(y, 0.0) && at_most(y, 1.0 / alpha) {
                    Finite(0.0)
                } else {
                    PosInf
                }
            }
            LossKind::PiecewiseLinear {
                breakpoints,
                slopes,
                right_endpoint,
                ..
            } => {
                if !at_least(y, slopes[0]) {
                    return PosInf;
                }
                if right_endpoint.is_none() && !at_most(y, *slopes.last().unwrap()) {
                    return PosInf;
                }
                // sup_x (x y - l(x)) over the anchor points where it can be
                // attained: the breakpoints (0 itself if there are none) and
                // a bounded right endpoint.
                let mut best = f64::NEG_INFINITY;
                let mut anchor = |x: f64| {
                    let lx = self.loss.eval(x).expect_finite("loss at anchor");
                    best = best.max(x * y - lx);
                };
                if breakpoints.is_empty() {
                    anchor(0.0);
                } else {
                    for &b in breakpoints {
                        anchor(b);
                    }
                }
                if let Some(re) = right_endpoint {
                    anchor(*re);
                }
                Finite(best)
            }
        }
    }

    /// Perspective value `lambda * g(y / lambda)` for `lambda > 0`.
    pub fn eval_scaled(&self, lambda: f64, y: f64) -> XReal {
        debug_assert!(lambda > 0.0 && lambda.is_finite());
        self.eval(y / lambda).scale(lambda)
    }

    /// The reciprocal domain `1 / dom g` intersected with the positive
    /// reals: the set of admissible risk-index values.
    pub fn one_over_dom(&self) -> IndexInterval {
        let min_slope = self.loss.min_slope();
        let max_slope = self.loss.max_slope();
        let (lo, lo_closed) = match max_slope {
            Finite(s) => (1.0 / s, true),
            _ => (0.0, false),
        };
        let (hi, hi_closed) = if min_slope > 0.0 {
            (Finite(1.0 / min_slope), true)
        } else {
            (PosInf, false)
        };
        // Intersect with the strictly positive reals.
        let lo_closed = lo_closed && lo > 0.0;
        IndexInterval {
            lo,
            lo_closed,
            hi,
            hi_closed,
        }
    }
}

/// An interval of admissible index values, subset of `(0, +inf]` endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexInterval {
    lo: f64,
    lo_closed: bool,
    hi: XReal,
    hi_closed: bool,
}

impl IndexInterval {
    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> XReal {
        self.hi
    }

    pub fn lo_closed(&self) -> bool {
        self.lo_closed
    }

    pub fn hi_closed(&self) -> bool {
        self.hi_closed
    }

    pub fn contains(&self, lambda: f64) -> bool {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return false;
        }
        let above = lambda > self.lo || (self.lo_closed && lambda == self.lo);
        let below = match self.hi {
            Finite(h) => lambda < h || (self.hi_closed && lambda == h),
            _ => true,
        };
        above && below
    }

    /// Search bounds after clipping to `clip`, plus any closed finite
    /// endpoints that must be probed exactly. Returns `None` for the search
    /// range when clipping empties it (a degenerate or out-of-window
    /// interval), in which case the exact endpoints are all there is.
    pub fn search_window(&self, clip: (f64, f64)) -> (Option<(f64, f64)>, Vec<f64>) {
        let mut exact = Vec::new();
        if self.lo_closed {
            exact.push(self.lo);
        }
        if let Finite(h) = self.hi {
            if self.hi_closed && !exact.contains(&h) {
                exact.push(h);
            }
        }
        let a = self.lo.max(clip.0);
        let b = match self.hi {
            Finite(h) => h.min(clip.1),
            _ => clip.1,
        };
        if a < b {
            (Some((a, b)), exact)
        } else {
            (None, exact)
        }
    }
}

impl std::fmt::Display for IndexInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let lb = if self.lo_closed { '[' } else { '(' };
        let rb = if self.hi_closed { ']' } else { ')' };
        write!(f, "{lb}{}, {}{rb}", self.lo, self.hi)
    }
}

/// Componentwise divergence generator.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorDivergenceSpec {
    components: Vec<DivergenceSpec>,
}

impl VectorDivergenceSpec {
    pub fn new(components: Vec<DivergenceSpec>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid(
                "vector divergence needs at least one component",
            ));
        }
        Ok(VectorDivergenceSpec { components })
    }

    pub fn from_losses(losses: &crate::loss::VectorLossSpec) -> Self {
        VectorDivergenceSpec {
            components: losses
                .components()
                .iter()
                .cloned()
                .map(DivergenceSpec::new)
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &DivergenceSpec {
        &self.components[i]
    }

    pub fn components(&self) -> &[DivergenceSpec] {
        &self.components
    }

    /// True when `r` lies in the product of the component index intervals.
    pub fn admissible_index(&self, r: &[f64]) -> bool {
        r.len() == self.dim()
            && self
                .components
                .iter()
                .zip(r)
                .all(|(g, &ri)| g.one_over_dom().contains(ri))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pwl(breakpoints: Vec<f64>, slopes: Vec<f64>, at_zero: f64, re: Option<f64>) -> LossSpec {
        LossSpec::new(LossKind::PiecewiseLinear {
            breakpoints,
            slopes,
            at_zero,
            right_endpoint: re,
        })
        .unwrap()
    }

    /// Brute-force conjugate on a fine grid over x.
    fn conj_grid(loss: &LossSpec, y: f64, lo: f64, hi: f64) -> f64 {
        let n = 40_000;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            if let Finite(lx) = loss.eval(x) {
                best = best.max(x * y - lx);
            }
        }
        best
    }

    #[test]
    fn exponential_generator_values() {
        let g = DivergenceSpec::new(LossSpec::exponential(2.0).unwrap());
        assert_eq!(g.eval(1.0), Finite(0.0));
        assert_eq!(g.eval(0.0), Finite(0.5));
        assert_eq!(g.eval(-1e-9), PosInf);
        // spots against the grid conjugate
        let l = LossSpec::exponential(2.0).unwrap();
        for y in [0.2, 1.0, 3.0] {
            let direct = g.eval(y).expect_finite("g");
            let grid = conj_grid(&l, y, -20.0, 5.0);
            assert!((direct - grid).abs() < 1e-5, "y={y}: {direct} vs {grid}");
        }
    }

    #[test]
    fn indicator_generator_for_scaled_positive_part() {
        let g = DivergenceSpec::new(LossSpec::scaled_positive_part(0.5).unwrap());
        assert_eq!(g.eval(0.0), Finite(0.0));
        assert_eq!(g.eval(2.0), Finite(0.0));
        assert_eq!(g.eval(2.0 + 1e-6), PosInf);
        assert_eq!(g.eval(-1e-6), PosInf);
        let iv = g.one_over_dom();
        assert!(iv.contains(0.5));
        assert!(iv.contains(7.0));
        assert!(!iv.contains(0.4999));
    }

    #[test]
    fn pwl_generator_matches_grid_conjugate() {
        let l = pwl(vec![-1.0, 2.0], vec![0.5, 1.0, 3.0], 1.0, None);
        let g = DivergenceSpec::new(l.clone());
        for y in [0.5, 0.75, 1.0, 2.0, 2.9, 3.0] {
            let direct = g.eval(y).expect_finite("g");
            let grid = conj_grid(&l, y, -50.0, 50.0);
            assert!((direct - grid).abs() < 1e-4, "y={y}: {direct} vs {grid}");
        }
        assert_eq!(g.eval(0.4), PosInf);
        assert_eq!(g.eval(3.1), PosInf);
    }

    #[test]
    fn bounded_domain_gives_affine_tail() {
        // l linear with slope 1 up to x = 2, +inf beyond.
        let l = pwl(vec![], vec![1.0], 0.0, Some(2.0));
        let g = DivergenceSpec::new(l.clone());
        // For y > 1 the sup sits at x = 2: g(y) = 2y - 2.
        assert_eq!(g.eval(3.0), Finite(4.0));
        assert_eq!(g.eval(1.0), Finite(0.0));
        assert_eq!(g.eval(0.5), PosInf);
        let iv = g.one_over_dom();
        assert!(iv.contains(1.0));
        assert!(iv.contains(0.001), "index interval should reach toward 0");
        assert!(!iv.contains(1.0 + 1e-9));
    }

    #[test]
    fn index_intervals_per_family() {
        // exponential: (0, +inf)
        let iv = DivergenceSpec::new(LossSpec::exponential(1.0).unwrap()).one_over_dom();
        assert!(!iv.contains(0.0));
        assert!(iv.contains(1e-9));
        assert!(iv.contains(1e9));
        assert_eq!(iv.hi(), PosInf);

        // scaled positive part alpha: [alpha, +inf)
        let iv = DivergenceSpec::new(LossSpec::scaled_positive_part(0.25).unwrap()).one_over_dom();
        assert!(iv.contains(0.25));
        assert!(!iv.contains(0.2499999));

        // slopes in [1, 2]: [1/2, 1] closed
        let l = pwl(vec![0.0], vec![1.0, 2.0], 0.0, None);
        let iv = DivergenceSpec::new(l).one_over_dom();
        assert!(iv.contains(0.5));
        assert!(iv.contains(1.0));
        assert!(!iv.contains(0.4999));
        assert!(!iv.contains(1.0001));
    }

    #[test]
    fn perspective_scaling() {
        let g = DivergenceSpec::new(LossSpec::exponential(1.0).unwrap());
        // lambda * g(y/lambda) at lambda = 2, y = 2 is 2 * g(1) = 0.
        assert_eq!(g.eval_scaled(2.0, 2.0), Finite(0.0));
        // indicator: scaling moves the admissible band.
        let ind = DivergenceSpec::new(LossSpec::scaled_positive_part(0.5).unwrap());
        assert_eq!(ind.eval_scaled(0.5, 1.0), Finite(0.0));
        assert_eq!(ind.eval_scaled(0.4, 1.0), PosInf);
    }

    #[test]
    fn biconjugation_recovers_loss_on_grid() {
        let losses = vec![
            LossSpec::exponential(1.0).unwrap(),
            LossSpec::scaled_positive_part(0.5).unwrap(),
            pwl(vec![-1.0, 2.0], vec![0.0, 1.0, 3.0], 1.0, None),
        ];
        for l in &losses {
            let g = DivergenceSpec::new(l.clone());
            for i in 0..60 {
                let x = -3.0 + 0.1 * i as f64;
                let direct = match l.eval(x) {
                    Finite(v) => v,
                    _ => continue,
                };
                // sup_y (x y - g(y)) over a fine y grid, a lower bound that
                // should approach the loss from below.
                let mut best = f64::NEG_INFINITY;
                for j in 0..=20_000 {
                    let y = 20.0 * j as f64 / 20_000.0;
                    if let Finite(gy) = g.eval(y) {
                        best = best.max(x * y - gy);
                    }
                }
                assert!(best <= direct + 1e-7, "x={x}: {best} > {direct}");
                assert!(best >= direct - 2e-3, "x={x}: {best} << {direct}");
            }
        }
    }

    #[test]
    fn search_window_respects_clipping() {
        let g = DivergenceSpec::new(LossSpec::scaled_positive_part(0.3).unwrap());
        let iv = g.one_over_dom();
        let (win, exact) = iv.search_window((1e-4, 1e4));
        let (a, b) = win.unwrap();
        assert!((a - 0.3).abs() < 1e-15);
        assert_eq!(b, 1e4);
        assert_eq!(exact, vec![0.3]);
    }
}
