//! Small 1-D search utilities: bisection on monotone predicates,
//! golden-section minimization of convex objectives, log-spaced grids.

use crate::xreal::XReal;

/// Smallest feasible point of a nondecreasing predicate on `[lo, hi]`.
///
/// Caller guarantees `feasible(hi)` and that no point below `lo` is feasible.
/// Returns a feasible point within `tol` of the infimum together with the
/// iteration count. The returned point always satisfies the predicate.
pub fn bisect_smallest_feasible(
    feasible: impl Fn(f64) -> bool,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: u32,
) -> (f64, u32) {
    debug_assert!(lo <= hi);
    if feasible(lo) {
        return (lo, 0);
    }
    let mut a = lo;
    let mut b = hi;
    let mut iters = 0;
    while b - a > tol && iters < max_iter {
        let mid = 0.5 * (a + b);
        if feasible(mid) {
            b = mid;
        } else {
            a = mid;
        }
        iters += 1;
    }
    (b, iters)
}

/// Sign-change bracket for a nondecreasing derivative.
///
/// Expands `[a, b]` geometrically until `d(a) <= 0 <= d(b)` or the expansion
/// cap is hit. Suitable for convex objectives whose minimizer is finite.
pub fn expand_derivative_bracket(
    d: impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    max_expand: u32,
) -> (f64, f64) {
    debug_assert!(a <= b);
    let mut step = (b - a).max(1.0);
    for _ in 0..max_expand {
        if d(a) <= 0.0 {
            break;
        }
        a -= step;
        step *= 2.0;
    }
    step = (b - a).max(1.0);
    for _ in 0..max_expand {
        if d(b) >= 0.0 {
            break;
        }
        b += step;
        step *= 2.0;
    }
    (a, b)
}

/// Golden-section minimization of a convex (hence unimodal) objective on
/// `[a, b]`. Handles extended-real objectives; plateaus resolve toward the
/// left endpoint so results are deterministic.
pub fn golden_min(mut f: impl FnMut(f64) -> XReal, a: f64, b: f64, iters: u32) -> (f64, XReal) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    debug_assert!(a <= b);
    let mut lo = a;
    let mut hi = b;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let xm = 0.5 * (lo + hi);
    let fm = f(xm);
    let mut best = (xm, fm);
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v < best.1 || (v == best.1 && x < best.0) {
            best = (x, v);
        }
    }
    best
}

/// `n` geometrically spaced points on `[lo, hi]`, both positive.
/// `n == 1` returns the geometric midpoint.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    debug_assert!(lo > 0.0 && hi >= lo);
    if n <= 1 {
        return vec![(lo * hi).sqrt()];
    }
    let (lls, lhs) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (lls + (lhs - lls) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Grid scan followed by golden-section refinement between the neighbors of
/// the incumbent. Returns the best point found and its value. Deterministic:
/// grid ties resolve to the smallest abscissa.
pub fn grid_then_golden_min(
    mut f: impl FnMut(f64) -> XReal,
    grid: &[f64],
    golden_iters: u32,
) -> (f64, XReal) {
    assert!(!grid.is_empty());
    let mut best_i = 0;
    let mut best_v = f(grid[0]);
    for (i, &x) in grid.iter().enumerate().skip(1) {
        let v = f(x);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    if !best_v.is_finite() && !best_v.is_neg_inf() {
        // Entire grid sits outside the effective domain; nothing to refine.
        return (grid[best_i], best_v);
    }
    let lo = if best_i == 0 { grid[0] } else { grid[best_i - 1] };
    let hi = if best_i + 1 == grid.len() {
        grid[best_i]
    } else {
        grid[best_i + 1]
    };
    let (x, v) = golden_min(&mut f, lo, hi, golden_iters);
    if v <= best_v {
        (x, v)
    } else {
        (grid[best_i], best_v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xreal::Finite;

    #[test]
    fn bisect_finds_threshold() {
        let (x, _) = bisect_smallest_feasible(|s| s >= 0.3, -2.0, 5.0, 1e-12, 200);
        assert!((x - 0.3).abs() < 1e-10);
        assert!(x >= 0.3);
    }

    #[test]
    fn golden_min_quadratic() {
        let (x, v) = golden_min(|x| Finite((x - 1.25).powi(2)), -4.0, 6.0, 100);
        assert!((x - 1.25).abs() < 1e-9);
        assert!(v.expect_finite("test") < 1e-17);
    }

    #[test]
    fn grid_refine_handles_plateau() {
        let grid = logspace(1e-3, 1e3, 50);
        let (x, _) = grid_then_golden_min(|x| Finite((x.ln()).powi(2)), &grid, 80);
        assert!((x - 1.0).abs() < 1e-6);
    }

    #[test]
    fn logspace_endpoints() {
        let g = logspace(0.5, 32.0, 7);
        assert_eq!(g.len(), 7);
        assert!((g[0] - 0.5).abs() < 1e-12);
        assert!((g[6] - 32.0).abs() < 1e-9);
    }
}
