//! Single knob surface for every tolerance and budget in the crate.

use serde::{Deserialize, Serialize};

/// Numeric tolerances and iteration budgets.
///
/// Every solver in the crate reads its knobs from here so that a single
/// override propagates consistently. Defaults are the values assumed by the
/// documented accuracy statements.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericConfig {
    /// Absolute tolerance on the capital variable in scalar bisections.
    pub bisect_tol: f64,
    /// Iteration cap for scalar bisections.
    pub bisect_max_iter: u32,
    /// Absolute tolerance on halfspace residuals in membership tests.
    pub membership_tol: f64,
    /// Bracketing tolerance for boundary ray-shooting.
    pub ray_tol: f64,
    /// Cap on the ray parameter; rays still inside at this length are
    /// reported as unbounded directions.
    pub ray_cap: f64,
    /// Number of points in logarithmic lambda grids for scalar suprema.
    pub lambda_grid: usize,
    /// Lambda grids are clipped to this interval before intersecting the
    /// admissible index set.
    pub lambda_clip: (f64, f64),
    /// Number of points per component in logarithmic r grids.
    pub r_grid: usize,
    /// r grids are clipped to this interval per component.
    pub r_clip: (f64, f64),
    /// Iteration budget for golden-section refinements.
    pub golden_iters: u32,
    /// Iteration cap for the damped Newton solver.
    pub newton_max_iter: u32,
    /// First-order residual tolerance for the damped Newton solver.
    pub newton_tol: f64,
    /// Iteration budget for projected-gradient market scalarizations.
    pub subgrad_iters: u32,
    /// Tolerance on `sum(p) - 1` at probability-space construction.
    pub prob_sum_tol: f64,
    /// Tolerance on `E[dQ/dP] - 1` at vector-measure construction.
    pub density_tol: f64,
    /// Feasibility tolerance inside the LP solver.
    pub lp_tol: f64,
    /// Boundary directions sampled for `m = 2` regions.
    pub directions_2d: usize,
    /// Boundary directions sampled for `m = 3` regions.
    pub directions_3d: usize,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig {
            bisect_tol: 1e-10,
            bisect_max_iter: 200,
            membership_tol: 1e-9,
            ray_tol: 1e-8,
            ray_cap: 1e7,
            lambda_grid: 200,
            lambda_clip: (1e-4, 1e4),
            r_grid: 50,
            r_clip: (1e-3, 1e3),
            golden_iters: 120,
            newton_max_iter: 500,
            newton_tol: 1e-10,
            subgrad_iters: 10_000,
            prob_sum_tol: 1e-12,
            density_tol: 1e-10,
            lp_tol: 1e-9,
            directions_2d: 64,
            directions_3d: 256,
        }
    }
}

impl NumericConfig {
    /// Default direction count for an `m`-dimensional region.
    pub fn directions_for(&self, m: usize) -> usize {
        match m {
            0 | 1 => 1,
            2 => self.directions_2d,
            _ => self.directions_3d,
        }
    }
}
