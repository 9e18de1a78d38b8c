//! Dense two-phase simplex solver.
//!
//! Sized for the dense, small-to-medium programs this crate produces
//! (scalarizations over scenario trees, cone feasibility checks), up to a
//! couple thousand variables. Bland's rule everywhere, so the solver cannot
//! cycle and runs are deterministic: the same program yields the same
//! vertex, bit for bit.
//!
//! Variables are nonnegative unless [`LinearProgram::free_var`] splits them
//! into a positive and a negative part. Rows may be `<=`, `>=`, or `=`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    /// The objective decreases without bound along `ray`, a recession
    /// direction of the feasible set expressed in the original variables.
    Unbounded { ray: Vec<f64> },
}

impl LpOutcome {
    /// The optimal point, if one was found.
    pub fn point(&self) -> Option<&[f64]> {
        match self {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpOutcome::Infeasible)
    }
}

struct Row {
    coeffs: Vec<f64>,
    rel: Relation,
    rhs: f64,
}

/// Minimization problem `min c^T x` subject to linear rows.
pub struct LinearProgram {
    n: usize,
    c: Vec<f64>,
    rows: Vec<Row>,
    free: Vec<bool>,
}

const MAX_PIVOTS: usize = 200_000;

impl LinearProgram {
    /// A program over `num_vars` nonnegative variables with zero objective.
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            n: num_vars,
            c: vec![0.0; num_vars],
            rows: Vec::new(),
            free: vec![false; num_vars],
        }
    }

    pub fn set_objective(&mut self, c: &[f64]) {
        assert_eq!(c.len(), self.n, "objective length mismatch");
        self.c.copy_from_slice(c);
    }

    pub fn objective_coeff(&mut self, i: usize, ci: f64) {
        self.c[i] = ci;
    }

    /// Marks variable `i` as unrestricted in sign.
    pub fn free_var(&mut self, i: usize) {
        self.free[i] = true;
    }

    pub fn add_row(&mut self, coeffs: &[f64], rel: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.n, "row length mismatch");
        debug_assert!(
            coeffs.iter().all(|v| v.is_finite()) && rhs.is_finite(),
            "non-finite LP data"
        );
        self.rows.push(Row {
            coeffs: coeffs.to_vec(),
            rel,
            rhs,
        });
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Solves the program. `tol` guards pivots, ratio tests, and the
    /// phase-one feasibility threshold.
    pub fn solve(&self, tol: f64) -> Result<LpOutcome> {
        // Column layout: originals first (free variables split into a
        // positive and a negative column), then one slack or surplus column
        // per inequality row. Artificials live in a separate block.
        let mut col_of = Vec::with_capacity(self.n);
        let mut n_std = 0usize;
        for i in 0..self.n {
            if self.free[i] {
                col_of.push((n_std, Some(n_std + 1)));
                n_std += 2;
            } else {
                col_of.push((n_std, None));
                n_std += 1;
            }
        }
        let m = self.rows.len();
        let n_slack = self
            .rows
            .iter()
            .filter(|r| r.rel != Relation::Eq)
            .count();
        let total = n_std + n_slack;

        // Dense constraint matrix with rhs normalized to be nonnegative.
        let mut a = vec![vec![0.0f64; total + m]; m];
        let mut b = vec![0.0f64; m];
        let mut basis = vec![usize::MAX; m];
        let mut slack_cursor = n_std;
        let mut n_art = 0usize;
        for (ri, row) in self.rows.iter().enumerate() {
            let flip = row.rhs < 0.0;
            let sgn = if flip { -1.0 } else { 1.0 };
            let rel = match (row.rel, flip) {
                (Relation::Eq, _) => Relation::Eq,
                (Relation::Le, false) | (Relation::Ge, true) => Relation::Le,
                (Relation::Ge, false) | (Relation::Le, true) => Relation::Ge,
            };
            for i in 0..self.n {
                let v = sgn * row.coeffs[i];
                let (cp, cn) = col_of[i];
                a[ri][cp] = v;
                if let Some(cn) = cn {
                    a[ri][cn] = -v;
                }
            }
            b[ri] = sgn * row.rhs;
            match rel {
                Relation::Le => {
                    a[ri][slack_cursor] = 1.0;
                    basis[ri] = slack_cursor;
                    slack_cursor += 1;
                }
                Relation::Ge => {
                    a[ri][slack_cursor] = -1.0;
                    slack_cursor += 1;
                }
                Relation::Eq => {}
            }
            if basis[ri] == usize::MAX {
                let art = total + n_art;
                a[ri][art] = 1.0;
                basis[ri] = art;
                n_art += 1;
            }
        }
        let ncols = total + n_art;
        for row in a.iter_mut() {
            row.truncate(ncols);
        }

        // Phase one: minimize the sum of artificials.
        if n_art > 0 {
            let mut cost = vec![0.0f64; ncols];
            for j in total..ncols {
                cost[j] = 1.0;
            }
            let mut obj = 0.0;
            reduce_cost_row(&a, &b, &basis, &mut cost, &mut obj);
            let res = pivot_loop(&mut a, &mut b, &mut basis, &mut cost, &mut obj, ncols, tol)?;
            debug_assert!(res.is_none(), "phase one cannot be unbounded");
            if -obj > tol {
                return Ok(LpOutcome::Infeasible);
            }
            drive_out_artificials(&mut a, &mut b, &mut basis, total, tol);
        }

        // Phase two over the original objective, artificials locked out.
        let mut cost = vec![0.0f64; ncols];
        for i in 0..self.n {
            let (cp, cn) = col_of[i];
            cost[cp] = self.c[i];
            if let Some(cn) = cn {
                cost[cn] = -self.c[i];
            }
        }
        let mut obj = 0.0;
        reduce_cost_row(&a, &b, &basis, &mut cost, &mut obj);
        if let Some(enter) = pivot_loop(&mut a, &mut b, &mut basis, &mut cost, &mut obj, total, tol)? {
            // Recession direction: the entering column moves up while each
            // basic variable adjusts by its column entry; everything else
            // stays put.
            let mut dir = vec![0.0f64; ncols];
            dir[enter] = 1.0;
            for (ri, &bi) in basis.iter().enumerate() {
                if bi != usize::MAX {
                    dir[bi] -= a[ri][enter];
                }
            }
            let mut ray = vec![0.0f64; self.n];
            for i in 0..self.n {
                let (cp, cn) = col_of[i];
                ray[i] = dir[cp] - cn.map_or(0.0, |c| dir[c]);
            }
            return Ok(LpOutcome::Unbounded { ray });
        }

        // Read the solution back out of the basis.
        let mut xs = vec![0.0f64; ncols];
        for (ri, &bi) in basis.iter().enumerate() {
            if bi != usize::MAX {
                xs[bi] = b[ri];
            }
        }
        let mut x = vec![0.0f64; self.n];
        for i in 0..self.n {
            let (cp, cn) = col_of[i];
            x[i] = xs[cp] - cn.map_or(0.0, |c| xs[c]);
        }
        let value = self.c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
        Ok(LpOutcome::Optimal { x, value })
    }
}

/// Expresses `cost` in the current basis: subtract multiples of the basic
/// rows so every basic column has zero reduced cost. `obj` accumulates the
/// negated objective value.
fn reduce_cost_row(
    a: &[Vec<f64>],
    b: &[f64],
    basis: &[usize],
    cost: &mut [f64],
    obj: &mut f64,
) {
    for (ri, &bi) in basis.iter().enumerate() {
        if bi == usize::MAX {
            continue;
        }
        let f = cost[bi];
        if f != 0.0 {
            for j in 0..cost.len() {
                cost[j] -= f * a[ri][j];
            }
            *obj -= f * b[ri];
        }
    }
}

/// Bland-rule simplex iterations over columns `0..active`. Returns the
/// entering column on which the ratio test failed when the program is
/// unbounded in the current phase, `None` at an optimum.
fn pivot_loop(
    a: &mut [Vec<f64>],
    b: &mut [f64],
    basis: &mut [usize],
    cost: &mut [f64],
    obj: &mut f64,
    active: usize,
    tol: f64,
) -> Result<Option<usize>> {
    let m = a.len();
    for _ in 0..MAX_PIVOTS {
        // Entering: the lowest-index column with negative reduced cost.
        let mut enter = usize::MAX;
        for j in 0..active {
            if cost[j] < -tol {
                enter = j;
                break;
            }
        }
        if enter == usize::MAX {
            return Ok(None);
        }
        // Leaving: tightest ratio, ties broken by the smallest basic index.
        let mut leave = usize::MAX;
        let mut best = f64::INFINITY;
        for ri in 0..m {
            let coef = a[ri][enter];
            if coef > tol {
                let ratio = b[ri] / coef;
                if ratio < best - tol
                    || (ratio < best + tol && (leave == usize::MAX || basis[ri] < basis[leave]))
                {
                    best = ratio;
                    leave = ri;
                }
            }
        }
        if leave == usize::MAX {
            return Ok(Some(enter));
        }
        pivot(a, b, basis, cost, obj, leave, enter);
    }
    Err(Error::NoConvergence("simplex pivot limit reached".into()))
}

fn pivot(
    a: &mut [Vec<f64>],
    b: &mut [f64],
    basis: &mut [usize],
    cost: &mut [f64],
    obj: &mut f64,
    leave: usize,
    enter: usize,
) {
    let piv = a[leave][enter];
    let inv = 1.0 / piv;
    for v in a[leave].iter_mut() {
        *v *= inv;
    }
    b[leave] *= inv;
    let m = a.len();
    for ri in 0..m {
        if ri == leave {
            continue;
        }
        let f = a[ri][enter];
        if f != 0.0 {
            // Row operations kept in index order for determinism.
            let (src, dst) = if ri < leave {
                let (lo, hi) = a.split_at_mut(leave);
                (&hi[0], &mut lo[ri])
            } else {
                let (lo, hi) = a.split_at_mut(ri);
                (&lo[leave], &mut hi[0])
            };
            for j in 0..dst.len() {
                dst[j] -= f * src[j];
            }
            b[ri] -= f * b[leave];
        }
    }
    let f = cost[enter];
    if f != 0.0 {
        for j in 0..cost.len() {
            cost[j] -= f * a[leave][j];
        }
        *obj -= f * b[leave];
    }
    basis[leave] = enter;
}

/// After phase one, pivots artificial variables out of the basis. A row
/// whose artificial cannot be replaced is redundant and is blanked out.
fn drive_out_artificials(
    a: &mut [Vec<f64>],
    b: &mut [f64],
    basis: &mut [usize],
    total: usize,
    tol: f64,
) {
    let m = a.len();
    for ri in 0..m {
        if basis[ri] < total {
            continue;
        }
        let mut found = usize::MAX;
        for j in 0..total {
            if a[ri][j].abs() > tol {
                found = j;
                break;
            }
        }
        if found == usize::MAX {
            // Redundant constraint: zero the row so it never pivots again.
            for v in a[ri].iter_mut() {
                *v = 0.0;
            }
            b[ri] = 0.0;
            basis[ri] = usize::MAX;
        } else {
            let mut dummy_cost = vec![0.0; a[0].len()];
            let mut dummy_obj = 0.0;
            pivot(a, b, basis, &mut dummy_cost, &mut dummy_obj, ri, found);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-9;

    fn optimal(out: LpOutcome) -> (Vec<f64>, f64) {
        match out {
            LpOutcome::Optimal { x, value } => (x, value),
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn simple_bounded_program() {
        // min -x - y, x + y <= 1, x,y >= 0: value -1 on the segment.
        let mut lp = LinearProgram::new(2);
        lp.set_objective(&[-1.0, -1.0]);
        lp.add_row(&[1.0, 1.0], Relation::Le, 1.0);
        let (x, v) = optimal(lp.solve(TOL).unwrap());
        assert!((v + 1.0).abs() < 1e-9);
        assert!((x[0] + x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y, x + y = 1, x >= 0.25: optimum x=1, y=0 -> 1.
        let mut lp = LinearProgram::new(2);
        lp.set_objective(&[1.0, 2.0]);
        lp.add_row(&[1.0, 1.0], Relation::Eq, 1.0);
        lp.add_row(&[1.0, 0.0], Relation::Ge, 0.25);
        let (x, v) = optimal(lp.solve(TOL).unwrap());
        assert!((v - 1.0).abs() < 1e-9, "value {v}");
        assert!((x[0] - 1.0).abs() < 1e-9 && x[1].abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = LinearProgram::new(1);
        lp.add_row(&[1.0], Relation::Le, -1.0); // x <= -1 with x >= 0
        assert_eq!(lp.solve(TOL).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn detects_unbounded_with_ray() {
        let mut lp = LinearProgram::new(1);
        lp.set_objective(&[-1.0]);
        lp.add_row(&[1.0], Relation::Ge, 0.0);
        match lp.solve(TOL).unwrap() {
            LpOutcome::Unbounded { ray } => assert!(ray[0] > 0.0),
            other => panic!("expected unbounded, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_ray_is_feasible_direction() {
        // min -x - y with x - y <= 1, y - x <= 1: recession along (1, 1).
        let mut lp = LinearProgram::new(2);
        lp.set_objective(&[-1.0, -1.0]);
        lp.add_row(&[1.0, -1.0], Relation::Le, 1.0);
        lp.add_row(&[-1.0, 1.0], Relation::Le, 1.0);
        match lp.solve(TOL).unwrap() {
            LpOutcome::Unbounded { ray } => {
                // Objective strictly decreases along the ray.
                assert!(ray[0] + ray[1] > TOL);
                // Ray respects both row recession inequalities.
                assert!(ray[0] - ray[1] <= TOL && ray[1] - ray[0] <= TOL);
                assert!(ray.iter().all(|&v| v >= -TOL));
            }
            other => panic!("expected unbounded, got {other:?}"),
        }
    }

    #[test]
    fn free_variables_go_negative() {
        // min x subject to x >= -5, x free.
        let mut lp = LinearProgram::new(1);
        lp.set_objective(&[1.0]);
        lp.free_var(0);
        lp.add_row(&[1.0], Relation::Ge, -5.0);
        let (x, v) = optimal(lp.solve(TOL).unwrap());
        assert!((x[0] + 5.0).abs() < 1e-9);
        assert!((v + 5.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        // The same equality twice plus its sum: rank-deficient system.
        let mut lp = LinearProgram::new(2);
        lp.set_objective(&[1.0, 1.0]);
        lp.add_row(&[1.0, 1.0], Relation::Eq, 2.0);
        lp.add_row(&[1.0, 1.0], Relation::Eq, 2.0);
        lp.add_row(&[2.0, 2.0], Relation::Eq, 4.0);
        let (_, v) = optimal(lp.solve(TOL).unwrap());
        assert!((v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // Classic degeneracy: multiple rows tight at the optimum.
        let mut lp = LinearProgram::new(2);
        lp.set_objective(&[-1.0, -1.0]);
        lp.add_row(&[1.0, 0.0], Relation::Le, 1.0);
        lp.add_row(&[0.0, 1.0], Relation::Le, 1.0);
        lp.add_row(&[1.0, 1.0], Relation::Le, 2.0);
        lp.add_row(&[1.0, -1.0], Relation::Le, 0.0);
        let (x, v) = optimal(lp.solve(TOL).unwrap());
        assert!((v + 2.0).abs() < 1e-9);
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn larger_random_feasibility() {
        // Transportation-style program with a known optimum.
        // min sum of x, rows force each of 4 groups to ship 1 unit.
        let mut lp = LinearProgram::new(8);
        lp.set_objective(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        for g in 0..4 {
            let mut row = vec![0.0; 8];
            row[2 * g] = 1.0;
            row[2 * g + 1] = 1.0;
            lp.add_row(&row, Relation::Eq, 1.0);
        }
        let (x, v) = optimal(lp.solve(TOL).unwrap());
        // Cheaper column of each pair carries the unit.
        assert!((v - (1.0 + 3.0 + 5.0 + 7.0)).abs() < 1e-9);
        for g in 0..4 {
            assert!((x[2 * g] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let build = || {
            let mut lp = LinearProgram::new(3);
            lp.set_objective(&[-1.0, -1.0, -1.0]);
            lp.add_row(&[1.0, 1.0, 0.0], Relation::Le, 1.0);
            lp.add_row(&[0.0, 1.0, 1.0], Relation::Le, 1.0);
            lp.add_row(&[1.0, 0.0, 1.0], Relation::Le, 1.0);
            lp
        };
        let a = build().solve(TOL).unwrap();
        let b = build().solve(TOL).unwrap();
        assert_eq!(a, b);
    }
}
