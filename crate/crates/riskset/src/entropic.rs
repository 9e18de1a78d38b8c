//! Exponential-loss risk measures with closed forms.
//!
//! With componentwise exponential losses `l_i(x) = (exp(b_i x) - 1)/b_i`
//! the shortfall region is a shifted copy of one fixed set: the
//! componentwise log-moment vector plus a log-transformed image of the
//! comparison set. That collapses most of the generic numeric machinery
//! into closed forms, which this module provides both for fast evaluation
//! and as independent cross-checks of the generic routes.
//!
//! The direction-dependent optimal index vector solves a strictly convex
//! problem (a smooth separable term plus the polyhedral support term of
//! the comparison set). It is computed here in multiplier space: writing
//! the support term through its dual turns the whole problem into a smooth
//! convex minimization over nonnegative multipliers, one per halfspace of
//! the comparison set, with the logarithmic terms acting as a built-in
//! barrier. A damped Newton iteration with projected backtracking solves
//! it; the reported first-order certificate is checked against the
//! comparison set afterwards.

use crate::config::NumericConfig;
use crate::error::{Error, Result};
use crate::loss::{LossSpec, VectorLossSpec};
use crate::poly::{dot, ThresholdData};
use crate::set_risk::PenaltyValue;
use crate::space::{FiniteProbSpace, RandomVector, VectorMeasure};
use crate::xreal::{xlnx, Finite, NegInf, PosInf, XReal};

/// Componentwise exponential-loss model: risk aversions and a threshold.
#[derive(Debug, Clone)]
pub struct EntropicSpec {
    beta: Vec<f64>,
    thresh: ThresholdData,
}

impl EntropicSpec {
    pub fn new(beta: Vec<f64>, thresh: ThresholdData) -> Result<Self> {
        if beta.len() != thresh.dim() {
            return Err(Error::dimension("risk aversion and threshold dims differ"));
        }
        if beta.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(Error::invalid("risk aversions must be positive and finite"));
        }
        for (i, (&b, &x0)) in beta.iter().zip(thresh.x0()).enumerate() {
            // The loss range is (-1/b, +inf); the threshold must be interior.
            if x0 <= -1.0 / b {
                return Err(Error::precondition(format!(
                    "threshold component {i} must exceed -1/{b}"
                )));
            }
        }
        Ok(EntropicSpec { beta, thresh })
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn thresh(&self) -> &ThresholdData {
        &self.thresh
    }

    /// The equivalent generic loss vector, for cross-checks.
    pub fn losses(&self) -> VectorLossSpec {
        VectorLossSpec::new(
            self.beta
                .iter()
                .map(|&b| LossSpec::exponential(b).unwrap())
                .collect(),
        )
        .unwrap()
    }
}

/// `log E[exp(-b X)]`, shifted by the max exponent so large `b` cannot
/// overflow.
pub(crate) fn log_exp_moment(space: &FiniteProbSpace, x: &[f64], b: f64) -> f64 {
    let shift = x
        .iter()
        .map(|&xk| -b * xk)
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = space
        .probs()
        .iter()
        .zip(x)
        .map(|(p, &xk)| p * (-b * xk - shift).exp())
        .sum();
    shift + total.ln()
}

/// Componentwise `(1/b_i) log E[exp(-b_i X_i)]`.
pub fn entropic_vector(x: &RandomVector, beta: &[f64]) -> Result<Vec<f64>> {
    if x.dim() != beta.len() {
        return Err(Error::dimension("position and risk aversion dims differ"));
    }
    if beta.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
        return Err(Error::invalid("risk aversions must be positive and finite"));
    }
    Ok((0..beta.len())
        .map(|i| log_exp_moment(x.space(), &x.column(i), beta[i]) / beta[i])
        .collect())
}

/// Scalar shortfall value in closed form:
/// `(log E[exp(-b X)] - log(1 + b x0)) / b`.
pub fn entropic_scalar_shortfall(
    space: &FiniteProbSpace,
    x: &[f64],
    b: f64,
    x0: f64,
) -> Result<f64> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::invalid("risk aversion must be positive and finite"));
    }
    if 1.0 + b * x0 <= 0.0 {
        return Err(Error::precondition("threshold must exceed -1/b"));
    }
    Ok((log_exp_moment(space, x, b) - (1.0 + b * x0).ln()) / b)
}

/// Scalar divergence risk in closed form:
/// `(log E[exp(-b X)] + 1 - r + log r) / b - r x0`.
pub fn entropic_scalar_divergence(
    space: &FiniteProbSpace,
    x: &[f64],
    b: f64,
    r: f64,
    x0: f64,
) -> Result<f64> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::invalid("risk aversion must be positive and finite"));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid("index must be positive and finite"));
    }
    Ok((log_exp_moment(space, x, b) + 1.0 - r + r.ln()) / b - r * x0)
}

/// Componentwise closed-form divergence risks.
pub fn entropic_divergence_vector(
    x: &RandomVector,
    beta: &[f64],
    r: &[f64],
    x0: &[f64],
) -> Result<Vec<f64>> {
    if x.dim() != beta.len() || r.len() != beta.len() || x0.len() != beta.len() {
        return Err(Error::dimension("entropic divergence input dims differ"));
    }
    (0..beta.len())
        .map(|i| entropic_scalar_divergence(x.space(), &x.column(i), beta[i], r[i], x0[i]))
        .collect()
}

/// Region membership through the closed form: the expected-loss vector is
/// reconstructed from the log-moment vector with one exponential per
/// coordinate, then tested against the threshold.
pub fn entropic_membership(
    x: &RandomVector,
    spec: &EntropicSpec,
    z: &[f64],
    cfg: &NumericConfig,
) -> Result<bool> {
    let m = spec.dim();
    if x.dim() != m || z.len() != m {
        return Err(Error::dimension("position, spec, and point dims differ"));
    }
    let rho = entropic_vector(x, &spec.beta)?;
    let mut e = Vec::with_capacity(m);
    for i in 0..m {
        let b = spec.beta[i];
        e.push(XReal::from_f64(((-b * (z[i] - rho[i])).exp() - 1.0) / b));
    }
    Ok(spec.thresh.accepts(&e, cfg.membership_tol))
}

/// Smooth part of the direction-scalarized index objective:
/// `sum_i w_i ((-1 + r_i - log r_i)/b_i + r_i x0_i)`.
fn smooth_part(spec: &EntropicSpec, w: &[f64], r: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..spec.dim() {
        if w[i] == 0.0 {
            continue;
        }
        total += w[i] * ((-1.0 + r[i] - r[i].ln()) / spec.beta[i] + r[i] * spec.thresh.x0()[i]);
    }
    total
}

/// Full index objective for a direction: the smooth separable part plus the
/// negated lower support of the comparison set in direction `w o r`.
/// `+inf` when that support is unbounded below.
pub fn index_objective(
    spec: &EntropicSpec,
    w: &[f64],
    r: &[f64],
    cfg: &NumericConfig,
) -> Result<XReal> {
    let m = spec.dim();
    if w.len() != m || r.len() != m {
        return Err(Error::dimension("spec, direction, and index dims differ"));
    }
    if r.iter().any(|&ri| !(ri > 0.0) || !ri.is_finite()) {
        return Err(Error::precondition("index vector must be strictly positive"));
    }
    let wr: Vec<f64> = w.iter().zip(r).map(|(a, b)| a * b).collect();
    let support = spec.thresh.comparison_set().support_lower(&wr, cfg.lp_tol)?;
    Ok(support.neg().add(Finite(smooth_part(spec, w, r))))
}

/// Result of the optimal index search for one direction.
#[derive(Debug, Clone)]
pub struct OptimalIndexReport {
    pub r: Vec<f64>,
    /// Optimal value of the index objective.
    pub objective: f64,
    pub iterations: u32,
    /// The point `[(1/b_i)(1 - 1/r_i)]` that the shifted comparison set
    /// must support at the optimum.
    pub certificate_point: Vec<f64>,
    /// Whether the certificate point lies in the shifted comparison set.
    pub certificate_in_set: bool,
    /// Absolute gap in the supporting-hyperplane equality at the
    /// certificate point.
    pub support_gap: f64,
}

/// Either a proper optimum or the signal that the objective is identically
/// `+inf` for this direction (the region has no supporting halfspace there).
#[derive(Debug, Clone)]
pub enum OptimalIndex {
    Proper(OptimalIndexReport),
    Improper,
}

fn certificate(
    spec: &EntropicSpec,
    w: &[f64],
    r: &[f64],
    iterations: u32,
    cfg: &NumericConfig,
) -> Result<OptimalIndexReport> {
    let m = spec.dim();
    let v: Vec<f64> = (0..m)
        .map(|i| (1.0 - 1.0 / r[i]) / spec.beta[i])
        .collect();
    let shifted: Vec<f64> = v.iter().zip(spec.thresh.x0()).map(|(vi, x0)| vi + x0).collect();
    let certificate_in_set = spec
        .thresh
        .comparison_set()
        .contains(&shifted, cfg.membership_tol);
    let wr: Vec<f64> = w.iter().zip(r).map(|(a, b)| a * b).collect();
    let support = spec.thresh.comparison_set().support_lower(&wr, cfg.lp_tol)?;
    let (objective, support_gap) = match support {
        Finite(s) => {
            let lhs = s - dot(&wr, spec.thresh.x0());
            let rhs: f64 = (0..m).map(|i| w[i] * r[i] * v[i]).sum();
            (smooth_part(spec, w, r) - s, (lhs - rhs).abs())
        }
        NegInf => (f64::INFINITY, f64::INFINITY),
        PosInf => unreachable!("comparison sets are nonempty"),
    };
    Ok(OptimalIndexReport {
        r: r.to_vec(),
        objective,
        iterations,
        certificate_point: v,
        certificate_in_set,
        support_gap,
    })
}

/// Cholesky solve of a symmetric positive semidefinite system with a ridge;
/// the ridge grows until the factorization succeeds.
fn solve_ridged(h: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let k = rhs.len();
    let scale = (0..k).map(|i| h[i][i].abs()).fold(0.0f64, f64::max).max(1.0);
    let mut ridge = 1e-12 * scale;
    loop {
        let mut l = vec![vec![0.0; k]; k];
        let mut ok = true;
        'outer: for i in 0..k {
            for j in 0..=i {
                let mut s = h[i][j] + if i == j { ridge } else { 0.0 };
                for t in 0..j {
                    s -= l[i][t] * l[j][t];
                }
                if i == j {
                    if s <= 0.0 {
                        ok = false;
                        break 'outer;
                    }
                    l[i][j] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        if ok {
            // Forward then backward substitution.
            let mut y = vec![0.0; k];
            for i in 0..k {
                let mut s = rhs[i];
                for t in 0..i {
                    s -= l[i][t] * y[t];
                }
                y[i] = s / l[i][i];
            }
            let mut x = vec![0.0; k];
            for i in (0..k).rev() {
                let mut s = y[i];
                for t in i + 1..k {
                    s -= l[t][i] * x[t];
                }
                x[i] = s / l[i][i];
            }
            return x;
        }
        ridge *= 10.0;
        if ridge > 1e12 * scale {
            // Fall back to a pure gradient step direction.
            return rhs.to_vec();
        }
    }
}

/// Optimal index vector for one direction: the unique minimizer of the
/// index objective, or `Improper` when the objective is identically `+inf`.
///
/// Coordinates with zero direction weight do not enter the objective; they
/// are pinned to the orthant closed form `1/(1 + b_i x0_i)` so the result
/// is deterministic.
pub fn entropic_optimal_index(
    spec: &EntropicSpec,
    w: &[f64],
    cfg: &NumericConfig,
) -> Result<OptimalIndex> {
    let m = spec.dim();
    if w.len() != m {
        return Err(Error::dimension("spec and direction dims differ"));
    }
    if w.iter().any(|&wi| wi < 0.0 || !wi.is_finite()) || w.iter().all(|&wi| wi == 0.0) {
        return Err(Error::precondition(
            "direction must be nonnegative and nonzero",
        ));
    }
    let x0 = spec.thresh.x0();
    let closed_form: Vec<f64> = (0..m).map(|i| 1.0 / (1.0 + spec.beta[i] * x0[i])).collect();
    if spec.thresh.comparison_set().is_positive_orthant() {
        return Ok(OptimalIndex::Proper(certificate(spec, w, &closed_form, 0, cfg)?));
    }

    let active: Vec<usize> = (0..m).filter(|&i| w[i] > 0.0).collect();
    let halfspaces = spec.thresh.comparison_set().halfspaces();
    // A halfspace whose normal weights an inactive coordinate cannot carry
    // multiplier mass: the scaled direction is zero there, and upper-set
    // normals are nonnegative.
    let kept: Vec<usize> = (0..halfspaces.len())
        .filter(|&k| {
            (0..m)
                .filter(|i| w[*i] == 0.0)
                .all(|j| halfspaces[k].normal()[j] == 0.0)
        })
        .collect();
    if kept.is_empty() {
        return Ok(OptimalIndex::Improper);
    }

    // Feasibility: find multipliers whose combined normal is strictly
    // positive on every active coordinate. If even the best normalized
    // combination leaves some active coordinate at zero, no index vector
    // has a finite objective.
    let kn = kept.len();
    let mut lp = crate::simplex::LinearProgram::new(kn + 1);
    lp.objective_coeff(kn, -1.0);
    lp.free_var(kn);
    for &i in &active {
        let mut row = vec![0.0; kn + 1];
        for (c, &k) in kept.iter().enumerate() {
            row[c] = halfspaces[k].normal()[i];
        }
        row[kn] = -1.0;
        lp.add_row(&row, crate::simplex::Relation::Ge, 0.0);
    }
    let mut norm_row = vec![1.0; kn];
    norm_row.push(0.0);
    lp.add_row(&norm_row, crate::simplex::Relation::Eq, 1.0);
    let mu0 = match lp.solve(cfg.lp_tol)? {
        crate::simplex::LpOutcome::Optimal { x, value } => {
            if -value <= cfg.lp_tol {
                return Ok(OptimalIndex::Improper);
            }
            x[..kn].to_vec()
        }
        _ => return Ok(OptimalIndex::Improper),
    };

    // Objective in multiplier space. The combined normal y stands in for
    // the scaled index (y_i = w_i r_i on active coordinates); the linear
    // term is a lower bound on the support term that is tight at the
    // optimum, so joint minimization recovers the index optimum.
    let combined = |mu: &[f64]| -> Vec<f64> {
        active
            .iter()
            .map(|&i| {
                kept.iter()
                    .enumerate()
                    .map(|(c, &k)| mu[c] * halfspaces[k].normal()[i])
                    .sum()
            })
            .collect()
    };
    let g_val = |mu: &[f64]| -> XReal {
        let y = combined(mu);
        let mut total = 0.0;
        for (a, &i) in active.iter().enumerate() {
            if y[a] <= 0.0 {
                return PosInf;
            }
            let ri = y[a] / w[i];
            total += w[i] * ((-1.0 + ri - ri.ln()) / spec.beta[i] + ri * x0[i]);
        }
        for (c, &k) in kept.iter().enumerate() {
            total -= mu[c] * halfspaces[k].offset();
        }
        Finite(total)
    };

    // Scale the feasible start along its ray: the objective restricted to
    // a ray is strictly convex and smooth, cheap to presolve.
    let mut mu = mu0;
    {
        let (s, _) = crate::optim::grid_then_golden_min(
            |s| g_val(&mu.iter().map(|v| v * s).collect::<Vec<_>>()),
            &crate::optim::logspace(1e-4, 1e4, 81),
            cfg.golden_iters,
        );
        for v in &mut mu {
            *v *= s;
        }
    }

    let mut cur = match g_val(&mu) {
        Finite(v) => v,
        _ => return Err(Error::NoConvergence("entropic index start infeasible".into())),
    };
    for iter in 0..cfg.newton_max_iter {
        let y = combined(&mu);
        // Gradient and Hessian through the chain rule on y.
        let mut u = vec![0.0; active.len()];
        let mut d = vec![0.0; active.len()];
        for (a, &i) in active.iter().enumerate() {
            u[a] = 1.0 / spec.beta[i] - w[i] / (spec.beta[i] * y[a]) + x0[i];
            d[a] = w[i] / (spec.beta[i] * y[a] * y[a]);
        }
        let mut grad = vec![0.0; kn];
        for (c, &k) in kept.iter().enumerate() {
            grad[c] = active
                .iter()
                .enumerate()
                .map(|(a, &i)| halfspaces[k].normal()[i] * u[a])
                .sum::<f64>()
                - halfspaces[k].offset();
        }
        // Projected gradient for the nonnegativity constraints.
        let pg_norm = mu
            .iter()
            .zip(&grad)
            .map(|(&m_c, &g_c)| if m_c > 0.0 { g_c.abs() } else { (-g_c).max(0.0) })
            .fold(0.0f64, f64::max);
        if pg_norm <= cfg.newton_tol * (1.0 + cur.abs()) {
            let r = recover_index(&active, &y, w, &closed_form, m);
            return Ok(OptimalIndex::Proper(certificate(spec, w, &r, iter, cfg)?));
        }
        let mut hess = vec![vec![0.0; kn]; kn];
        for c1 in 0..kn {
            for c2 in 0..=c1 {
                let mut s = 0.0;
                for (a, &i) in active.iter().enumerate() {
                    s += halfspaces[kept[c1]].normal()[i]
                        * halfspaces[kept[c2]].normal()[i]
                        * d[a];
                }
                hess[c1][c2] = s;
                hess[c2][c1] = s;
            }
        }
        let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
        let step = solve_ridged(&hess, &neg_grad);
        let slope: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
        let dir: Vec<f64> = if slope < 0.0 { step } else { neg_grad };
        let slope = if slope < 0.0 { slope } else { -dot(&grad, &grad) };

        let mut tau = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = mu
                .iter()
                .zip(&dir)
                .map(|(m_c, d_c)| (m_c + tau * d_c).max(0.0))
                .collect();
            if let Finite(v) = g_val(&cand) {
                if v <= cur + 1e-4 * tau * slope || v < cur {
                    mu = cand;
                    cur = v;
                    accepted = true;
                    break;
                }
            }
            tau *= 0.5;
        }
        if !accepted {
            // No descent along the damped direction: treat as converged if
            // the projected gradient is small relative to the data scale.
            if pg_norm <= 1e-6 * (1.0 + cur.abs()) {
                let y = combined(&mu);
                let r = recover_index(&active, &y, w, &closed_form, m);
                return Ok(OptimalIndex::Proper(certificate(spec, w, &r, iter, cfg)?));
            }
            return Err(Error::NoConvergence(
                "entropic index line search stalled".into(),
            ));
        }
    }
    Err(Error::NoConvergence(
        "entropic index search hit the iteration cap".into(),
    ))
}

fn recover_index(
    active: &[usize],
    y: &[f64],
    w: &[f64],
    closed_form: &[f64],
    m: usize,
) -> Vec<f64> {
    let mut r = closed_form.to_vec();
    for (a, &i) in active.iter().enumerate() {
        r[i] = y[a] / w[i];
    }
    debug_assert_eq!(r.len(), m);
    r
}

/// Componentwise relative entropy `E_Q[log dQ/dP]` of a vector measure.
pub fn relative_entropy(q: &VectorMeasure) -> Vec<f64> {
    let probs = q.space().probs().to_vec();
    (0..q.dim())
        .map(|i| {
            probs
                .iter()
                .zip(q.density_column(i))
                .map(|(p, d)| p * xlnx(d))
                .sum()
        })
        .collect()
}

/// Minimal-penalty halfspace of the exponential-loss region at a test
/// measure and direction, in closed form up to the optimal index search:
/// offset `-sum_i w_i H_i / b_i  -  optimal index objective`.
pub fn entropic_penalty(
    spec: &EntropicSpec,
    q: &VectorMeasure,
    w: &[f64],
    cfg: &NumericConfig,
) -> Result<PenaltyValue> {
    if q.dim() != spec.dim() {
        return Err(Error::dimension("spec and measure dims differ"));
    }
    let report = match entropic_optimal_index(spec, w, cfg)? {
        OptimalIndex::Improper => return Ok(PenaltyValue::AllSpace),
        OptimalIndex::Proper(rep) => rep,
    };
    let h = relative_entropy(q);
    let entropy_term: f64 = (0..spec.dim())
        .map(|i| w[i] * h[i] / spec.beta[i])
        .sum();
    Ok(PenaltyValue::Halfspace {
        normal: w.to_vec(),
        offset: -entropy_term - report.objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{Halfspace, Polyhedron};
    use crate::set_risk::shortfall_membership;
    use crate::space::FiniteProbSpace;
    use std::sync::Arc;

    fn cfg() -> NumericConfig {
        NumericConfig::default()
    }

    fn coin() -> Arc<FiniteProbSpace> {
        FiniteProbSpace::new(vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn vector_of_constants_is_negated() {
        let sp = coin();
        let x = RandomVector::constant(sp, &[3.0, -2.0]).unwrap();
        let v = entropic_vector(&x, &[1.0, 5.0]).unwrap();
        assert!((v[0] + 3.0).abs() < 1e-12);
        assert!((v[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_coin_gives_log_cosh() {
        let sp = coin();
        let x = RandomVector::new(sp, vec![vec![1.0], vec![-1.0]]).unwrap();
        let v = entropic_vector(&x, &[1.0]).unwrap();
        assert!((v[0] - 1.0f64.cosh().ln()).abs() < 1e-12);
    }

    #[test]
    fn jensen_lower_bound() {
        let sp = FiniteProbSpace::new(vec![0.2, 0.5, 0.3]).unwrap();
        let x = RandomVector::new(
            sp,
            vec![vec![1.0, -2.0], vec![0.3, 0.7], vec![-1.4, 2.2]],
        )
        .unwrap();
        let v = entropic_vector(&x, &[0.7, 3.0]).unwrap();
        let mean = x.expect();
        for i in 0..2 {
            assert!(v[i] >= -mean[i] - 1e-12);
        }
    }

    #[test]
    fn large_aversion_does_not_overflow() {
        let sp = coin();
        let x = RandomVector::new(sp, vec![vec![30.0], vec![-30.0]]).unwrap();
        let v = entropic_vector(&x, &[50.0]).unwrap();
        // Dominated by the worst atom: (1/50) log(0.5 e^{1500}) ~ 30.
        assert!(v[0].is_finite());
        assert!((v[0] - (30.0 + 0.5f64.ln() / 50.0)).abs() < 1e-9);
    }

    #[test]
    fn closed_forms_match_generic_scalar_routes() {
        let sp = FiniteProbSpace::new(vec![0.3, 0.7]).unwrap();
        let xcol = vec![1.2, -0.6];
        let (b, x0) = (1.7, 0.4);
        let loss = LossSpec::exponential(b).unwrap();
        let closed = entropic_scalar_shortfall(&sp, &xcol, b, x0).unwrap();
        let generic = crate::scalar::shortfall_scalar(&sp, &xcol, &loss, x0, &cfg()).unwrap();
        assert!((closed - generic.value).abs() < 1e-8, "{closed} vs {}", generic.value);

        let r = 0.8;
        let closed_d = entropic_scalar_divergence(&sp, &xcol, b, r, x0).unwrap();
        match crate::scalar::divergence_risk_scalar(&sp, &xcol, &loss, r, x0, &cfg()).unwrap() {
            crate::scalar::ScalarDivergenceRisk::Value(res) => {
                assert!((closed_d - res.value).abs() < 1e-8, "{closed_d} vs {}", res.value);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn membership_agrees_with_generic_route() {
        let sp = FiniteProbSpace::new(vec![0.25, 0.35, 0.4]).unwrap();
        let spec = EntropicSpec::new(
            vec![1.0, 2.5],
            ThresholdData::orthant(vec![0.2, 0.05]),
        )
        .unwrap();
        let losses = spec.losses();
        let x = RandomVector::new(
            sp,
            vec![vec![1.0, -0.3], vec![-0.5, 0.8], vec![0.2, -1.1]],
        )
        .unwrap();
        let c = cfg();
        // A deterministic lattice of probe points around the closed-form shift.
        let rho = entropic_vector(&x, spec.beta()).unwrap();
        for a in -3..=3 {
            for b in -3..=3 {
                let z = vec![rho[0] + 0.37 * a as f64, rho[1] + 0.29 * b as f64];
                let fast = entropic_membership(&x, &spec, &z, &c).unwrap();
                let generic =
                    shortfall_membership(&x, &losses, spec.thresh(), &z, &c).unwrap();
                assert_eq!(fast, generic, "disagreement at {z:?}");
            }
        }
    }

    #[test]
    fn log_moment_shift_is_boundary() {
        let sp = coin();
        let spec =
            EntropicSpec::new(vec![1.0, 1.0], ThresholdData::orthant(vec![0.0, 0.0])).unwrap();
        let x = RandomVector::new(sp, vec![vec![1.0, -0.5], vec![-1.0, 0.5]]).unwrap();
        let rho = entropic_vector(&x, spec.beta()).unwrap();
        let c = cfg();
        assert!(entropic_membership(&x, &spec, &rho, &c).unwrap());
        let below: Vec<f64> = rho.iter().map(|v| v - 1e-6).collect();
        assert!(!entropic_membership(&x, &spec, &below, &c).unwrap());
    }

    #[test]
    fn orthant_optimal_index_closed_form() {
        let spec = EntropicSpec::new(
            vec![1.0, 2.0],
            ThresholdData::orthant(vec![0.5, 0.25]),
        )
        .unwrap();
        match entropic_optimal_index(&spec, &[0.3, 0.7], &cfg()).unwrap() {
            OptimalIndex::Proper(rep) => {
                assert!((rep.r[0] - 1.0 / 1.5).abs() < 1e-12);
                assert!((rep.r[1] - 1.0 / 1.5).abs() < 1e-12);
                assert!(rep.certificate_in_set);
                assert!(rep.support_gap < 1e-9);
            }
            OptimalIndex::Improper => panic!("orthant case is proper"),
        }
    }

    #[test]
    fn zero_threshold_gives_unit_index() {
        let spec =
            EntropicSpec::new(vec![3.0, 0.5], ThresholdData::orthant(vec![0.0, 0.0])).unwrap();
        for w in [[1.0, 1.0], [0.2, 0.8], [1.0, 0.0]] {
            match entropic_optimal_index(&spec, &w, &cfg()).unwrap() {
                OptimalIndex::Proper(rep) => {
                    assert!((rep.r[0] - 1.0).abs() < 1e-12);
                    assert!((rep.r[1] - 1.0).abs() < 1e-12);
                    assert!(rep.objective.abs() < 1e-12);
                }
                OptimalIndex::Improper => panic!("orthant case is proper"),
            }
        }
    }

    /// The orthant written with duplicated, unnormalized rows: same set,
    /// but it must go through the general multiplier iteration.
    fn disguised_orthant(dim: usize) -> Polyhedron {
        let mut hs = Vec::new();
        for i in 0..dim {
            let mut n = vec![0.0; dim];
            n[i] = 2.0;
            hs.push(Halfspace::new(n.clone(), 0.0).unwrap());
            hs.push(Halfspace::new(n, 0.0).unwrap());
        }
        Polyhedron::from_halfspaces(dim, hs).unwrap()
    }

    #[test]
    fn newton_path_matches_closed_form_on_disguised_orthant() {
        let thresh = ThresholdData::new(vec![0.5, 0.25], disguised_orthant(2), 1e-9).unwrap();
        let spec = EntropicSpec::new(vec![1.0, 2.0], thresh).unwrap();
        match entropic_optimal_index(&spec, &[0.3, 0.7], &cfg()).unwrap() {
            OptimalIndex::Proper(rep) => {
                assert!((rep.r[0] - 1.0 / 1.5).abs() < 1e-7, "{:?}", rep.r);
                assert!((rep.r[1] - 1.0 / 1.5).abs() < 1e-7, "{:?}", rep.r);
                assert!(rep.certificate_in_set);
                assert!(rep.support_gap < 1e-6);
            }
            OptimalIndex::Improper => panic!("proper case"),
        }
    }

    #[test]
    fn halfplane_comparison_set_constrains_the_index() {
        // C = {x : x_1 + x_2 >= 0}. Only scaled directions along (1,1) have
        // finite support, so w = (1,2) forces r_1 = 2 r_2; minimizing the
        // smooth part along that line gives r = (3/2, 3/4).
        let c = Polyhedron::from_halfspaces(
            2,
            vec![Halfspace::new(vec![1.0, 1.0], 0.0).unwrap()],
        )
        .unwrap();
        let thresh = ThresholdData::new(vec![0.0, 0.0], c, 1e-9).unwrap();
        let spec = EntropicSpec::new(vec![1.0, 1.0], thresh).unwrap();
        match entropic_optimal_index(&spec, &[1.0, 2.0], &cfg()).unwrap() {
            OptimalIndex::Proper(rep) => {
                assert!((rep.r[0] - 1.5).abs() < 1e-6, "{:?}", rep.r);
                assert!((rep.r[1] - 0.75).abs() < 1e-6, "{:?}", rep.r);
                let expected = (-1.0 + 1.5 - 1.5f64.ln()) + 2.0 * (-1.0 + 0.75 - 0.75f64.ln());
                assert!((rep.objective - expected).abs() < 1e-6);
                assert!(rep.certificate_in_set);
                assert!(rep.support_gap < 1e-6);
            }
            OptimalIndex::Improper => panic!("diagonal direction is proper"),
        }
    }

    #[test]
    fn off_cone_direction_is_improper() {
        let c = Polyhedron::from_halfspaces(
            2,
            vec![Halfspace::new(vec![1.0, 1.0], 0.0).unwrap()],
        )
        .unwrap();
        let thresh = ThresholdData::new(vec![0.0, 0.0], c, 1e-9).unwrap();
        let spec = EntropicSpec::new(vec![1.0, 1.0], thresh).unwrap();
        assert!(matches!(
            entropic_optimal_index(&spec, &[1.0, 0.0], &cfg()).unwrap(),
            OptimalIndex::Improper
        ));
        let q = VectorMeasure::base(coin(), 2).unwrap();
        assert_eq!(
            entropic_penalty(&spec, &q, &[1.0, 0.0], &cfg()).unwrap(),
            PenaltyValue::AllSpace
        );
    }

    #[test]
    fn penalty_at_base_measure_with_zero_threshold() {
        let spec =
            EntropicSpec::new(vec![1.0, 1.0], ThresholdData::orthant(vec![0.0, 0.0])).unwrap();
        let q = VectorMeasure::base(coin(), 2).unwrap();
        match entropic_penalty(&spec, &q, &[1.0, 1.0], &cfg()).unwrap() {
            PenaltyValue::Halfspace { offset, .. } => {
                assert!(offset.abs() < 1e-10, "offset {offset}");
            }
            PenaltyValue::AllSpace => panic!("proper case"),
        }
    }

    #[test]
    fn relative_entropy_of_concentrated_measure() {
        let q = VectorMeasure::new(coin(), vec![vec![2.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let h = relative_entropy(&q);
        assert!((h[0] - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(h[1].abs() < 1e-12);
    }

    #[test]
    fn penalty_offset_matches_grid_supremum() {
        let sp = coin();
        let spec = EntropicSpec::new(
            vec![1.0, 2.0],
            ThresholdData::orthant(vec![0.1, 0.3]),
        )
        .unwrap();
        let q = VectorMeasure::new(sp, vec![vec![1.4, 0.8], vec![0.6, 1.2]]).unwrap();
        let w = vec![0.6, 0.4];
        let closed = match entropic_penalty(&spec, &q, &w, &cfg()).unwrap() {
            PenaltyValue::Halfspace { offset, .. } => offset,
            PenaltyValue::AllSpace => panic!("proper case"),
        };
        let grid = match crate::set_risk::penalty_shortfall_set(
            &spec.losses(),
            spec.thresh(),
            &q,
            &w,
            &cfg(),
        )
        .unwrap()
        {
            PenaltyValue::Halfspace { offset, .. } => offset,
            PenaltyValue::AllSpace => panic!("proper case"),
        };
        assert!((closed - grid).abs() < 5e-4, "{closed} vs {grid}");
    }

    #[test]
    fn support_identity_through_optimal_index() {
        // Support of the region in direction w equals w'rho minus the
        // optimal index objective.
        let sp = FiniteProbSpace::new(vec![0.4, 0.6]).unwrap();
        let spec = EntropicSpec::new(
            vec![1.0, 2.0],
            ThresholdData::orthant(vec![0.5, 0.25]),
        )
        .unwrap();
        let x = RandomVector::new(sp, vec![vec![1.0, -0.5], vec![-1.0, 0.5]]).unwrap();
        let w = vec![0.7, 0.3];
        let rho = entropic_vector(&x, spec.beta()).unwrap();
        let rep = match entropic_optimal_index(&spec, &w, &cfg()).unwrap() {
            OptimalIndex::Proper(rep) => rep,
            OptimalIndex::Improper => panic!("proper case"),
        };
        let closed = dot(&w, &rho) - rep.objective;
        let generic = crate::set_risk::shortfall_support(
            &x,
            &spec.losses(),
            spec.thresh(),
            &w,
            &cfg(),
        )
        .unwrap()
        .expect_finite("support");
        assert!((closed - generic).abs() < 1e-6, "{closed} vs {generic}");
    }
}
