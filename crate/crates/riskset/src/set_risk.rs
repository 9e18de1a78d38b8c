//! Set-valued risk measures on `R^m`.
//!
//! The shortfall region of a position `X` under a vector loss `l` and a
//! threshold `(x0, C)` is
//!
//! ```text
//! R(X) = { z : E[l(-X - z)] in x0 - C },
//! ```
//!
//! a closed convex upper set. For each admissible index vector `r` there is
//! a polyhedral outer approximation, the divergence region
//! `delta_r(X) + diag(r) C`, and the shortfall region is the intersection
//! of all of them. Support values in nonnegative directions are computed
//! from that dual family: maximize the componentwise divergence risks plus
//! the support term of `C` over the index grid. The supremum may be
//! unattained at the boundary of the admissible interval; the code reports
//! grid suprema with golden-section refinement and never claims attainment.
//!
//! Regions themselves are exposed as membership oracles plus ray-shot
//! boundary clouds rather than facet enumerations: thresholds may generate
//! unbounded polyhedra whose vertex structure is irrelevant to the
//! acceptability questions the oracle answers.

use std::collections::HashMap;

use crate::config::NumericConfig;
use crate::divergence::{DivergenceSpec, VectorDivergenceSpec};
use crate::error::{Error, Result};
use crate::loss::VectorLossSpec;
use crate::optim::{golden_min, logspace};
use crate::poly::{dot, Polyhedron, ThresholdData};
use crate::sampling::positive_orthant_directions;
use crate::scalar::{
    divergence_functional, divergence_risk_scalar, expected_loss, ScalarDivergenceRisk,
};
use crate::space::{RandomVector, VectorMeasure};
use crate::xreal::{weighted_sum, Finite, NegInf, PosInf, XReal};

/// Full Cartesian index sweeps are used up to this many grid combinations;
/// beyond it the maximizer switches to cyclic coordinate ascent.
const COMBO_CAP: usize = 10_000;

/// A vector value completed with a single `+inf` element.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorOrPlusInf {
    Finite(Vec<f64>),
    PlusInf,
}

/// A vector value completed with a single `-inf` element.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorOrMinusInf {
    Finite(Vec<f64>),
    MinusInf,
}

/// Divergence region outcome: a proper polyhedron, or the signal that the
/// region degenerates to all of `R^m` because the index is inadmissible.
#[derive(Debug, Clone, PartialEq)]
pub enum RegionOutcome {
    Proper(Polyhedron),
    NotFinite,
}

/// One supporting halfspace `{z : w'z >= offset}` of a set risk measure at
/// a test pair, or the degenerate whole space.
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyValue {
    AllSpace,
    Halfspace { normal: Vec<f64>, offset: f64 },
}

fn check_nonneg_nonzero(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::precondition(format!(
            "{what} must be componentwise nonnegative and finite"
        )));
    }
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::precondition(format!("{what} must be nonzero")));
    }
    Ok(())
}

/// Componentwise scaled divergence of a vector measure, `+inf` as a whole
/// if any component is infinite (zero index components included).
pub fn vector_divergence(
    gs: &VectorDivergenceSpec,
    r: &[f64],
    q: &VectorMeasure,
) -> Result<VectorOrPlusInf> {
    if gs.dim() != q.dim() || r.len() != gs.dim() {
        return Err(Error::dimension("divergence, index, and measure dims differ"));
    }
    check_nonneg_nonzero(r, "index vector")?;
    let mut out = Vec::with_capacity(r.len());
    for i in 0..r.len() {
        if r[i] == 0.0 {
            return Ok(VectorOrPlusInf::PlusInf);
        }
        let col = q.density_column(i);
        match divergence_functional(gs.component(i), r[i], q.space(), &col)? {
            Finite(v) => out.push(v),
            PosInf => return Ok(VectorOrPlusInf::PlusInf),
            NegInf => unreachable!("divergences are bounded below"),
        }
    }
    Ok(VectorOrPlusInf::Finite(out))
}

/// Componentwise divergence risk, `-inf` as a whole if any component index
/// is inadmissible.
pub fn divergence_risk_vector(
    x: &RandomVector,
    losses: &VectorLossSpec,
    r: &[f64],
    x0: &[f64],
    cfg: &NumericConfig,
) -> Result<VectorOrMinusInf> {
    let m = losses.dim();
    if x.dim() != m || r.len() != m || x0.len() != m {
        return Err(Error::dimension("position, loss, index, and threshold dims differ"));
    }
    if r.iter().any(|&ri| ri < 0.0 || !ri.is_finite()) {
        return Err(Error::precondition(
            "index vector must be componentwise nonnegative and finite",
        ));
    }
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        if r[i] == 0.0 {
            return Ok(VectorOrMinusInf::MinusInf);
        }
        let col = x.column(i);
        match divergence_risk_scalar(x.space(), &col, losses.component(i), r[i], x0[i], cfg)? {
            ScalarDivergenceRisk::MinusInf => return Ok(VectorOrMinusInf::MinusInf),
            ScalarDivergenceRisk::Value(v) => out.push(v.value),
        }
    }
    Ok(VectorOrMinusInf::Finite(out))
}

/// The divergence region `delta_r(X) + diag(r) C`, or `NotFinite` when the
/// index is inadmissible (the region is then all of `R^m` and deliberately
/// not representable here).
pub fn divergence_region(
    x: &RandomVector,
    losses: &VectorLossSpec,
    r: &[f64],
    thresh: &ThresholdData,
    cfg: &NumericConfig,
) -> Result<RegionOutcome> {
    let delta = match divergence_risk_vector(x, losses, r, thresh.x0(), cfg)? {
        VectorOrMinusInf::MinusInf => return Ok(RegionOutcome::NotFinite),
        VectorOrMinusInf::Finite(d) => d,
    };
    let poly = thresh
        .comparison_set()
        .scale_diag(r)?
        .translate(&delta);
    Ok(RegionOutcome::Proper(poly))
}

/// `E[l(-X - z)]` acceptable against the threshold?
pub fn shortfall_membership(
    x: &RandomVector,
    losses: &VectorLossSpec,
    thresh: &ThresholdData,
    z: &[f64],
    cfg: &NumericConfig,
) -> Result<bool> {
    let m = losses.dim();
    if x.dim() != m || thresh.dim() != m || z.len() != m {
        return Err(Error::dimension("position, loss, threshold, and point dims differ"));
    }
    let mut e = Vec::with_capacity(m);
    for i in 0..m {
        let col = x.column(i);
        e.push(expected_loss(x.space(), &col, losses.component(i), z[i]));
    }
    Ok(thresh.accepts(&e, cfg.membership_tol))
}

/// One sampled direction of a region boundary: the dual support value and
/// the ray-shot boundary point (`None` when the region recedes along `-d`
/// beyond the cap).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRow {
    pub direction: Vec<f64>,
    pub support: XReal,
    pub boundary_point: Option<Vec<f64>>,
}

/// Membership oracle for a shortfall region, with a certified interior
/// anchor.
#[derive(Debug, Clone)]
pub struct ShortfallRegion {
    x: RandomVector,
    losses: VectorLossSpec,
    thresh: ThresholdData,
    cfg: NumericConfig,
    anchor: Vec<f64>,
}

impl ShortfallRegion {
    pub fn new(
        x: RandomVector,
        losses: VectorLossSpec,
        thresh: ThresholdData,
        cfg: NumericConfig,
    ) -> Result<Self> {
        let m = losses.dim();
        if x.dim() != m || thresh.dim() != m {
            return Err(Error::dimension("position, loss, and threshold dims differ"));
        }
        let mut anchor = Vec::with_capacity(m);
        for i in 0..m {
            let li = losses.component(i);
            let x0i = thresh.x0()[i];
            if !li.threshold_in_range(x0i) {
                return Err(Error::precondition(format!(
                    "threshold component {i} is outside the interior of its loss range"
                )));
            }
            // At this shift every atom's loss is at most x0_i, and x0 - e
            // then sits above 0, hence inside the upper comparison set.
            anchor.push(-x.ess_inf(i) - li.inverse(x0i)? + 1.0);
        }
        let region = ShortfallRegion {
            x,
            losses,
            thresh,
            cfg,
            anchor,
        };
        debug_assert!(region.membership(&region.anchor.clone()).unwrap());
        Ok(region)
    }

    pub fn membership(&self, z: &[f64]) -> Result<bool> {
        shortfall_membership(&self.x, &self.losses, &self.thresh, z, &self.cfg)
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn dim(&self) -> usize {
        self.losses.dim()
    }

    /// Walks from the anchor along `-d` until membership flips, then
    /// bisects; the returned point is on the member side of the bracket.
    /// `None` when the region recedes past the expansion cap.
    pub fn ray_shoot(&self, d: &[f64]) -> Result<Option<Vec<f64>>> {
        let point_at = |t: f64| -> Vec<f64> {
            self.anchor
                .iter()
                .zip(d)
                .map(|(a, di)| a - t * di)
                .collect()
        };
        let mut a = 0.0f64;
        let mut b = 1.0f64;
        loop {
            if !self.membership(&point_at(b))? {
                break;
            }
            a = b;
            b *= 2.0;
            if b > self.cfg.ray_cap {
                return Ok(None);
            }
        }
        while b - a > self.cfg.ray_tol {
            let mid = 0.5 * (a + b);
            if self.membership(&point_at(mid))? {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(Some(point_at(a)))
    }

    /// Boundary cloud over the default direction set: per direction, the
    /// dual support value and the primal ray-shot boundary point.
    pub fn boundary_cloud(&self) -> Result<Vec<BoundaryRow>> {
        let m = self.dim();
        let dirs = positive_orthant_directions(m, self.cfg.directions_for(m));
        let mut rows = Vec::with_capacity(dirs.len());
        for d in dirs {
            let support =
                shortfall_support(&self.x, &self.losses, &self.thresh, &d, &self.cfg)?;
            let boundary_point = self.ray_shoot(&d)?;
            rows.push(BoundaryRow {
                direction: d,
                support,
                boundary_point,
            });
        }
        Ok(rows)
    }

    /// Componentwise bounds of the sampled boundary and the anchor. The
    /// region itself is unbounded upward; the box only frames the samples.
    pub fn bounding_box(&self, rows: &[BoundaryRow]) -> (Vec<f64>, Vec<f64>) {
        let m = self.dim();
        let mut lo = self.anchor.clone();
        let mut hi = self.anchor.clone();
        for row in rows {
            if let Some(p) = &row.boundary_point {
                for i in 0..m {
                    lo[i] = lo[i].min(p[i]);
                    hi[i] = hi[i].max(p[i]);
                }
            }
        }
        (lo, hi)
    }
}

/// Admissible-index grid for one component: closed endpoints exactly, plus
/// a log-spaced interior clipped to the configured window.
fn index_grid(g: &DivergenceSpec, cfg: &NumericConfig) -> Result<Vec<f64>> {
    let interval = g.one_over_dom();
    let (window, exact) = interval.search_window(cfg.r_clip);
    let mut grid = exact;
    if let Some((a, b)) = window {
        grid.extend(logspace(a, b, cfg.r_grid));
    }
    grid.retain(|v| interval.contains(*v));
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::precondition(
            "admissible index interval does not intersect the search window",
        ));
    }
    Ok(grid)
}

/// Maximizes a concave-along-coordinates objective over a product grid with
/// golden refinement around the incumbent. Deterministic sweep order;
/// strict improvement keeps the first (lowest) incumbent on plateaus.
fn maximize_over_index_grid(
    grids: &[Vec<f64>],
    phi: &mut dyn FnMut(&[f64]) -> XReal,
    golden_iters: u32,
) -> (Vec<f64>, XReal) {
    let m = grids.len();
    let combos: usize = grids.iter().map(Vec::len).product();
    let mut best_r: Vec<f64> = grids.iter().map(|g| g[0]).collect();
    let mut best = phi(&best_r);

    if combos <= COMBO_CAP {
        let mut idx = vec![0usize; m];
        loop {
            // Advance the mixed-radix counter.
            let mut c = 0;
            loop {
                idx[c] += 1;
                if idx[c] < grids[c].len() {
                    break;
                }
                idx[c] = 0;
                c += 1;
                if c == m {
                    break;
                }
            }
            if c == m {
                break;
            }
            let r: Vec<f64> = idx.iter().enumerate().map(|(i, &j)| grids[i][j]).collect();
            let v = phi(&r);
            if v > best {
                best = v;
                best_r = r;
            }
        }
    } else {
        // Coordinate ascent from three deterministic starts.
        let starts: Vec<Vec<usize>> = vec![
            grids.iter().map(|g| g.len() / 2).collect(),
            vec![0; m],
            grids.iter().map(|g| g.len() - 1).collect(),
        ];
        for start in starts {
            let mut idx = start;
            let mut r: Vec<f64> = idx.iter().enumerate().map(|(i, &j)| grids[i][j]).collect();
            let mut cur = phi(&r);
            for _ in 0..5 {
                let mut improved = false;
                for i in 0..m {
                    let mut local_best = cur;
                    let mut local_j = idx[i];
                    for (j, &cand) in grids[i].iter().enumerate() {
                        if j == idx[i] {
                            continue;
                        }
                        r[i] = cand;
                        let v = phi(&r);
                        if v > local_best {
                            local_best = v;
                            local_j = j;
                        }
                    }
                    idx[i] = local_j;
                    r[i] = grids[i][idx[i]];
                    if local_best > cur {
                        cur = local_best;
                        improved = true;
                    }
                }
                if !improved {
                    break;
                }
            }
            if cur > best {
                best = cur;
                best_r = r;
            }
        }
    }

    // Golden refinement between the incumbent's grid neighbors, coordinate
    // by coordinate, two cycles.
    for _ in 0..2 {
        for i in 0..m {
            if grids[i].len() < 2 {
                continue;
            }
            let pos = grids[i]
                .iter()
                .position(|&v| v == best_r[i])
                .unwrap_or_else(|| {
                    grids[i]
                        .iter()
                        .enumerate()
                        .min_by(|(_, a), (_, b)| {
                            (*a - best_r[i])
                                .abs()
                                .partial_cmp(&(*b - best_r[i]).abs())
                                .unwrap()
                        })
                        .map(|(j, _)| j)
                        .unwrap()
                });
            let lo = grids[i][pos.saturating_sub(1)].min(best_r[i]);
            let hi = grids[i][(pos + 1).min(grids[i].len() - 1)].max(best_r[i]);
            if hi <= lo {
                continue;
            }
            let r = best_r.clone();
            let (ti, v) = golden_min(
                |t| {
                    let mut rt = r.clone();
                    rt[i] = t;
                    phi(&rt).neg()
                },
                lo,
                hi,
                golden_iters,
            );
            let v = v.neg();
            if v > best {
                best = v;
                best_r[i] = ti;
            }
        }
    }
    (best_r, best)
}

/// Support value `inf { w'z : z in R(X) }` of the shortfall region in a
/// nonnegative direction, via the dual index-family formula: maximize the
/// weighted divergence risks plus the comparison-set support term.
pub fn shortfall_support(
    x: &RandomVector,
    losses: &VectorLossSpec,
    thresh: &ThresholdData,
    w: &[f64],
    cfg: &NumericConfig,
) -> Result<XReal> {
    let m = losses.dim();
    if x.dim() != m || thresh.dim() != m || w.len() != m {
        return Err(Error::dimension("position, loss, threshold, and direction dims differ"));
    }
    check_nonneg_nonzero(w, "direction")?;

    let columns: Vec<Vec<f64>> = (0..m).map(|i| x.column(i)).collect();
    let mut grids = Vec::with_capacity(m);
    for i in 0..m {
        let g = DivergenceSpec::new(losses.component(i).clone());
        let grid = index_grid(&g, cfg)?;
        if w[i] == 0.0 {
            // The coordinate drops out of both the weighted sum and the
            // support term; pin it to one admissible value.
            grids.push(vec![grid[0]]);
        } else {
            grids.push(grid);
        }
    }

    let mut delta_cache: HashMap<(usize, u64), f64> = HashMap::new();
    let space = x.space().clone();
    let c_set = thresh.comparison_set().clone();
    let x0 = thresh.x0().to_vec();
    let mut phi = |r: &[f64]| -> XReal {
        let mut weighted = 0.0;
        for i in 0..m {
            if w[i] == 0.0 {
                continue;
            }
            let key = (i, r[i].to_bits());
            let di = if let Some(&v) = delta_cache.get(&key) {
                v
            } else {
                let v = match divergence_risk_scalar(
                    &space,
                    &columns[i],
                    losses.component(i),
                    r[i],
                    x0[i],
                    cfg,
                ) {
                    Ok(ScalarDivergenceRisk::Value(res)) => res.value,
                    // Grid points are admissible by construction.
                    Ok(ScalarDivergenceRisk::MinusInf) | Err(_) => f64::NEG_INFINITY,
                };
                delta_cache.insert(key, v);
                v
            };
            if di == f64::NEG_INFINITY {
                return NegInf;
            }
            weighted += w[i] * di;
        }
        let wr: Vec<f64> = w.iter().zip(r).map(|(wi, ri)| wi * ri).collect();
        match c_set.support_lower(&wr, cfg.lp_tol) {
            Ok(s) => Finite(weighted).add(s),
            Err(_) => NegInf,
        }
    };

    let (_, best) = maximize_over_index_grid(&grids, &mut phi, cfg.golden_iters);
    Ok(best)
}

/// Minimal-penalty halfspace of the divergence region at a test measure and
/// direction: `{z : w'z >= -w'I + inf over (-x0 + C) of (w o r)'x}`.
/// Degenerates to the whole space when the divergence is infinite or the
/// support term is unbounded below.
pub fn penalty_divergence_set(
    losses: &VectorLossSpec,
    r: &[f64],
    thresh: &ThresholdData,
    q: &VectorMeasure,
    w: &[f64],
) -> Result<PenaltyValue> {
    let m = losses.dim();
    if q.dim() != m || thresh.dim() != m || w.len() != m || r.len() != m {
        return Err(Error::dimension("loss, index, threshold, measure, and direction dims differ"));
    }
    check_nonneg_nonzero(w, "direction")?;
    let gs = VectorDivergenceSpec::from_losses(losses);
    let i_vec = match vector_divergence(&gs, r, q)? {
        VectorOrPlusInf::PlusInf => return Ok(PenaltyValue::AllSpace),
        VectorOrPlusInf::Finite(v) => v,
    };
    let wi: f64 = w.iter().zip(&i_vec).map(|(wi, ii)| wi * ii).sum();
    let wr: Vec<f64> = w.iter().zip(r).map(|(a, b)| a * b).collect();
    let lp_tol = NumericConfig::default().lp_tol;
    let support = thresh.comparison_set().support_lower(&wr, lp_tol)?;
    match support {
        Finite(s) => Ok(PenaltyValue::Halfspace {
            normal: w.to_vec(),
            offset: -wi + s - dot(&wr, thresh.x0()),
        }),
        NegInf => Ok(PenaltyValue::AllSpace),
        PosInf => unreachable!("comparison sets are nonempty"),
    }
}

/// Minimal-penalty halfspace of the shortfall region: the supremum of the
/// divergence penalties over the index grid. Minimality holds for strictly
/// positive directions; for boundary directions this is the conservative
/// grid intersection.
pub fn penalty_shortfall_set(
    losses: &VectorLossSpec,
    thresh: &ThresholdData,
    q: &VectorMeasure,
    w: &[f64],
    cfg: &NumericConfig,
) -> Result<PenaltyValue> {
    let m = losses.dim();
    if q.dim() != m || thresh.dim() != m || w.len() != m {
        return Err(Error::dimension("loss, threshold, measure, and direction dims differ"));
    }
    check_nonneg_nonzero(w, "direction")?;
    let gs = VectorDivergenceSpec::from_losses(losses);
    let space = q.space().clone();
    let columns: Vec<Vec<f64>> = (0..m).map(|i| q.density_column(i)).collect();

    let mut grids = Vec::with_capacity(m);
    for i in 0..m {
        let grid = index_grid(gs.component(i), cfg)?;
        if w[i] == 0.0 {
            // A zero-weight coordinate still propagates an infinite
            // divergence through the weighted sum; pin it to an index that
            // keeps its divergence finite if any such grid point exists.
            let finite = grid.iter().copied().find(|&ri| {
                matches!(
                    divergence_functional(gs.component(i), ri, &space, &columns[i]),
                    Ok(Finite(_))
                )
            });
            match finite {
                Some(ri) => grids.push(vec![ri]),
                // Every admissible index leaves the divergence infinite:
                // all halfspaces degenerate.
                None => return Ok(PenaltyValue::AllSpace),
            }
        } else {
            grids.push(grid);
        }
    }

    let mut i_cache: HashMap<(usize, u64), XReal> = HashMap::new();
    let c_set = thresh.comparison_set().clone();
    let x0 = thresh.x0().to_vec();
    let mut phi = |r: &[f64]| -> XReal {
        let mut vals = Vec::with_capacity(m);
        for i in 0..m {
            let key = (i, r[i].to_bits());
            let v = if let Some(v) = i_cache.get(&key) {
                *v
            } else {
                let v = divergence_functional(gs.component(i), r[i], &space, &columns[i])
                    .unwrap_or(PosInf);
                i_cache.insert(key, v);
                v
            };
            vals.push(v);
        }
        let wi = weighted_sum(w, &vals);
        if wi == PosInf {
            return NegInf;
        }
        let wr: Vec<f64> = w.iter().zip(r).map(|(a, b)| a * b).collect();
        match c_set.support_lower(&wr, cfg.lp_tol) {
            Ok(Finite(s)) => wi.neg().add(Finite(s - dot(&wr, &x0))),
            _ => NegInf,
        }
    };

    let (_, best) = maximize_over_index_grid(&grids, &mut phi, cfg.golden_iters);
    match best {
        Finite(offset) => Ok(PenaltyValue::Halfspace {
            normal: w.to_vec(),
            offset,
        }),
        NegInf => Ok(PenaltyValue::AllSpace),
        PosInf => unreachable!("offsets are bounded by finite divergences"),
    }
}

/// Round-trip between a set risk measure and its acceptance set on a finite
/// test family: membership of `z` in `R(X)` must match acceptability of
/// `X + z` (zero belonging to `R(X + z)`).
pub struct RoundtripReport {
    pub tested: usize,
    pub mismatches: usize,
}

pub fn acceptance_roundtrip(
    member: impl Fn(&RandomVector, &[f64]) -> Result<bool>,
    xs: &[RandomVector],
    zs: &[Vec<f64>],
) -> Result<RoundtripReport> {
    let mut tested = 0;
    let mut mismatches = 0;
    for x in xs {
        for z in zs {
            let direct = member(x, z)?;
            let shifted = x.shift(z)?;
            let zero = vec![0.0; z.len()];
            let via_acceptance = member(&shifted, &zero)?;
            tested += 1;
            if direct != via_acceptance {
                mismatches += 1;
            }
        }
    }
    Ok(RoundtripReport { tested, mismatches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossSpec;
    use crate::space::FiniteProbSpace;
    use std::sync::Arc;

    fn cfg() -> NumericConfig {
        NumericConfig::default()
    }

    fn coin() -> Arc<FiniteProbSpace> {
        FiniteProbSpace::new(vec![0.5, 0.5]).unwrap()
    }

    fn entropic_pair(beta: [f64; 2]) -> VectorLossSpec {
        VectorLossSpec::new(vec![
            LossSpec::exponential(beta[0]).unwrap(),
            LossSpec::exponential(beta[1]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn vector_divergence_at_base_is_zero() {
        let sp = coin();
        let losses = entropic_pair([1.0, 2.0]);
        let gs = VectorDivergenceSpec::from_losses(&losses);
        let q = VectorMeasure::base(sp, 2).unwrap();
        match vector_divergence(&gs, &[1.0, 1.0], &q).unwrap() {
            VectorOrPlusInf::Finite(v) => {
                assert!(v.iter().all(|x| x.abs() < 1e-12), "{v:?}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vector_divergence_zero_index_is_plus_inf() {
        let sp = coin();
        let losses = entropic_pair([1.0, 1.0]);
        let gs = VectorDivergenceSpec::from_losses(&losses);
        let q = VectorMeasure::base(sp, 2).unwrap();
        assert_eq!(
            vector_divergence(&gs, &[1.0, 0.0], &q).unwrap(),
            VectorOrPlusInf::PlusInf
        );
    }

    #[test]
    fn vector_divergence_mixed_components() {
        // First component carries relative entropy over beta, second zero.
        let sp = coin();
        let losses = entropic_pair([1.0, 2.0]);
        let gs = VectorDivergenceSpec::from_losses(&losses);
        let q = VectorMeasure::new(sp, vec![vec![2.0, 1.0], vec![0.0, 1.0]]).unwrap();
        match vector_divergence(&gs, &[1.0, 1.0], &q).unwrap() {
            VectorOrPlusInf::Finite(v) => {
                assert!((v[0] - std::f64::consts::LN_2).abs() < 1e-12, "{v:?}");
                assert!(v[1].abs() < 1e-12, "{v:?}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn risk_vector_entropic_components() {
        let sp = coin();
        let losses = entropic_pair([1.0, 2.0]);
        let x = RandomVector::new(sp, vec![vec![1.0, 0.5], vec![-1.0, -0.5]]).unwrap();
        match divergence_risk_vector(&x, &losses, &[1.0, 1.0], &[0.0, 0.0], &cfg()).unwrap() {
            VectorOrMinusInf::Finite(v) => {
                let e0 = 1.0f64.cosh().ln();
                let e1 = (0.5 * ((-1.0f64).exp() + 1.0f64.exp())).ln() / 2.0;
                assert!((v[0] - e0).abs() < 1e-8, "{} vs {e0}", v[0]);
                assert!((v[1] - e1).abs() < 1e-8, "{} vs {e1}", v[1]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn risk_vector_signals_minus_inf() {
        let sp = coin();
        let losses = VectorLossSpec::new(vec![
            LossSpec::scaled_positive_part(0.5).unwrap(),
            LossSpec::scaled_positive_part(0.5).unwrap(),
        ])
        .unwrap();
        let x = RandomVector::new(sp, vec![vec![1.0, 1.0], vec![-1.0, -1.0]]).unwrap();
        assert_eq!(
            divergence_risk_vector(&x, &losses, &[0.4, 1.0], &[0.0, 0.0], &cfg()).unwrap(),
            VectorOrMinusInf::MinusInf
        );
    }

    #[test]
    fn avar_style_region_is_shifted_orthant() {
        // alpha = 0.5 in both coordinates, X = 0, x0 = 1, C the orthant:
        // region = (-1, -1) + R^2_+.
        let sp = coin();
        let losses = VectorLossSpec::new(vec![
            LossSpec::scaled_positive_part(0.5).unwrap(),
            LossSpec::scaled_positive_part(0.5).unwrap(),
        ])
        .unwrap();
        let x = RandomVector::constant(sp, &[0.0, 0.0]).unwrap();
        let thresh = ThresholdData::orthant(vec![1.0, 1.0]);
        match divergence_region(&x, &losses, &[1.0, 1.0], &thresh, &cfg()).unwrap() {
            RegionOutcome::Proper(p) => {
                assert!(p.contains(&[-1.0, -1.0], 1e-9));
                assert!(p.contains(&[-0.5, 3.0], 1e-9));
                assert!(!p.contains(&[-1.0 - 1e-6, -1.0], 1e-9));
                assert!(p.is_upper_set());
            }
            RegionOutcome::NotFinite => panic!("should be proper"),
        }
    }

    #[test]
    fn region_not_finite_below_admissible_index() {
        let sp = coin();
        let losses = VectorLossSpec::new(vec![
            LossSpec::scaled_positive_part(0.5).unwrap(),
            LossSpec::scaled_positive_part(0.5).unwrap(),
        ])
        .unwrap();
        let x = RandomVector::constant(sp, &[0.0, 0.0]).unwrap();
        let thresh = ThresholdData::orthant(vec![1.0, 1.0]);
        assert_eq!(
            divergence_region(&x, &losses, &[0.3, 1.0], &thresh, &cfg()).unwrap(),
            RegionOutcome::NotFinite
        );
    }

    #[test]
    fn region_translativity() {
        let sp = coin();
        let losses = entropic_pair([1.0, 1.0]);
        let x = RandomVector::new(sp.clone(), vec![vec![1.0, 0.0], vec![-1.0, 0.5]]).unwrap();
        let z0 = vec![0.3, -0.6];
        let shifted = x.shift(&z0).unwrap();
        let thresh = ThresholdData::orthant(vec![0.0, 0.0]);
        let (a, b) = match (
            divergence_region(&x, &losses, &[1.0, 1.0], &thresh, &cfg()).unwrap(),
            divergence_region(&shifted, &losses, &[1.0, 1.0], &thresh, &cfg()).unwrap(),
        ) {
            (RegionOutcome::Proper(a), RegionOutcome::Proper(b)) => (a, b),
            _ => panic!("should be proper"),
        };
        // Same normals, offsets differ by the shift in the normal direction.
        for (ha, hb) in a.halfspaces().iter().zip(b.halfspaces()) {
            assert_eq!(ha.normal(), hb.normal());
            let expected = ha.offset() - dot(ha.normal(), &z0);
            assert!((hb.offset() - expected).abs() < 1e-7);
        }
    }

    #[test]
    fn membership_reduces_componentwise_for_orthant() {
        let sp = FiniteProbSpace::new(vec![0.25, 0.75]).unwrap();
        let losses = entropic_pair([1.0, 2.0]);
        let x = RandomVector::new(sp, vec![vec![2.0, -1.0], vec![-1.0, 0.5]]).unwrap();
        let thresh = ThresholdData::orthant(vec![0.1, 0.2]);
        // Far enough up it must be a member, far enough down it cannot be.
        assert!(shortfall_membership(&x, &losses, &thresh, &[50.0, 50.0], &cfg()).unwrap());
        assert!(!shortfall_membership(&x, &losses, &thresh, &[-50.0, -50.0], &cfg()).unwrap());
    }

    #[test]
    fn region_anchor_and_rays() {
        let sp = coin();
        let losses = entropic_pair([1.0, 1.0]);
        let x = RandomVector::new(sp, vec![vec![1.0, -0.5], vec![-1.0, 0.5]]).unwrap();
        let thresh = ThresholdData::orthant(vec![0.0, 0.0]);
        let region =
            ShortfallRegion::new(x, losses, thresh, cfg()).unwrap();
        assert!(region.membership(region.anchor()).unwrap());
        let d = vec![std::f64::consts::FRAC_1_SQRT_2; 2];
        let p = region.ray_shoot(&d).unwrap().expect("bounded ray");
        // Boundary point is a member; stepping outward leaves the region.
        assert!(region.membership(&p).unwrap());
        let outside: Vec<f64> = p.iter().zip(&d).map(|(pi, di)| pi - 1e-4 * di).collect();
        assert!(!region.membership(&outside).unwrap());
        // Upper set: nudging up stays inside.
        let up: Vec<f64> = p.iter().map(|pi| pi + 1e-6).collect();
        assert!(region.membership(&up).unwrap());
    }

    #[test]
    fn support_is_a_lower_bound_on_members() {
        let sp = coin();
        let losses = entropic_pair([1.0, 2.0]);
        let x = RandomVector::new(sp, vec![vec![1.0, -0.5], vec![-1.0, 0.5]]).unwrap();
        let thresh = ThresholdData::orthant(vec![0.1, 0.1]);
        let region = ShortfallRegion::new(x.clone(), losses.clone(), thresh.clone(), cfg()).unwrap();
        for w in [vec![1.0, 0.0], vec![0.5, 0.5], vec![0.2, 0.8]] {
            let s = shortfall_support(&x, &losses, &thresh, &w, &cfg())
                .unwrap()
                .expect_finite("support");
            // Check against ray-shot members along several directions.
            for d in positive_orthant_directions(2, 8) {
                if let Some(p) = region.ray_shoot(&d).unwrap() {
                    let wz = dot(&w, &p);
                    assert!(
                        s <= wz + 1e-5,
                        "support {s} exceeds member value {wz} in direction {d:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn entropic_support_matches_first_order_optimum() {
        // With the orthant comparison set the support term vanishes and the
        // per-component optimum is 1/(1 + beta x0).
        let sp = coin();
        let beta = [1.0, 2.0];
        let x0 = [0.5, 0.25];
        let losses = entropic_pair(beta);
        let x = RandomVector::new(sp.clone(), vec![vec![1.0, -0.5], vec![-1.0, 0.5]]).unwrap();
        let thresh = ThresholdData::orthant(x0.to_vec());
        let w = vec![0.7, 0.3];
        let s = shortfall_support(&x, &losses, &thresh, &w, &cfg())
            .unwrap()
            .expect_finite("support");
        let mut expected = 0.0;
        for i in 0..2 {
            let m: f64 = sp
                .probs()
                .iter()
                .zip(&x.column(i))
                .map(|(p, xi)| p * (-beta[i] * xi).exp())
                .sum();
            let r = 1.0 / (1.0 + beta[i] * x0[i]);
            let delta = m.ln() / beta[i] + (1.0 - r + r.ln()) / beta[i] - r * x0[i];
            expected += w[i] * delta;
        }
        assert!((s - expected).abs() < 1e-5, "{s} vs {expected}");
    }

    #[test]
    fn divergence_penalty_halfspace_at_base() {
        let sp = coin();
        let losses = entropic_pair([1.0, 1.0]);
        let thresh = ThresholdData::orthant(vec![0.0, 0.0]);
        let q = VectorMeasure::base(sp, 2).unwrap();
        match penalty_divergence_set(&losses, &[1.0, 1.0], &thresh, &q, &[1.0, 1.0]).unwrap() {
            PenaltyValue::Halfspace { normal, offset } => {
                assert_eq!(normal, vec![1.0, 1.0]);
                assert!(offset.abs() < 1e-12, "offset {offset}");
            }
            PenaltyValue::AllSpace => panic!("finite data"),
        }
    }

    #[test]
    fn divergence_penalty_degenerates_on_infeasible_measure() {
        let sp = FiniteProbSpace::new(vec![0.25, 0.75]).unwrap();
        let losses = VectorLossSpec::new(vec![
            LossSpec::scaled_positive_part(0.5).unwrap(),
            LossSpec::scaled_positive_part(0.5).unwrap(),
        ])
        .unwrap();
        let thresh = ThresholdData::orthant(vec![0.0, 0.0]);
        // Density 2.2 > 1/(alpha r) = 2 in the first component.
        let q = VectorMeasure::new(sp, vec![vec![2.2, 1.0], vec![0.6, 1.0]]).unwrap();
        assert_eq!(
            penalty_divergence_set(&losses, &[1.0, 1.0], &thresh, &q, &[1.0, 1.0]).unwrap(),
            PenaltyValue::AllSpace
        );
    }

    #[test]
    fn shortfall_penalty_reduces_to_scalar_in_dim_one() {
        let sp = FiniteProbSpace::new(vec![0.5, 0.5]).unwrap();
        let loss = LossSpec::exponential(1.0).unwrap();
        let losses = VectorLossSpec::new(vec![loss.clone()]).unwrap();
        let thresh = ThresholdData::orthant(vec![0.2]);
        let q = VectorMeasure::new(sp.clone(), vec![vec![1.5], vec![0.5]]).unwrap();
        let scalar = crate::scalar::penalty_shortfall_scalar(
            &loss,
            0.2,
            &sp,
            &[1.5, 0.5],
            &cfg(),
        )
        .unwrap()
        .expect_finite("scalar penalty");
        match penalty_shortfall_set(&losses, &thresh, &q, &[1.0], &cfg()).unwrap() {
            PenaltyValue::Halfspace { offset, .. } => {
                assert!((offset + scalar).abs() < 1e-6, "{offset} vs {}", -scalar);
            }
            PenaltyValue::AllSpace => panic!("finite data"),
        }
    }

    #[test]
    fn shortfall_penalty_dominates_divergence_penalties() {
        let sp = coin();
        let losses = entropic_pair([1.0, 2.0]);
        let thresh = ThresholdData::orthant(vec![0.1, 0.3]);
        let q = VectorMeasure::new(sp, vec![vec![1.4, 0.8], vec![0.6, 1.2]]).unwrap();
        let w = vec![0.6, 0.4];
        let top = match penalty_shortfall_set(&losses, &thresh, &q, &w, &cfg()).unwrap() {
            PenaltyValue::Halfspace { offset, .. } => offset,
            PenaltyValue::AllSpace => panic!("finite data"),
        };
        for r in [[1.0, 1.0], [0.5, 2.0], [2.0, 0.7]] {
            match penalty_divergence_set(&losses, &r, &thresh, &q, &w).unwrap() {
                PenaltyValue::Halfspace { offset, .. } => {
                    assert!(top >= offset - 1e-9, "sup {top} below member {offset}");
                }
                PenaltyValue::AllSpace => {}
            }
        }
    }

    #[test]
    fn acceptance_roundtrip_on_shortfall() {
        let sp = FiniteProbSpace::new(vec![0.3, 0.7]).unwrap();
        let losses = entropic_pair([1.0, 1.0]);
        let thresh = ThresholdData::orthant(vec![0.0, 0.0]);
        let c = cfg();
        let xs = vec![
            RandomVector::new(sp.clone(), vec![vec![1.0, 0.0], vec![-1.0, 0.5]]).unwrap(),
            RandomVector::new(sp.clone(), vec![vec![0.2, -0.4], vec![0.1, 0.9]]).unwrap(),
        ];
        let zs = vec![vec![0.0, 0.0], vec![1.0, -0.5], vec![-2.0, 3.0]];
        let report = acceptance_roundtrip(
            |x, z| shortfall_membership(x, &losses, &thresh, z, &c),
            &xs,
            &zs,
        )
        .unwrap();
        assert_eq!(report.tested, 6);
        assert_eq!(report.mismatches, 0);
    }
}
