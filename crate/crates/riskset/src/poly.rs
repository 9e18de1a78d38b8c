//! Polyhedra in halfspace representation, thresholds, and support values.
//!
//! A halfspace is `{z : a'z >= b}`. Normals are normalized to unit
//! Euclidean length at construction so the absolute residual tolerances
//! used for membership mean the same thing for every input scaling.
//!
//! Upper sets (sets satisfying `A + R^m_+ = A`) are recognized from their
//! normals: an intersection of halfspaces is upper when every normal is
//! componentwise nonnegative.

use crate::error::{Error, Result};
use crate::simplex::{LinearProgram, LpOutcome, Relation};
use crate::xreal::{Finite, NegInf, PosInf, XReal};

/// `{z : normal' z >= offset}` with a unit-length normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    normal: Vec<f64>,
    offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if normal.iter().any(|v| !v.is_finite()) || !offset.is_finite() {
            return Err(Error::invalid("halfspace data must be finite"));
        }
        let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 0.0 {
            return Err(Error::invalid("halfspace normal must be nonzero"));
        }
        Ok(Halfspace {
            normal: normal.iter().map(|v| v / norm).collect(),
            offset: offset / norm,
        })
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// Signed residual `normal' z - offset`; nonnegative inside.
    pub fn residual(&self, z: &[f64]) -> f64 {
        dot(&self.normal, z) - self.offset
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Closed convex polyhedron, `Empty` or an intersection of halfspaces
/// (`HRep` with no halfspaces is all of `R^m`).
#[derive(Debug, Clone, PartialEq)]
pub enum Polyhedron {
    Empty {
        dim: usize,
    },
    HRep {
        dim: usize,
        halfspaces: Vec<Halfspace>,
        /// Recession-cone generators, when the construction knows them.
        generators: Option<Vec<Vec<f64>>>,
    },
}

impl Polyhedron {
    pub fn empty(dim: usize) -> Self {
        Polyhedron::Empty { dim }
    }

    pub fn all_space(dim: usize) -> Self {
        Polyhedron::HRep {
            dim,
            halfspaces: Vec::new(),
            generators: None,
        }
    }

    /// The positive orthant `R^m_+`.
    pub fn orthant(dim: usize) -> Self {
        let halfspaces = (0..dim)
            .map(|i| {
                let mut normal = vec![0.0; dim];
                normal[i] = 1.0;
                Halfspace { normal, offset: 0.0 }
            })
            .collect();
        let generators = (0..dim)
            .map(|i| {
                let mut g = vec![0.0; dim];
                g[i] = 1.0;
                g
            })
            .collect();
        Polyhedron::HRep {
            dim,
            halfspaces,
            generators: Some(generators),
        }
    }

    pub fn from_halfspaces(dim: usize, halfspaces: Vec<Halfspace>) -> Result<Self> {
        for h in &halfspaces {
            if h.dim() != dim {
                return Err(Error::dimension(format!(
                    "halfspace in R^{} added to a polyhedron in R^{dim}",
                    h.dim()
                )));
            }
        }
        Ok(Polyhedron::HRep {
            dim,
            halfspaces,
            generators: None,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Polyhedron::Empty { dim } | Polyhedron::HRep { dim, .. } => *dim,
        }
    }

    pub fn is_empty_variant(&self) -> bool {
        matches!(self, Polyhedron::Empty { .. })
    }

    pub fn is_all_space(&self) -> bool {
        matches!(self, Polyhedron::HRep { halfspaces, .. } if halfspaces.is_empty())
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        match self {
            Polyhedron::Empty { .. } => &[],
            Polyhedron::HRep { halfspaces, .. } => halfspaces,
        }
    }

    /// Componentwise-nonnegative normals guarantee `P + R^m_+ = P`.
    pub fn is_upper_set(&self) -> bool {
        match self {
            Polyhedron::Empty { .. } => false,
            Polyhedron::HRep { halfspaces, .. } => halfspaces
                .iter()
                .all(|h| h.normal.iter().all(|&v| v >= 0.0)),
        }
    }

    /// Membership with an absolute residual tolerance.
    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        match self {
            Polyhedron::Empty { .. } => false,
            Polyhedron::HRep { halfspaces, .. } => {
                halfspaces.iter().all(|h| h.residual(z) >= -tol)
            }
        }
    }

    /// Image under `z -> diag(r) z` for strictly positive `r`.
    pub fn scale_diag(&self, r: &[f64]) -> Result<Polyhedron> {
        debug_assert!(r.iter().all(|&ri| ri > 0.0 && ri.is_finite()));
        match self {
            Polyhedron::Empty { dim } => Ok(Polyhedron::Empty { dim: *dim }),
            Polyhedron::HRep {
                dim,
                halfspaces,
                generators,
            } => {
                let hs = halfspaces
                    .iter()
                    .map(|h| {
                        let scaled: Vec<f64> =
                            h.normal.iter().zip(r).map(|(a, ri)| a / ri).collect();
                        Halfspace::new(scaled, h.offset)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let gens = generators.as_ref().map(|gs| {
                    gs.iter()
                        .map(|g| g.iter().zip(r).map(|(gi, ri)| gi * ri).collect())
                        .collect()
                });
                Ok(Polyhedron::HRep {
                    dim: *dim,
                    halfspaces: hs,
                    generators: gens,
                })
            }
        }
    }

    /// Image under `z -> z + v`.
    pub fn translate(&self, v: &[f64]) -> Polyhedron {
        match self {
            Polyhedron::Empty { dim } => Polyhedron::Empty { dim: *dim },
            Polyhedron::HRep {
                dim,
                halfspaces,
                generators,
            } => {
                let hs = halfspaces
                    .iter()
                    .map(|h| Halfspace {
                        normal: h.normal.clone(),
                        offset: h.offset + dot(&h.normal, v),
                    })
                    .collect();
                Polyhedron::HRep {
                    dim: *dim,
                    halfspaces: hs,
                    generators: generators.clone(),
                }
            }
        }
    }

    /// Intersection: concatenated halfspace lists.
    pub fn intersect(&self, other: &Polyhedron) -> Result<Polyhedron> {
        if self.dim() != other.dim() {
            return Err(Error::dimension("intersecting polyhedra of different dims"));
        }
        match (self, other) {
            (Polyhedron::Empty { dim }, _) | (_, Polyhedron::Empty { dim }) => {
                Ok(Polyhedron::Empty { dim: *dim })
            }
            _ => {
                let mut hs = self.halfspaces().to_vec();
                hs.extend(other.halfspaces().iter().cloned());
                Ok(Polyhedron::HRep {
                    dim: self.dim(),
                    halfspaces: hs,
                    generators: None,
                })
            }
        }
    }

    /// Exactly the positive orthant: one axis constraint per coordinate,
    /// all through the origin.
    pub fn is_positive_orthant(&self) -> bool {
        let halfspaces = match self {
            Polyhedron::Empty { .. } => return false,
            Polyhedron::HRep { halfspaces, .. } => halfspaces,
        };
        if halfspaces.len() != self.dim() {
            return false;
        }
        let mut seen = vec![false; self.dim()];
        for h in halfspaces {
            if h.offset != 0.0 {
                return false;
            }
            let mut axis = usize::MAX;
            for (i, &v) in h.normal.iter().enumerate() {
                if v == 1.0 && axis == usize::MAX {
                    axis = i;
                } else if v != 0.0 {
                    return false;
                }
            }
            if axis == usize::MAX || seen[axis] {
                return false;
            }
            seen[axis] = true;
        }
        true
    }

    /// `inf { w'x : x in P }` for `w` in the closed positive orthant,
    /// `w != 0`. `+inf` on the empty set, `-inf` when unbounded below.
    pub fn support_lower(&self, w: &[f64], lp_tol: f64) -> Result<XReal> {
        if w.len() != self.dim() {
            return Err(Error::dimension("support direction has wrong length"));
        }
        if w.iter().any(|&wi| wi < 0.0 || !wi.is_finite()) || w.iter().all(|&wi| wi == 0.0) {
            return Err(Error::precondition(
                "support direction must be nonnegative and nonzero",
            ));
        }
        if self.is_positive_orthant() {
            // The apex is optimal for every direction in the dual cone.
            return Ok(Finite(0.0));
        }
        let halfspaces = match self {
            Polyhedron::Empty { .. } => return Ok(PosInf),
            Polyhedron::HRep { halfspaces, .. } => halfspaces,
        };
        let n = self.dim();
        let mut lp = LinearProgram::new(n);
        lp.set_objective(w);
        for i in 0..n {
            lp.free_var(i);
        }
        for h in halfspaces {
            lp.add_row(&h.normal, Relation::Ge, h.offset);
        }
        match lp.solve(lp_tol)? {
            LpOutcome::Optimal { value, .. } => Ok(Finite(value)),
            LpOutcome::Unbounded { .. } => Ok(NegInf),
            // An H-rep that admits no point at all acts like the empty set.
            LpOutcome::Infeasible => Ok(PosInf),
        }
    }

    /// Like [`Self::support_lower`] but also returns an attaining point when
    /// the infimum is finite.
    pub fn support_lower_point(
        &self,
        w: &[f64],
        lp_tol: f64,
    ) -> Result<(XReal, Option<Vec<f64>>)> {
        if w.len() != self.dim() {
            return Err(Error::dimension("support direction has wrong length"));
        }
        if w.iter().any(|&wi| wi < 0.0 || !wi.is_finite()) || w.iter().all(|&wi| wi == 0.0) {
            return Err(Error::precondition(
                "support direction must be nonnegative and nonzero",
            ));
        }
        let halfspaces = match self {
            Polyhedron::Empty { .. } => return Ok((PosInf, None)),
            Polyhedron::HRep { halfspaces, .. } => halfspaces,
        };
        if self.is_positive_orthant() {
            return Ok((Finite(0.0), Some(vec![0.0; self.dim()])));
        }
        let n = self.dim();
        let mut lp = LinearProgram::new(n);
        lp.set_objective(w);
        for i in 0..n {
            lp.free_var(i);
        }
        for h in halfspaces {
            lp.add_row(&h.normal, Relation::Ge, h.offset);
        }
        match lp.solve(lp_tol)? {
            LpOutcome::Optimal { value, x } => Ok((Finite(value), Some(x))),
            LpOutcome::Unbounded { .. } => Ok((NegInf, None)),
            LpOutcome::Infeasible => Ok((PosInf, None)),
        }
    }

    /// Some point of the polyhedron, if it has one: the LP solver's phase-one
    /// vertex, deterministic for a fixed H-rep.
    pub fn any_point(&self, lp_tol: f64) -> Result<Option<Vec<f64>>> {
        let halfspaces = match self {
            Polyhedron::Empty { .. } => return Ok(None),
            Polyhedron::HRep { halfspaces, .. } => halfspaces,
        };
        let n = self.dim();
        let mut lp = LinearProgram::new(n);
        for i in 0..n {
            lp.free_var(i);
        }
        for h in halfspaces {
            lp.add_row(&h.normal, Relation::Ge, h.offset);
        }
        match lp.solve(lp_tol)? {
            LpOutcome::Optimal { x, .. } => Ok(Some(x)),
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Unbounded { .. } => unreachable!("zero objective cannot be unbounded"),
        }
    }
}

/// Acceptance threshold: a level `x0` and an upper convex comparison set
/// `C` with `0` on its boundary. Expected-loss vectors `e` are acceptable
/// when `x0 - e` lies in `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdData {
    x0: Vec<f64>,
    c: Polyhedron,
}

impl ThresholdData {
    /// Validates the comparison set: nonempty H-rep, upper set, `0 in C`,
    /// and `0` not interior (some constraint is tight at the origin).
    pub fn new(x0: Vec<f64>, c: Polyhedron, tol: f64) -> Result<Self> {
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("threshold level must be finite"));
        }
        if c.dim() != x0.len() {
            return Err(Error::dimension(format!(
                "threshold level in R^{} but comparison set in R^{}",
                x0.len(),
                c.dim()
            )));
        }
        if c.is_empty_variant() || c.is_all_space() {
            return Err(Error::invalid(
                "comparison set must be a proper nonempty intersection of halfspaces",
            ));
        }
        if !c.is_upper_set() {
            return Err(Error::invalid(
                "comparison set must be an upper set: all halfspace normals componentwise >= 0",
            ));
        }
        let offsets: Vec<f64> = c.halfspaces().iter().map(Halfspace::offset).collect();
        // 0 in C: every offset <= 0 (up to tol).
        if offsets.iter().any(|&b| b > tol) {
            return Err(Error::invalid(
                "comparison set must contain the origin (all offsets <= 0)",
            ));
        }
        // 0 on the boundary: some constraint tight at the origin.
        if !offsets.iter().any(|&b| b >= -tol) {
            return Err(Error::invalid(
                "origin must lie on the boundary of the comparison set",
            ));
        }
        Ok(ThresholdData { x0, c })
    }

    /// `R^m_+` comparison with the given level.
    pub fn orthant(x0: Vec<f64>) -> Self {
        let c = Polyhedron::orthant(x0.len());
        ThresholdData { x0, c }
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn comparison_set(&self) -> &Polyhedron {
        &self.c
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// Acceptability of an expected-loss vector: `x0 - e in C`. Infinite
    /// components fail the comparison.
    pub fn accepts(&self, expected_loss: &[XReal], tol: f64) -> bool {
        let mut shifted = Vec::with_capacity(self.x0.len());
        for (x0i, e) in self.x0.iter().zip(expected_loss) {
            match e {
                Finite(v) => shifted.push(x0i - v),
                _ => return false,
            }
        }
        self.c.contains(&shifted, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-9;

    #[test]
    fn orthant_support_is_zero() {
        let c = Polyhedron::orthant(3);
        for w in [vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 1.0], vec![0.5, 2.0, 0.0]] {
            assert_eq!(c.support_lower(&w, TOL).unwrap(), Finite(0.0));
        }
    }

    #[test]
    fn single_halfspace_support() {
        let h = Halfspace::new(vec![1.0, 1.0], 1.0).unwrap();
        let p = Polyhedron::from_halfspaces(2, vec![h]).unwrap();
        let v = p.support_lower(&[1.0, 1.0], TOL).unwrap();
        assert!((v.expect_finite("support") - 1.0).abs() < 1e-9);
        // Direction not aligned with the normal escapes to -inf.
        assert_eq!(p.support_lower(&[1.0, 0.0], TOL).unwrap(), NegInf);
    }

    #[test]
    fn negative_direction_rejected() {
        let c = Polyhedron::orthant(2);
        assert!(c.support_lower(&[1.0, -1.0], TOL).is_err());
        assert!(c.support_lower(&[0.0, 0.0], TOL).is_err());
    }

    #[test]
    fn empty_set_support_is_plus_inf() {
        let p = Polyhedron::empty(2);
        assert_eq!(p.support_lower(&[1.0, 1.0], TOL).unwrap(), PosInf);
    }

    #[test]
    fn scale_and_translate_track_membership() {
        let c = Polyhedron::orthant(2);
        let scaled = c.scale_diag(&[2.0, 0.5]).unwrap();
        // diag(r) of the orthant is the orthant.
        assert!(scaled.contains(&[0.1, 0.1], TOL));
        assert!(!scaled.contains(&[-0.1, 0.1], TOL));
        let moved = c.translate(&[-1.0, 3.0]);
        assert!(moved.contains(&[-1.0, 3.0], TOL));
        assert!(moved.contains(&[0.0, 3.5], TOL));
        assert!(!moved.contains(&[-1.1, 3.0], TOL));
    }

    #[test]
    fn scale_diag_general_halfspace() {
        // {z1 + z2 >= 1} under diag(2, 4).
        let h = Halfspace::new(vec![1.0, 1.0], 1.0).unwrap();
        let p = Polyhedron::from_halfspaces(2, vec![h]).unwrap();
        let s = p.scale_diag(&[2.0, 4.0]).unwrap();
        // y = diag(r) z member iff y1/2 + y2/4 >= 1.
        assert!(s.contains(&[2.0, 0.0], TOL));
        assert!(s.contains(&[0.0, 4.0], TOL));
        assert!(!s.contains(&[1.0, 1.0], TOL));
    }

    #[test]
    fn threshold_validation() {
        // Orthant with 0 on boundary: fine.
        assert!(ThresholdData::new(vec![0.5, 0.5], Polyhedron::orthant(2), TOL).is_ok());
        // Shifted set no longer containing the origin.
        let shifted = Polyhedron::orthant(2).translate(&[0.5, 0.5]);
        assert!(ThresholdData::new(vec![0.0, 0.0], shifted, TOL).is_err());
        // Origin interior: all offsets strictly negative.
        let fat = Polyhedron::orthant(2).translate(&[-0.5, -0.5]);
        assert!(ThresholdData::new(vec![0.0, 0.0], fat, TOL).is_err());
        // Not an upper set.
        let tilted = Polyhedron::from_halfspaces(
            2,
            vec![Halfspace::new(vec![1.0, -1.0], 0.0).unwrap()],
        )
        .unwrap();
        assert!(ThresholdData::new(vec![0.0, 0.0], tilted, TOL).is_err());
    }

    #[test]
    fn threshold_accepts_componentwise_for_orthant() {
        let t = ThresholdData::orthant(vec![1.0, 2.0]);
        assert!(t.accepts(&[Finite(1.0), Finite(2.0)], TOL));
        assert!(t.accepts(&[Finite(0.5), Finite(-3.0)], TOL));
        assert!(!t.accepts(&[Finite(1.1), Finite(0.0)], TOL));
        assert!(!t.accepts(&[PosInf, Finite(0.0)], TOL));
    }

    #[test]
    fn any_point_lands_inside() {
        let h1 = Halfspace::new(vec![1.0, 1.0], 2.0).unwrap();
        let h2 = Halfspace::new(vec![-1.0, 1.0], 0.0).unwrap();
        let p = Polyhedron::from_halfspaces(2, vec![h1, h2]).unwrap();
        let z = p.any_point(TOL).unwrap().unwrap();
        assert!(p.contains(&z, 1e-7));
    }
}
