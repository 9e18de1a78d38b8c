//! Finite probability spaces, random vectors, and vector measures.
//!
//! Everything downstream works on a finite sample space with strictly
//! positive atom probabilities. Null atoms are rejected at construction, so
//! almost-sure statements become pointwise statements and essential bounds
//! become plain minima and maxima over atoms.
//!
//! A `RandomVector` stores an `n x m` value matrix (atom `k`, component `i`).
//! A `VectorMeasure` stores `m` probability measures absolutely continuous
//! with respect to the base measure, as density columns `dQ_i/dP`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::xreal::XReal;

/// Tolerance on `sum(p) - 1` accepted at construction.
pub const PROB_SUM_TOL: f64 = 1e-12;
/// Tolerance on `E[dQ_i/dP] - 1` accepted at construction.
pub const DENSITY_SUM_TOL: f64 = 1e-10;

/// Finite probability space with strictly positive atom probabilities.
///
/// # Examples
///
/// ```
/// use riskset::space::FiniteProbSpace;
///
/// let space = FiniteProbSpace::new(vec![0.25, 0.75]).unwrap();
/// assert_eq!(space.len(), 2);
/// assert!((space.prob(1) - 0.75).abs() < 1e-15);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteProbSpace {
    p: Vec<f64>,
}

impl FiniteProbSpace {
    /// Validates and wraps atom probabilities.
    ///
    /// Requires every `p_k > 0` and `|sum(p) - 1| <= 1e-12`.
    pub fn new(p: Vec<f64>) -> Result<Arc<Self>> {
        if p.is_empty() {
            return Err(Error::invalid("probability space needs at least one atom"));
        }
        for (k, &pk) in p.iter().enumerate() {
            if !pk.is_finite() || pk <= 0.0 {
                return Err(Error::invalid(format!(
                    "atom {k} has probability {pk}; probabilities must be finite and strictly positive"
                )));
            }
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::invalid(format!(
                "probabilities sum to {total}, out of tolerance {PROB_SUM_TOL}"
            )));
        }
        Ok(Arc::new(FiniteProbSpace { p }))
    }

    /// Uniform space on `n` atoms.
    pub fn uniform(n: usize) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(Error::invalid("probability space needs at least one atom"));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Probability of atom `k`.
    pub fn prob(&self, k: usize) -> f64 {
        self.p[k]
    }

    /// All atom probabilities in atom order.
    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    /// `E[v]` for a scalar column over the atoms.
    pub fn mean(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.p.len());
        self.p.iter().zip(values).map(|(&pk, &vk)| pk * vk).sum()
    }

    /// `E[v]` where individual terms may be infinite.
    pub fn mean_x(&self, values: &[XReal]) -> XReal {
        debug_assert_eq!(values.len(), self.p.len());
        crate::xreal::weighted_sum(&self.p, values)
    }
}

/// Two spaces are interchangeable when they are the same allocation or carry
/// identical probabilities.
pub fn same_space(a: &FiniteProbSpace, b: &FiniteProbSpace) -> bool {
    std::ptr::eq(a, b) || a.p == b.p
}

/// Random vector on a finite space: `n x m` matrix of finite values.
///
/// Row `k` holds the outcome on atom `k`; column `i` is the scalar position
/// `X_i`. All entries must be finite (the space is finite, so every random
/// vector is bounded).
#[derive(Debug, Clone)]
pub struct RandomVector {
    space: Arc<FiniteProbSpace>,
    values: Vec<f64>,
    m: usize,
}

impl RandomVector {
    /// Builds from rows (one row per atom, each of length `m`).
    pub fn new(space: Arc<FiniteProbSpace>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = space.len();
        if rows.len() != n {
            return Err(Error::dimension(format!(
                "expected {n} rows (one per atom), got {}",
                rows.len()
            )));
        }
        let m = rows.first().map_or(0, Vec::len);
        if m == 0 {
            return Err(Error::invalid("random vector needs at least one component"));
        }
        let mut values = Vec::with_capacity(n * m);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::dimension(format!(
                    "row {k} has {} entries, expected {m}",
                    row.len()
                )));
            }
            for (i, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::invalid(format!(
                        "value at atom {k}, component {i} is {v}; entries must be finite"
                    )));
                }
                values.push(v);
            }
        }
        Ok(RandomVector { space, values, m })
    }

    /// Builds a one-component vector from a scalar column.
    pub fn scalar(space: Arc<FiniteProbSpace>, column: Vec<f64>) -> Result<Self> {
        Self::new(space, column.into_iter().map(|v| vec![v]).collect())
    }

    /// Constant vector `X = c` on every atom.
    pub fn constant(space: Arc<FiniteProbSpace>, c: &[f64]) -> Result<Self> {
        let n = space.len();
        Self::new(space, vec![c.to_vec(); n])
    }

    pub fn space(&self) -> &Arc<FiniteProbSpace> {
        &self.space
    }

    /// Number of atoms.
    pub fn atoms(&self) -> usize {
        self.space.len()
    }

    /// Number of components.
    pub fn dim(&self) -> usize {
        self.m
    }

    /// Value of component `i` on atom `k`.
    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.m + i]
    }

    /// Component `i` as a column over atoms.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.atoms()).map(|k| self.value(k, i)).collect()
    }

    /// Componentwise expectation under the base measure.
    ///
    /// # Examples
    ///
    /// ```
    /// use riskset::space::{FiniteProbSpace, RandomVector};
    ///
    /// let space = FiniteProbSpace::new(vec![0.3, 0.7]).unwrap();
    /// let x = RandomVector::scalar(space, vec![2.0, -1.0]).unwrap();
    /// assert!((x.expect()[0] - (-0.1)).abs() < 1e-12);
    /// ```
    pub fn expect(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for k in 0..self.atoms() {
            let pk = self.space.prob(k);
            for (i, o) in out.iter_mut().enumerate() {
                *o += pk * self.value(k, i);
            }
        }
        out
    }

    /// Largest value of component `i` (essential supremum on a finite space).
    pub fn ess_sup(&self, i: usize) -> f64 {
        (0..self.atoms())
            .map(|k| self.value(k, i))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest value of component `i`.
    pub fn ess_inf(&self, i: usize) -> f64 {
        (0..self.atoms())
            .map(|k| self.value(k, i))
            .fold(f64::INFINITY, f64::min)
    }

    /// `X + z` for a deterministic vector `z`.
    pub fn shift(&self, z: &[f64]) -> Result<Self> {
        if z.len() != self.m {
            return Err(Error::dimension(format!(
                "shift has {} components, expected {}",
                z.len(),
                self.m
            )));
        }
        let mut shifted = self.clone();
        for k in 0..self.atoms() {
            for (i, &zi) in z.iter().enumerate() {
                shifted.values[k * self.m + i] += zi;
            }
        }
        Ok(shifted)
    }

    /// Keeps components `0..m_keep`.
    pub fn truncate(&self, m_keep: usize) -> Result<Self> {
        if m_keep == 0 || m_keep > self.m {
            return Err(Error::dimension(format!(
                "cannot truncate {}-dimensional vector to {m_keep} components",
                self.m
            )));
        }
        let rows = (0..self.atoms())
            .map(|k| (0..m_keep).map(|i| self.value(k, i)).collect())
            .collect();
        Self::new(self.space.clone(), rows)
    }
}

/// Vector probability measure stored as densities against the base measure.
#[derive(Debug, Clone)]
pub struct VectorMeasure {
    space: Arc<FiniteProbSpace>,
    densities: Vec<f64>,
    m: usize,
}

impl VectorMeasure {
    /// Builds from rows of densities (one row per atom, each of length `m`).
    ///
    /// Requires every density nonnegative and `|E[dQ_i/dP] - 1| <= 1e-10`
    /// per component.
    pub fn new(space: Arc<FiniteProbSpace>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = space.len();
        if rows.len() != n {
            return Err(Error::dimension(format!(
                "expected {n} density rows, got {}",
                rows.len()
            )));
        }
        let m = rows.first().map_or(0, Vec::len);
        if m == 0 {
            return Err(Error::invalid("vector measure needs at least one component"));
        }
        let mut densities = Vec::with_capacity(n * m);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::dimension(format!(
                    "density row {k} has {} entries, expected {m}",
                    row.len()
                )));
            }
            for (i, &d) in row.iter().enumerate() {
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::invalid(format!(
                        "density at atom {k}, component {i} is {d}; densities must be finite and >= 0"
                    )));
                }
                densities.push(d);
            }
        }
        let q = VectorMeasure { space, densities, m };
        for i in 0..m {
            let total = q.space.mean(&q.density_column(i));
            if (total - 1.0).abs() > DENSITY_SUM_TOL {
                return Err(Error::invalid(format!(
                    "component {i} densities integrate to {total}, out of tolerance {DENSITY_SUM_TOL}"
                )));
            }
        }
        Ok(q)
    }

    /// The base measure itself, replicated over `m` components.
    pub fn base(space: Arc<FiniteProbSpace>, m: usize) -> Result<Self> {
        let n = space.len();
        Self::new(space, vec![vec![1.0; m]; n])
    }

    pub fn space(&self) -> &Arc<FiniteProbSpace> {
        &self.space
    }

    pub fn atoms(&self) -> usize {
        self.space.len()
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// Density of component `i` on atom `k`.
    pub fn density(&self, k: usize, i: usize) -> f64 {
        self.densities[k * self.m + i]
    }

    /// Density column of component `i`.
    pub fn density_column(&self, i: usize) -> Vec<f64> {
        (0..self.atoms()).map(|k| self.density(k, i)).collect()
    }

    /// Keeps components `0..m_keep`.
    pub fn truncate(&self, m_keep: usize) -> Result<Self> {
        if m_keep == 0 || m_keep > self.m {
            return Err(Error::dimension(format!(
                "cannot truncate {}-dimensional measure to {m_keep} components",
                self.m
            )));
        }
        let rows = (0..self.atoms())
            .map(|k| (0..m_keep).map(|i| self.density(k, i)).collect())
            .collect();
        Self::new(self.space.clone(), rows)
    }

    /// `E^Q[X]` componentwise: `(E^{Q_1}[X_1], ..., E^{Q_m}[X_m])`.
    pub fn expect_under(&self, x: &RandomVector) -> Result<Vec<f64>> {
        if !same_space(&self.space, x.space()) {
            return Err(Error::dimension(
                "measure and random vector live on different spaces",
            ));
        }
        if self.m != x.dim() {
            return Err(Error::dimension(format!(
                "measure has {} components, random vector has {}",
                self.m,
                x.dim()
            )));
        }
        let mut out = vec![0.0; self.m];
        for k in 0..self.atoms() {
            let pk = self.space.prob(k);
            for (i, o) in out.iter_mut().enumerate() {
                *o += pk * self.density(k, i) * x.value(k, i);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_null_atoms() {
        assert!(FiniteProbSpace::new(vec![0.0, 1.0]).is_err());
        assert!(FiniteProbSpace::new(vec![0.5, 0.6]).is_err());
        assert!(FiniteProbSpace::new(vec![]).is_err());
    }

    #[test]
    fn constant_expectation_is_the_constant() {
        let space = FiniteProbSpace::new(vec![0.2, 0.5, 0.3]).unwrap();
        let x = RandomVector::constant(space, &[3.5, -1.0]).unwrap();
        let e = x.expect();
        assert!((e[0] - 3.5).abs() < 1e-12);
        assert!((e[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_coin_has_zero_mean() {
        let space = FiniteProbSpace::new(vec![0.5, 0.5]).unwrap();
        let x = RandomVector::scalar(space, vec![1.0, -1.0]).unwrap();
        assert_eq!(x.expect()[0], 0.0);
    }

    #[test]
    fn weighted_mean_matches_hand_sum() {
        let space = FiniteProbSpace::new(vec![0.3, 0.7]).unwrap();
        let x = RandomVector::scalar(space, vec![2.0, -1.0]).unwrap();
        assert!((x.expect()[0] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn expect_under_base_equals_expect() {
        let space = FiniteProbSpace::new(vec![0.3, 0.7]).unwrap();
        let x = RandomVector::new(space.clone(), vec![vec![2.0, 1.0], vec![-1.0, 4.0]]).unwrap();
        let q = VectorMeasure::base(space, 2).unwrap();
        let lhs = q.expect_under(&x).unwrap();
        let rhs = x.expect();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn expect_under_weights_by_density() {
        let space = FiniteProbSpace::new(vec![0.5, 0.5]).unwrap();
        let x = RandomVector::scalar(space.clone(), vec![3.0, 5.0]).unwrap();
        let q = VectorMeasure::new(space, vec![vec![2.0], vec![0.0]]).unwrap();
        let e = q.expect_under(&x).unwrap();
        assert!((e[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn expect_under_constant_is_constant() {
        let space = FiniteProbSpace::new(vec![0.5, 0.25, 0.25]).unwrap();
        let x = RandomVector::constant(space.clone(), &[7.0]).unwrap();
        let q = VectorMeasure::new(space, vec![vec![1.5], vec![1.0], vec![0.0]]).unwrap();
        assert!((q.expect_under(&x).unwrap()[0] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn density_validation() {
        let space = FiniteProbSpace::new(vec![0.5, 0.5]).unwrap();
        assert!(VectorMeasure::new(space.clone(), vec![vec![-0.1], vec![2.1]]).is_err());
        assert!(VectorMeasure::new(space.clone(), vec![vec![1.5], vec![1.5]]).is_err());
        assert!(VectorMeasure::new(space, vec![vec![1.5], vec![0.5]]).is_ok());
    }
}
