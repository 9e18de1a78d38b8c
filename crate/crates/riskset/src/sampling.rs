//! Deterministic direction sampling on the positive part of the unit
//! sphere. Every set contains the canonical axes and the normalized
//! all-ones direction; the rest is a golden-ratio lattice, so repeated runs
//! see identical directions in identical order.

/// `total` unit directions in the closed positive orthant; the `m` axes and
/// the all-ones direction come first. For `m == 1` the single direction is
/// returned regardless of `total`.
pub fn positive_orthant_directions(m: usize, total: usize) -> Vec<Vec<f64>> {
    assert!(m >= 1, "directions need at least one dimension");
    if m == 1 {
        return vec![vec![1.0]];
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(total.max(m + 1));
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        out.push(e);
    }
    let s = (m as f64).sqrt();
    out.push(vec![1.0 / s; m]);
    let fill = total.saturating_sub(out.len());
    match m {
        2 => {
            // Evenly spaced interior angles of the quarter circle.
            for j in 0..fill {
                let theta = (j as f64 + 0.5) / fill as f64 * std::f64::consts::FRAC_PI_2;
                out.push(vec![theta.cos(), theta.sin()]);
            }
        }
        3 => {
            // Golden-angle lattice on the octant: area-uniform polar
            // coordinate, golden-ratio azimuth.
            let inv_phi = 2.0 / (1.0 + 5.0f64.sqrt());
            for j in 0..fill {
                let cos_t = (j as f64 + 0.5) / fill as f64;
                let sin_t = (1.0 - cos_t * cos_t).sqrt();
                let u = (j as f64 * inv_phi).fract();
                let phi = u * std::f64::consts::FRAC_PI_2;
                out.push(vec![sin_t * phi.cos(), sin_t * phi.sin(), cos_t]);
            }
        }
        _ => {
            // Kronecker lattice on the angle cube, folded through the
            // spherical recursion. Low-discrepancy enough for support
            // sweeps at any small dimension.
            let gamma = harmonious(m - 1);
            let alphas: Vec<f64> = (1..m).map(|i| gamma.powi(-(i as i32)).fract()).collect();
            for j in 0..fill {
                let mut angles = Vec::with_capacity(m - 1);
                for a in &alphas {
                    angles.push(((j as f64 + 0.5) * a).fract() * std::f64::consts::FRAC_PI_2);
                }
                let mut d = Vec::with_capacity(m);
                let mut sin_prod = 1.0;
                for &t in &angles {
                    d.push(sin_prod * t.cos());
                    sin_prod *= t.sin();
                }
                d.push(sin_prod);
                out.push(d);
            }
        }
    }
    out
}

/// Positive root of `x^(d+1) = x + 1`, the generalized golden ratio.
fn harmonious(d: usize) -> f64 {
    let mut x = 1.5f64;
    for _ in 0..64 {
        x = (x + 1.0).powf(1.0 / (d as f64 + 1.0));
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_unit_orthant(dirs: &[Vec<f64>], m: usize) {
        for d in dirs {
            assert_eq!(d.len(), m);
            let norm: f64 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12, "norm {norm}");
            assert!(d.iter().all(|&v| v >= -1e-15), "left the orthant: {d:?}");
        }
    }

    #[test]
    fn axes_and_ones_lead() {
        let dirs = positive_orthant_directions(2, 8);
        assert_eq!(dirs[0], vec![1.0, 0.0]);
        assert_eq!(dirs[1], vec![0.0, 1.0]);
        let s = 0.5f64.sqrt();
        assert!((dirs[2][0] - s).abs() < 1e-15 && (dirs[2][1] - s).abs() < 1e-15);
        assert_eq!(dirs.len(), 8);
        check_unit_orthant(&dirs, 2);
    }

    #[test]
    fn three_dim_counts_and_norms() {
        let dirs = positive_orthant_directions(3, 256);
        assert_eq!(dirs.len(), 256);
        check_unit_orthant(&dirs, 3);
    }

    #[test]
    fn higher_dims_fall_back_to_lattice() {
        let dirs = positive_orthant_directions(4, 64);
        assert_eq!(dirs.len(), 64);
        check_unit_orthant(&dirs, 4);
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            positive_orthant_directions(3, 64),
            positive_orthant_directions(3, 64)
        );
    }

    #[test]
    fn one_dimension_is_trivial() {
        assert_eq!(positive_orthant_directions(1, 99), vec![vec![1.0]]);
    }
}
