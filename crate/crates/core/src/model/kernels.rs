//! Spatial and temporal response kernels.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::model::params::{squared_distance, Points};

/// Largest squared distance beyond the nearest receptor, in units of the
/// bandwidth, that enters the exponent of the normalized spatial kernel.
pub const DISTANCE_CLAMP: f64 = 700.0;

/// Gaussian proximity `(2 pi beta_sq)^(-m/2) exp(-|x - y|^2 / (2 beta_sq))`.
pub fn spatial_kernel(x: &[f64], y: &[f64], beta_sq: f64) -> Result<f64> {
    if !(beta_sq > 0.0) {
        return Err(Error::domain(format!("bandwidth must be positive, got {beta_sq}")));
    }
    Ok(gaussian(squared_distance(x, y), beta_sq, x.len()))
}

#[inline]
pub(crate) fn gaussian(dist_sq: f64, beta_sq: f64, dim: usize) -> f64 {
    (2.0 * PI * beta_sq).powf(-0.5 * dim as f64) * (-dist_sq / (2.0 * beta_sq)).exp()
}

/// Gaussian weight with the squared distance clamped to `DISTANCE_CLAMP * beta_sq`.
/// The prefactor is omitted because it cancels in every normalized use.
#[inline]
pub(crate) fn clamped_weight(dist_sq: f64, beta_sq: f64) -> f64 {
    (-dist_sq.min(DISTANCE_CLAMP * beta_sq) / (2.0 * beta_sq)).exp()
}

/// Share of the spatial kernel of `y` that falls on the receptor `receptor`
/// out of all receptors in `receptors`.
pub fn normalized_spatial_kernel(receptor: usize, y: &[f64], receptors: &Points, beta_sq: f64) -> Result<f64> {
    if !(beta_sq > 0.0) {
        return Err(Error::domain(format!("bandwidth must be positive, got {beta_sq}")));
    }
    if receptor >= receptors.len() {
        return Err(Error::domain("receptor index out of range"));
    }
    let weights = normalized_column(receptors, y, beta_sq);
    Ok(weights[receptor])
}

/// Normalized kernel weights of `y` over every receptor; sums to one.
/// Distances are taken relative to the nearest receptor so the weights stay
/// representable however narrow the bandwidth.
pub(crate) fn normalized_column(receptors: &Points, y: &[f64], beta_sq: f64) -> Vec<f64> {
    let d2: Vec<f64> = (0..receptors.len())
        .map(|k| squared_distance(receptors.point(k), y))
        .collect();
    let nearest = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = d2.iter().map(|&d| clamped_weight(d - nearest, beta_sq)).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Exponential clock `kappa exp(-kappa tau)`.
#[inline]
pub fn temporal_kernel(tau: f64, kappa: f64) -> f64 {
    kappa * (-kappa * tau).exp()
}

/// Time for an exponential response to halve.
pub fn half_life(kappa: f64) -> f64 {
    LN_2 / kappa
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spatial_kernel_closed_form() {
        let v = spatial_kernel(&[0.3, 0.1], &[0.3, 0.1], 1.0).unwrap();
        assert_relative_eq!(v, 1.0 / (2.0 * PI), max_relative = 1e-15);
        assert_relative_eq!(v, 0.159155, epsilon = 1e-6);

        let v = spatial_kernel(&[1.0, 0.0], &[0.0, 0.0], 1.0).unwrap();
        assert_relative_eq!(v, 0.096532, epsilon = 1e-6);

        let wide = spatial_kernel(&[1.0, 0.0], &[0.0, 0.0], 1e12).unwrap();
        assert!(wide < 1e-12);
        assert!(spatial_kernel(&[0.0], &[0.0], 0.0).is_err());
        assert!(spatial_kernel(&[0.0], &[0.0], -1.0).is_err());
    }

    #[test]
    fn spatial_kernel_integrates_to_one_in_one_dimension() {
        // Riemann sum over a wide interval.
        let beta_sq = 0.7;
        let h = 1e-3;
        let total: f64 = (-20_000..=20_000)
            .map(|i| spatial_kernel(&[i as f64 * h], &[0.2], beta_sq).unwrap() * h)
            .sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn normalized_kernel_examples() {
        let single = Points::from_rows(&[vec![3.0, -1.0]], 2).unwrap();
        assert_eq!(normalized_spatial_kernel(0, &[0.0, 0.0], &single, 0.5).unwrap(), 1.0);

        let pair = Points::from_rows(&[vec![-1.0, 0.0], vec![1.0, 0.0]], 2).unwrap();
        let a = normalized_spatial_kernel(0, &[0.0, 0.0], &pair, 0.3).unwrap();
        assert_relative_eq!(a, 0.5, epsilon = 1e-15);

        let pair = Points::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]], 2).unwrap();
        let a = normalized_spatial_kernel(0, &[0.0, 0.0], &pair, 1.0).unwrap();
        let b = normalized_spatial_kernel(1, &[0.0, 0.0], &pair, 1.0).unwrap();
        assert_relative_eq!(a, 0.62246, epsilon = 1e-5);
        assert_relative_eq!(b, 0.37754, epsilon = 1e-5);
        assert_relative_eq!(a, 1.0 / (1.0 + (-0.5f64).exp()), max_relative = 1e-14);
    }

    #[test]
    fn normalized_kernel_survives_extreme_separation() {
        let pts = Points::from_rows(&[vec![1e6], vec![2e6]], 1).unwrap();
        let w = normalized_column(&pts, &[0.0], 1e-6);
        assert!(w.iter().all(|v| v.is_finite()));
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        // The nearer receptor takes all the mass rather than an even split.
        assert_eq!(w[0], 1.0);
        let pts = Points::from_rows(&[vec![0.3], vec![0.5], vec![0.9]], 1).unwrap();
        let w = normalized_column(&pts, &[0.0], 1e-8);
        assert_eq!(w[0], 1.0);
        assert!(w[1] < 1e-150 && w[2] < 1e-150);
    }

    #[test]
    fn temporal_kernel_examples() {
        assert_eq!(temporal_kernel(0.0, 2.0), 2.0);
        assert_relative_eq!(temporal_kernel(LN_2 / 2.0, 2.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(temporal_kernel(1.0, 1.0), 0.367879, epsilon = 1e-6);
    }

    #[test]
    fn half_life_examples() {
        assert_relative_eq!(half_life(LN_2), 1.0);
        assert!((half_life(0.2075) - 3.34).abs() < 0.005);
        assert_relative_eq!(half_life(2.0 * 0.37), half_life(0.37) / 2.0);
    }
}
