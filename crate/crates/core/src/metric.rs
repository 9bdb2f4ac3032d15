//! The relative-error distance and its balls.
//!
//! distance(x, y) = 0 when x = y = 0, |log(y/x)| when x and y share a sign,
//! and ∞ otherwise. (−∞,0), {0}, (0,∞) are separate components: no finite
//! ball ever crosses zero.

use crate::real::Real;

pub fn rel_distance(x: f64, y: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        0.0
    } else if x * y > 0.0 {
        (y / x).ln().abs()
    } else {
        f64::INFINITY
    }
}

/// Same metric at reference precision; returns `None` for ∞ (different sign
/// components).
pub fn rel_distance_real(x: &Real, y: &Real) -> Option<Real> {
    if x.is_zero() && y.is_zero() {
        return Some(Real::zero());
    }
    if x.is_zero() || y.is_zero() || (x.is_negative() != y.is_negative()) {
        return None;
    }
    Some(y.div(x).abs().ln().abs())
}

/// The open metric ball B(x, r).
#[derive(Clone, Copy, Debug)]
pub struct MetricBall {
    pub center: f64,
    pub radius: f64,
}

impl MetricBall {
    pub fn new(center: f64, radius: f64) -> MetricBall {
        assert!(radius > 0.0 && radius.is_finite());
        MetricBall { center, radius }
    }

    /// The realized open interval, or `None` for the degenerate ball {0}.
    pub fn interval(&self) -> Option<(f64, f64)> {
        if self.center == 0.0 {
            return None;
        }
        let lo = self.center * (-self.radius).exp();
        let hi = self.center * self.radius.exp();
        Some(if self.center > 0.0 { (lo, hi) } else { (hi, lo) })
    }

    pub fn contains(&self, y: f64) -> bool {
        rel_distance(self.center, y) < self.radius
    }
}

pub fn ball(x: f64, r: f64) -> MetricBall {
    MetricBall::new(x, r)
}

/// Infimum of rel_distance(x, s) over the points of `set`; ∞ when empty.
pub fn dist_to_points(x: f64, set: &[f64]) -> f64 {
    set.iter()
        .map(|&s| rel_distance(x, s))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_case_formula() {
        assert_eq!(rel_distance(0.0, 0.0), 0.0);
        assert_eq!(rel_distance(-1.0, 1.0), f64::INFINITY);
        assert_eq!(rel_distance(0.0, 2.0), f64::INFINITY);
        assert!((rel_distance(1.0, std::f64::consts::E) - 1.0).abs() < 1e-15);
        assert!((rel_distance(-2.0, -2.0 * std::f64::consts::E) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetry_and_identity() {
        let xs = [0.3, 1.0, 7.5, -0.2, -9.0, 1e-8, 1e12];
        for &x in &xs {
            for &y in &xs {
                let d = rel_distance(x, y);
                assert_eq!(d, rel_distance(y, x));
                assert_eq!(d == 0.0, x == y);
            }
        }
    }

    #[test]
    fn balls_realize_log_intervals() {
        let (lo, hi) = ball(1.0, 0.5).interval().unwrap();
        assert!((lo - (-0.5f64).exp()).abs() < 1e-15);
        assert!((hi - 0.5f64.exp()).abs() < 1e-15);

        let (lo, hi) = ball(-2.0, 1.0).interval().unwrap();
        assert!((lo + 2.0 * std::f64::consts::E).abs() < 1e-14);
        assert!((hi + 2.0 / std::f64::consts::E).abs() < 1e-14);

        assert!(ball(0.0, 1.0).interval().is_none());
    }

    #[test]
    fn ball_membership_matches_distance() {
        let b = ball(3.0, 0.25);
        let (lo, hi) = b.interval().unwrap();
        for &eps in &[1e-6, 1e-3] {
            assert!(b.contains(lo * (1.0 + eps)));
            assert!(b.contains(hi * (1.0 - eps)));
            assert!(!b.contains(lo * (1.0 - eps)));
            assert!(!b.contains(hi * (1.0 + eps)));
        }
        assert!(!b.contains(-3.0));
    }

    #[test]
    fn first_order_agreement_with_relative_error() {
        for &x in &[0.7, 1.0, 42.0, -3.0] {
            for &h in &[1e-4, -1e-4, 3e-7, -5e-5] {
                let y = x * (1.0 + h);
                let d = rel_distance(x, y);
                assert!((d - h.abs()).abs() <= 1e-7, "x={x} h={h}");
            }
        }
    }

    #[test]
    fn dist_to_point_sets() {
        assert_eq!(dist_to_points(5.0, &[]), f64::INFINITY);
        let three_pi = 3.0 * std::f64::consts::PI;
        let d = dist_to_points(9.0, &[three_pi]);
        assert!((d - (9.0 / three_pi).ln().abs()).abs() < 1e-15);
        assert!((d - 0.0461).abs() < 1e-4);
    }
}
