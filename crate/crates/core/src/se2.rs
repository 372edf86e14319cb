//! Planar rigid-body poses and the SE(2) operations used throughout the
//! estimator: composition, relative transforms, and frame changes.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Wrap an angle to the half-open interval (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// A 2D pose (x, y, heading).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// Compose `self` with a relative pose expressed in this pose's frame.
    pub fn compose(&self, delta: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * delta.x - s * delta.y,
            self.y + s * delta.x + c * delta.y,
            self.theta + delta.theta,
        )
    }

    /// Relative pose of `other` expressed in this pose's frame, so that
    /// `self.compose(&self.between(other)) == other`.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        Pose2::new(
            c * dx + s * dy,
            -s * dx + c * dy,
            other.theta - self.theta,
        )
    }

    /// Map a point from this pose's body frame into the world frame.
    pub fn transform(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * px - s * py, self.y + s * px + c * py)
    }

    /// Map a world-frame point into this pose's body frame.
    pub fn transform_inv(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let dx = px - self.x;
        let dy = py - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Composition via explicit 3x3 homogeneous matrices, as an independent
    /// check on the closed-form implementation.
    fn compose_matrix(a: &Pose2, b: &Pose2) -> Pose2 {
        let m = |p: &Pose2| {
            let (s, c) = p.theta.sin_cos();
            [[c, -s, p.x], [s, c, p.y], [0.0, 0.0, 1.0]]
        };
        let (ma, mb) = (m(a), m(b));
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for (k, mb_k) in mb.iter().enumerate() {
                    out[i][j] += ma[i][k] * mb_k[j];
                }
            }
        }
        Pose2::new(out[0][2], out[1][2], out[1][0].atan2(out[0][0]))
    }

    #[test]
    fn identity_composition() {
        let p = Pose2::identity().compose(&Pose2::new(0.0, 0.0, 0.0));
        assert_eq!((p.x, p.y, p.theta), (0.0, 0.0, 0.0));
    }

    #[test]
    fn straight_line_composition() {
        let p = Pose2::identity().compose(&Pose2::new(1.0, 0.0, 0.0));
        assert_relative_eq!(p.x, 1.0);
        assert_relative_eq!(p.y, 0.0);
    }

    #[test]
    fn rotated_composition_matches_matrix_oracle() {
        let a = Pose2::new(0.0, 0.0, PI / 2.0);
        let d = Pose2::new(1.0, 0.0, 0.0);
        let p = a.compose(&d);
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.theta, PI / 2.0, epsilon = 1e-12);

        let q = compose_matrix(&a, &d);
        assert_relative_eq!(p.x, q.x, epsilon = 1e-12);
        assert_relative_eq!(p.y, q.y, epsilon = 1e-12);
        assert_relative_eq!(p.theta, q.theta, epsilon = 1e-12);
    }

    #[test]
    fn between_inverts_compose() {
        let a = Pose2::new(1.3, -0.7, 0.9);
        let b = Pose2::new(-2.0, 4.1, -2.8);
        let d = a.between(&b);
        let b2 = a.compose(&d);
        assert_relative_eq!(b2.x, b.x, epsilon = 1e-12);
        assert_relative_eq!(b2.y, b.y, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(b2.theta - b.theta), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        for k in -20..20 {
            let a = 0.37 * k as f64;
            let w = wrap_angle(a);
            assert!(w > -PI && w <= PI);
            assert_relative_eq!((a - w).rem_euclid(2.0 * PI), 0.0, epsilon = 1e-9);
        }
        assert_relative_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI);
    }
}
