//! Reading revolving radius, rate and tilt off simulated trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::TrajectorySample;
use crate::spatial::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleFit {
    pub center: Vec3,
    pub radius: f64,
    /// RMS orthogonal distance of the points from the circle (m).
    pub residual: f64,
}

/// Algebraic (Kåsa) least-squares circle through points projected on z = 0.
///
/// Minimises `Σ (x² + y² + D x + E y + F)²`, solved in centred and scaled
/// coordinates for conditioning.
pub fn fit_circle(points: &[Vec3]) -> Result<CircleFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "circle fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::DegenerateInput("non-finite point".into()));
    }
    let n = points.len() as f64;
    let mean = points
        .iter()
        .fold(Vec3::ZERO, |acc, p| acc + p.horizontal())
        * (1.0 / n);
    let scale = (points
        .iter()
        .map(|p| (p.horizontal() - mean).norm_squared())
        .sum::<f64>()
        / n)
        .sqrt();
    if scale == 0.0 {
        return Err(Error::DegenerateInput("all points coincide".into()));
    }
    let mut normal = Mat3::ZERO;
    let mut rhs = Vec3::ZERO;
    for p in points {
        let q = (p.horizontal() - mean) * (1.0 / scale);
        let row = Vec3::new(q.x, q.y, 1.0);
        let z = q.x * q.x + q.y * q.y;
        normal = normal + row.outer(row);
        rhs -= row * z;
    }
    // scaled points have unit RMS radius, so a healthy system has det ~ n³
    let det = normal.determinant();
    if det.abs() < 1e-10 * n * n * n {
        return Err(Error::DegenerateInput("points are collinear".into()));
    }
    let coeffs = normal
        .inverse()
        .ok_or_else(|| Error::DegenerateInput("collinear".into()))?
        * rhs;
    let cx = -0.5 * coeffs.x;
    let cy = -0.5 * coeffs.y;
    let r2 = cx * cx + cy * cy - coeffs.z;
    if !(r2 > 0.0) {
        return Err(Error::DegenerateInput(
            "fit produced an imaginary radius".into(),
        ));
    }
    let center = mean + Vec3::new(cx, cy, 0.0) * scale;
    let radius = r2.sqrt() * scale;
    let residual = (points
        .iter()
        .map(|p| {
            let d = (p.horizontal() - center).norm() - radius;
            d * d
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(CircleFit {
        center,
        radius,
        residual,
    })
}

/// Steady revolving motion estimated from a window of samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevolutionFit {
    pub circle: CircleFit,
    /// Revolving rate about the fitted centre, positive counter-clockwise (rad/s).
    pub angular_velocity: f64,
    /// Mean angle between the motor axis and the vertical (rad).
    pub tilt: f64,
}

/// Fits a circle to the shell-centre track, then regresses the unwrapped
/// polar angle about its centre against time.
pub fn fit_revolution(samples: &[TrajectorySample]) -> Result<RevolutionFit> {
    let points: Vec<Vec3> = samples.iter().map(|s| s.state.center).collect();
    let circle = fit_circle(&points)?;
    let mut unwrapped = Vec::with_capacity(samples.len());
    let mut prev: Option<f64> = None;
    let mut offset = 0.0;
    for p in &points {
        let d = *p - circle.center;
        let a = d.y.atan2(d.x);
        if let Some(q) = prev {
            let jump = a - q;
            if jump > std::f64::consts::PI {
                offset -= std::f64::consts::TAU;
            } else if jump < -std::f64::consts::PI {
                offset += std::f64::consts::TAU;
            }
        }
        prev = Some(a);
        unwrapped.push(a + offset);
    }
    let n = samples.len() as f64;
    let t_mean = samples.iter().map(|s| s.t).sum::<f64>() / n;
    let a_mean = unwrapped.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (s, a) in samples.iter().zip(&unwrapped) {
        sxy += (s.t - t_mean) * (a - a_mean);
        sxx += (s.t - t_mean) * (s.t - t_mean);
    }
    let angular_velocity = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let tilt = samples.iter().map(|s| s.state.axis_tilt()).sum::<f64>() / n;
    Ok(RevolutionFit {
        circle,
        angular_velocity,
        tilt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn circle_points(cx: f64, cy: f64, r: f64, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / n as f64;
                Vec3::new(cx + r * a.cos(), cy + r * a.sin(), 0.12)
            })
            .collect()
    }

    #[test]
    fn exact_circle() {
        let fit = fit_circle(&circle_points(1.5, -0.7, 0.35, 40)).unwrap();
        assert!((fit.center.x - 1.5).abs() < 1e-12);
        assert!((fit.center.y + 0.7).abs() < 1e-12);
        assert!((fit.radius - 0.35).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn three_points_give_circumcircle() {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(0.0, 2.0, 0.0),
        ];
        let fit = fit_circle(&pts).unwrap();
        assert!((fit.center - Vec3::new(1.0, 1.0, 0.0)).norm() < 1e-12);
        assert!((fit.radius - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn collinear_points_are_rejected() {
        let pts: Vec<Vec3> = (0..10)
            .map(|k| Vec3::new(k as f64, 2.0 * k as f64, 0.0))
            .collect();
        assert!(matches!(fit_circle(&pts), Err(Error::DegenerateInput(_))));
        assert!(fit_circle(&pts[..2]).is_err());
    }

    #[test]
    fn noisy_circle_radius_error_below_noise_amplitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &eps in &[1e-3, 1e-2] {
            let pts: Vec<Vec3> = circle_points(0.2, 0.4, 0.5, 200)
                .into_iter()
                .map(|p| {
                    p + Vec3::new(
                        rng.random_range(-eps..eps),
                        rng.random_range(-eps..eps),
                        0.0,
                    )
                })
                .collect();
            let fit = fit_circle(&pts).unwrap();
            assert!(
                (fit.radius - 0.5).abs() < eps,
                "eps {eps}: radius {}",
                fit.radius
            );
        }
    }
}
