//! Piecewise cubic Hermite interpolation over a sorted grid.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Hermite {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Hermite {
    /// Node slopes are centred differences (one-sided at the ends). With
    /// `monotone`, they are limited per Fritsch–Carlson so monotone data
    /// yields a monotone interpolant.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, monotone: bool) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::DegenerateInput(format!(
                "interpolation needs at least two matching nodes (got {} x, {} y)",
                n,
                ys.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::DegenerateInput(
                "interpolation grid is not increasing".into(),
            ));
        }
        let mut slopes: Vec<f64> = (0..n)
            .map(|k| {
                let (lo, hi) = (k.saturating_sub(1), (k + 1).min(n - 1));
                (ys[hi] - ys[lo]) / (xs[hi] - xs[lo])
            })
            .collect();
        if monotone {
            for k in 0..n - 1 {
                let secant = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
                if secant == 0.0 {
                    slopes[k] = 0.0;
                    slopes[k + 1] = 0.0;
                    continue;
                }
                let a = slopes[k] / secant;
                let b = slopes[k + 1] / secant;
                if a < 0.0 {
                    slopes[k] = 0.0;
                }
                if b < 0.0 {
                    slopes[k + 1] = 0.0;
                }
                let s = a * a + b * b;
                if s > 9.0 {
                    let tau = 3.0 / s.sqrt();
                    slopes[k] = tau * a * secant;
                    slopes[k + 1] = tau * b * secant;
                }
            }
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    pub fn node_slope(&self, k: usize) -> f64 {
        self.slopes[k]
    }

    fn locate(&self, x: f64, what: &'static str) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfRange {
                what,
                value: x,
                min: lo,
                max: hi,
            });
        }
        Ok(self
            .xs
            .partition_point(|&v| v <= x)
            .clamp(1, self.xs.len() - 1)
            - 1)
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        let k = self.locate(x, "interpolation abscissa")?;
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * self.ys[k]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[k]
            + (-2.0 * t3 + 3.0 * t2) * self.ys[k + 1]
            + (t3 - t2) * h * self.slopes[k + 1])
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        let k = self.locate(x, "interpolation abscissa")?;
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        Ok((6.0 * t2 - 6.0 * t) / h * self.ys[k]
            + (3.0 * t2 - 4.0 * t + 1.0) * self.slopes[k]
            + (-6.0 * t2 + 6.0 * t) / h * self.ys[k + 1]
            + (3.0 * t2 - 2.0 * t) * self.slopes[k + 1])
    }

    /// Solves `value(x) = y` by bisection for increasing data.
    pub fn invert_increasing(&self, y: f64) -> Result<f64> {
        let (lo_x, hi_x) = self.domain();
        let (y_lo, y_hi) = (self.ys[0], *self.ys.last().unwrap());
        if !(y >= y_lo && y <= y_hi) {
            return Err(Error::OutOfRange {
                what: "interpolated value",
                value: y,
                min: y_lo,
                max: y_hi,
            });
        }
        let (mut a, mut b) = (lo_x, hi_x);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if self.value(mid)? < y {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 1e-15 * hi_x.abs().max(1.0) {
                break;
            }
        }
        Ok(0.5 * (a + b))
    }
}
