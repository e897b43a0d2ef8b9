//! Eigenvalues and eigenvectors of small dense real matrices.
//!
//! Balancing, reduction to Hessenberg form by stabilised elementary
//! similarity transforms, then the Francis double-shift QR iteration.
//! Eigenvectors come from complex inverse iteration on the original matrix.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DegenerateInput("matrix rows are not square".into()));
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mul_complex(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| v[j] * self[(i, j)]).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.n + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.n + c]
    }
}

const MAX_QR_ITERATIONS: usize = 60;

fn balance(a: &mut SquareMatrix) {
    let n = a.n;
    let radix = 2.0f64;
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let (mut r, mut c) = (0.0, 0.0);
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let s = c + r;
                let mut f = 1.0;
                let mut g = r / radix;
                while c < g {
                    f *= radix;
                    c *= sqrdx;
                }
                g = r * radix;
                while c > g {
                    f /= radix;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    for j in 0..n {
                        a[(i, j)] /= f;
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
}

fn hessenberg(a: &mut SquareMatrix) {
    let n = a.n;
    for m in 1..n.saturating_sub(1) {
        let mut x: f64 = 0.0;
        let mut pivot = m;
        for j in m..n {
            if a[(j, m - 1)].abs() > x.abs() {
                x = a[(j, m - 1)];
                pivot = j;
            }
        }
        if pivot != m {
            for j in m - 1..n {
                a.data.swap(pivot * n + j, m * n + j);
            }
            for j in 0..n {
                a.data.swap(j * n + pivot, j * n + m);
            }
        }
        if x != 0.0 {
            for i in m + 1..n {
                let mut y = a[(i, m - 1)];
                if y != 0.0 {
                    y /= x;
                    a[(i, m - 1)] = 0.0;
                    for j in m..n {
                        a[(i, j)] -= y * a[(m, j)];
                    }
                    for j in 0..n {
                        a[(j, m)] += y * a[(j, i)];
                    }
                }
            }
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroyed).
fn hqr(a: &mut SquareMatrix) -> Result<Vec<Complex64>> {
    let n = a.n;
    let mut wr = vec![Complex64::new(0.0, 0.0); n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }
    let eps = f64::EPSILON;
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let u = nn as usize;
            let mut l = u;
            while l > 0 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() <= eps * s {
                    a[(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[(u, u)];
            if l == u {
                wr[u] = Complex64::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            let mut y = a[(u - 1, u - 1)];
            let mut w = a[(u, u - 1)] * a[(u - 1, u)];
            if l == u - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[u - 1] = Complex64::new(x + z, 0.0);
                    wr[u] = wr[u - 1];
                    if z != 0.0 {
                        wr[u] = Complex64::new(x - w / z, 0.0);
                    }
                } else {
                    wr[u] = Complex64::new(x + p, -z);
                    wr[u - 1] = wr[u].conj();
                }
                nn -= 2;
                break;
            }
            if its == MAX_QR_ITERATIONS {
                return Err(Error::NoConvergence {
                    iterations: its,
                    residual: a[(u, u - 1)].abs(),
                });
            }
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 0..=u {
                    a[(i, i)] -= x;
                }
                let s = a[(u, u - 1)].abs() + a[(u - 1, u - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let (mut p, mut q, mut r);
            let mut m = u - 2;
            loop {
                let z = a[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
                q = a[(m + 1, m + 1)] - z - rr - ss;
                r = a[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let uu = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                let vv = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                if uu <= eps * vv {
                    break;
                }
                m -= 1;
            }
            for i in m..u - 1 {
                a[(i + 2, i)] = 0.0;
                if i != m {
                    a[(i + 2, i - 1)] = 0.0;
                }
            }
            for k in m..u {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k + 1 != u { a[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[(k, k - 1)] = -a[(k, k - 1)];
                        }
                    } else {
                        a[(k, k - 1)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=u {
                        let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                        if k + 1 != u {
                            pp += r * a[(k + 2, j)];
                            a[(k + 2, j)] -= pp * z;
                        }
                        a[(k + 1, j)] -= pp * y;
                        a[(k, j)] -= pp * x;
                    }
                    let mmin = u.min(k + 3);
                    for i in l..=mmin {
                        let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                        if k + 1 != u {
                            pp += z * a[(i, k + 2)];
                            a[(i, k + 2)] -= pp * r;
                        }
                        a[(i, k + 1)] -= pp * q;
                        a[(i, k)] -= pp;
                    }
                }
            }
        }
    }
    Ok(wr)
}

/// All eigenvalues, sorted by decreasing real part then decreasing imaginary part.
pub fn eigenvalues(a: &SquareMatrix) -> Result<Vec<Complex64>> {
    if !a.is_finite() {
        return Err(Error::DegenerateInput(
            "matrix has non-finite entries".into(),
        ));
    }
    if a.n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    let mut ev = hqr(&mut h)?;
    ev.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(ev)
}

/// Solves `m x = b` in place by Gaussian elimination with partial pivoting;
/// zero pivots are replaced by a tiny value, as inverse iteration wants.
fn solve_complex(mut m: Vec<Vec<Complex64>>, mut b: Vec<Complex64>, tiny: f64) -> Vec<Complex64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm()))
            .unwrap();
        m.swap(col, piv);
        b.swap(col, piv);
        if m[col][col].norm() < tiny {
            m[col][col] = Complex64::new(tiny, 0.0);
        }
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != Complex64::new(0.0, 0.0) {
                let (upper, lower) = m.split_at_mut(row);
                for (x, v) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                    *x -= f * v;
                }
                let v = b[col];
                b[row] -= f * v;
            }
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    x
}

fn normalize(v: &mut [Complex64]) {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let big = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or_default();
    // unit norm, largest component real and positive
    let phase = if big.norm() > 0.0 {
        big.conj() / big.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    for c in v.iter_mut() {
        *c = *c * phase / norm;
    }
}

/// Unit eigenvector for an eigenvalue estimate, by inverse iteration.
pub fn eigenvector(a: &SquareMatrix, lambda: Complex64) -> Result<Vec<Complex64>> {
    let n = a.n;
    let scale = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let scale = scale.max(lambda.norm()).max(f64::MIN_POSITIVE);
    let shift = lambda + Complex64::new(scale * 1e-12, 0.0);
    let m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = if i == j {
                        shift
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    Complex64::new(a[(i, j)], 0.0) - d
                })
                .collect()
        })
        .collect();
    let mut v: Vec<Complex64> = (0..n)
        .map(|k| Complex64::new(1.0 + 0.1 * k as f64, 0.05 * k as f64))
        .collect();
    normalize(&mut v);
    for _ in 0..4 {
        v = solve_complex(m.clone(), v, scale * f64::EPSILON);
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::DegenerateInput("inverse iteration diverged".into()));
        }
        normalize(&mut v);
    }
    Ok(v)
}

/// `‖A v − λ v‖` for a unit vector `v`.
pub fn eigen_residual(a: &SquareMatrix, lambda: Complex64, v: &[Complex64]) -> f64 {
    a.mul_complex(v)
        .iter()
        .zip(v)
        .map(|(av, vi)| (av - lambda * vi).norm_sqr())
        .sum::<f64>()
        .sqrt()
}
