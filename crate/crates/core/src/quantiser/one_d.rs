//! Stationary 1-D Gaussian quantisers by Newton's method.
//!
//! With Voronoi bounds at midpoints, stationarity reads
//! `y_j Φ(C_j) = φ(a_j) - φ(b_j)`; the Jacobian of this system is
//! tridiagonal, so each Newton step is a Thomas solve.

use crate::error::{Error, Result};
use crate::normal::{inv_cdf, mass, pdf};
use crate::quadrature::GaussLegendre;

use super::QuantiserGrid;

const MAX_NEWTON: usize = 200;

struct Cells {
    lo: Vec<f64>,
    hi: Vec<f64>,
    mass: Vec<f64>,
}

fn cells(y: &[f64]) -> Cells {
    let n = y.len();
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for j in 0..n {
        lo.push(if j == 0 {
            f64::NEG_INFINITY
        } else {
            0.5 * (y[j - 1] + y[j])
        });
        hi.push(if j + 1 == n {
            f64::INFINITY
        } else {
            0.5 * (y[j] + y[j + 1])
        });
    }
    let mass = lo.iter().zip(&hi).map(|(&a, &b)| mass(a, b)).collect();
    Cells { lo, hi, mass }
}

fn pdf_ext(x: f64) -> f64 {
    if x.is_finite() {
        pdf(x)
    } else {
        0.0
    }
}

/// `y_j - E[Z | Z ∈ C_j]` for every cell.
fn stationarity_residual(y: &[f64], c: &Cells) -> Vec<f64> {
    y.iter()
        .enumerate()
        .map(|(j, &yj)| yj - (pdf_ext(c.lo[j]) - pdf_ext(c.hi[j])) / c.mass[j])
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn symmetrise(y: &mut [f64]) {
    let n = y.len();
    for j in 0..n / 2 {
        let v = 0.5 * (y[n - 1 - j] - y[j]);
        y[j] = -v;
        y[n - 1 - j] = v;
    }
    if n % 2 == 1 {
        y[n / 2] = 0.0;
    }
}

/// Newton step `-H⁻¹ g` with `g_j = y_j m_j - (φ(a_j) - φ(b_j))`.
fn newton_step(y: &[f64], c: &Cells) -> Vec<f64> {
    let n = y.len();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut rhs = vec![0.0; n];
    for j in 0..n {
        rhs[j] = -(y[j] * c.mass[j] - (pdf_ext(c.lo[j]) - pdf_ext(c.hi[j])));
        let mut d = c.mass[j];
        if j + 1 < n {
            let u = -0.25 * (y[j + 1] - y[j]) * pdf(c.hi[j]);
            d += u;
            off[j] = u;
        }
        if j > 0 {
            d += -0.25 * (y[j] - y[j - 1]) * pdf(c.lo[j]);
        }
        diag[j] = d;
    }
    // Thomas algorithm on the symmetric tridiagonal system
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    for j in 0..n {
        let (a, prev_c, prev_d) = if j == 0 {
            (0.0, 0.0, 0.0)
        } else {
            (off[j - 1], cp[j - 1], dp[j - 1])
        };
        let denom = diag[j] - a * prev_c;
        cp[j] = if j + 1 < n { off[j] / denom } else { 0.0 };
        dp[j] = (rhs[j] - a * prev_d) / denom;
    }
    let mut x = vec![0.0; n];
    for j in (0..n).rev() {
        x[j] = dp[j] - if j + 1 < n { cp[j] * x[j + 1] } else { 0.0 };
    }
    x
}

/// `E|Z - Ŷ|²` cell by cell: closed forms on the two unbounded cells,
/// 16-point Gauss–Legendre on bounded ones.
fn squared_distortion(y: &[f64], c: &Cells) -> f64 {
    let rule = GaussLegendre::cached(16);
    let mut total = 0.0;
    for (j, &yj) in y.iter().enumerate() {
        let (a, b) = (c.lo[j], c.hi[j]);
        let part = match (a.is_finite(), b.is_finite()) {
            (false, false) => 1.0 + yj * yj,
            (true, false) => (1.0 + yj * yj) * c.mass[j] + (a - 2.0 * yj) * pdf(a),
            (false, true) => (1.0 + yj * yj) * c.mass[j] - (b - 2.0 * yj) * pdf(b),
            (true, true) => rule.integrate(a, b, |z| (z - yj) * (z - yj) * pdf(z)),
        };
        total += part;
    }
    total
}

/// L²-optimal `n`-point quantiser of `N(0, 1)`.
///
/// Starts from the asymptotically optimal point density (quantiles of
/// `N(0, 3)`), runs damped Newton steps on the stationarity system and
/// mirrors the iterate after each step. Converged when every point is
/// within `tol` of its cell's conditional mean.
pub fn build_gaussian_1d(n: usize, tol: f64) -> Result<QuantiserGrid> {
    if n == 0 {
        return Err(Error::domain("quantiser needs at least one point"));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance {tol} must be positive")));
    }
    if n == 1 {
        return QuantiserGrid::from_parts(1, vec![0.0], vec![1.0], 1.0);
    }
    let nf = n as f64;
    let mut y: Vec<f64> = (0..n)
        .map(|j| 3f64.sqrt() * inv_cdf((j as f64 + 0.5) / nf))
        .collect();
    symmetrise(&mut y);
    let mut c = cells(&y);
    let mut res = max_abs(&stationarity_residual(&y, &c));
    let mut iterations = 0;
    while res > tol {
        if iterations == MAX_NEWTON {
            return Err(Error::Convergence {
                what: "1-D quantiser Newton iteration",
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        let step = newton_step(&y, &c);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial: Vec<f64> = y.iter().zip(&step).map(|(a, s)| a + scale * s).collect();
            symmetrise(&mut trial);
            if trial.windows(2).all(|w| w[0] < w[1]) {
                let tc = cells(&trial);
                let tres = max_abs(&stationarity_residual(&trial, &tc));
                if tres < res {
                    y = trial;
                    c = tc;
                    res = tres;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            // fall back to one Lloyd (conditional mean) sweep
            let r = stationarity_residual(&y, &c);
            let mut trial: Vec<f64> = y.iter().zip(&r).map(|(a, d)| a - d).collect();
            symmetrise(&mut trial);
            c = cells(&trial);
            y = trial;
            res = max_abs(&stationarity_residual(&y, &c));
        }
    }
    log::debug!("1-D quantiser n={n}: {iterations} Newton iterations, residual {res:e}");
    let d2 = squared_distortion(&y, &c);
    let mut probs = c.mass.clone();
    normalise(&mut probs);
    QuantiserGrid::from_parts(1, y, probs, d2.max(0.0).sqrt())
}

/// Rescales to unit sum; cell masses already sum to one up to rounding.
pub(crate) fn normalise(p: &mut [f64]) {
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
}

/// `e_N` of an arbitrary sorted 1-D grid under the Gaussian law.
pub(crate) fn distortion_1d(points: &[f64]) -> f64 {
    let c = cells(points);
    squared_distortion(points, &c).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_sizes() {
        let g = build_gaussian_1d(1, 1e-12).unwrap();
        assert_eq!(g.points(), &[0.0]);
        assert_eq!(g.probs(), &[1.0]);
        assert_eq!(g.distortion(), 1.0);

        let g = build_gaussian_1d(2, 1e-13).unwrap();
        let m = (2.0 / std::f64::consts::PI).sqrt();
        assert!((g.points()[0] + m).abs() < 1e-10);
        assert!((g.points()[1] - m).abs() < 1e-10);
        assert!((g.probs()[0] - 0.5).abs() < 1e-15);
        // e² = 1 - 2/π
        assert!((g.distortion() - (1.0 - 2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn stationary_and_normalised() {
        for n in [3, 10, 57, 200] {
            let g = build_gaussian_1d(n, 1e-12).unwrap();
            let c = cells(g.points());
            assert!(max_abs(&stationarity_residual(g.points(), &c)) <= 1e-12);
            let s: f64 = g.probs().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            let mean = g.expectation(|y| y[0]);
            assert!(mean.abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_gaussian_1d(0, 1e-8).is_err());
        assert!(build_gaussian_1d(5, 0.0).is_err());
    }
}
