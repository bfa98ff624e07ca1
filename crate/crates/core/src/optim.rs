//! Box-constrained Nelder–Mead.
//!
//! Trial points are projected onto the box, so every evaluated point is
//! feasible. Coefficients follow the dimension-adaptive choice of Gao and
//! Han, which keeps the simplex from collapsing in 4 or more dimensions.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop as soon as the best value is at or below this level.
    pub f_target: f64,
    /// Stop when the spread of simplex values is below this.
    pub f_tol: f64,
    /// ... and the simplex diameter, relative to the box, is below this.
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 5000,
            f_target: 0.0,
            f_tol: 1e-14,
            x_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    TargetReached,
    Converged,
    MaxEvals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub iterations: usize,
    pub termination: Termination,
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Minimises `f` over the box `bounds` from `x0`; the initial simplex has
/// edge `steps[i]` along axis `i`. Non-finite values are treated as `+∞`.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    bounds: &[(f64, f64)],
    opts: &NelderMeadOptions,
) -> Minimum {
    let n = x0.len();
    assert_eq!(n, bounds.len(), "one bound per coordinate");
    assert_eq!(n, steps.len(), "one step per coordinate");
    assert!(n >= 1);
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let width: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut start = x0.to_vec();
    project(&mut start, bounds);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(&start, &mut evals);
    simplex.push((start.clone(), f0));
    for i in 0..n {
        let mut v = start.clone();
        let step = steps[i].abs();
        // step inward when the start sits on the upper face
        v[i] = if v[i] + step <= bounds[i].1 {
            v[i] + step
        } else {
            v[i] - step
        };
        project(&mut v, bounds);
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }

    let mut iterations = 0usize;
    let termination = loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        if best <= opts.f_target {
            break Termination::TargetReached;
        }
        let spread = simplex[n].1 - best;
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| {
                v.iter()
                    .zip(&simplex[0].0)
                    .zip(&width)
                    .map(|((a, b), w)| if *w > 0.0 { (a - b).abs() / w } else { 0.0 })
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread <= opts.f_tol && diameter <= opts.x_tol {
            break Termination::Converged;
        }
        if evals >= opts.max_evals {
            break Termination::MaxEvals;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            project(&mut p, bounds);
            p
        };

        let xr = along(alpha);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(alpha * gamma);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(alpha * rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(simplex[n].1) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink towards the best vertex
        let x_best = simplex[0].0.clone();
        for (v, fv) in simplex[1..].iter_mut() {
            for (x, b) in v.iter_mut().zip(&x_best) {
                *x = b + sigma * (*x - b);
            }
            *fv = eval(v, &mut evals);
        }
    };
    let (x, f) = simplex.swap_remove(0);
    Minimum {
        x,
        f,
        evals,
        iterations,
        termination,
    }
}

/// Golden-section search for a unimodal `f` on `[a, b]`, returning the
/// best of the final bracket and its ends.
pub fn golden_section(
    mut f: impl FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (lo, hi) = (a, b);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [lo, mid, hi]
        .into_iter()
        .map(|x| (x, f(x)))
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_in_a_box() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(
            rosen,
            &[-1.2, 1.0],
            &[0.4; 2],
            &[(-2.0, 2.0), (-2.0, 2.0)],
            &NelderMeadOptions::default(),
        );
        assert!(
            (m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5,
            "{m:?}"
        );
    }

    #[test]
    fn active_bound_is_respected() {
        let f = |x: &[f64]| {
            (x[0] + 3.0).powi(2) + (x[1] - 0.5).powi(2) + (x[2] - 0.2).powi(2) + x[3] * x[3]
        };
        let b = [(0.0, 1.0); 4];
        let m = nelder_mead(f, &[0.5; 4], &[0.1; 4], &b, &NelderMeadOptions::default());
        assert_eq!(m.x[0], 0.0);
        assert!((m.x[1] - 0.5).abs() < 1e-5);
        assert!(m.x.iter().zip(&b).all(|(x, (lo, hi))| x >= lo && x <= hi));
    }

    #[test]
    fn target_stops_early_and_is_deterministic() {
        let f = |x: &[f64]| x[0].abs() + x[1].abs();
        let opts = NelderMeadOptions {
            f_target: 1e-3,
            ..Default::default()
        };
        let a = nelder_mead(f, &[0.7, -0.4], &[0.2; 2], &[(-1.0, 1.0); 2], &opts);
        let b = nelder_mead(f, &[0.7, -0.4], &[0.2; 2], &[(-1.0, 1.0); 2], &opts);
        assert_eq!(a.termination, Termination::TargetReached);
        assert!(a.f <= 1e-3);
        assert_eq!(a, b);
    }

    #[test]
    fn golden_section_finds_interior_and_edge_minima() {
        let (x, _) = golden_section(|x| (x - 0.3).powi(2), -1.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        let (x, _) = golden_section(|x| x, -1.0, 1.0, 1e-12);
        assert_eq!(x, -1.0);
    }
}
