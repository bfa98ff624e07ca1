//! Fixed-node Gauss–Legendre rules and globally adaptive Gauss–Kronrod
//! integration in one and two dimensions.

// Kronrod tables are quoted at full published precision.
#![allow(clippy::excessive_precision)]

use std::collections::{BinaryHeap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on `P_n`, starting from the
    /// Chebyshev-like guesses `cos(π (i - 1/4) / (n + 1/2))`.
    pub fn compute(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared, cached rule with `n` nodes.
    pub fn cached(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().expect("gauss-legendre cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(GaussLegendre::compute(n)))
            .clone()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let x = self.nodes.iter().map(|&u| mid + half * u).collect();
        let w = self.weights.iter().map(|&w| half * w).collect();
        (x, w)
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&u, &w)| w * f(mid + half * u))
            .sum::<f64>()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

// 15-point Kronrod extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Kronrod estimate and `|K15 - G7|` on `[a, b]`.
fn gk15(a: f64, b: f64, f: &mut impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid)?;
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(mid - dx)? + f(mid + dx)?;
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Ok((kron * half, ((kron - gauss) * half).abs()))
}

/// Tolerances for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Number of equal panels the interval is split into before refinement.
    pub initial_panels: usize,
    pub max_panels: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-6,
            initial_panels: 10,
            max_panels: 650,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod (7–15) integration of a fallible
/// integrand: the panel with the largest error estimate is bisected until
/// the summed error is below `max(abs_tol, rel_tol · |I|)`.
pub fn try_integrate_adaptive(
    a: f64,
    b: f64,
    opts: &AdaptiveOptions,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<Integral> {
    let panels = opts.initial_panels.max(1);
    let width = (b - a) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(2 * panels);
    let mut value = 0.0;
    let mut error = 0.0;
    for i in 0..panels {
        let lo = a + i as f64 * width;
        let hi = if i + 1 == panels { b } else { lo + width };
        let (v, e) = gk15(lo, hi, &mut f)?;
        value += v;
        error += e;
        heap.push(Panel {
            a: lo,
            b: hi,
            value: v,
            error: e,
        });
    }
    let mut evaluations = 15 * panels;
    while error > opts.abs_tol.max(opts.rel_tol * value.abs()) {
        if heap.len() >= opts.max_panels {
            return Err(Error::Accuracy {
                estimate: value,
                error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            heap.push(worst);
            return Err(Error::Accuracy {
                estimate: value,
                error,
            });
        }
        let (lv, le) = gk15(worst.a, mid, &mut f)?;
        let (rv, re) = gk15(mid, worst.b, &mut f)?;
        evaluations += 30;
        value += lv + rv - worst.value;
        error += le + re - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
    }
    // re-sum to shed the drift of incremental updates
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(Integral {
        value,
        error,
        evaluations,
    })
}

pub fn integrate_adaptive(
    a: f64,
    b: f64,
    opts: &AdaptiveOptions,
    mut f: impl FnMut(f64) -> f64,
) -> Result<Integral> {
    try_integrate_adaptive(a, b, opts, |x| Ok(f(x)))
}

/// Iterated adaptive integration over the rectangle `[ax, bx] × [ay, by]`:
/// the inner integral in `y` is itself adaptive for every outer node.
pub fn integrate_adaptive_2d(
    (ax, bx): (f64, f64),
    (ay, by): (f64, f64),
    opts: &AdaptiveOptions,
    mut f: impl FnMut(f64, f64) -> f64,
) -> Result<Integral> {
    let inner_opts = AdaptiveOptions {
        abs_tol: opts.abs_tol / (bx - ax).abs().max(1.0),
        ..*opts
    };
    let mut inner_evals = 0usize;
    let outer = try_integrate_adaptive(ax, bx, opts, |x| {
        let inner = integrate_adaptive(ay, by, &inner_opts, |y| f(x, y))?;
        inner_evals += inner.evaluations;
        Ok(inner.value)
    })?;
    Ok(Integral {
        value: outer.value,
        error: outer.error,
        evaluations: inner_evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        let rule = GaussLegendre::compute(20);
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // degree 39 is the highest exact degree for 20 nodes
        let v = rule.integrate(0.0, 1.0, |x| x.powi(38));
        assert!((v - 1.0 / 39.0).abs() < 1e-15);
        for w in rule.nodes.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn small_rules_match_closed_forms() {
        let r1 = GaussLegendre::compute(1);
        assert_eq!(r1.nodes, vec![0.0]);
        assert!((r1.weights[0] - 2.0).abs() < 1e-15);
        let r2 = GaussLegendre::compute(2);
        assert!((r2.nodes[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        let r3 = GaussLegendre::compute(3);
        assert!((r3.nodes[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((r3.weights[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_kinks_and_peaks() {
        let opts = AdaptiveOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            ..Default::default()
        };
        let kink = integrate_adaptive(-1.0, 2.0, &opts, |x: f64| (x - 0.3).max(0.0)).unwrap();
        assert!((kink.value - 0.5 * 1.7 * 1.7).abs() < 1e-12);
        let gauss = integrate_adaptive(-10.0, 10.0, &opts, crate::normal::pdf).unwrap();
        assert!((gauss.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adaptive_reports_failure_when_budget_exhausted() {
        let opts = AdaptiveOptions {
            abs_tol: 0.0,
            rel_tol: 0.0,
            initial_panels: 1,
            max_panels: 8,
        };
        let err = integrate_adaptive(0.0, 1.0, &opts, |x: f64| x.sqrt()).unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. }));
    }

    #[test]
    fn iterated_2d_gaussian_mass() {
        let opts = AdaptiveOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            ..Default::default()
        };
        let i = integrate_adaptive_2d((-10.0, 10.0), (-10.0, 10.0), &opts, |x, y| {
            crate::normal::pdf(x) * crate::normal::pdf(y) * (x * x + y * y)
        })
        .unwrap();
        assert!((i.value - 2.0).abs() < 1e-9);
    }
}
