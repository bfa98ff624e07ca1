//! Reference prices by direct integration against the Gaussian law of the
//! OU factors and by Monte Carlo with exact sampling, and the timing harness
//! that compares both against quantisation.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conventions;
use crate::error::{Error, Result};
use crate::models::{ForwardVarianceCurve, ModelParams, OneFactorParams, TwoFactorParams};
use crate::normal::pdf;
use crate::pricing::{ou_marginals, Payoff, QuantisedSlice, VixKernel};
use crate::quadrature::{
    integrate_adaptive, integrate_adaptive_2d, AdaptiveOptions, GaussLegendre, Integral,
};
use crate::quantiser::QuantiserGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureScheme {
    #[default]
    Adaptive,
    /// Fixed Gauss–Legendre product rule with `tensor_nodes` per axis.
    TensorGauss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Integration runs over `[-truncation, truncation]` in each standard
    /// normal coordinate.
    pub truncation: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub scheme: QuadratureScheme,
    pub tensor_nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            truncation: 10.0,
            abs_tol: 1e-10,
            rel_tol: 1e-6,
            scheme: QuadratureScheme::Adaptive,
            tensor_nodes: 64,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.truncation > 0.0) {
            return Err(Error::domain("truncation must be positive"));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::domain("tolerances must be positive"));
        }
        if self.scheme == QuadratureScheme::TensorGauss && self.tensor_nodes == 0 {
            return Err(Error::domain("tensor rule needs at least one node"));
        }
        Ok(())
    }

    fn adaptive(&self) -> AdaptiveOptions {
        AdaptiveOptions {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            ..AdaptiveOptions::default()
        }
    }
}

/// Undiscounted `E[payoff(VIX_T)]` in the one-factor model.
pub fn quad_expectation_1f(
    payoff: Payoff,
    params: &OneFactorParams,
    curve: &ForwardVarianceCurve,
    maturity: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    spec.validate()?;
    let model = ModelParams::OneFactor(*params);
    let kernel = VixKernel::new(&model, curve, maturity)?;
    let (sd, _, _) = ou_marginals(&model, maturity);
    let g = |z: f64| payoff.apply(kernel.vix_squared(sd * z, 0.0).sqrt()) * pdf(z);
    let l = spec.truncation;
    match spec.scheme {
        QuadratureScheme::Adaptive => integrate_adaptive(-l, l, &spec.adaptive(), g),
        QuadratureScheme::TensorGauss => {
            let rule = GaussLegendre::cached(spec.tensor_nodes);
            Ok(Integral {
                value: rule.integrate(-l, l, g),
                error: f64::NAN,
                evaluations: spec.tensor_nodes,
            })
        }
    }
}

pub fn quad_price_1f(
    payoff: Payoff,
    params: &OneFactorParams,
    curve: &ForwardVarianceCurve,
    maturity: f64,
    r: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let e = quad_expectation_1f(payoff, params, curve, maturity, spec)?;
    Ok(payoff.discount(r, maturity) * e.value)
}

/// Undiscounted `E[payoff(VIX_T)]` in the two-factor model, integrating in
/// independent standard coordinates `(u1, u2)` with
/// `X¹ = s1 u1`, `X² = s2 (ρ₁₂ u1 + √(1-ρ₁₂²) u2)`.
pub fn quad_expectation_2f(
    payoff: Payoff,
    params: &TwoFactorParams,
    curve: &ForwardVarianceCurve,
    maturity: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    spec.validate()?;
    let model = ModelParams::TwoFactor(*params);
    let kernel = VixKernel::new(&model, curve, maturity)?;
    let (s1, s2, rho12) = ou_marginals(&model, maturity);
    if !(rho12.abs() < 1.0) {
        return Err(Error::DegenerateDensity(rho12.abs()));
    }
    let c = (1.0 - rho12 * rho12).sqrt();
    let g = |u1: f64, u2: f64| {
        let v = kernel.vix_squared(s1 * u1, s2 * (rho12 * u1 + c * u2));
        payoff.apply(v.sqrt()) * pdf(u1) * pdf(u2)
    };
    let l = spec.truncation;
    match spec.scheme {
        QuadratureScheme::Adaptive => integrate_adaptive_2d((-l, l), (-l, l), &spec.adaptive(), g),
        QuadratureScheme::TensorGauss => {
            let rule = GaussLegendre::cached(spec.tensor_nodes);
            let (x, w) = rule.on_interval(-l, l);
            let mut value = 0.0;
            for (&u1, &w1) in x.iter().zip(&w) {
                let mut inner = 0.0;
                for (&u2, &w2) in x.iter().zip(&w) {
                    inner += w2 * g(u1, u2);
                }
                value += w1 * inner;
            }
            Ok(Integral {
                value,
                error: f64::NAN,
                evaluations: x.len() * x.len(),
            })
        }
    }
}

pub fn quad_price_2f(
    payoff: Payoff,
    params: &TwoFactorParams,
    curve: &ForwardVarianceCurve,
    maturity: f64,
    r: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let e = quad_expectation_2f(payoff, params, curve, maturity, spec)?;
    Ok(payoff.discount(r, maturity) * e.value)
}

/// Dispatches on the model's factor count.
pub fn quad_price(
    payoff: Payoff,
    params: &ModelParams,
    curve: &ForwardVarianceCurve,
    maturity: f64,
    r: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    match params {
        ModelParams::OneFactor(p) => quad_price_1f(payoff, p, curve, maturity, r, spec),
        ModelParams::TwoFactor(p) => quad_price_2f(payoff, p, curve, maturity, r, spec),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
}

/// Streaming mean and centred second moment.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    #[inline]
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        Moments {
            n,
            mean: self.mean + d * nb / n as f64,
            m2: self.m2 + other.m2 + d * d * na * nb / n as f64,
        }
    }
}

/// Paths per independent random stream.
const MC_CHUNK: u64 = 1 << 16;

/// Monte-Carlo prices of several payoffs on the same maturity from one set
/// of exact Gaussian samples of the OU factors.
///
/// Chunk `c` of [`MC_CHUNK`] paths draws from stream `c` of a ChaCha8
/// generator keyed by `seed`, and chunk statistics are merged in chunk
/// order, so results do not depend on the thread count.
pub fn mc_prices(
    payoffs: &[Payoff],
    params: &ModelParams,
    curve: &ForwardVarianceCurve,
    maturity: f64,
    r: f64,
    n_paths: u64,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    if n_paths == 0 {
        return Err(Error::domain("Monte Carlo needs at least one path"));
    }
    let kernel = VixKernel::new(params, curve, maturity)?;
    let (s1, s2, rho12) = ou_marginals(params, maturity);
    let c = (1.0 - rho12 * rho12).max(0.0).sqrt();
    let two = params.factors() == 2;
    let chunks = n_paths.div_ceil(MC_CHUNK);
    let per_chunk: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ci);
            let count = MC_CHUNK.min(n_paths - ci * MC_CHUNK);
            let mut acc = vec![Moments::default(); payoffs.len()];
            for _ in 0..count {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let (x1, x2) = if two {
                    let z2: f64 = StandardNormal.sample(&mut rng);
                    (s1 * z1, s2 * (rho12 * z1 + c * z2))
                } else {
                    (s1 * z1, 0.0)
                };
                let vix = kernel.vix_squared(x1, x2).sqrt();
                for (m, p) in acc.iter_mut().zip(payoffs) {
                    m.push(p.apply(vix));
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::default(); payoffs.len()];
    for chunk in per_chunk {
        for (t, m) in total.iter_mut().zip(chunk) {
            *t = t.merge(m);
        }
    }
    Ok(total
        .iter()
        .zip(payoffs)
        .map(|(m, p)| {
            let df = p.discount(r, maturity);
            let var = if m.n > 1 {
                m.m2 / (m.n - 1) as f64
            } else {
                0.0
            };
            McEstimate {
                price: df * m.mean,
                std_error: df * (var.max(0.0) / m.n as f64).sqrt(),
            }
        })
        .collect())
}

pub fn mc_price(
    payoff: Payoff,
    params: &ModelParams,
    curve: &ForwardVarianceCurve,
    maturity: f64,
    r: f64,
    n_paths: u64,
    seed: u64,
) -> Result<McEstimate> {
    Ok(mc_prices(&[payoff], params, curve, maturity, r, n_paths, seed)?[0])
}

/// One priced contract of a workload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkItem {
    pub maturity: f64,
    pub payoff: Payoff,
}

/// The reference pricing workload: a futures term structure plus calls and
/// puts on one option maturity, strikes set by moneyness against the
/// quadrature futures price.
#[derive(Debug, Clone)]
pub struct Workload {
    pub params: ModelParams,
    pub curve: ForwardVarianceCurve,
    pub r: f64,
    pub futures: Vec<f64>,
    pub option_maturity: f64,
    pub calls: Vec<f64>,
    pub puts: Vec<f64>,
}

/// Flat initial forward variance of the reference configuration.
pub const REFERENCE_XI0: f64 = 0.03;
pub const REFERENCE_OPTION_MATURITY: f64 = 0.25;

pub fn reference_one_factor() -> OneFactorParams {
    OneFactorParams {
        k: 1.0,
        gamma: 0.61,
        omega1: 5.53,
        omega2: 0.69,
    }
}

pub fn reference_two_factor() -> TwoFactorParams {
    TwoFactorParams::set_iii(0.60, 9.12, 1.10)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl Workload {
    /// Ten futures from one week to ten months, 18 calls with moneyness in
    /// the configured window and 8 puts in `[0.8, 1.15]`, all at three
    /// months under a flat curve.
    pub fn reference(params: ModelParams) -> Result<Self> {
        let conv = conventions::global();
        let curve = ForwardVarianceCurve::flat(REFERENCE_XI0, 2.0)?;
        let t = REFERENCE_OPTION_MATURITY;
        let atm = quad_price(
            Payoff::Future,
            &params,
            &curve,
            t,
            0.0,
            &QuadratureSpec::default(),
        )?;
        Ok(Self {
            params,
            curve,
            r: 0.0,
            futures: linspace(7.0 / conv.day_count, 10.0 / 12.0, 10),
            option_maturity: t,
            calls: linspace(conv.moneyness_lo, conv.moneyness_hi, 18)
                .into_iter()
                .map(|m| m * atm)
                .collect(),
            puts: linspace(0.8, 1.15, 8)
                .into_iter()
                .map(|m| m * atm)
                .collect(),
        })
    }

    /// Futures, then calls, then puts.
    pub fn items(&self) -> Vec<WorkItem> {
        let mut out: Vec<WorkItem> = self
            .futures
            .iter()
            .map(|&t| WorkItem {
                maturity: t,
                payoff: Payoff::Future,
            })
            .collect();
        let t = self.option_maturity;
        out.extend(self.calls.iter().map(|&k| WorkItem {
            maturity: t,
            payoff: Payoff::Call(k),
        }));
        out.extend(self.puts.iter().map(|&k| WorkItem {
            maturity: t,
            payoff: Payoff::Put(k),
        }));
        out
    }

    /// The timed subset: futures and calls.
    pub fn timed_items(&self) -> Vec<WorkItem> {
        self.items()
            .into_iter()
            .filter(|i| !matches!(i.payoff, Payoff::Put(_)))
            .collect()
    }

    /// Distinct maturities in first-appearance order.
    fn maturities(items: &[WorkItem]) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for i in items {
            if !out.contains(&i.maturity) {
                out.push(i.maturity);
            }
        }
        out
    }

    /// Quantisation prices of `items`, sharing states across items on the
    /// same maturity.
    pub fn quantised_prices(&self, grid: &QuantiserGrid, items: &[WorkItem]) -> Result<Vec<f64>> {
        let mut states = Vec::new();
        for t in Self::maturities(items) {
            let xi0 = crate::pricing::slice_xi0(&self.curve, t)?;
            states.push(QuantisedSlice::new(&self.params, grid, t)?.states(&self.params, xi0)?);
        }
        Ok(items
            .iter()
            .map(|i| {
                let s = states.iter().find(|s| s.maturity == i.maturity).unwrap();
                s.price(i.payoff, self.r)
            })
            .collect())
    }

    pub fn quadrature_prices(&self, items: &[WorkItem], spec: &QuadratureSpec) -> Result<Vec<f64>> {
        items
            .iter()
            .map(|i| {
                quad_price(
                    i.payoff,
                    &self.params,
                    &self.curve,
                    i.maturity,
                    self.r,
                    spec,
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Quantisation,
    Quadrature,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Quantisation => "quantisation",
            Method::Quadrature => "quadrature",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BenchConfig {
    pub repetitions: usize,
    pub spec: QuadratureSpec,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            repetitions: 20,
            spec: QuadratureSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub item: usize,
    pub maturity: f64,
    pub payoff: Payoff,
    pub price: f64,
    pub median_ns: u64,
    pub rel_err_vs_quad: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub factors: usize,
    pub rows: Vec<BenchRow>,
    /// Median over repetitions of the whole-workload wall time.
    pub quantisation_ns: u64,
    pub quadrature_ns: u64,
}

impl BenchReport {
    /// Quadrature time over quantisation time.
    pub fn speedup(&self) -> f64 {
        self.quadrature_ns as f64 / self.quantisation_ns.max(1) as f64
    }
}

fn median(mut v: Vec<u64>) -> u64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2
    }
}

/// Times the futures-and-calls workload for both methods on the calling
/// thread. Quantisation states are built once per maturity and their cost is
/// charged to the first item on that maturity.
pub fn bench(
    workload: &Workload,
    grid: &QuantiserGrid,
    config: &BenchConfig,
) -> Result<BenchReport> {
    let reps = config.repetitions.max(1);
    let items = workload.timed_items();
    let n = items.len();
    let mut quant_item = vec![Vec::with_capacity(reps); n];
    let mut quad_item = vec![Vec::with_capacity(reps); n];
    let mut quant_total = Vec::with_capacity(reps);
    let mut quad_total = Vec::with_capacity(reps);
    let mut quant_price = vec![0.0; n];
    let mut quad_price_v = vec![0.0; n];
    for _ in 0..reps {
        let start = Instant::now();
        let mut states: Vec<crate::pricing::VixStateValues> = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let t0 = Instant::now();
            let pos = states.iter().position(|s| s.maturity == item.maturity);
            let s = match pos {
                Some(p) => &states[p],
                None => {
                    let xi0 = crate::pricing::slice_xi0(&workload.curve, item.maturity)?;
                    let st = QuantisedSlice::new(&workload.params, grid, item.maturity)?
                        .states(&workload.params, xi0)?;
                    states.push(st);
                    states.last().unwrap()
                }
            };
            quant_price[i] = s.price(item.payoff, workload.r);
            quant_item[i].push(t0.elapsed().as_nanos() as u64);
        }
        quant_total.push(start.elapsed().as_nanos() as u64);

        let start = Instant::now();
        for (i, item) in items.iter().enumerate() {
            let t0 = Instant::now();
            quad_price_v[i] = quad_price(
                item.payoff,
                &workload.params,
                &workload.curve,
                item.maturity,
                workload.r,
                &config.spec,
            )?;
            quad_item[i].push(t0.elapsed().as_nanos() as u64);
        }
        quad_total.push(start.elapsed().as_nanos() as u64);
    }
    let mut rows = Vec::with_capacity(2 * n);
    for (i, item) in items.iter().enumerate() {
        let q = quad_price_v[i];
        let rel = if q != 0.0 {
            ((quant_price[i] - q) / q).abs()
        } else {
            (quant_price[i] - q).abs()
        };
        rows.push(BenchRow {
            method: Method::Quantisation,
            item: i,
            maturity: item.maturity,
            payoff: item.payoff,
            price: quant_price[i],
            median_ns: median(std::mem::take(&mut quant_item[i])),
            rel_err_vs_quad: rel,
        });
    }
    for (i, item) in items.iter().enumerate() {
        rows.push(BenchRow {
            method: Method::Quadrature,
            item: i,
            maturity: item.maturity,
            payoff: item.payoff,
            price: quad_price_v[i],
            median_ns: median(std::mem::take(&mut quad_item[i])),
            rel_err_vs_quad: 0.0,
        });
    }
    Ok(BenchReport {
        factors: workload.params.factors(),
        rows,
        quantisation_ns: median(quant_total),
        quadrature_ns: median(quad_total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> ForwardVarianceCurve {
        ForwardVarianceCurve::flat(0.03, 2.0).unwrap()
    }

    #[test]
    fn degenerate_oracles_return_constant_vix() {
        let vix = (300.0f64).sqrt();
        let p1 = OneFactorParams::new(1.0, 0.61, 0.0, 0.0).unwrap();
        let q = quad_price_1f(
            Payoff::Future,
            &p1,
            &flat(),
            0.25,
            0.0,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!((q - vix).abs() < 1e-12);
        let p2 = TwoFactorParams::set_iii(0.6, 0.0, 0.0);
        let q = quad_price_2f(
            Payoff::Future,
            &p2,
            &flat(),
            0.25,
            0.0,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!((q - vix).abs() < 1e-12);
        let mc = mc_price(Payoff::Future, &p1.into(), &flat(), 0.25, 0.0, 1000, 3).unwrap();
        assert!((mc.price - vix).abs() < 1e-12);
        assert_eq!(mc.std_error, 0.0);
    }

    #[test]
    fn mc_is_deterministic_and_chunk_stable() {
        let p: ModelParams = reference_one_factor().into();
        let a = mc_price(Payoff::Call(16.0), &p, &flat(), 0.25, 0.01, 150_000, 9).unwrap();
        let b = mc_price(Payoff::Call(16.0), &p, &flat(), 0.25, 0.01, 150_000, 9).unwrap();
        assert_eq!(a, b);
        let c = mc_price(Payoff::Call(16.0), &p, &flat(), 0.25, 0.01, 150_000, 10).unwrap();
        assert_ne!(a.price, c.price);
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..333].iter().for_each(|&x| a.push(x));
        xs[333..].iter().for_each(|&x| b.push(x));
        let m = a.merge(b);
        assert_eq!(m.n, all.n);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.m2 - all.m2).abs() < 1e-9 * all.m2);
    }

    #[test]
    fn degenerate_density_is_rejected() {
        let p = TwoFactorParams::new(7.54, 0.24, 0.23, 1.0, 0.6, 9.12, 1.1).unwrap();
        let r = quad_price_2f(
            Payoff::Future,
            &p,
            &flat(),
            1e-9,
            0.0,
            &QuadratureSpec::default(),
        );
        assert!(matches!(r, Err(Error::DegenerateDensity(_))));
    }
}
