//! VIX futures and options from quantised OU states, plus Black-76.
//!
//! `VIX²_T = (100² / Δ) ∫_T^{T+Δ} ξ_T^u du` with the time integral on a
//! fixed Gauss–Legendre rule. For every node `u_l` the forward variance is a
//! two-term lognormal mixture in the linear driver `a_l X¹ + b_l X²`, so a
//! [`VixKernel`] stores one row of coefficients per node and any state can
//! be mapped to `VIX²` with `2L` exponentials.

use serde::{Deserialize, Serialize};

use crate::conventions;
use crate::error::{Error, Result};
use crate::models::{
    cross_var, h_factor, ou_var, ForwardVarianceCurve, ModelParams, OneFactorParams,
    TwoFactorParams,
};
use crate::normal::{cdf, pdf};
use crate::quadrature::GaussLegendre;
use crate::quantiser::{scale_to_ou, OuGrid, QuantiserGrid};

/// Index points squared per unit of decimal variance.
pub const VIX_SCALE: f64 = 100.0 * 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

/// A claim on `VIX_T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "strike", rename_all = "lowercase")]
pub enum Payoff {
    Future,
    Call(f64),
    Put(f64),
}

impl Payoff {
    pub fn option(kind: OptionKind, strike: f64) -> Self {
        match kind {
            OptionKind::Call => Payoff::Call(strike),
            OptionKind::Put => Payoff::Put(strike),
        }
    }

    #[inline]
    pub fn apply(&self, vix: f64) -> f64 {
        match *self {
            Payoff::Future => vix,
            Payoff::Call(k) => (vix - k).max(0.0),
            Payoff::Put(k) => (k - vix).max(0.0),
        }
    }

    /// Futures are marked to market and carry no discounting.
    pub fn discount(&self, r: f64, maturity: f64) -> f64 {
        match self {
            Payoff::Future => 1.0,
            _ => (-r * maturity).exp(),
        }
    }

    pub fn strike(&self) -> Option<f64> {
        match *self {
            Payoff::Future => None,
            Payoff::Call(k) | Payoff::Put(k) => Some(k),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Payoff::Future => "future",
            Payoff::Call(_) => "call",
            Payoff::Put(_) => "put",
        }
    }
}

/// `VIX²` on a fixed maturity as a function of the OU state observed there.
///
/// `V(x1, x2) = Σ_l c1_l e^{ω₁ y_l} + c2_l e^{ω₂ y_l}` with
/// `y_l = a_l x1 + b_l x2`; `b ≡ 0` in the one-factor model.
#[derive(Debug, Clone)]
pub struct VixKernel {
    maturity: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    c1: Vec<f64>,
    c2: Vec<f64>,
    omega1: f64,
    omega2: f64,
}

/// Parameter-independent part of a kernel: decay coefficients, driver
/// variances and time weights for each node.
#[derive(Debug, Clone)]
struct NodeRow {
    a: f64,
    b: f64,
    var: f64,
    weight: f64,
}

fn node_rows(params: &ModelParams, maturity: f64) -> Result<Vec<NodeRow>> {
    let conv = conventions::global();
    let delta = conv.delta();
    let rule = GaussLegendre::cached(conv.time_nodes);
    let (nodes, weights) = rule.on_interval(maturity, maturity + delta);
    let mut rows = Vec::with_capacity(nodes.len());
    match params {
        ModelParams::OneFactor(p) => {
            for (&u, &w) in nodes.iter().zip(&weights) {
                rows.push(NodeRow {
                    a: (-p.k * (u - maturity)).exp(),
                    b: 0.0,
                    var: h_factor(p.k, maturity, u)?,
                    weight: w / delta,
                });
            }
        }
        ModelParams::TwoFactor(p) => {
            let alpha = p.alpha_theta()?;
            let cov = cross_var(p, maturity);
            for (&u, &w) in nodes.iter().zip(&weights) {
                let tau = u - maturity;
                rows.push(NodeRow {
                    a: alpha * (1.0 - p.theta) * (-p.k1 * tau).exp(),
                    b: alpha * p.theta * (-p.k2 * tau).exp(),
                    var: crate::models::chi_from(p, alpha, cov, tau),
                    weight: w / delta,
                });
            }
        }
    }
    Ok(rows)
}

impl VixKernel {
    /// Kernel for `VIX²_T` with the slice's own `ξ₀` bucket.
    pub fn new(params: &ModelParams, curve: &ForwardVarianceCurve, maturity: f64) -> Result<Self> {
        let xi0 = slice_xi0(curve, maturity)?;
        Self::with_xi0(params, xi0, maturity)
    }

    /// Kernel with an explicit constant `ξ₀` on `[T, T+Δ]`.
    pub fn with_xi0(params: &ModelParams, xi0: f64, maturity: f64) -> Result<Self> {
        params.validate()?;
        if !(maturity > 0.0) {
            return Err(Error::domain(format!(
                "maturity {maturity} must be positive"
            )));
        }
        if !(xi0 > 0.0) {
            return Err(Error::domain(format!("xi0 = {xi0} must be positive")));
        }
        let (gamma, omega1, omega2) = params.mixture();
        let rows = node_rows(params, maturity)?;
        let scale = VIX_SCALE * xi0;
        Ok(Self {
            maturity,
            a: rows.iter().map(|r| r.a).collect(),
            b: rows.iter().map(|r| r.b).collect(),
            c1: rows
                .iter()
                .map(|r| scale * r.weight * (1.0 - gamma) * (-0.5 * omega1 * omega1 * r.var).exp())
                .collect(),
            c2: rows
                .iter()
                .map(|r| scale * r.weight * gamma * (-0.5 * omega2 * omega2 * r.var).exp())
                .collect(),
            omega1,
            omega2,
        })
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn nodes(&self) -> usize {
        self.a.len()
    }

    /// `VIX²` (index points squared) at OU state `(x1, x2)`.
    #[inline]
    pub fn vix_squared(&self, x1: f64, x2: f64) -> f64 {
        let mut v = 0.0;
        for l in 0..self.a.len() {
            let y = self.a[l] * x1 + self.b[l] * x2;
            v += self.c1[l] * (self.omega1 * y).exp() + self.c2[l] * (self.omega2 * y).exp();
        }
        v
    }

    /// `VIX²` from precomputed drivers `y_l`.
    #[inline]
    fn vix_squared_from_drivers(&self, y: &[f64]) -> f64 {
        let mut v = 0.0;
        for ((&y, &c1), &c2) in y.iter().zip(&self.c1).zip(&self.c2) {
            v += c1 * (self.omega1 * y).exp() + c2 * (self.omega2 * y).exp();
        }
        v
    }
}

/// `ξ₀` of the bucket holding `maturity`, after checking that the curve
/// covers the whole averaging window.
pub fn slice_xi0(curve: &ForwardVarianceCurve, maturity: f64) -> Result<f64> {
    let delta = conventions::global().delta();
    if !curve.covers(maturity, maturity + delta) {
        return Err(Error::Coverage { maturity });
    }
    curve.lookup(maturity)
}

/// `VIX²` per quantised state on one maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VixStateValues {
    pub maturity: f64,
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl VixStateValues {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Σ_j V_j p_j`.
    pub fn mean_vix_squared(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| v * p)
            .sum()
    }

    /// Undiscounted `E[payoff(VIX_T)]`.
    pub fn expectation(&self, payoff: Payoff) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| payoff.apply(v.sqrt()) * p)
            .sum()
    }

    pub fn price(&self, payoff: Payoff, r: f64) -> f64 {
        payoff.discount(r, self.maturity) * self.expectation(payoff)
    }
}

/// Quantised OU states on one maturity with the mixture-independent drivers
/// `y_{jl}` cached, so that repricing under new `(γ, ω₁, ω₂, ξ₀)` costs only
/// the exponentials.
#[derive(Debug, Clone)]
pub struct QuantisedSlice {
    maturity: f64,
    factors: usize,
    structure: ModelParams,
    probs: Vec<f64>,
    /// Row-major `n × L`.
    drivers: Vec<f64>,
    nodes: usize,
}

fn same_structure(a: &ModelParams, b: &ModelParams) -> bool {
    match (a, b) {
        (ModelParams::OneFactor(p), ModelParams::OneFactor(q)) => p.k == q.k,
        (ModelParams::TwoFactor(p), ModelParams::TwoFactor(q)) => {
            p.k1 == q.k1 && p.k2 == q.k2 && p.theta == q.theta && p.rho == q.rho
        }
        _ => false,
    }
}

impl QuantisedSlice {
    /// Scales `grid` to the OU law at `maturity` and caches the drivers.
    /// Only the structural parameters of `params` matter here.
    pub fn new(params: &ModelParams, grid: &QuantiserGrid, maturity: f64) -> Result<Self> {
        if grid.dim() != params.factors() {
            return Err(Error::domain(format!(
                "{}-factor model needs a {}-D grid, got {}-D",
                params.factors(),
                params.factors(),
                grid.dim()
            )));
        }
        let ou = scale_to_ou(grid, params, maturity)?;
        Self::from_ou(params, &ou)
    }

    pub fn from_ou(params: &ModelParams, ou: &OuGrid) -> Result<Self> {
        let maturity = ou.t();
        let rows = node_rows(params, maturity)?;
        let l = rows.len();
        let mut drivers = Vec::with_capacity(ou.len() * l);
        match ou {
            OuGrid::One { x, .. } => {
                for &xj in x {
                    drivers.extend(rows.iter().map(|r| r.a * xj));
                }
            }
            OuGrid::Two { x1, x2, .. } => {
                for (&u, &v) in x1.iter().zip(x2) {
                    drivers.extend(rows.iter().map(|r| r.a * u + r.b * v));
                }
            }
        }
        let factors = match ou {
            OuGrid::One { .. } => 1,
            OuGrid::Two { .. } => 2,
        };
        if factors != params.factors() {
            return Err(Error::domain("state dimension does not match the model"));
        }
        Ok(Self {
            maturity,
            factors,
            structure: *params,
            probs: ou.probs().to_vec(),
            drivers,
            nodes: l,
        })
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `VIX²` per state under `params` with constant `ξ₀` on the window.
    pub fn states(&self, params: &ModelParams, xi0: f64) -> Result<VixStateValues> {
        if !same_structure(&self.structure, params) {
            return Err(Error::domain(
                "structural parameters differ from those the slice was built with",
            ));
        }
        let kernel = VixKernel::with_xi0(params, xi0, self.maturity)?;
        let values = self
            .drivers
            .chunks_exact(self.nodes)
            .map(|y| kernel.vix_squared_from_drivers(y))
            .collect();
        Ok(VixStateValues {
            maturity: self.maturity,
            values,
            probs: self.probs.clone(),
        })
    }
}

/// `VIX²_T` on every point of `grid` after scaling it to the OU law at `T`.
pub fn vix_squared_states(
    params: &ModelParams,
    curve: &ForwardVarianceCurve,
    maturity: f64,
    grid: &QuantiserGrid,
) -> Result<VixStateValues> {
    let xi0 = slice_xi0(curve, maturity)?;
    QuantisedSlice::new(params, grid, maturity)?.states(params, xi0)
}

/// `Σ_j √V_j p_j`.
pub fn price_future(states: &VixStateValues) -> f64 {
    states.expectation(Payoff::Future)
}

pub fn price_call(states: &VixStateValues, strike: f64, r: f64) -> f64 {
    states.price(Payoff::Call(strike), r)
}

pub fn price_put(states: &VixStateValues, strike: f64, r: f64) -> f64 {
    states.price(Payoff::Put(strike), r)
}

/// Convenience wrapper used by tests and the CLI for a one-factor model.
pub fn one_factor(k: f64, gamma: f64, omega1: f64, omega2: f64) -> Result<ModelParams> {
    Ok(OneFactorParams::new(k, gamma, omega1, omega2)?.into())
}

/// Two-factor model on the fixed structural set used throughout.
pub fn two_factor_set_iii(gamma: f64, omega1: f64, omega2: f64) -> Result<ModelParams> {
    let p = TwoFactorParams::set_iii(gamma, omega1, omega2);
    p.validate()?;
    Ok(p.into())
}

/// Standard deviations of the OU factors at `t` and their correlation.
pub fn ou_marginals(params: &ModelParams, t: f64) -> (f64, f64, f64) {
    match params {
        ModelParams::OneFactor(p) => (ou_var(p.k, t).sqrt(), 0.0, 0.0),
        ModelParams::TwoFactor(p) => {
            let (v1, v2, v12) = cross_var(p, t);
            let rho = if v1 > 0.0 && v2 > 0.0 {
                (v12 / (v1 * v2).sqrt()).clamp(-1.0, 1.0)
            } else {
                p.rho
            };
            (v1.sqrt(), v2.sqrt(), rho)
        }
    }
}

/// Black-76 price of an option on a futures price.
pub fn black_price(
    forward: f64,
    strike: f64,
    r: f64,
    maturity: f64,
    sigma: f64,
    kind: OptionKind,
) -> f64 {
    let df = (-r * maturity).exp();
    let sd = sigma * maturity.sqrt();
    if sd <= 0.0 {
        return df
            * match kind {
                OptionKind::Call => (forward - strike).max(0.0),
                OptionKind::Put => (strike - forward).max(0.0),
            };
    }
    let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    df * match kind {
        OptionKind::Call => forward * cdf(d1) - strike * cdf(d2),
        OptionKind::Put => strike * cdf(-d2) - forward * cdf(-d1),
    }
}

/// `∂C/∂σ`, identical for calls and puts.
pub fn black_vega(forward: f64, strike: f64, r: f64, maturity: f64, sigma: f64) -> f64 {
    let sd = sigma * maturity.sqrt();
    if sd <= 0.0 {
        return 0.0;
    }
    let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
    (-r * maturity).exp() * forward * pdf(d1) * maturity.sqrt()
}

const IV_LO: f64 = 1e-6;
const IV_HI: f64 = 10.0;
const IV_HI_MAX: f64 = 1e3;

/// Black-76 implied volatility: bracketing bisection safeguarded by Newton
/// steps, until the price is reproduced to `1e-14` relative or the bracket
/// collapses to rounding.
pub fn implied_vol(
    price: f64,
    forward: f64,
    strike: f64,
    r: f64,
    maturity: f64,
    kind: OptionKind,
) -> Result<f64> {
    if !(forward > 0.0 && strike > 0.0 && maturity > 0.0) {
        return Err(Error::domain(
            "implied vol needs positive forward, strike and maturity",
        ));
    }
    let df = (-r * maturity).exp();
    let (lower, upper) = match kind {
        OptionKind::Call => (df * (forward - strike).max(0.0), df * forward),
        OptionKind::Put => (df * (strike - forward).max(0.0), df * strike),
    };
    if !(price >= lower) {
        return Err(Error::NoSolution {
            price,
            bound: lower,
            side: "below",
        });
    }
    if price >= upper {
        return Err(Error::NoSolution {
            price,
            bound: upper,
            side: "at or above",
        });
    }
    if price == lower {
        return Ok(0.0);
    }
    let f = |s: f64| black_price(forward, strike, r, maturity, s, kind) - price;
    let mut lo = if f(IV_LO) > 0.0 { 0.0 } else { IV_LO };
    let mut hi = IV_HI;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > IV_HI_MAX {
            return Err(Error::NoSolution {
                price,
                bound: upper,
                side: "numerically indistinguishable from",
            });
        }
    }
    let tol = 1e-14 * price;
    let mut s = 0.5 * (lo + hi);
    for _ in 0..300 {
        let fs = f(s);
        if fs.abs() <= tol {
            return Ok(s);
        }
        if fs > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let vega = black_vega(forward, strike, r, maturity, s);
        let newton = if vega > 0.0 { s - fs / vega } else { f64::NAN };
        s = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(s);
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> ForwardVarianceCurve {
        ForwardVarianceCurve::flat(0.03, 2.0).unwrap()
    }

    #[test]
    fn degenerate_vol_of_vol_gives_constant_vix() {
        let grid = crate::quantiser::build_gaussian_1d(50, 1e-12).unwrap();
        let p = one_factor(1.0, 0.61, 0.0, 0.0).unwrap();
        let s = vix_squared_states(&p, &flat(), 0.25, &grid).unwrap();
        assert!(s.values.iter().all(|v| (v - 300.0).abs() < 1e-10));
        assert!((price_future(&s) - 300f64.sqrt()).abs() < 1e-12);
        assert_eq!(price_call(&s, 20.0, 0.0), 0.0);
        assert!((price_put(&s, 20.0, 0.0) - (20.0 - 300f64.sqrt())).abs() < 1e-12);
        assert!((price_call(&s, 0.0, 0.0) - price_future(&s)).abs() < 1e-15);
    }

    #[test]
    fn coverage_is_checked() {
        let grid = crate::quantiser::build_gaussian_1d(10, 1e-12).unwrap();
        let p = one_factor(1.0, 0.5, 2.0, 1.0).unwrap();
        let short = ForwardVarianceCurve::flat(0.03, 0.3).unwrap();
        assert!(matches!(
            vix_squared_states(&p, &short, 0.25, &grid),
            Err(Error::Coverage { .. })
        ));
    }

    #[test]
    fn gamma_one_is_a_single_lognormal() {
        let grid = crate::quantiser::build_gaussian_1d(40, 1e-12).unwrap();
        let curve = ForwardVarianceCurve::new(
            vec![(0.0, 0.25, 0.02), (0.25, 0.6, 0.05), (0.6, 1.0, 0.04)],
            crate::models::VarianceUnits::Decimal,
        )
        .unwrap();
        let mixed = one_factor(1.0, 1.0, 7.0, 0.9).unwrap();
        let single = one_factor(1.0, 0.0, 0.9, 3.0).unwrap();
        let a = vix_squared_states(&mixed, &curve, 0.3, &grid).unwrap();
        let b = vix_squared_states(&single, &curve, 0.3, &grid).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-12 * x);
        }
    }

    #[test]
    fn black_examples() {
        assert!((black_price(20.0, 18.0, 0.0, 0.25, 0.0, OptionKind::Call) - 2.0).abs() < 1e-15);
        for &(f, k, r, t, s) in &[(20.0, 18.0, 0.03, 0.5, 0.7), (15.29, 22.0, 0.05, 0.25, 1.1)] {
            let c = black_price(f, k, r, t, s, OptionKind::Call);
            let p = black_price(f, k, r, t, s, OptionKind::Put);
            assert!((c - p - (-r * t).exp() * (f - k)).abs() < 1e-13);
        }
    }

    #[test]
    fn implied_vol_round_trips() {
        let (f, r, t) = (16.0, 0.02, 0.25);
        // out-of-the-money side only: deep in-the-money time value is below
        // the premium's rounding
        for &(k, kind) in &[
            (10.0, OptionKind::Put),
            (16.0, OptionKind::Put),
            (16.0, OptionKind::Call),
            (24.0, OptionKind::Call),
            (32.0, OptionKind::Call),
        ] {
            let p = black_price(f, k, r, t, 0.2, kind);
            let iv = implied_vol(p, f, k, r, t, kind).unwrap();
            assert!((iv - 0.2).abs() < 1e-8, "k={k} {kind:?} iv={iv}");
        }
        let intrinsic = (-r * t).exp() * 2.0;
        assert_eq!(
            implied_vol(intrinsic, 18.0, 16.0, r, t, OptionKind::Call).unwrap(),
            0.0
        );
        assert!(matches!(
            implied_vol(0.5 * intrinsic, 18.0, 16.0, r, t, OptionKind::Call),
            Err(Error::NoSolution { side: "below", .. })
        ));
        assert!(matches!(
            implied_vol(20.0, 18.0, 16.0, r, t, OptionKind::Call),
            Err(Error::NoSolution { .. })
        ));
    }
}
