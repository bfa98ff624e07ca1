//! Mixed one- and two-factor Bergomi forward-variance models.
//!
//! Forward variance is `ξ_t^T = ξ_0^T f^T(t, ·)` where `f^T` is a convex
//! combination (weight `γ`) of two unit-mean lognormal exponentials with
//! vol-of-vol `ω₁`, `ω₂`. In the one-factor model the driver is the decayed
//! OU state `x_t^T = e^{-k(T-t)} X_t`; in the two-factor model it is
//! `λ_t^T = α_θ [(1-θ) e^{-k₁(T-t)} X¹_t + θ e^{-k₂(T-t)} X²_t]`.
//!
//! All times are in years. `ξ_0^T` is stored as decimal annualised variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural parameters of the two-factor model used for calibration
/// (Bergomi's "Set III").
pub const SET_III: (f64, f64, f64, f64) = (7.54, 0.24, 0.23, 0.7);

/// `kt` below this switches the OU variance to its series expansion.
const SERIES_CUTOFF: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneFactorParams {
    pub k: f64,
    pub gamma: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl OneFactorParams {
    pub fn new(k: f64, gamma: f64, omega1: f64, omega2: f64) -> Result<Self> {
        let p = Self {
            k,
            gamma,
            omega1,
            omega2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_mixture(self.gamma, self.omega1, self.omega2)?;
        if !(self.k >= 0.0) {
            return Err(Error::domain(format!("mean reversion k = {} < 0", self.k)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoFactorParams {
    pub k1: f64,
    pub k2: f64,
    pub theta: f64,
    pub rho: f64,
    pub gamma: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl TwoFactorParams {
    pub fn new(
        k1: f64,
        k2: f64,
        theta: f64,
        rho: f64,
        gamma: f64,
        omega1: f64,
        omega2: f64,
    ) -> Result<Self> {
        let p = Self {
            k1,
            k2,
            theta,
            rho,
            gamma,
            omega1,
            omega2,
        };
        p.validate()?;
        Ok(p)
    }

    /// Set III structure with the given mixture.
    pub fn set_iii(gamma: f64, omega1: f64, omega2: f64) -> Self {
        let (k1, k2, theta, rho) = SET_III;
        Self {
            k1,
            k2,
            theta,
            rho,
            gamma,
            omega1,
            omega2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_mixture(self.gamma, self.omega1, self.omega2)?;
        if !(self.k2 >= 0.0 && self.k1 > self.k2) {
            return Err(Error::domain(format!(
                "need k1 > k2 >= 0, got k1 = {}, k2 = {}",
                self.k1, self.k2
            )));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::domain(format!(
                "theta = {} outside [0, 1]",
                self.theta
            )));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::domain(format!("rho = {} outside [-1, 1]", self.rho)));
        }
        Ok(())
    }

    /// `α_θ`, the normalisation making `ω` the instantaneous vol of `ξ_t^t`.
    pub fn alpha_theta(&self) -> Result<f64> {
        alpha_theta(self.theta, self.rho)
    }
}

fn check_mixture(gamma: f64, omega1: f64, omega2: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::domain(format!("gamma = {gamma} outside [0, 1]")));
    }
    if !(omega1 >= 0.0 && omega2 >= 0.0) {
        return Err(Error::domain(format!(
            "vol-of-vol must be non-negative, got omega1 = {omega1}, omega2 = {omega2}"
        )));
    }
    Ok(())
}

/// Either model, as carried by a calibrated slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    #[serde(alias = "1f")]
    OneFactor(OneFactorParams),
    #[serde(alias = "2f")]
    TwoFactor(TwoFactorParams),
}

impl ModelParams {
    pub fn mixture(&self) -> (f64, f64, f64) {
        match self {
            ModelParams::OneFactor(p) => (p.gamma, p.omega1, p.omega2),
            ModelParams::TwoFactor(p) => (p.gamma, p.omega1, p.omega2),
        }
    }

    /// Same structure, new `(γ, ω₁, ω₂)`.
    pub fn with_mixture(&self, gamma: f64, omega1: f64, omega2: f64) -> Self {
        match *self {
            ModelParams::OneFactor(p) => ModelParams::OneFactor(OneFactorParams {
                gamma,
                omega1,
                omega2,
                ..p
            }),
            ModelParams::TwoFactor(p) => ModelParams::TwoFactor(TwoFactorParams {
                gamma,
                omega1,
                omega2,
                ..p
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::OneFactor(p) => p.validate(),
            ModelParams::TwoFactor(p) => p.validate(),
        }
    }

    pub fn factors(&self) -> usize {
        match self {
            ModelParams::OneFactor(_) => 1,
            ModelParams::TwoFactor(_) => 2,
        }
    }
}

impl From<OneFactorParams> for ModelParams {
    fn from(p: OneFactorParams) -> Self {
        ModelParams::OneFactor(p)
    }
}

impl From<TwoFactorParams> for ModelParams {
    fn from(p: TwoFactorParams) -> Self {
        ModelParams::TwoFactor(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceUnits {
    #[default]
    Decimal,
    /// Quoted as VIX points squared, i.e. `100² ·` decimal variance.
    VixPointsSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub start: f64,
    pub end: f64,
    /// Decimal annualised variance.
    pub xi0: f64,
}

/// Piecewise-constant initial forward variance `ξ_0^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardVarianceCurve {
    buckets: Vec<Bucket>,
}

impl ForwardVarianceCurve {
    /// Builds a curve from `(start, end, value)` triples quoted in `units`.
    pub fn new(buckets: Vec<(f64, f64, f64)>, units: VarianceUnits) -> Result<Self> {
        let scale = match units {
            VarianceUnits::Decimal => 1.0,
            VarianceUnits::VixPointsSquared => 1e-4,
        };
        let mut out: Vec<Bucket> = buckets
            .into_iter()
            .map(|(start, end, v)| Bucket {
                start,
                end,
                xi0: v * scale,
            })
            .collect();
        out.sort_by(|a, b| a.start.total_cmp(&b.start));
        for b in &out {
            if !(b.end > b.start && b.start >= 0.0) {
                return Err(Error::domain(format!(
                    "invalid bucket [{}, {}]",
                    b.start, b.end
                )));
            }
            if !(b.xi0 > 0.0 && b.xi0.is_finite()) {
                return Err(Error::domain(format!("xi0 = {} must be positive", b.xi0)));
            }
        }
        for w in out.windows(2) {
            if w[1].start < w[0].end {
                return Err(Error::domain(format!(
                    "buckets [{}, {}] and [{}, {}] overlap",
                    w[0].start, w[0].end, w[1].start, w[1].end
                )));
            }
        }
        if out.is_empty() {
            return Err(Error::Empty("forward variance curve"));
        }
        Ok(Self { buckets: out })
    }

    /// Bucket-constant curve from `(maturity, ξ₀)` anchors sorted by
    /// maturity: anchor `i` holds on `[T_i, T_{i+1})`, the last one on
    /// `[T_n, T_n + Δ]`.
    pub fn from_anchors(anchors: &[(f64, f64)]) -> Result<Self> {
        let delta = crate::conventions::global().delta();
        let buckets = anchors
            .iter()
            .enumerate()
            .map(|(i, &(t, xi0))| {
                let end = anchors.get(i + 1).map_or(t + delta, |n| n.0);
                (t, end, xi0)
            })
            .collect();
        Self::new(buckets, VarianceUnits::Decimal)
    }

    /// Flat curve on `[0, horizon]`.
    pub fn flat(xi0: f64, horizon: f64) -> Result<Self> {
        Self::new(vec![(0.0, horizon, xi0)], VarianceUnits::Decimal)
    }

    pub fn buckets(&self) -> &[Bucket] {
        &self.buckets
    }

    /// `ξ_0^T` at `maturity`; buckets are closed on the left and on the
    /// right of the last bucket.
    pub fn lookup(&self, maturity: f64) -> Result<f64> {
        let last = self.buckets.len() - 1;
        self.buckets
            .iter()
            .enumerate()
            .find(|(i, b)| {
                maturity >= b.start && (maturity < b.end || (*i == last && maturity <= b.end))
            })
            .map(|(_, b)| b.xi0)
            .ok_or(Error::Coverage { maturity })
    }

    /// Whether `[from, to]` lies inside the covered range without gaps.
    pub fn covers(&self, from: f64, to: f64) -> bool {
        let mut reach = from;
        for b in &self.buckets {
            if b.start > reach {
                break;
            }
            if b.end >= reach {
                reach = b.end;
            }
            if reach >= to {
                return self.buckets[0].start <= from;
            }
        }
        false
    }
}

/// State of the OU driver(s) at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OuState {
    One { t: f64, x: f64 },
    Two { t: f64, x1: f64, x2: f64 },
}

impl OuState {
    pub fn t(&self) -> f64 {
        match *self {
            OuState::One { t, .. } | OuState::Two { t, .. } => t,
        }
    }
}

fn check_times(t: f64, maturity: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("t = {t} < 0")));
    }
    if t > maturity {
        return Err(Error::domain(format!("t = {t} > T = {maturity}")));
    }
    Ok(())
}

/// `(1 - e^{-a t}) / a`, continuous at `a = 0`.
#[inline]
fn one_minus_exp_over(a: f64, t: f64) -> f64 {
    let x = a * t;
    if x.abs() < SERIES_CUTOFF {
        t * (1.0 - 0.5 * x)
    } else {
        -(-x).exp_m1() / a
    }
}

/// `Var(X_t)` of the OU process `dX = -kX dt + dW`, `X_0 = 0`.
pub fn ou_variance(k: f64, t: f64) -> Result<f64> {
    if !(k >= 0.0) {
        return Err(Error::domain(format!("k = {k} < 0")));
    }
    if !(t >= 0.0) {
        return Err(Error::domain(format!("t = {t} < 0")));
    }
    Ok(ou_var(k, t))
}

#[inline]
pub(crate) fn ou_var(k: f64, t: f64) -> f64 {
    one_minus_exp_over(2.0 * k, t)
}

/// `h(t, T) = e^{-2k(T-t)} Var(X_t)`, the variance of `x_t^T`.
pub fn h_factor(k: f64, t: f64, maturity: f64) -> Result<f64> {
    check_times(t, maturity)?;
    Ok((-2.0 * k * (maturity - t)).exp() * ou_variance(k, t)?)
}

/// `(v¹_t, v²_t, v^{12}_t)`: the covariance entries of `(X¹_t, X²_t)`.
pub fn cross_variances(p: &TwoFactorParams, t: f64) -> Result<(f64, f64, f64)> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("t = {t} < 0")));
    }
    Ok(cross_var(p, t))
}

#[inline]
pub(crate) fn cross_var(p: &TwoFactorParams, t: f64) -> (f64, f64, f64) {
    (
        ou_var(p.k1, t),
        ou_var(p.k2, t),
        p.rho * one_minus_exp_over(p.k1 + p.k2, t),
    )
}

/// Correlation `ρ₁₂(t)` between `X¹_t` and `X²_t`; `ρ` itself at `t = 0`.
pub fn ou_correlation(p: &TwoFactorParams, t: f64) -> Result<f64> {
    let (v1, v2, v12) = cross_variances(p, t)?;
    if v1 <= 0.0 || v2 <= 0.0 {
        return Ok(p.rho);
    }
    Ok((v12 / (v1 * v2).sqrt()).clamp(-1.0, 1.0))
}

pub fn alpha_theta(theta: f64, rho: f64) -> Result<f64> {
    let d = (1.0 - theta).powi(2) + theta * theta + 2.0 * rho * theta * (1.0 - theta);
    if !(d > 0.0) {
        return Err(Error::DegenerateMix(d));
    }
    Ok(1.0 / d.sqrt())
}

/// `χ(t, T)`, the variance of `λ_t^T`.
pub fn chi(p: &TwoFactorParams, t: f64, maturity: f64) -> Result<f64> {
    check_times(t, maturity)?;
    let alpha = p.alpha_theta()?;
    let (v1, v2, v12) = cross_var(p, t);
    Ok(chi_from(p, alpha, (v1, v2, v12), maturity - t))
}

/// `χ` given the covariance at `t` and the remaining time `tau = T - t`.
#[inline]
pub(crate) fn chi_from(
    p: &TwoFactorParams,
    alpha: f64,
    (v1, v2, v12): (f64, f64, f64),
    tau: f64,
) -> f64 {
    let th = p.theta;
    alpha
        * alpha
        * ((1.0 - th).powi(2) * (-2.0 * p.k1 * tau).exp() * v1
            + th * th * (-2.0 * p.k2 * tau).exp() * v2
            + 2.0 * th * (1.0 - th) * (-(p.k1 + p.k2) * tau).exp() * v12)
}

/// Maps `X_t` to `x_t^T = e^{-k(T-t)} X_t`.
pub fn decay_state(k: f64, t: f64, maturity: f64, x: f64) -> f64 {
    (-k * (maturity - t)).exp() * x
}

/// Maps `(X¹_t, X²_t)` to `λ_t^T`.
pub fn lambda_state(p: &TwoFactorParams, t: f64, maturity: f64, x1: f64, x2: f64) -> Result<f64> {
    let tau = maturity - t;
    let alpha = p.alpha_theta()?;
    Ok(alpha * ((1.0 - p.theta) * (-p.k1 * tau).exp() * x1 + p.theta * (-p.k2 * tau).exp() * x2))
}

/// Mixture of two unit-mean lognormals driven by a centred Gaussian of
/// variance `var`.
#[inline]
pub(crate) fn mixture(gamma: f64, omega1: f64, omega2: f64, driver: f64, var: f64) -> f64 {
    (1.0 - gamma) * (omega1 * driver - 0.5 * omega1 * omega1 * var).exp()
        + gamma * (omega2 * driver - 0.5 * omega2 * omega2 * var).exp()
}

/// One-factor `f^T(t, x)` where `x` is the decayed state `x_t^T`.
pub fn mixed_f_one(p: &OneFactorParams, t: f64, maturity: f64, x: f64) -> Result<f64> {
    let h = h_factor(p.k, t, maturity)?;
    Ok(mixture(p.gamma, p.omega1, p.omega2, x, h))
}

/// Two-factor `f^T(t, λ)` where `λ = λ_t^T`.
pub fn mixed_f_two(p: &TwoFactorParams, t: f64, maturity: f64, lambda: f64) -> Result<f64> {
    let c = chi(p, t, maturity)?;
    Ok(mixture(p.gamma, p.omega1, p.omega2, lambda, c))
}

/// `ξ_t^T = ξ_0^T f^T` at the given state.
pub fn forward_variance(
    curve: &ForwardVarianceCurve,
    params: &ModelParams,
    state: &OuState,
    maturity: f64,
) -> Result<f64> {
    let xi0 = curve.lookup(maturity)?;
    let f = match (params, *state) {
        (ModelParams::OneFactor(p), OuState::One { t, x }) => {
            mixed_f_one(p, t, maturity, decay_state(p.k, t, maturity, x))?
        }
        (ModelParams::TwoFactor(p), OuState::Two { t, x1, x2 }) => {
            mixed_f_two(p, t, maturity, lambda_state(p, t, maturity, x1, x2)?)?
        }
        _ => {
            return Err(Error::domain(
                "state dimension does not match the model's factor count",
            ))
        }
    };
    Ok(xi0 * f)
}
