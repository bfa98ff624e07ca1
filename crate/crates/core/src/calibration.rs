//! Slice-by-slice calibration of the mixture `(γ, ω₁, ω₂)` and optionally
//! `ξ₀` to the futures price and the call bid–ask corridor, with the
//! structural parameters held fixed.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::{moneyness_window, strip_forward_variance, QuoteSlice};
use crate::models::{ModelParams, OneFactorParams, TwoFactorParams};
use crate::optim::{nelder_mead, NelderMeadOptions, Termination};
use crate::pricing::{Payoff, QuantisedSlice, VixStateValues};
use crate::quantiser::QuantiserGrid;
use crate::stability::{arbae, rbae, relative_error};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "1f", alias = "one-factor")]
    OneFactor,
    #[serde(rename = "2f", alias = "two-factor")]
    TwoFactor,
}

impl ModelKind {
    /// Fixed structural parameters: `k = 1`, or Set III.
    pub fn structural(&self) -> ModelParams {
        match self {
            ModelKind::OneFactor => OneFactorParams {
                k: 1.0,
                gamma: 0.5,
                omega1: 8.0,
                omega2: 1.0,
            }
            .into(),
            ModelKind::TwoFactor => TwoFactorParams::set_iii(0.5, 8.0, 1.0).into(),
        }
    }

    pub fn factors(&self) -> usize {
        match self {
            ModelKind::OneFactor => 1,
            ModelKind::TwoFactor => 2,
        }
    }

    /// Default grid size.
    pub fn grid_size(&self) -> usize {
        match self {
            ModelKind::OneFactor => crate::quantiser::DEFAULT_N_1D,
            ModelKind::TwoFactor => crate::quantiser::DEFAULT_N_2D,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::OneFactor => "1f",
            ModelKind::TwoFactor => "2f",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1f" | "one-factor" | "1" => Ok(ModelKind::OneFactor),
            "2f" | "two-factor" | "2" => Ok(ModelKind::TwoFactor),
            other => Err(Error::domain(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub gamma: (f64, f64),
    pub omega1: (f64, f64),
    pub omega2: (f64, f64),
    pub xi0: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            gamma: (0.0, 1.0),
            omega1: (0.0, 50.0),
            omega2: (0.0, 25.0),
            xi0: (1e-4, 1.0),
        }
    }
}

/// The mixture and initial forward variance of one slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceParams {
    pub gamma: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub xi0: f64,
}

impl SliceParams {
    /// Relabels so that `ω₁ ≥ ω₂`; the mixture law is unchanged.
    pub fn canonical(self) -> Self {
        if self.omega1 >= self.omega2 {
            self
        } else {
            Self {
                gamma: 1.0 - self.gamma,
                omega1: self.omega2,
                omega2: self.omega1,
                xi0: self.xi0,
            }
        }
    }

    pub fn model(&self, structural: &ModelParams) -> ModelParams {
        structural.with_mixture(self.gamma, self.omega1, self.omega2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub model: ModelKind,
    /// Fit `ξ₀` jointly; otherwise it is taken from the strip.
    pub calibrate_xi0: bool,
    /// After the fit, rescale `ξ₀` by `(F_mkt/F_Θ)²` when that does not
    /// worsen the objective.
    pub polish_xi0: bool,
    pub bounds: ParamBounds,
    /// `(γ, ω₁, ω₂)` of the first start.
    pub initial: (f64, f64, f64),
    pub optimiser: NelderMeadOptions,
    /// Total starts: the initial guess plus seeded uniform draws.
    pub starts: usize,
    pub seed: u64,
    pub moneyness: (f64, f64),
}

impl CalibrationConfig {
    pub fn new(model: ModelKind) -> Self {
        let conv = crate::conventions::global();
        Self {
            model,
            calibrate_xi0: true,
            polish_xi0: true,
            bounds: ParamBounds::default(),
            initial: (0.5, 8.0, 1.0),
            optimiser: NelderMeadOptions {
                max_evals: 5000,
                f_target: 1e-14,
                f_tol: 1e-15,
                x_tol: 1e-9,
            },
            starts: 3,
            seed: 42,
            moneyness: (conv.moneyness_lo, conv.moneyness_hi),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.bounds;
        let inside = |v: f64, (lo, hi): (f64, f64)| lo <= v && v <= hi;
        for (name, (lo, hi)) in [
            ("gamma", b.gamma),
            ("omega1", b.omega1),
            ("omega2", b.omega2),
            ("xi0", b.xi0),
        ] {
            if !(lo <= hi) {
                return Err(Error::domain(format!("empty bounds for {name}")));
            }
        }
        if !(b.gamma.0 >= 0.0
            && b.gamma.1 <= 1.0
            && b.omega1.0 >= 0.0
            && b.omega2.0 >= 0.0
            && b.xi0.0 > 0.0)
        {
            return Err(Error::domain("bounds leave the admissible parameter set"));
        }
        let (g, w1, w2) = self.initial;
        if !(inside(g, b.gamma) && inside(w1, b.omega1) && inside(w2, b.omega2)) {
            return Err(Error::domain("initial guess outside bounds"));
        }
        if self.optimiser.max_evals == 0 {
            return Err(Error::domain("max_evals must be at least 1"));
        }
        if self.starts == 0 {
            return Err(Error::domain("need at least one start"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorridorQuote {
    pub strike: f64,
    pub bid: f64,
    pub ask: f64,
}

/// Calibration inputs of one expiry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSlice {
    pub trade_date: NaiveDate,
    pub expiry: NaiveDate,
    pub maturity: f64,
    pub r: f64,
    pub forward: f64,
    pub calls: Vec<CorridorQuote>,
    /// Model-free `ξ₀` from the OTM strip, when it could be computed.
    pub xi0_strip: Option<f64>,
}

impl MarketSlice {
    /// Uses the slice's parity fit, its calls in the moneyness window and
    /// its strip.
    pub fn from_quote_slice(slice: &QuoteSlice, moneyness: (f64, f64)) -> Result<Self> {
        let fit = slice
            .fit
            .ok_or_else(|| Error::domain(format!("slice {} has no parity fit", slice.expiry)))?;
        let calls = moneyness_window(slice, moneyness.0, moneyness.1)?
            .into_iter()
            .map(|q| CorridorQuote {
                strike: q.strike,
                bid: q.bid,
                ask: q.ask,
            })
            .collect();
        let xi0_strip = strip_forward_variance(slice)
            .ok()
            .map(|s| s.xi0)
            .filter(|x| *x > 0.0);
        Ok(Self {
            trade_date: slice.trade_date,
            expiry: slice.expiry,
            maturity: slice.maturity,
            r: fit.r,
            forward: fit.forward,
            calls,
            xi0_strip,
        })
    }

    pub fn expiry_days(&self) -> i64 {
        (self.expiry - self.trade_date).num_days()
    }
}

/// Model prices and errors of one slice under fixed parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceFit {
    pub future: f64,
    pub calls: Vec<f64>,
    pub futures_re: f64,
    pub calls_arbae: f64,
    pub objective: f64,
}

/// `RE² + (1/m) Σ_j RBAE_j²`; the corridor term is dropped when `m = 0`.
pub fn objective(f_mkt: f64, f_model: f64, quotes: &[CorridorQuote], model: &[f64]) -> f64 {
    let re = (f_model - f_mkt) / f_mkt;
    let m = quotes.len();
    let corridor = if m == 0 {
        0.0
    } else {
        quotes
            .iter()
            .zip(model)
            .map(|(q, &c)| rbae(q.bid, q.ask, c).powi(2))
            .sum::<f64>()
            / m as f64
    };
    re * re + corridor
}

/// Quantised states of one market slice, ready for repeated repricing.
#[derive(Debug, Clone)]
pub struct SliceModel {
    structural: ModelParams,
    slice: QuantisedSlice,
}

impl SliceModel {
    pub fn new(structural: &ModelParams, grid: &QuantiserGrid, maturity: f64) -> Result<Self> {
        Ok(Self {
            structural: *structural,
            slice: QuantisedSlice::new(structural, grid, maturity)?,
        })
    }

    pub fn maturity(&self) -> f64 {
        self.slice.maturity()
    }

    pub fn states(&self, p: &SliceParams) -> Result<VixStateValues> {
        self.slice.states(&p.model(&self.structural), p.xi0)
    }

    /// Prices and errors against `market`.
    pub fn evaluate(&self, p: &SliceParams, market: &MarketSlice) -> Result<SliceFit> {
        let states = self.states(p)?;
        let future = states.price(Payoff::Future, market.r);
        let calls: Vec<f64> = market
            .calls
            .iter()
            .map(|q| states.price(Payoff::Call(q.strike), market.r))
            .collect();
        let triples: Vec<(f64, f64, f64)> = market
            .calls
            .iter()
            .zip(&calls)
            .map(|(q, &c)| (q.bid, q.ask, c))
            .collect();
        Ok(SliceFit {
            future,
            futures_re: relative_error(market.forward, future)?,
            calls_arbae: if triples.is_empty() {
                0.0
            } else {
                arbae(&triples)?
            },
            objective: objective(market.forward, future, &market.calls, &calls),
            calls,
        })
    }

    /// `ξ₀` that reprices the futures exactly: `E[VIX]` scales with `√ξ₀`.
    pub fn futures_implied_xi0(&self, p: &SliceParams, market: &MarketSlice) -> Result<f64> {
        let f = self.states(p)?.price(Payoff::Future, market.r);
        Ok(p.xi0 * (market.forward / f).powi(2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationStatus {
    /// Objective target reached or simplex converged.
    Converged,
    /// Evaluation budget exhausted on the best start.
    MaxEvals,
    /// No calls in the window: only the futures constrains the fit and the
    /// mixture is unidentified.
    FuturesOnly,
    /// Every start produced a non-finite objective.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub trade_date: NaiveDate,
    pub expiry: NaiveDate,
    pub expiry_days: i64,
    pub maturity: f64,
    pub params: SliceParams,
    pub objective: f64,
    pub futures_re: f64,
    pub calls_arbae: f64,
    pub calls: usize,
    pub evaluations: usize,
    pub iterations: usize,
    pub starts_run: usize,
    pub status: CalibrationStatus,
    pub xi0_polished: bool,
}

/// Per-slice seed, independent of evaluation order.
fn slice_seed(seed: u64, market: &MarketSlice) -> u64 {
    seed ^ (market.expiry_days() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn to_params(x: &[f64], fixed_xi0: Option<f64>) -> SliceParams {
    SliceParams {
        gamma: x[0],
        omega1: x[1],
        omega2: x[2],
        xi0: fixed_xi0.unwrap_or_else(|| x[3].exp()),
    }
}

/// Calibrates one slice on a prepared [`SliceModel`].
pub fn calibrate_slice_with(
    model: &SliceModel,
    market: &MarketSlice,
    config: &CalibrationConfig,
) -> Result<CalibrationResult> {
    config.validate()?;
    if !(market.forward > 0.0) {
        return Err(Error::domain(format!(
            "futures price {} must be positive",
            market.forward
        )));
    }
    let b = &config.bounds;
    let (g0, w10, w20) = config.initial;
    let first = SliceParams {
        gamma: g0,
        omega1: w10,
        omega2: w20,
        xi0: 0.04,
    };
    let xi0_start = match market.xi0_strip {
        Some(x) => x,
        None => model.futures_implied_xi0(&first, market)?,
    }
    .clamp(b.xi0.0, b.xi0.1);
    let fixed_xi0 = (!config.calibrate_xi0).then_some(xi0_start);

    let mut bounds = vec![b.gamma, b.omega1, b.omega2];
    let mut steps = vec![0.1, 1.0, 0.5];
    if config.calibrate_xi0 {
        bounds.push((b.xi0.0.ln(), b.xi0.1.ln()));
        steps.push(0.05);
    }
    let f = |x: &[f64]| {
        model
            .evaluate(&to_params(x, fixed_xi0), market)
            .map_or(f64::INFINITY, |fit| fit.objective)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(slice_seed(config.seed, market));
    let mut best: Option<crate::optim::Minimum> = None;
    let (mut evaluations, mut iterations, mut starts_run) = (0, 0, 0);
    for s in 0..config.starts {
        let (g, w1, w2) = if s == 0 {
            (g0, w10, w20)
        } else {
            let g = rng.random_range(b.gamma.0..=b.gamma.1);
            let u = rng.random_range(b.omega1.0..=b.omega1.1);
            let v = rng.random_range(b.omega2.0..=b.omega2.1);
            (g, u.max(v), u.min(v))
        };
        let mut x0 = vec![g, w1, w2];
        if config.calibrate_xi0 {
            x0.push(xi0_start.ln());
        }
        let m = nelder_mead(f, &x0, &steps, &bounds, &config.optimiser);
        evaluations += m.evals;
        iterations += m.iterations;
        starts_run += 1;
        let better = best.as_ref().is_none_or(|b| m.f < b.f);
        if better {
            best = Some(m);
        }
        if best
            .as_ref()
            .is_some_and(|b| b.f <= config.optimiser.f_target)
        {
            break;
        }
    }
    let best = best.expect("at least one start");
    let mut params = to_params(&best.x, fixed_xi0).canonical();
    let mut fit = model.evaluate(&params, market)?;
    let mut status = if !best.f.is_finite() {
        CalibrationStatus::Failed
    } else if market.calls.is_empty() {
        CalibrationStatus::FuturesOnly
    } else if best.termination == Termination::MaxEvals {
        CalibrationStatus::MaxEvals
    } else {
        CalibrationStatus::Converged
    };
    let mut xi0_polished = false;
    if config.calibrate_xi0 && config.polish_xi0 && status != CalibrationStatus::Failed {
        let xi0 = model.futures_implied_xi0(&params, market)?;
        if xi0 >= b.xi0.0 && xi0 <= b.xi0.1 {
            let candidate = SliceParams { xi0, ..params };
            let polished = model.evaluate(&candidate, market)?;
            if polished.objective <= fit.objective {
                params = candidate;
                fit = polished;
                xi0_polished = true;
            }
        }
    }
    if status == CalibrationStatus::MaxEvals && fit.objective <= config.optimiser.f_target {
        status = CalibrationStatus::Converged;
    }
    Ok(CalibrationResult {
        trade_date: market.trade_date,
        expiry: market.expiry,
        expiry_days: market.expiry_days(),
        maturity: market.maturity,
        params,
        objective: fit.objective,
        futures_re: fit.futures_re,
        calls_arbae: fit.calls_arbae,
        calls: market.calls.len(),
        evaluations,
        iterations,
        starts_run,
        status,
        xi0_polished,
    })
}

pub fn calibrate_slice(
    market: &MarketSlice,
    config: &CalibrationConfig,
    grid: &QuantiserGrid,
) -> Result<CalibrationResult> {
    let model = SliceModel::new(&config.model.structural(), grid, market.maturity)?;
    calibrate_slice_with(&model, market, config)
}

/// A slice that could not be calibrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceFailure {
    pub expiry: NaiveDate,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCalibration {
    /// Sorted by expiry.
    pub results: Vec<CalibrationResult>,
    pub failures: Vec<SliceFailure>,
}

/// Calibrates every slice independently. Each slice is computed on one
/// thread from its own seed, so the parallel and sequential paths agree bit
/// for bit.
pub fn calibrate_surface(
    slices: &[MarketSlice],
    config: &CalibrationConfig,
    grid: &QuantiserGrid,
    parallel: bool,
) -> SurfaceCalibration {
    let run = |m: &MarketSlice| (m.expiry, calibrate_slice(m, config, grid));
    let outcomes: Vec<_> = if parallel {
        slices.par_iter().map(run).collect()
    } else {
        slices.iter().map(run).collect()
    };
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (expiry, o) in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(e) => failures.push(SliceFailure {
                expiry,
                error: e.to_string(),
            }),
        }
    }
    results.sort_by_key(|r| r.expiry);
    failures.sort_by_key(|f| f.expiry);
    SurfaceCalibration { results, failures }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(bid: f64, ask: f64) -> CorridorQuote {
        CorridorQuote {
            strike: 20.0,
            bid,
            ask,
        }
    }

    #[test]
    fn objective_examples() {
        let quotes = [q(1.0, 1.1), q(2.0, 2.2)];
        assert_eq!(objective(16.0, 16.0, &quotes, &[1.05, 2.1]), 0.0);
        assert!((objective(16.0, 16.16, &quotes, &[1.05, 2.1]) - 1e-4).abs() < 1e-15);
        assert!((objective(16.0, 16.0, &quotes, &[1.21, 2.1]) - 0.005).abs() < 1e-15);
        assert!((objective(16.0, 16.16, &[], &[]) - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn canonical_relabelling() {
        let p = SliceParams {
            gamma: 0.3,
            omega1: 1.0,
            omega2: 6.0,
            xi0: 0.03,
        };
        let c = p.canonical();
        assert_eq!((c.gamma, c.omega1, c.omega2), (0.7, 6.0, 1.0));
        assert_eq!(c.canonical(), c);
    }

    #[test]
    fn config_validation() {
        let mut c = CalibrationConfig::new(ModelKind::OneFactor);
        assert!(c.validate().is_ok());
        c.initial = (0.5, 60.0, 1.0);
        assert!(c.validate().is_err());
        let mut c = CalibrationConfig::new(ModelKind::OneFactor);
        c.optimiser.max_evals = 0;
        assert!(c.validate().is_err());
        assert_eq!("2f".parse::<ModelKind>().unwrap(), ModelKind::TwoFactor);
    }
}
