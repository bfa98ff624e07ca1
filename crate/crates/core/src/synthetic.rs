//! In-model quote surfaces: option quotes priced by quantisation under known
//! parameters and wrapped in a symmetric relative bid–ask corridor.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::calibration::{ModelKind, SliceParams};
use crate::error::Result;
use crate::marketdata::{OptionQuote, QuoteSlice, Surface};
use crate::models::ModelParams;
use crate::pricing::{OptionKind, Payoff, QuantisedSlice};
use crate::quantiser::QuantiserGrid;

/// One row of calibrated per-maturity parameters for both models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub days: i64,
    pub one_factor: SliceParams,
    pub two_factor: SliceParams,
}

impl ParameterRow {
    pub fn params(&self, model: ModelKind) -> SliceParams {
        match model {
            ModelKind::OneFactor => self.one_factor,
            ModelKind::TwoFactor => self.two_factor,
        }
    }
}

const fn sp(gamma: f64, omega1: f64, omega2: f64, xi0: f64) -> SliceParams {
    SliceParams {
        gamma,
        omega1,
        omega2,
        xi0,
    }
}

/// Market-calibrated parameters of a twelve-expiry VIX surface, one row
/// per expiry, used as generators for synthetic days.
pub const REFERENCE_ROWS: [ParameterRow; 12] = [
    ParameterRow {
        days: 7,
        one_factor: sp(0.9154, 17.9773, 1.2834, 2.3384e-2),
        two_factor: sp(0.9099, 23.9030, 1.6242, 2.3534e-2),
    },
    ParameterRow {
        days: 14,
        one_factor: sp(0.7992, 10.1150, 0.5242, 2.5717e-2),
        two_factor: sp(0.7529, 11.9445, 0.2027, 2.5687e-2),
    },
    ParameterRow {
        days: 21,
        one_factor: sp(0.7475, 8.8105, 0.3626, 2.6586e-2),
        two_factor: sp(0.7179, 11.5348, 0.0255, 2.6585e-2),
    },
    ParameterRow {
        days: 28,
        one_factor: sp(0.6070, 5.8838, 0.0028, 2.7367e-2),
        two_factor: sp(0.6289, 8.7869, 0.2092, 2.7548e-2),
    },
    ParameterRow {
        days: 42,
        one_factor: sp(0.7150, 8.1597, 0.8695, 3.0049e-2),
        two_factor: sp(0.6548, 9.8553, 0.7096, 2.9108e-2),
    },
    ParameterRow {
        days: 69,
        one_factor: sp(0.5495, 5.0842, 0.2774, 3.2823e-2),
        two_factor: sp(0.5765, 9.0625, 0.7617, 3.3348e-2),
    },
    ParameterRow {
        days: 98,
        one_factor: sp(0.4878, 4.4036, 0.2664, 3.7267e-2),
        two_factor: sp(0.4862, 7.8423, 0.5295, 3.7567e-2),
    },
    ParameterRow {
        days: 133,
        one_factor: sp(0.4046, 3.6996, 0.0934, 4.0503e-2),
        two_factor: sp(0.3920, 6.8552, 0.0991, 4.0660e-2),
    },
    ParameterRow {
        days: 161,
        one_factor: sp(0.3601, 3.4183, 0.0008, 4.3517e-2),
        two_factor: sp(0.3465, 6.4943, 0.0, 4.3725e-2),
    },
    ParameterRow {
        days: 189,
        one_factor: sp(0.5348, 5.0020, 0.9673, 6.7826e-2),
        two_factor: sp(0.3176, 6.3029, 0.0016, 5.9497e-2),
    },
    ParameterRow {
        days: 224,
        one_factor: sp(0.5112, 5.5986, 1.2783, 6.7825e-2),
        two_factor: sp(0.4593, 8.7608, 1.8762, 5.9483e-2),
    },
    ParameterRow {
        days: 252,
        one_factor: sp(0.5136, 5.5985, 1.2779, 6.7825e-2),
        two_factor: sp(0.4560, 8.7610, 1.8765, 5.9482e-2),
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOptions {
    pub r: f64,
    /// Half-width of the corridor relative to the model price.
    pub corridor: f64,
    pub strike_step: f64,
    /// Strikes span `[lo·F, hi·F]`, snapped to the step.
    pub strike_range: (f64, f64),
    /// Quotes priced below this are not listed.
    pub min_price: f64,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            r: 0.02,
            corridor: 0.01,
            strike_step: 0.5,
            strike_range: (0.6, 2.2),
            min_price: 1e-4,
        }
    }
}

/// Calls and puts on `strikes` priced from `params`, parity-fitted.
#[allow(clippy::too_many_arguments)]
pub fn synthetic_slice(
    structural: &ModelParams,
    params: &SliceParams,
    grid: &QuantiserGrid,
    trade_date: NaiveDate,
    days: i64,
    strikes: &[f64],
    r: f64,
    corridor: f64,
    min_price: f64,
) -> Result<QuoteSlice> {
    let expiry = trade_date + Days::new(days as u64);
    let maturity = crate::conventions::global().year_fraction(days);
    let states = QuantisedSlice::new(structural, grid, maturity)?
        .states(&params.model(structural), params.xi0)?;
    let mut quotes = Vec::with_capacity(2 * strikes.len());
    for &k in strikes {
        for kind in [OptionKind::Call, OptionKind::Put] {
            let price = states.price(Payoff::option(kind, k), r);
            if price < min_price {
                continue;
            }
            quotes.push(OptionQuote {
                trade_date,
                expiry,
                kind,
                strike: k,
                bid: price * (1.0 - corridor),
                ask: price * (1.0 + corridor),
            });
        }
    }
    let mut slice = QuoteSlice::new(trade_date, expiry, quotes);
    slice.fit_parity()?;
    Ok(slice)
}

/// Model futures price of a slice.
pub fn model_future(
    structural: &ModelParams,
    params: &SliceParams,
    grid: &QuantiserGrid,
    days: i64,
) -> Result<f64> {
    let maturity = crate::conventions::global().year_fraction(days);
    let states = QuantisedSlice::new(structural, grid, maturity)?
        .states(&params.model(structural), params.xi0)?;
    Ok(states.price(Payoff::Future, 0.0))
}

fn strike_ladder(forward: f64, opts: &SyntheticOptions) -> Vec<f64> {
    let step = opts.strike_step;
    let lo = (opts.strike_range.0 * forward / step).ceil() as i64;
    let hi = (opts.strike_range.1 * forward / step).floor() as i64;
    (lo.max(1)..=hi).map(|i| i as f64 * step).collect()
}

/// A full trading day generated from `rows`.
pub fn synthetic_surface(
    model: ModelKind,
    rows: &[ParameterRow],
    grid: &QuantiserGrid,
    trade_date: NaiveDate,
    opts: &SyntheticOptions,
) -> Result<Surface> {
    let structural = model.structural();
    let slices = rows
        .iter()
        .map(|row| {
            let p = row.params(model);
            let f = model_future(&structural, &p, grid, row.days)?;
            let strikes = strike_ladder(f, opts);
            synthetic_slice(
                &structural,
                &p,
                grid,
                trade_date,
                row.days,
                &strikes,
                opts.r,
                opts.corridor,
                opts.min_price,
            )
        })
        .collect::<Result<_>>()?;
    Ok(Surface { trade_date, slices })
}

/// `count` consecutive weekdays from `start` (inclusive if a weekday).
pub fn trading_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(count)
        .collect()
}

/// The same surface, by days to expiry and price, on every one of `days`.
pub fn stationary_market(template: &Surface, days: &[NaiveDate]) -> Vec<Surface> {
    days.iter()
        .map(|&d| {
            let slices = template
                .slices
                .iter()
                .map(|s| {
                    let shift = |q: &OptionQuote| OptionQuote {
                        trade_date: d,
                        expiry: d + Days::new(s.days_to_expiry() as u64),
                        ..*q
                    };
                    let mut out = s.clone();
                    out.trade_date = d;
                    out.expiry = d + Days::new(s.days_to_expiry() as u64);
                    out.quotes = s.quotes.iter().map(shift).collect();
                    out
                })
                .collect();
            Surface {
                trade_date: d,
                slices,
            }
        })
        .collect()
}
