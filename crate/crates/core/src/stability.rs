//! Fit-quality metrics, their summaries, and the fixed-parameter repricing
//! tests that measure how calibrated parameters age over the following
//! trading days.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    calibrate_slice_with, CalibrationConfig, CalibrationResult, MarketSlice, SliceModel,
    SliceParams,
};
use crate::error::{Error, Result};
use crate::marketdata::Surface;
use crate::optim::golden_section;
use crate::quantiser::QuantiserGrid;

/// `|F_mkt − F_model| / F_mkt`.
pub fn relative_error(f_mkt: f64, f_model: f64) -> Result<f64> {
    if !(f_mkt > 0.0) {
        return Err(Error::domain(format!(
            "market futures price {f_mkt} must be positive"
        )));
    }
    Ok((f_mkt - f_model).abs() / f_mkt)
}

/// One-sided relative distance of `model` outside `[bid, ask]`. A
/// non-positive bid contributes no lower violation.
pub fn rbae(bid: f64, ask: f64, model: f64) -> f64 {
    let above = if ask > 0.0 {
        ((model - ask) / ask).max(0.0)
    } else {
        0.0
    };
    let below = if bid > 0.0 {
        ((bid - model) / bid).max(0.0)
    } else {
        0.0
    };
    above + below
}

/// Mean [`rbae`] over `(bid, ask, model)` triples; quotes with a
/// non-positive bid are left out of the average.
pub fn arbae(quotes: &[(f64, f64, f64)]) -> Result<f64> {
    let kept: Vec<f64> = quotes
        .iter()
        .filter(|(bid, _, _)| *bid > 0.0)
        .map(|&(b, a, m)| rbae(b, a, m))
        .collect();
    if kept.len() < quotes.len() {
        log::warn!(
            "{} quotes with non-positive bid left out of ARBAE",
            quotes.len() - kept.len()
        );
    }
    if kept.is_empty() {
        return Err(Error::Empty("ARBAE quote set"));
    }
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Trailing mean over the last `window` points, shorter at the head.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::domain("moving-average window must be at least 1"));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for i in 0..series.len() {
        sum += series[i];
        if i >= window {
            sum -= series[i - window];
        }
        let mean = sum / (i + 1).min(window) as f64;
        out.push(mean);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub p95: f64,
    pub p99: f64,
}

/// Percentile `p ∈ [0, 1]` of sorted data by linear interpolation between
/// order statistics.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = h.floor() as usize;
    if i + 1 >= n {
        return sorted[n - 1];
    }
    sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
}

pub fn summary_stats(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::Empty("summary statistics input"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(SummaryStats {
        count: n,
        mean,
        sd,
        min: s[0],
        max: s[n - 1],
        p95: percentile(&s, 0.95),
        p99: percentile(&s, 0.99),
    })
}

/// Box-plot summary with whiskers at the furthest points within 1.5 IQR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: usize,
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(Error::Empty("box-plot input"));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let (q1, median, q3) = (
        percentile(&s, 0.25),
        percentile(&s, 0.5),
        percentile(&s, 0.75),
    );
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = s.iter().copied().filter(|v| *v >= lo && *v <= hi).collect();
    Ok(BoxStats {
        q1,
        median,
        q3,
        lower_whisker: inside.first().copied().unwrap_or(q1),
        upper_whisker: inside.last().copied().unwrap_or(q3),
        outliers: s.len() - inside.len(),
    })
}

/// Which parameters travel and how `ξ₀` is refreshed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StabilityTest {
    /// Mixture calibrated with stripped `ξ₀`; held while `ξ₀` is re-stripped.
    StripCalibrated = 1,
    /// All four calibrated; mixture held while `ξ₀` is re-stripped.
    StripDaily = 2,
    /// All four calibrated; mixture held while `ξ₀` is refitted daily.
    RefitXi0 = 3,
    /// All four held.
    HoldAll = 4,
}

impl StabilityTest {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Self::StripCalibrated),
            2 => Ok(Self::StripDaily),
            3 => Ok(Self::RefitXi0),
            4 => Ok(Self::HoldAll),
            _ => Err(Error::domain(format!("unknown stability test {id}"))),
        }
    }

    pub fn id(&self) -> u8 {
        *self as u8
    }
}

/// How a later day's slice is matched to the anchor's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    /// Parameters travel with the expiry date; rolled-off expiries drop out.
    #[default]
    ExpiryDate,
    /// Parameters stay with the calendar days to expiry (constant maturity).
    DaysToExpiry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "RE")]
    Re,
    #[serde(rename = "ARBAE")]
    Arbae,
    #[serde(rename = "RBAE")]
    Rbae,
}

impl Metric {
    pub fn label(&self) -> &'static str {
        match self {
            Metric::Re => "RE",
            Metric::Arbae => "ARBAE",
            Metric::Rbae => "RBAE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub date: NaiveDate,
    pub lag: usize,
    pub expiry: NaiveDate,
    pub expiry_days: i64,
    pub metric: Metric,
    pub value: f64,
    /// Set for RBAE only.
    pub strike: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub test: StabilityTest,
    /// Trading days after the anchor.
    pub horizon: usize,
    pub alignment: Alignment,
    pub calibration: CalibrationConfig,
}

impl StabilityConfig {
    pub fn new(test: StabilityTest, calibration: CalibrationConfig) -> Self {
        Self {
            test,
            horizon: 30,
            alignment: Alignment::ExpiryDate,
            calibration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRun {
    pub test: StabilityTest,
    pub anchor: NaiveDate,
    pub horizon: usize,
    /// Trading days actually found after the anchor.
    pub days: usize,
    /// Fewer than `horizon` days were available.
    pub partial: bool,
    pub calibration: Vec<CalibrationResult>,
    /// Sorted by (date, expiry, metric, strike).
    pub records: Vec<ErrorRecord>,
}

impl StabilityRun {
    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    /// Summary statistics of `metric` per lag.
    pub fn by_lag(&self, metric: Metric) -> Result<Vec<(usize, SummaryStats)>> {
        let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in self.records.iter().filter(|r| r.metric == metric) {
            groups.entry(r.lag).or_default().push(r.value);
        }
        groups
            .into_iter()
            .map(|(lag, v)| Ok((lag, summary_stats(&v)?)))
            .collect()
    }
}

fn key(alignment: Alignment, m: &MarketSlice) -> i64 {
    match alignment {
        Alignment::ExpiryDate => (m.expiry - NaiveDate::MIN).num_days(),
        Alignment::DaysToExpiry => m.expiry_days(),
    }
}

fn market_slices(surface: &Surface, config: &CalibrationConfig) -> Vec<MarketSlice> {
    surface
        .slices
        .iter()
        .filter(|s| s.fit.is_some())
        .filter_map(
            |s| match MarketSlice::from_quote_slice(s, config.moneyness) {
                Ok(m) => Some(m),
                Err(e) => {
                    log::warn!("{} expiry {}: {e}", surface.trade_date, s.expiry);
                    None
                }
            },
        )
        .collect()
}

/// `ξ₀` minimising the objective with the mixture held, searched in
/// `ln ξ₀` within a factor 4 of `start`; kept only if strictly better.
fn refit_xi0(
    model: &SliceModel,
    market: &MarketSlice,
    held: &SliceParams,
    config: &CalibrationConfig,
) -> Result<f64> {
    let (lo, hi) = config.bounds.xi0;
    let f = |ln_x: f64| {
        model
            .evaluate(
                &SliceParams {
                    xi0: ln_x.exp(),
                    ..*held
                },
                market,
            )
            .map_or(f64::INFINITY, |fit| fit.objective)
    };
    let f_start = f(held.xi0.ln());
    let a = (held.xi0 / 4.0).max(lo).ln();
    let b = (held.xi0 * 4.0).min(hi).ln();
    let (x, fx) = golden_section(f, a, b, 1e-12);
    Ok(if fx < f_start { x.exp() } else { held.xi0 })
}

fn records_for(
    date: NaiveDate,
    lag: usize,
    market: &MarketSlice,
    model: &SliceModel,
    p: &SliceParams,
) -> Result<Vec<ErrorRecord>> {
    let fit = model.evaluate(p, market)?;
    let base = ErrorRecord {
        date,
        lag,
        expiry: market.expiry,
        expiry_days: market.expiry_days(),
        metric: Metric::Re,
        value: fit.futures_re,
        strike: None,
    };
    let mut out = vec![base.clone()];
    if !market.calls.is_empty() {
        out.push(ErrorRecord {
            metric: Metric::Arbae,
            value: fit.calls_arbae,
            ..base.clone()
        });
        for (q, &c) in market.calls.iter().zip(&fit.calls) {
            out.push(ErrorRecord {
                metric: Metric::Rbae,
                value: rbae(q.bid, q.ask, c),
                strike: Some(q.strike),
                ..base.clone()
            });
        }
    }
    Ok(out)
}

/// Calibrates on `anchor`, then reprices each of the following
/// `config.horizon` trading days in `surfaces` with parameters held as the
/// test prescribes. Lag 0 is the anchor itself.
pub fn run_stability_test(
    surfaces: &[Surface],
    anchor: NaiveDate,
    config: &StabilityConfig,
    grid: &QuantiserGrid,
) -> Result<StabilityRun> {
    let mut days: Vec<&Surface> = surfaces.iter().filter(|s| s.trade_date >= anchor).collect();
    days.sort_by_key(|s| s.trade_date);
    days.dedup_by_key(|s| s.trade_date);
    if days.first().is_none_or(|s| s.trade_date != anchor) {
        return Err(Error::domain(format!("no quotes on anchor date {anchor}")));
    }
    days.truncate(config.horizon + 1);
    let partial = days.len() < config.horizon + 1;
    if partial {
        log::warn!(
            "only {} trading days after {anchor}, wanted {}",
            days.len() - 1,
            config.horizon
        );
    }

    let mut cal = config.calibration;
    cal.calibrate_xi0 = config.test != StabilityTest::StripCalibrated;
    let structural = cal.model.structural();
    let anchor_slices = market_slices(days[0], &cal);
    let calibrated: Vec<(i64, CalibrationResult)> = anchor_slices
        .par_iter()
        .map(|m| -> Result<_> {
            let model = SliceModel::new(&structural, grid, m.maturity)?;
            Ok((
                key(config.alignment, m),
                calibrate_slice_with(&model, m, &cal)?,
            ))
        })
        .collect::<Result<_>>()?;
    let held: BTreeMap<i64, SliceParams> = calibrated.iter().map(|(k, r)| (*k, r.params)).collect();

    let per_day: Vec<Vec<ErrorRecord>> = days
        .par_iter()
        .enumerate()
        .map(|(lag, surface)| -> Result<Vec<ErrorRecord>> {
            let mut out = Vec::new();
            for m in market_slices(surface, &cal) {
                let Some(p) = held.get(&key(config.alignment, &m)) else {
                    continue;
                };
                let model = SliceModel::new(&structural, grid, m.maturity)?;
                let xi0 = match config.test {
                    StabilityTest::StripCalibrated | StabilityTest::StripDaily => match m.xi0_strip
                    {
                        Some(x) => x,
                        None => {
                            log::warn!(
                                "{} expiry {}: no strip, slice skipped",
                                surface.trade_date,
                                m.expiry
                            );
                            continue;
                        }
                    },
                    StabilityTest::RefitXi0 => refit_xi0(&model, &m, p, &cal)?,
                    StabilityTest::HoldAll => p.xi0,
                };
                out.extend(records_for(
                    surface.trade_date,
                    lag,
                    &m,
                    &model,
                    &SliceParams { xi0, ..*p },
                )?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut records: Vec<ErrorRecord> = per_day.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        (a.date, a.expiry, a.metric)
            .cmp(&(b.date, b.expiry, b.metric))
            .then(a.strike.unwrap_or(0.0).total_cmp(&b.strike.unwrap_or(0.0)))
    });
    let mut calibration: Vec<CalibrationResult> = calibrated.into_iter().map(|(_, r)| r).collect();
    calibration.sort_by_key(|r| r.expiry);
    Ok(StabilityRun {
        test: config.test,
        anchor,
        horizon: config.horizon,
        days: days.len() - 1,
        partial,
        calibration,
        records,
    })
}
