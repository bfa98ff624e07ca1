//! VIX option quotes: loading and filtering, per-expiry parity fits for the
//! discount rate and futures price, the calibration moneyness window, and
//! model-free stripping of the initial forward variance from OTM options.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::conventions::{self, Conventions};
use crate::error::{Error, Result};
use crate::models::ForwardVarianceCurve;
use crate::optim::golden_section;
use crate::output::fmt_f64;
use crate::pricing::{OptionKind, VIX_SCALE};

/// Bounds of the parity-implied short rate.
pub const RATE_BOUNDS: (f64, f64) = (-0.05, 0.15);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub trade_date: NaiveDate,
    pub expiry: NaiveDate,
    pub kind: OptionKind,
    pub strike: f64,
    pub bid: f64,
    pub ask: f64,
}

impl OptionQuote {
    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::domain(format!(
                "strike {} must be positive",
                self.strike
            )));
        }
        if !(self.bid >= 0.0 && self.ask >= self.bid && self.ask.is_finite()) {
            return Err(Error::domain(format!(
                "need ask >= bid >= 0, got bid {} ask {}",
                self.bid, self.ask
            )));
        }
        if self.expiry <= self.trade_date {
            return Err(Error::domain(format!(
                "expiry {} is not after trade date {}",
                self.expiry, self.trade_date
            )));
        }
        Ok(())
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }

    pub fn days_to_expiry(&self) -> i64 {
        (self.expiry - self.trade_date).num_days()
    }
}

/// Discount rate and futures price implied by put–call parity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityFit {
    pub r: f64,
    pub forward: f64,
    /// Sum of squared parity residuals at the optimum.
    pub sse: f64,
    pub pairs: usize,
}

/// All quotes of one expiry on one trade date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteSlice {
    pub trade_date: NaiveDate,
    pub expiry: NaiveDate,
    /// Year fraction to expiry.
    pub maturity: f64,
    pub quotes: Vec<OptionQuote>,
    pub fit: Option<ParityFit>,
}

impl QuoteSlice {
    pub fn new(trade_date: NaiveDate, expiry: NaiveDate, mut quotes: Vec<OptionQuote>) -> Self {
        quotes.sort_by(|a, b| {
            a.strike
                .total_cmp(&b.strike)
                .then((a.kind == OptionKind::Put).cmp(&(b.kind == OptionKind::Put)))
        });
        let days = (expiry - trade_date).num_days();
        Self {
            trade_date,
            expiry,
            maturity: conventions::global().year_fraction(days),
            quotes,
            fit: None,
        }
    }

    pub fn days_to_expiry(&self) -> i64 {
        (self.expiry - self.trade_date).num_days()
    }

    pub fn calls(&self) -> impl Iterator<Item = &OptionQuote> {
        self.quotes.iter().filter(|q| q.kind == OptionKind::Call)
    }

    pub fn puts(&self) -> impl Iterator<Item = &OptionQuote> {
        self.quotes.iter().filter(|q| q.kind == OptionKind::Put)
    }

    /// Strikes quoted on both sides, with duplicate quotes averaged:
    /// `(K, C_mid, P_mid)` in increasing strike order.
    pub fn paired_mids(&self) -> Vec<(f64, f64, f64)> {
        let calls = averaged_mids(self.calls());
        let puts = averaged_mids(self.puts());
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < calls.len() && j < puts.len() {
            match calls[i].0.total_cmp(&puts[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push((calls[i].0, calls[i].1, puts[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    /// Whether at least two strikes carry both a call and a put.
    pub fn parity_fittable(&self) -> bool {
        self.paired_mids().len() >= 2
    }

    /// Fits and stores `(r, F)`.
    pub fn fit_parity(&mut self) -> Result<ParityFit> {
        let fit = fit_rate_future(self)?;
        self.fit = Some(fit);
        Ok(fit)
    }

    fn fitted(&self) -> Result<ParityFit> {
        self.fit
            .ok_or_else(|| Error::domain(format!("slice {} has no parity fit", self.expiry)))
    }
}

/// `(strike, mean mid)` per distinct strike, increasing.
fn averaged_mids<'a>(quotes: impl Iterator<Item = &'a OptionQuote>) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = quotes.map(|q| (q.strike, q.mid())).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    let mut count = 0usize;
    for (k, m) in v {
        match out.last_mut() {
            Some(last) if last.0 == k => {
                count += 1;
                last.1 += (m - last.1) / count as f64;
            }
            _ => {
                out.push((k, m));
                count = 1;
            }
        }
    }
    out
}

/// A CSV row that could not be turned into a quote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub msg: String,
}

/// One trade date's filtered and grouped quotes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub trade_date: NaiveDate,
    pub slices: Vec<QuoteSlice>,
}

#[derive(Debug, Deserialize)]
struct QuoteRecord {
    trade_date: String,
    expiry: String,
    kind: String,
    strike: f64,
    bid: f64,
    ask: f64,
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| format!("date {s:?}: {e}"))
}

fn parse_kind(s: &str) -> std::result::Result<OptionKind, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "call" | "c" => Ok(OptionKind::Call),
        "put" | "p" => Ok(OptionKind::Put),
        other => Err(format!("unknown option kind {other:?}")),
    }
}

impl TryFrom<QuoteRecord> for OptionQuote {
    type Error = String;

    fn try_from(r: QuoteRecord) -> std::result::Result<Self, String> {
        let q = OptionQuote {
            trade_date: parse_date(&r.trade_date)?,
            expiry: parse_date(&r.expiry)?,
            kind: parse_kind(&r.kind)?,
            strike: r.strike,
            bid: r.bid,
            ask: r.ask,
        };
        q.validate().map_err(|e| e.to_string())?;
        Ok(q)
    }
}

/// Parses quote CSV with header `trade_date,expiry,kind,strike,bid,ask`.
/// Malformed rows are returned alongside the good ones rather than failing
/// the whole file.
pub fn read_quotes(reader: impl Read) -> Result<(Vec<OptionQuote>, Vec<RowError>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut quotes = Vec::new();
    let mut errors = Vec::new();
    for rec in rdr.records() {
        let (line, parsed) = match rec {
            Ok(r) => (
                r.position().map_or(0, |p| p.line()),
                r.deserialize::<QuoteRecord>(Some(&headers))
                    .map_err(|e| e.to_string())
                    .and_then(OptionQuote::try_from),
            ),
            Err(e) => (e.position().map_or(0, |p| p.line()), Err(e.to_string())),
        };
        match parsed {
            Ok(q) => quotes.push(q),
            Err(msg) => errors.push(RowError { line, msg }),
        }
    }
    Ok((quotes, errors))
}

/// Reads every `*.csv` under `path` (or the single file) and returns all
/// quotes, sorted by trade date, expiry, kind and strike.
pub fn load_quotes(path: impl AsRef<Path>) -> Result<(Vec<OptionQuote>, Vec<RowError>)> {
    let path = path.as_ref();
    let mut files = Vec::new();
    if path.is_dir() {
        let entries = std::fs::read_dir(path).map_err(|e| Error::io(path, e))?;
        for entry in entries {
            let p = entry.map_err(|e| Error::io(path, e))?.path();
            if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    let mut quotes = Vec::new();
    let mut errors = Vec::new();
    for f in files {
        let file = std::fs::File::open(&f).map_err(|e| Error::io(&f, e))?;
        let (q, e) = read_quotes(file)?;
        quotes.extend(q);
        errors.extend(e);
    }
    quotes.sort_by(|a, b| {
        (a.trade_date, a.expiry)
            .cmp(&(b.trade_date, b.expiry))
            .then((a.kind == OptionKind::Put).cmp(&(b.kind == OptionKind::Put)))
            .then(a.strike.total_cmp(&b.strike))
    });
    Ok((quotes, errors))
}

/// Drops zero-bid quotes and expiries closer than the minimum. Idempotent.
pub fn filter_quotes(quotes: &[OptionQuote], conv: &Conventions) -> Vec<OptionQuote> {
    quotes
        .iter()
        .filter(|q| q.bid > 0.0 && q.days_to_expiry() >= conv.min_expiry_days)
        .copied()
        .collect()
}

/// Distinct trade dates present in `quotes`, increasing.
pub fn trade_dates(quotes: &[OptionQuote]) -> Vec<NaiveDate> {
    let mut d: Vec<NaiveDate> = quotes.iter().map(|q| q.trade_date).collect();
    d.sort();
    d.dedup();
    d
}

/// Filters the quotes of `trade_date`, groups them by expiry and fits
/// parity on every slice that allows it. Slices with fewer than two paired
/// strikes are kept with `fit = None`.
pub fn surface_from_quotes(quotes: &[OptionQuote], trade_date: NaiveDate) -> Surface {
    let conv = conventions::global();
    let day: Vec<OptionQuote> = quotes
        .iter()
        .filter(|q| q.trade_date == trade_date)
        .copied()
        .collect();
    let kept = filter_quotes(&day, conv);
    let mut expiries: Vec<NaiveDate> = kept.iter().map(|q| q.expiry).collect();
    expiries.sort();
    expiries.dedup();
    let slices = expiries
        .into_iter()
        .map(|e| {
            let qs = kept.iter().filter(|q| q.expiry == e).copied().collect();
            let mut s = QuoteSlice::new(trade_date, e, qs);
            if let Err(err) = s.fit_parity() {
                log::warn!("{trade_date} expiry {e}: {err}");
            }
            s
        })
        .collect();
    Surface { trade_date, slices }
}

/// Loads one trade date from a file or directory of quote CSVs.
pub fn load_surface(
    path: impl AsRef<Path>,
    trade_date: NaiveDate,
) -> Result<(Surface, Vec<RowError>)> {
    let (quotes, errors) = load_quotes(path)?;
    Ok((surface_from_quotes(&quotes, trade_date), errors))
}

/// Profile objective of the parity fit: for discount factor `d` the best
/// futures price is `F = ȳ/d + K̄`, with `y = C - P`.
fn parity_profile(pairs: &[(f64, f64, f64)], d: f64) -> (f64, f64) {
    let n = pairs.len() as f64;
    let ybar = pairs.iter().map(|p| p.1 - p.2).sum::<f64>() / n;
    let kbar = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let f = ybar / d + kbar;
    let sse = pairs
        .iter()
        .map(|&(k, c, p)| (c - p - d * (f - k)).powi(2))
        .sum();
    (f, sse)
}

/// Least-squares `(r, F)` from `C - P = e^{-rT}(F - K)` over paired mids.
///
/// The model is linear in `(e^{-rT}, e^{-rT}F)`, so the unconstrained
/// optimum is a closed-form regression. When that rate falls outside
/// [`RATE_BOUNDS`], a golden-section search on the profiled objective finds
/// the constrained optimum.
pub fn fit_rate_future(slice: &QuoteSlice) -> Result<ParityFit> {
    let pairs = slice.paired_mids();
    if pairs.len() < 2 {
        return Err(Error::Underdetermined(pairs.len()));
    }
    let t = slice.maturity;
    if !(t > 0.0) {
        return Err(Error::domain(format!("maturity {t} must be positive")));
    }
    let n = pairs.len() as f64;
    let kbar = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = pairs.iter().map(|p| p.1 - p.2).sum::<f64>() / n;
    let (sxy, sxx) = pairs.iter().fold((0.0, 0.0), |(sxy, sxx), &(k, c, p)| {
        let dk = k - kbar;
        (sxy + dk * (c - p - ybar), sxx + dk * dk)
    });
    let d = -sxy / sxx;
    let r = -d.ln() / t;
    let (lo, hi) = RATE_BOUNDS;
    let r = if d > 0.0 && (lo..=hi).contains(&r) {
        r
    } else {
        golden_section(|r| parity_profile(&pairs, (-r * t).exp()).1, lo, hi, 1e-12).0
    };
    let (forward, sse) = parity_profile(&pairs, (-r * t).exp());
    if !(forward > 0.0) {
        return Err(Error::domain(format!(
            "parity fit for {} gives non-positive futures price {forward}",
            slice.expiry
        )));
    }
    Ok(ParityFit {
        r,
        forward,
        sse,
        pairs: pairs.len(),
    })
}

/// Calls with `lo <= K / F <= hi`.
pub fn moneyness_window(slice: &QuoteSlice, lo: f64, hi: f64) -> Result<Vec<OptionQuote>> {
    let f = slice.fitted()?.forward;
    Ok(slice
        .calls()
        .filter(|q| {
            let m = q.strike / f;
            m >= lo && m <= hi
        })
        .copied()
        .collect())
}

/// Stripped `ξ_0` of one expiry with its tail-coverage flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripResult {
    /// Decimal variance.
    pub xi0: f64,
    pub forward: f64,
    /// No OTM put below the futures price: the left tail is missing.
    pub missing_puts: bool,
    /// No OTM call above the futures price: the right tail is missing.
    pub missing_calls: bool,
}

/// `E[VIX_T²] = F² + 2∫₀^F P dK + 2∫_F^∞ C dK`, with undiscounted mids and
/// a trapezoid rule over the merged OTM strikes (puts below `F`, calls
/// above, their average at `F`), truncated at the outermost quotes.
/// Returned in decimal variance.
pub fn strip_forward_variance(slice: &QuoteSlice) -> Result<StripResult> {
    let fit = slice.fitted()?;
    let f = fit.forward;
    let grow = (fit.r * slice.maturity).exp();
    let calls = averaged_mids(slice.calls());
    let puts = averaged_mids(slice.puts());
    let mut otm: Vec<(f64, f64)> = puts.iter().filter(|p| p.0 < f).copied().collect();
    let at_c = calls.iter().find(|c| c.0 == f);
    let at_p = puts.iter().find(|p| p.0 == f);
    match (at_c, at_p) {
        (Some(c), Some(p)) => otm.push((f, 0.5 * (c.1 + p.1))),
        (Some(q), None) | (None, Some(q)) => otm.push(*q),
        (None, None) => {}
    }
    otm.extend(calls.iter().filter(|c| c.0 > f).copied());
    let missing_puts = !puts.iter().any(|p| p.0 < f);
    let missing_calls = !calls.iter().any(|c| c.0 > f);
    if missing_puts || missing_calls {
        log::warn!(
            "expiry {}: strip lacks OTM {}; tail truncated",
            slice.expiry,
            if missing_puts { "puts" } else { "calls" }
        );
    }
    let integral: f64 = otm
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * grow)
        .sum();
    Ok(StripResult {
        xi0: (f * f + 2.0 * integral) / VIX_SCALE,
        forward: f,
        missing_puts,
        missing_calls,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrippedPoint {
    pub expiry: NaiveDate,
    pub expiry_days: i64,
    pub maturity: f64,
    pub xi0: f64,
    pub missing_puts: bool,
    pub missing_calls: bool,
}

/// Per-expiry stripped `ξ_0` anchors of one trade date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrippedCurve {
    pub trade_date: NaiveDate,
    pub points: Vec<StrippedPoint>,
}

impl StrippedCurve {
    /// Strips every fitted slice; unfitted slices are skipped.
    pub fn from_surface(surface: &Surface) -> Result<Self> {
        let mut points = Vec::new();
        for s in surface.slices.iter().filter(|s| s.fit.is_some()) {
            let r = strip_forward_variance(s)?;
            if !(r.xi0 > 0.0) {
                return Err(Error::domain(format!("stripped xi0 {} <= 0", r.xi0)));
            }
            points.push(StrippedPoint {
                expiry: s.expiry,
                expiry_days: s.days_to_expiry(),
                maturity: s.maturity,
                xi0: r.xi0,
                missing_puts: r.missing_puts,
                missing_calls: r.missing_calls,
            });
        }
        Ok(Self {
            trade_date: surface.trade_date,
            points,
        })
    }

    /// Linear interpolation between anchors, flat outside.
    pub fn interpolate(&self, t: f64) -> Option<f64> {
        let p = &self.points;
        let first = p.first()?;
        let last = p.last()?;
        if t <= first.maturity {
            return Some(first.xi0);
        }
        if t >= last.maturity {
            return Some(last.xi0);
        }
        let i = p.partition_point(|q| q.maturity <= t);
        let (a, b) = (&p[i - 1], &p[i]);
        let w = (t - a.maturity) / (b.maturity - a.maturity);
        Some(a.xi0 + w * (b.xi0 - a.xi0))
    }

    /// Bucket-constant pricing curve, see [`ForwardVarianceCurve::from_anchors`].
    pub fn to_forward_curve(&self) -> Result<ForwardVarianceCurve> {
        let anchors: Vec<(f64, f64)> = self.points.iter().map(|p| (p.maturity, p.xi0)).collect();
        ForwardVarianceCurve::from_anchors(&anchors)
    }

    /// `expiry_days,maturity,xi0,missing_puts,missing_calls`.
    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "expiry_days",
            "maturity",
            "xi0",
            "missing_puts",
            "missing_calls",
        ])?;
        for p in &self.points {
            w.write_record([
                p.expiry_days.to_string(),
                fmt_f64(p.maturity),
                fmt_f64(p.xi0),
                p.missing_puts.to_string(),
                p.missing_calls.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn parity_slice(r: f64, f: f64, strikes: &[f64], days: i64) -> QuoteSlice {
        let td = d("2024-01-02");
        let ex = td + chrono::Days::new(days as u64);
        let t = days as f64 / 365.0;
        let df = (-r * t).exp();
        let mut quotes = Vec::new();
        for &k in strikes {
            // time value keeps both mids positive
            let p = 0.5 + 0.1 * k;
            let c = p + df * (f - k);
            for (kind, m) in [(OptionKind::Call, c), (OptionKind::Put, p)] {
                quotes.push(OptionQuote {
                    trade_date: td,
                    expiry: ex,
                    kind,
                    strike: k,
                    bid: m,
                    ask: m,
                });
            }
        }
        QuoteSlice::new(td, ex, quotes)
    }

    #[test]
    fn parity_recovers_rate_and_future() {
        let s = parity_slice(0.05, 16.0, &[12.0, 14.0, 16.0, 18.0, 20.0, 25.0], 60);
        let fit = fit_rate_future(&s).unwrap();
        assert!((fit.r - 0.05).abs() < 1e-8);
        assert!((fit.forward - 16.0).abs() < 1e-8);

        let s = parity_slice(0.0, 17.5, &[15.0, 20.0], 30);
        let fit = fit_rate_future(&s).unwrap();
        let mean: f64 = s
            .paired_mids()
            .iter()
            .map(|(k, c, p)| c - p + k)
            .sum::<f64>()
            / 2.0;
        assert!((fit.forward - mean).abs() < 1e-12);
    }

    #[test]
    fn out_of_bounds_rate_is_clipped() {
        let s = parity_slice(0.4, 16.0, &[12.0, 16.0, 20.0], 90);
        let fit = fit_rate_future(&s).unwrap();
        assert!((fit.r - RATE_BOUNDS.1).abs() < 1e-9);
    }

    #[test]
    fn parity_needs_two_pairs() {
        let s = parity_slice(0.0, 16.0, &[15.0], 30);
        assert!(matches!(
            fit_rate_future(&s),
            Err(Error::Underdetermined(1))
        ));
    }

    #[test]
    fn moneyness_window_is_closed() {
        let mut s = parity_slice(0.0, 16.0, &[14.0, 14.4, 32.0, 33.0], 30);
        s.fit_parity().unwrap();
        let ks: Vec<f64> = moneyness_window(&s, 0.9, 2.0)
            .unwrap()
            .iter()
            .map(|q| q.strike)
            .collect();
        assert_eq!(ks.len(), 2);
        assert!((ks[0] - 14.4).abs() < 1e-9 && (ks[1] - 32.0).abs() < 1e-9);
    }

    #[test]
    fn zero_vol_strip_is_forward_squared() {
        let td = d("2024-01-02");
        let ex = d("2024-02-14");
        let f = 16.0;
        let mut quotes = Vec::new();
        for k in [10.0_f64, 12.0, 14.0, 18.0, 20.0] {
            let intrinsic = (f - k).max(0.0);
            quotes.push(OptionQuote {
                trade_date: td,
                expiry: ex,
                kind: OptionKind::Call,
                strike: k,
                bid: intrinsic,
                ask: intrinsic,
            });
            quotes.push(OptionQuote {
                trade_date: td,
                expiry: ex,
                kind: OptionKind::Put,
                strike: k,
                bid: (k - f).max(0.0),
                ask: (k - f).max(0.0),
            });
        }
        let mut s = QuoteSlice::new(td, ex, quotes);
        let fit = s.fit_parity().unwrap();
        assert!(fit.r.abs() < 1e-10);
        let st = strip_forward_variance(&s).unwrap();
        assert!((st.xi0 - f * f / 1e4).abs() < 1e-12);
        assert!(!st.missing_puts && !st.missing_calls);
    }

    #[test]
    fn csv_rows_filters_and_errors() {
        let text = "trade_date,expiry,kind,strike,bid,ask\n\
            2024-01-02,2024-02-14,call,15,1.0,1.1\n\
            2024-01-02,2024-02-14,put,15,0.0,0.1\n\
            2024-01-02,2024-01-07,call,15,1.0,1.1\n\
            2024-01-02,2024-02-14,call,abc,1.0,1.1\n\
            2024-01-02,2024-02-14,put,16,1.2,1.1\n";
        let (quotes, errors) = read_quotes(text.as_bytes()).unwrap();
        assert_eq!(quotes.len(), 3);
        assert_eq!(errors.len(), 2);
        assert_eq!(errors[0].line, 5);
        let conv = Conventions::default();
        let kept = filter_quotes(&quotes, &conv);
        assert_eq!(kept.len(), 1);
        assert_eq!(filter_quotes(&kept, &conv), kept);

        let (quotes, errors) =
            read_quotes("trade_date,expiry,kind,strike,bid,ask\n".as_bytes()).unwrap();
        assert!(quotes.is_empty() && errors.is_empty());
        let s = surface_from_quotes(&quotes, d("2024-01-02"));
        assert!(s.slices.is_empty());
    }

    #[test]
    fn interpolation_and_buckets() {
        let c = StrippedCurve {
            trade_date: d("2024-01-02"),
            points: vec![
                StrippedPoint {
                    expiry: d("2024-01-17"),
                    expiry_days: 15,
                    maturity: 15.0 / 365.0,
                    xi0: 0.02,
                    missing_puts: false,
                    missing_calls: false,
                },
                StrippedPoint {
                    expiry: d("2024-02-14"),
                    expiry_days: 43,
                    maturity: 43.0 / 365.0,
                    xi0: 0.03,
                    missing_puts: false,
                    missing_calls: false,
                },
            ],
        };
        let mid = 0.5 * (15.0 + 43.0) / 365.0;
        assert!((c.interpolate(mid).unwrap() - 0.025).abs() < 1e-15);
        let curve = c.to_forward_curve().unwrap();
        assert_eq!(curve.lookup(20.0 / 365.0).unwrap(), 0.02);
        assert_eq!(curve.lookup(43.0 / 365.0).unwrap(), 0.03);
        assert!(curve.covers(43.0 / 365.0, 73.0 / 365.0));
    }
}
