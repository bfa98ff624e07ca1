//! Subcommand bodies. Every file is written atomically once its content is
//! complete.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mixvix::calibration::{
    calibrate_surface, CalibrationConfig, MarketSlice, ModelKind, SliceFailure,
};
use mixvix::marketdata::{
    load_quotes, load_surface, surface_from_quotes, trade_dates, RowError, StrippedCurve, Surface,
};
use mixvix::models::{ForwardVarianceCurve, ModelParams, VarianceUnits};
use mixvix::oracle::{self, BenchConfig, Workload};
use mixvix::output::{fmt_f64, write_atomic};
use mixvix::pricing::{implied_vol, slice_xi0, OptionKind, Payoff, QuantisedSlice};
use mixvix::quantiser::{
    build_gaussian_1d, build_gaussian_2d, load_grid, save_grid, GridCache, QuantiserGrid,
    DEFAULT_N_1D, DEFAULT_N_2D, TOL_1D, TOL_2D,
};
use mixvix::stability::{run_stability_test, Metric, StabilityConfig, StabilityTest};
use serde::Serialize;

use crate::config::{require_exists, RunConfig};
use crate::{
    BenchArgs, CalibrateArgs, CliError, PriceArgs, QuantiserArgs, StabilityArgs, StripArgs,
};

type Result<T> = std::result::Result<T, CliError>;

/// Writes to `path`, or to stdout when there is none.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => Ok(write_atomic(p, bytes)?),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Input(format!("<stdout>: {e}"))),
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| CliError::Input(e.to_string()))
}

fn json_bytes(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn model_grid(config: &RunConfig, kind: ModelKind) -> Result<Arc<QuantiserGrid>> {
    let cache = GridCache::new(&config.cache_dir);
    Ok(cache.gaussian(kind.factors(), kind.grid_size(), config.seed)?)
}

fn warn_rows(errors: &[RowError]) {
    for e in errors.iter().take(20) {
        log::warn!("quote row {}: {}", e.line, e.msg);
    }
    if errors.len() > 20 {
        log::warn!("{} malformed quote rows in total", errors.len());
    }
}

pub fn quantiser(config: &RunConfig, a: QuantiserArgs) -> Result<()> {
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let dim = a.dim as usize;
    let seed = config.seed;
    let grid = match dim {
        1 => build_gaussian_1d(a.n, a.tol.unwrap_or(TOL_1D))?,
        _ => build_gaussian_2d(a.n, a.tol.unwrap_or(TOL_2D), seed)?,
    };
    let out = a
        .out
        .unwrap_or_else(|| GridCache::new(&config.cache_dir).path_for(dim, a.n, seed));
    save_grid(&grid, &out)?;
    println!(
        "dim={dim} n={} distortion={} path={}",
        grid.len(),
        fmt_f64(grid.distortion()),
        out.display()
    );
    Ok(())
}

/// Reads `start,end,xi0` buckets or `maturity,xi0` anchors (the strip
/// output), in decimal variance.
fn read_curve(path: &Path) -> Result<ForwardVarianceCurve> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let bad =
        |line: usize, msg: String| CliError::Input(format!("{}:{line}: {msg}", path.display()));
    let num = |rec: &csv::StringRecord, i: usize, line: usize| -> Result<f64> {
        let s = rec.get(i).unwrap_or("").trim();
        s.parse()
            .map_err(|_| bad(line, format!("not a number: {s:?}")))
    };
    let xi0 = col("xi0").ok_or_else(|| bad(1, "missing xi0 column".into()))?;
    let records: Vec<csv::StringRecord> = r.records().collect::<std::result::Result<_, _>>()?;
    let curve = match (col("start"), col("end"), col("maturity")) {
        (Some(s), Some(e), _) => {
            let buckets = records
                .iter()
                .enumerate()
                .map(|(i, rec)| {
                    Ok((
                        num(rec, s, i + 2)?,
                        num(rec, e, i + 2)?,
                        num(rec, xi0, i + 2)?,
                    ))
                })
                .collect::<Result<_>>()?;
            ForwardVarianceCurve::new(buckets, VarianceUnits::Decimal)
        }
        (_, _, Some(m)) => {
            let mut anchors = records
                .iter()
                .enumerate()
                .map(|(i, rec)| Ok((num(rec, m, i + 2)?, num(rec, xi0, i + 2)?)))
                .collect::<Result<Vec<_>>>()?;
            anchors.sort_by(|a, b| a.0.total_cmp(&b.0));
            ForwardVarianceCurve::from_anchors(&anchors)
        }
        _ => return Err(bad(1, "need start,end,xi0 or maturity,xi0 columns".into())),
    };
    curve.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn price(config: &RunConfig, a: PriceArgs) -> Result<()> {
    for p in [&a.params, &a.curve].into_iter().chain(a.grid.as_ref()) {
        require_exists(p)?;
    }
    let text = std::fs::read_to_string(&a.params)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.params.display())))?;
    let params: ModelParams = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.params.display())))?;
    params.validate()?;
    let curve = read_curve(&a.curve)?;
    let grid = match &a.grid {
        Some(path) => Arc::new(load_grid(path)?),
        None => {
            let n = if params.factors() == 1 {
                DEFAULT_N_1D
            } else {
                DEFAULT_N_2D
            };
            GridCache::new(&config.cache_dir).gaussian(params.factors(), n, config.seed)?
        }
    };
    let mut rows = Vec::new();
    for &t in &a.maturities {
        let states =
            QuantisedSlice::new(&params, &grid, t)?.states(&params, slice_xi0(&curve, t)?)?;
        let f = states.price(Payoff::Future, a.rate);
        rows.push(vec![
            fmt_f64(t),
            String::new(),
            "future".into(),
            fmt_f64(f),
            String::new(),
        ]);
        for &k in &a.strikes {
            for kind in [OptionKind::Call, OptionKind::Put] {
                let payoff = Payoff::option(kind, k);
                let p = states.price(payoff, a.rate);
                let iv = match implied_vol(p, f, k, a.rate, t, kind) {
                    Ok(v) => fmt_f64(v),
                    Err(e) => {
                        log::warn!("T={t} K={k} {}: {e}", payoff.label());
                        String::new()
                    }
                };
                rows.push(vec![
                    fmt_f64(t),
                    fmt_f64(k),
                    payoff.label().into(),
                    fmt_f64(p),
                    iv,
                ]);
            }
        }
    }
    let bytes = csv_bytes(
        &["maturity", "strike", "kind", "price", "implied_vol"],
        rows,
    )?;
    emit(a.out.as_deref(), &bytes)
}

pub fn bench(config: &RunConfig, a: BenchArgs) -> Result<()> {
    let kind = config.model(a.model)?;
    let params = match kind {
        ModelKind::OneFactor => ModelParams::OneFactor(oracle::reference_one_factor()),
        ModelKind::TwoFactor => ModelParams::TwoFactor(oracle::reference_two_factor()),
    };
    let grid = model_grid(config, kind)?;
    let workload = Workload::reference(params)?;
    let report = oracle::bench(
        &workload,
        &grid,
        &BenchConfig {
            repetitions: a.repetitions.max(1),
            ..BenchConfig::default()
        },
    )?;
    let rows = report.rows.iter().map(|r| {
        vec![
            r.method.label().into(),
            kind.label().into(),
            r.item.to_string(),
            r.median_ns.to_string(),
            fmt_f64(r.rel_err_vs_quad),
            fmt_f64(r.maturity),
            r.payoff.label().into(),
            r.payoff.strike().map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.price),
        ]
    });
    let bytes = csv_bytes(
        &[
            "method",
            "model",
            "item",
            "median_ns",
            "rel_err_vs_quad",
            "maturity",
            "kind",
            "strike",
            "price",
        ],
        rows,
    )?;
    emit(a.out.as_deref(), &bytes)?;
    eprintln!(
        "{}: quantisation {} ns, quadrature {} ns, speedup {:.2}",
        kind.label(),
        report.quantisation_ns,
        report.quadrature_ns,
        report.speedup()
    );
    Ok(())
}

fn load_day(
    config: &RunConfig,
    quotes: Option<PathBuf>,
    date: chrono::NaiveDate,
) -> Result<(Surface, Vec<RowError>)> {
    let path = config.quotes(quotes)?;
    let (surface, errors) = load_surface(&path, date)?;
    warn_rows(&errors);
    if surface.slices.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no usable quotes on {date}",
            path.display()
        )));
    }
    Ok((surface, errors))
}

fn calibration_config(config: &RunConfig, kind: ModelKind) -> CalibrationConfig {
    let mut c = CalibrationConfig::new(kind);
    c.seed = config.seed;
    let o = config.calibration;
    if let Some(s) = o.starts {
        c.starts = s;
    }
    if let Some(m) = o.max_evals {
        c.optimiser.max_evals = m;
    }
    if let Some(p) = o.polish_xi0 {
        c.polish_xi0 = p;
    }
    c
}

#[derive(Serialize)]
struct CalibrationDiagnostics<'a> {
    trade_date: chrono::NaiveDate,
    config: &'a CalibrationConfig,
    results: &'a [mixvix::calibration::CalibrationResult],
    failures: &'a [SliceFailure],
    malformed_rows: usize,
}

pub fn calibrate(config: &RunConfig, a: CalibrateArgs) -> Result<()> {
    let kind = config.model(a.model)?;
    let mut cal = calibration_config(config, kind);
    cal.calibrate_xi0 = !a.fix_xi0_from_market;
    cal.validate()?;
    let (surface, row_errors) = load_day(config, a.quotes, a.date)?;
    let grid = model_grid(config, kind)?;

    let mut failures = Vec::new();
    let mut slices = Vec::new();
    for s in &surface.slices {
        match MarketSlice::from_quote_slice(s, cal.moneyness) {
            Ok(m) => slices.push(m),
            Err(e) => failures.push(SliceFailure {
                expiry: s.expiry,
                error: e.to_string(),
            }),
        }
    }
    let mut out = calibrate_surface(&slices, &cal, &grid, true);
    out.failures.extend(failures);
    out.failures.sort_by_key(|f| f.expiry);
    for f in &out.failures {
        log::warn!("expiry {}: {}", f.expiry, f.error);
    }

    let rows = out.results.iter().map(|r| {
        vec![
            r.expiry_days.to_string(),
            fmt_f64(r.params.gamma),
            fmt_f64(r.params.omega1),
            fmt_f64(r.params.omega2),
            fmt_f64(r.params.xi0),
        ]
    });
    let bytes = csv_bytes(&["maturity_days", "gamma", "omega1", "omega2", "xi0"], rows)?;
    let diagnostics = json_bytes(&CalibrationDiagnostics {
        trade_date: a.date,
        config: &cal,
        results: &out.results,
        failures: &out.failures,
        malformed_rows: row_errors.len(),
    })?;
    write_atomic(&a.out, &bytes)?;
    write_atomic(
        &a.diagnostics
            .unwrap_or_else(|| a.out.with_extension("json")),
        &diagnostics,
    )?;
    if out.results.is_empty() {
        return Err(CliError::Input(format!(
            "no expiry on {} could be calibrated",
            a.date
        )));
    }
    Ok(())
}

pub fn strip(config: &RunConfig, a: StripArgs) -> Result<()> {
    let (surface, _) = load_day(config, a.quotes, a.date)?;
    let curve = StrippedCurve::from_surface(&surface)?;
    let mut bytes = Vec::new();
    curve.write_csv(&mut bytes)?;
    let slices = json_bytes(&surface.slices)?;
    write_atomic(&a.out, &bytes)?;
    write_atomic(
        &a.slices.unwrap_or_else(|| a.out.with_extension("json")),
        &slices,
    )?;
    Ok(())
}

pub fn stability(config: &RunConfig, a: StabilityArgs) -> Result<()> {
    let kind = config.model(a.model)?;
    let path = config.quotes(a.quotes)?;
    let (quotes, errors) = load_quotes(&path)?;
    warn_rows(&errors);
    let days: Vec<_> = trade_dates(&quotes)
        .into_iter()
        .filter(|d| *d >= a.start)
        .take(a.horizon + 1)
        .collect();
    let surfaces: Vec<Surface> = days
        .iter()
        .map(|&d| surface_from_quotes(&quotes, d))
        .collect();

    let mut sc = StabilityConfig::new(
        StabilityTest::from_id(a.test)?,
        calibration_config(config, kind),
    );
    sc.horizon = a.horizon;
    sc.alignment = a.alignment.into();
    sc.calibration.validate()?;
    let grid = model_grid(config, kind)?;
    let run = run_stability_test(&surfaces, a.start, &sc, &grid)?;

    let rows = run.records.iter().map(|r| {
        vec![
            r.date.to_string(),
            r.lag.to_string(),
            r.expiry_days.to_string(),
            r.metric.label().into(),
            fmt_f64(r.value),
            r.strike.map(fmt_f64).unwrap_or_default(),
        ]
    });
    let long = csv_bytes(
        &["date", "lag", "expiry_days", "metric", "value", "strike"],
        rows,
    )?;

    let mut summary = Vec::new();
    for metric in [Metric::Re, Metric::Arbae, Metric::Rbae] {
        let values = run.values(metric);
        if values.is_empty() {
            continue;
        }
        let all = mixvix::stability::summary_stats(&values)?;
        let lags = run.by_lag(metric)?;
        for (lag, s) in std::iter::once(("all".to_string(), all))
            .chain(lags.into_iter().map(|(l, s)| (l.to_string(), s)))
        {
            summary.push(vec![
                metric.label().into(),
                lag,
                s.count.to_string(),
                fmt_f64(s.mean),
                fmt_f64(s.sd),
                fmt_f64(s.min),
                fmt_f64(s.max),
                fmt_f64(s.p95),
                fmt_f64(s.p99),
            ]);
        }
    }
    let summary = csv_bytes(
        &[
            "metric", "lag", "count", "mean", "sd", "min", "max", "p95", "p99",
        ],
        summary,
    )?;
    write_atomic(&a.out, &long)?;
    write_atomic(
        &a.summary.unwrap_or_else(|| sibling(&a.out, ".summary.csv")),
        &summary,
    )?;
    if run.partial {
        log::warn!(
            "partial run: {} of {} trading days available",
            run.days,
            run.horizon
        );
    }
    Ok(())
}
