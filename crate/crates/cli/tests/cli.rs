use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::NaiveDate;
use mixvix::calibration::ModelKind;
use mixvix::quantiser::{default_cache_dir, load_grid, GridCache};
use mixvix::synthetic::{
    stationary_market, synthetic_surface, trading_days, SyntheticOptions, REFERENCE_ROWS,
};
use tempfile::TempDir;

fn mixvix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixvix"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}: {}",
        o.status.code(),
        stderr(o)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 4, 9).unwrap()
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .collect::<Result<_, _>>()
        .unwrap()
}

/// Quote CSV for `days` trading days of a stationary one-factor market with
/// the first `expiries` reference expiries.
fn write_quotes(dir: &Path, days: usize, expiries: usize) -> PathBuf {
    let grid = GridCache::new(default_cache_dir())
        .gaussian(1, ModelKind::OneFactor.grid_size(), 42)
        .unwrap();
    let dates = trading_days(date(), days);
    let template = synthetic_surface(
        ModelKind::OneFactor,
        &REFERENCE_ROWS[..expiries],
        &grid,
        dates[0],
        &SyntheticOptions::default(),
    )
    .unwrap();
    let path = dir.join("quotes.csv");
    let mut w = csv::Writer::from_path(&path).unwrap();
    w.write_record(["trade_date", "expiry", "kind", "strike", "bid", "ask"])
        .unwrap();
    for surface in stationary_market(&template, &dates) {
        for slice in &surface.slices {
            for q in &slice.quotes {
                let kind = serde_json::to_value(q.kind).unwrap();
                w.write_record([
                    q.trade_date.to_string(),
                    q.expiry.to_string(),
                    kind.as_str().unwrap().to_string(),
                    q.strike.to_string(),
                    q.bid.to_string(),
                    q.ask.to_string(),
                ])
                .unwrap();
            }
        }
    }
    w.flush().unwrap();
    path
}

#[test]
fn help_lists_every_subcommand() {
    let o = mixvix(&["--help"]);
    assert_ok(&o);
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in [
        "quantiser",
        "price",
        "bench",
        "calibrate",
        "strip",
        "stability",
    ] {
        assert!(text.contains(cmd), "missing {cmd} in help");
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(mixvix(&["price", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(
        mixvix(&["quantiser", "--dim", "3", "--n", "5"])
            .status
            .code(),
        Some(2)
    );
    let tmp = TempDir::new().unwrap();
    let quotes = write_quotes(tmp.path(), 1, 1);
    let out = tmp.path().join("p.csv");
    let o = mixvix(&[
        "calibrate",
        "--quotes",
        s(&quotes),
        "--date",
        "2024-04-09",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("--model"));
}

#[test]
fn quantiser_writes_a_loadable_grid() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("g.json");
    assert_ok(&mixvix(&[
        "quantiser",
        "--dim",
        "1",
        "--n",
        "50",
        "--out",
        s(&out),
    ]));
    let grid = load_grid(&out).unwrap();
    assert_eq!(grid.len(), 50);
    let mass: f64 = grid.probs().iter().sum();
    assert!((mass - 1.0).abs() < 1e-12);
}

#[test]
fn config_file_sits_below_flags() {
    let tmp = TempDir::new().unwrap();
    let cache = tmp.path().join("cache");
    let config = tmp.path().join("mixvix.toml");
    std::fs::write(
        &config,
        format!(
            "seed = 7\ncache_dir = {:?}\n[conventions]\nwindow_days = -1.0\n",
            s(&cache)
        ),
    )
    .unwrap();
    let c = s(&config);
    let o = mixvix(&["--config", c, "quantiser", "--dim", "2", "--n", "12"]);
    assert_eq!(o.status.code(), Some(2), "file conventions are validated");
    assert_ok(&mixvix(&[
        "--config",
        c,
        "--window-days",
        "30",
        "quantiser",
        "--dim",
        "2",
        "--n",
        "12",
    ]));
    assert_ok(&mixvix(&[
        "--config",
        c,
        "--window-days",
        "30",
        "--seed",
        "9",
        "quantiser",
        "--dim",
        "2",
        "--n",
        "12",
    ]));
    let cache = GridCache::new(&cache);
    assert!(cache.path_for(2, 12, 7).exists());
    assert!(cache.path_for(2, 12, 9).exists());
}

#[test]
fn missing_inputs_exit_one_naming_the_path() {
    let tmp = TempDir::new().unwrap();
    let params = tmp.path().join("params.json");
    std::fs::write(
        &params,
        r#"{"model":"1f","k":1,"gamma":0.5,"omega1":5,"omega2":0.5}"#,
    )
    .unwrap();
    let curve = tmp.path().join("absent.csv");
    let o = mixvix(&[
        "price",
        "--params",
        s(&params),
        "--curve",
        s(&curve),
        "--maturities",
        "0.1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("absent.csv"), "{}", stderr(&o));
}

#[test]
fn price_writes_futures_and_options() {
    let tmp = TempDir::new().unwrap();
    let params = tmp.path().join("params.json");
    std::fs::write(
        &params,
        r#"{"model":"1f","k":1.0,"gamma":0.6,"omega1":5.0,"omega2":0.5}"#,
    )
    .unwrap();
    let curve = tmp.path().join("curve.csv");
    std::fs::write(&curve, "start,end,xi0\n0,1,0.03\n").unwrap();
    let out = tmp.path().join("prices.csv");
    assert_ok(&mixvix(&[
        "price",
        "--params",
        s(&params),
        "--curve",
        s(&curve),
        "--maturities",
        "0.1,0.25",
        "--strikes",
        "15,20",
        "--rate",
        "0.01",
        "--out",
        s(&out),
    ]));
    let rows = read_csv(&out);
    assert_eq!(rows.len(), 2 * (1 + 2 * 2));
    let future: f64 = rows[0][3].parse().unwrap();
    assert_eq!(&rows[0][2], "future");
    assert!(future > 10.0 && future < 100.0 * 0.03f64.sqrt());
    for r in &rows[1..5] {
        let price: f64 = r[3].parse().unwrap();
        let iv: f64 = r[4].parse().unwrap();
        assert!(price > 0.0 && iv > 0.0, "{r:?}");
    }
}

#[test]
fn bench_reports_every_item_for_both_methods() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("bench.csv");
    assert_ok(&mixvix(&[
        "bench",
        "--model",
        "2f",
        "--repetitions",
        "1",
        "--out",
        s(&out),
    ]));
    let rows = read_csv(&out);
    for method in ["quantisation", "quadrature"] {
        assert_eq!(
            rows.iter().filter(|r| &r[0] == method).count(),
            28,
            "{method}"
        );
    }
}

#[test]
fn strip_writes_curve_and_slices() {
    let tmp = TempDir::new().unwrap();
    let quotes = write_quotes(tmp.path(), 1, 3);
    let out = tmp.path().join("curve.csv");
    assert_ok(&mixvix(&[
        "strip",
        "--quotes",
        s(&quotes),
        "--date",
        "2024-04-09",
        "--out",
        s(&out),
    ]));
    let rows = read_csv(&out);
    assert_eq!(rows.len(), 3);
    for (r, row) in rows.iter().zip(&REFERENCE_ROWS) {
        assert_eq!(r[0].parse::<i64>().unwrap(), row.days);
        let xi0: f64 = r[2].parse().unwrap();
        assert!(xi0 > 0.0 && xi0 < 0.1);
    }
    let slices: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(slices.as_array().unwrap().len(), 3);
}

#[test]
fn calibrate_is_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let quotes = write_quotes(tmp.path(), 1, 2);
    let run = |threads: &str| {
        let out = tmp.path().join(format!("params-{threads}.csv"));
        assert_ok(&mixvix(&[
            "--threads",
            threads,
            "calibrate",
            "--quotes",
            s(&quotes),
            "--date",
            "2024-04-09",
            "--model",
            "1f",
            "--out",
            s(&out),
        ]));
        assert!(out.with_extension("json").exists());
        std::fs::read(&out).unwrap()
    };
    let one = run("1");
    assert_eq!(one, run("2"));
    let text = String::from_utf8(one).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for (r, row) in rows.iter().zip(&REFERENCE_ROWS) {
        let gamma: f64 = r[1].parse().unwrap();
        assert!((gamma - row.one_factor.gamma).abs() < 0.05, "{r:?}");
    }
}

#[test]
fn stability_writes_errors_and_summary() {
    let tmp = TempDir::new().unwrap();
    let quotes = write_quotes(tmp.path(), 3, 2);
    let out = tmp.path().join("errors.csv");
    assert_ok(&mixvix(&[
        "stability",
        "--test",
        "4",
        "--quotes",
        s(&quotes),
        "--start",
        "2024-04-09",
        "--model",
        "1f",
        "--horizon",
        "2",
        "--alignment",
        "days-to-expiry",
        "--out",
        s(&out),
    ]));
    let rows = read_csv(&out);
    assert!(!rows.is_empty());
    for r in rows.iter().filter(|r| &r[3] == "RE") {
        let v: f64 = r[4].parse().unwrap();
        assert!(v.abs() < 1e-2, "{r:?}");
    }
    let summary = read_csv(&tmp.path().join("errors.summary.csv"));
    assert!(summary.iter().any(|r| &r[0] == "RE" && &r[1] == "all"));
    assert!(summary.iter().any(|r| &r[0] == "ARBAE" && &r[1] == "0"));
}
