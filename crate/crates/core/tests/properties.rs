//! Property tests for the model, pricing, market-data, calibration and
//! stability invariants.

use std::sync::{Arc, OnceLock};

use chrono::NaiveDate;
use mixvix::calibration::{objective, CorridorQuote, SliceParams};
use mixvix::conventions::Conventions;
use mixvix::marketdata::{filter_quotes, OptionQuote, QuoteSlice};
use mixvix::models::{
    chi, cross_variances, h_factor, mixed_f_one, mixed_f_two, ModelParams, OneFactorParams,
    TwoFactorParams,
};
use mixvix::pricing::{OptionKind, Payoff, QuantisedSlice, VixStateValues};
use mixvix::quantiser::{GridCache, QuantiserGrid};
use mixvix::stability::{arbae, moving_average, rbae};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid(dim: usize) -> Arc<QuantiserGrid> {
    static GRIDS: OnceLock<(Arc<QuantiserGrid>, Arc<QuantiserGrid>)> = OnceLock::new();
    let (one, two) = GRIDS.get_or_init(|| {
        let cache = GridCache::default();
        (
            cache.gaussian_1d(100).unwrap(),
            cache.gaussian_2d(100, 42).unwrap(),
        )
    });
    if dim == 1 {
        one.clone()
    } else {
        two.clone()
    }
}

fn one_factor() -> impl Strategy<Value = OneFactorParams> {
    (0.1..5.0f64, 0.0..=1.0f64, 0.0..10.0f64, 0.0..3.0f64).prop_map(|(k, gamma, omega1, omega2)| {
        OneFactorParams {
            k,
            gamma,
            omega1,
            omega2,
        }
    })
}

fn two_factor() -> impl Strategy<Value = TwoFactorParams> {
    (
        1.0..10.0f64,
        0.05..1.0f64,
        0.0..=1.0f64,
        -0.9..0.95f64,
        0.0..=1.0f64,
        0.0..10.0f64,
        0.0..3.0f64,
    )
        .prop_map(
            |(k1, k2, theta, rho, gamma, omega1, omega2)| TwoFactorParams {
                k1,
                k2,
                theta,
                rho,
                gamma,
                omega1,
                omega2,
            },
        )
}

fn states(params: ModelParams, maturity: f64, xi0: f64) -> VixStateValues {
    QuantisedSlice::new(&params, &grid(params.factors()), maturity)
        .unwrap()
        .states(&params, xi0)
        .unwrap()
}

fn model() -> impl Strategy<Value = ModelParams> {
    prop_oneof![
        one_factor().prop_map(ModelParams::OneFactor),
        two_factor().prop_map(ModelParams::TwoFactor),
    ]
}

fn date(d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 3, d).unwrap()
}

/// A parity-consistent call/put pair on each strike.
fn parity_quotes(forward: f64, r: f64, maturity_days: u32, strikes: &[f64]) -> Vec<OptionQuote> {
    let t = maturity_days as f64 / 365.0;
    let d = (-r * t).exp();
    let mut out = Vec::new();
    for &k in strikes {
        let put = 1.0 + 0.05 * k;
        let call = put + d * (forward - k);
        for (kind, mid) in [(OptionKind::Call, call), (OptionKind::Put, put)] {
            out.push(OptionQuote {
                trade_date: date(1),
                expiry: date(1 + maturity_days),
                kind,
                strike: k,
                bid: mid - 0.05,
                ask: mid + 0.05,
            });
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn variances_vanish_at_zero_and_grow_in_t(p in two_factor(), maturity in 0.05..2.0f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (t0, t1) = (a.min(b) * maturity, a.max(b) * maturity);
        prop_assert_eq!(chi(&p, 0.0, maturity).unwrap(), 0.0);
        prop_assert_eq!(h_factor(p.k1, 0.0, maturity).unwrap(), 0.0);
        let (c0, c1) = (chi(&p, t0, maturity).unwrap(), chi(&p, t1, maturity).unwrap());
        prop_assert!(c0 >= 0.0 && c1 >= c0 * (1.0 - 1e-12));
        let (h0, h1) = (h_factor(p.k2, t0, maturity).unwrap(), h_factor(p.k2, t1, maturity).unwrap());
        prop_assert!(h0 >= 0.0 && h1 >= h0 * (1.0 - 1e-12));
    }

    #[test]
    fn factor_correlation_is_bounded(p in two_factor(), t in 1e-4..3.0f64) {
        let (v1, v2, v12) = cross_variances(&p, t).unwrap();
        prop_assert!(v12.abs() <= (v1 * v2).sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn pure_mixtures_collapse_to_one_lognormal(p in one_factor(), x in -3.0..3.0f64, t in 0.01..1.0f64, tau in 0.0..0.5f64) {
        let maturity = t + tau;
        let h = h_factor(p.k, t, maturity).unwrap();
        let lognormal = |w: f64| (w * x - 0.5 * w * w * h).exp();
        let first = OneFactorParams { gamma: 0.0, ..p };
        let second = OneFactorParams { gamma: 1.0, ..p };
        prop_assert!((mixed_f_one(&first, t, maturity, x).unwrap() - lognormal(p.omega1)).abs() <= 1e-12 * lognormal(p.omega1).max(1.0));
        prop_assert!((mixed_f_one(&second, t, maturity, x).unwrap() - lognormal(p.omega2)).abs() <= 1e-12 * lognormal(p.omega2).max(1.0));
    }

    #[test]
    fn single_factor_mix_reduces_to_one_factor(p in two_factor(), x in -3.0..3.0f64, t in 0.01..1.0f64, tau in 0.0..0.5f64) {
        let maturity = t + tau;
        for (theta, k) in [(0.0, p.k1), (1.0, p.k2)] {
            let two = TwoFactorParams { theta, ..p };
            let one = OneFactorParams { k, gamma: p.gamma, omega1: p.omega1, omega2: p.omega2 };
            let a = mixed_f_two(&two, t, maturity, x).unwrap();
            let b = mixed_f_one(&one, t, maturity, x).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * b.max(1.0), "theta {theta}: {a} vs {b}");
        }
    }

    #[test]
    fn quantised_prices_obey_parity_and_bounds(params in model(), maturity in 0.02..1.0f64, xi0 in 0.005..0.1f64, r in -0.02..0.08f64) {
        let s = states(params, maturity, xi0);
        let f = s.price(Payoff::Future, r);
        let vix = || s.values.iter().map(|v| v.sqrt());
        let (lo, hi) = (vix().fold(f64::INFINITY, f64::min), vix().fold(0.0, f64::max));
        prop_assert!(f >= lo * (1.0 - 1e-12) && f <= hi * (1.0 + 1e-12));
        prop_assert!(f <= s.mean_vix_squared().sqrt() * (1.0 + 1e-12));
        let strikes: Vec<f64> = (0..40).map(|i| 0.5 * f + 0.05 * f * i as f64).collect();
        let calls: Vec<f64> = strikes.iter().map(|&k| s.price(Payoff::Call(k), r)).collect();
        let puts: Vec<f64> = strikes.iter().map(|&k| s.price(Payoff::Put(k), r)).collect();
        let d = (-r * maturity).exp();
        for ((k, c), p) in strikes.iter().zip(&calls).zip(&puts) {
            prop_assert!((c - p - d * (f - k)).abs() <= 1e-12 * f.max(1.0));
        }
        let tol = 1e-12 * f;
        for w in calls.windows(2) {
            prop_assert!(w[1] <= w[0] + tol);
        }
        for w in puts.windows(2) {
            prop_assert!(w[1] >= w[0] - tol);
        }
        // equal spacing: second differences are nonnegative
        for w in calls.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -tol);
        }
    }

    #[test]
    fn parity_fit_ignores_order_and_duplicates(forward in 10.0..30.0f64, r in -0.04..0.14f64, days in 14u32..25, seed in any::<u64>()) {
        let strikes: Vec<f64> = (0..8).map(|i| 0.7 * forward + 2.0 * i as f64).collect();
        let quotes = parity_quotes(forward, r, days, &strikes);
        let fit = QuoteSlice::new(date(1), date(1 + days), quotes.clone()).fit_parity().unwrap();
        prop_assert!((fit.forward - forward).abs() <= 1e-8 * forward);
        prop_assert!((fit.r - r).abs() <= 1e-8);

        let mut shuffled = quotes.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let pair = (seed as usize % strikes.len()) * 2;
        shuffled.extend_from_slice(&quotes[pair..pair + 2]);
        let again = QuoteSlice::new(date(1), date(1 + days), shuffled).fit_parity().unwrap();
        prop_assert!((again.forward - fit.forward).abs() <= 1e-10 * forward);
        prop_assert!((again.r - fit.r).abs() <= 1e-10);
    }

    #[test]
    fn load_filters_are_idempotent(bids in prop::collection::vec((0.0..2.0f64, 0.0..1.0f64, 0u32..20), 1..40)) {
        let quotes: Vec<OptionQuote> = bids
            .iter()
            .map(|&(bid, spread, days)| OptionQuote {
                trade_date: date(1),
                expiry: date(1 + days),
                kind: OptionKind::Call,
                strike: 20.0,
                bid: if bid < 0.3 { 0.0 } else { bid },
                ask: bid + spread,
            })
            .collect();
        let conv = Conventions::default();
        let once = filter_quotes(&quotes, &conv);
        prop_assert_eq!(filter_quotes(&once, &conv), once);
    }

    #[test]
    fn objective_is_zero_iff_matched_and_inside(f in 10.0..30.0f64, bump in -0.1..0.1f64, quotes in prop::collection::vec((0.1..5.0f64, 0.0..0.5f64, -0.5..1.5f64), 1..12)) {
        let corridor: Vec<CorridorQuote> = quotes
            .iter()
            .enumerate()
            .map(|(i, &(bid, width, _))| CorridorQuote { strike: 15.0 + i as f64, bid, ask: bid * (1.0 + width) + 1e-3 })
            .collect();
        let model: Vec<f64> = quotes
            .iter()
            .zip(&corridor)
            .map(|(&(_, _, pos), q)| q.bid + pos * (q.ask - q.bid))
            .collect();
        let inside = model.iter().zip(&corridor).all(|(m, q)| *m >= q.bid && *m <= q.ask);
        let value = objective(f, f * (1.0 + bump), &corridor, &model);
        prop_assert!(value >= 0.0);
        prop_assert_eq!(value == 0.0, inside && bump == 0.0);
        let matched = objective(f, f, &corridor, &model);
        prop_assert_eq!(matched == 0.0, inside);
    }

    #[test]
    fn objective_is_symmetric_under_relabelling(params in model(), xi0 in 0.01..0.08f64, maturity in 0.05..0.6f64) {
        let (gamma, omega1, omega2) = params.mixture();
        let p = SliceParams { gamma, omega1, omega2, xi0 };
        let q = SliceParams { gamma: 1.0 - gamma, omega1: omega2, omega2: omega1, xi0 };
        let a = states(p.model(&params), maturity, xi0);
        let b = states(q.model(&params), maturity, xi0);
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
        }
        let (cp, cq) = (p.canonical(), q.canonical());
        prop_assert!((cp.gamma - cq.gamma).abs() <= 1e-15);
        prop_assert_eq!((cp.omega1, cp.omega2, cp.xi0), (cq.omega1, cq.omega2, cq.xi0));
    }

    #[test]
    fn corridor_errors_vanish_exactly_inside(bid in 0.01..10.0f64, width in 0.0..1.0f64, model in 0.0..20.0f64) {
        let ask = bid * (1.0 + width);
        let e = rbae(bid, ask, model);
        prop_assert!(e >= 0.0);
        prop_assert_eq!(e == 0.0, model >= bid && model <= ask);
        // piecewise linear with slope 1/ask above and -1/bid below
        let h = 1e-3;
        if model > ask {
            prop_assert!((rbae(bid, ask, model + h) - e - h / ask).abs() <= 1e-9);
        }
        if model + h < bid {
            prop_assert!((e - rbae(bid, ask, model + h) - h / bid).abs() <= 1e-9);
        }
    }

    #[test]
    fn arbae_is_the_mean_of_rbae(quotes in prop::collection::vec((0.01..10.0f64, 0.0..1.0f64, 0.0..20.0f64), 1..30)) {
        let triples: Vec<(f64, f64, f64)> = quotes.iter().map(|&(b, w, m)| (b, b * (1.0 + w), m)).collect();
        let mean = triples.iter().map(|&(b, a, m)| rbae(b, a, m)).sum::<f64>() / triples.len() as f64;
        prop_assert!((arbae(&triples).unwrap() - mean).abs() <= 1e-12 * mean.max(1.0));
    }

    #[test]
    fn moving_average_commutes_with_scaling(series in prop::collection::vec(-10.0..10.0f64, 1..80), window in 1usize..40, c in -5.0..5.0f64) {
        let scaled: Vec<f64> = series.iter().map(|x| c * x).collect();
        let a = moving_average(&scaled, window).unwrap();
        let b = moving_average(&series, window).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - c * y).abs() <= 1e-9);
        }
    }
}

#[test]
fn flat_curve_futures_decrease_with_maturity() {
    for params in [
        ModelParams::OneFactor(mixvix::oracle::reference_one_factor()),
        ModelParams::TwoFactor(mixvix::oracle::reference_two_factor()),
    ] {
        let futures: Vec<f64> = (1..=10)
            .map(|i| states(params, i as f64 / 12.0, 0.03).price(Payoff::Future, 0.0))
            .collect();
        assert!(futures.windows(2).all(|w| w[1] < w[0]), "{futures:?}");
    }
}
