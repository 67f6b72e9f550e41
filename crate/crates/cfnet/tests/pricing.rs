mod common;

use cfnet::charlib::LinearTransform;
use cfnet::gaussnet::{recover_original, NetParams1D};
use cfnet::pricer::*;
use common::*;
use proptest::prelude::*;

const RATE: f64 = 0.05;

fn lt() -> LinearTransform {
    LinearTransform::new(0.6, 0.08).unwrap()
}

/// Exact Merton one-year density in the transformed variable.
fn exact_theta(terms: usize) -> NetParams1D {
    transformed_mixture(&merton_mixture(&merton_params(), 1.0, terms), lt())
}

fn y_window(lo: f64, hi: f64) -> (f64, f64) {
    (lt().forward(lo), lt().forward(hi))
}

fn call(strike: f64) -> PayoffSpec {
    PayoffSpec { kind: OptionKind::Call, strike, convention: Convention::LogReturn { spot: 100.0 } }
}

fn put(strike: f64) -> PayoffSpec {
    PayoffSpec { kind: OptionKind::Put, strike, convention: Convention::LogReturn { spot: 100.0 } }
}

#[test]
fn intervention_lookup_follows_the_floored_dividend_shift() {
    let g = SpatialGrid::new(0.1f64.ln(), 10f64.ln(), 400).unwrap();
    let xs = g.points();
    // Linear continuation values make the interpolated lookup exact.
    let out = intervention(&xs, 1.0, 1e-9, &g);
    for (v, x) in out.iter().zip(&xs) {
        let want = (x.exp() - 1.0).max(0.1).ln().max(0.0);
        assert!((v - want).abs() < 1e-12, "{x} {v} {want}");
    }
    assert!((g.interpolate(&xs, (1.5f64 - 1.0).max(0.1).ln()) - 0.5f64.ln()).abs() < 1e-12);
    assert!((g.interpolate(&xs, (1.05f64 - 1.0).max(0.1).ln()) - 0.1f64.ln()).abs() < 1e-12);
}

#[test]
fn intervention_without_dividend_keeps_dominating_continuation() {
    let g = SpatialGrid::new(100f64.ln() - 10.0, 100f64.ln() + 10.0, 200).unwrap();
    let cont: Vec<f64> = g.points().iter().map(|x| (100.0 - x.exp()).max(0.0) + 0.5).collect();
    assert_eq!(intervention(&cont, 0.0, 100.0, &g), cont);
}

#[test]
fn merton_calls_match_the_closed_form_series() {
    let theta = exact_theta(30);
    let window = y_window(-4.0, 1.0);
    for (strike, want) in [(96.0, 14.83787), (98.0, 13.43922), (100.0, 12.10782), (102.0, 10.84925), (104.0, 9.66805)] {
        let out = price_european(&theta, lt(), &call(strike), RATE, 1.0, window).unwrap();
        assert!(((out.price - want) / want).abs() <= 1e-4, "E={strike}: {} vs {want}", out.price);
    }
}

#[test]
fn unreachable_strike_prices_to_zero() {
    let theta = exact_theta(30);
    let out = price_european(&theta, lt(), &call(1e6), RATE, 1.0, y_window(-4.0, 1.0)).unwrap();
    assert!(out.price.abs() < 1e-12);
}

#[test]
fn narrow_window_raises_a_warning() {
    let theta = exact_theta(30);
    assert!(!price_european(&theta, lt(), &call(100.0), RATE, 1.0, y_window(-12.0, 3.0)).unwrap().window_warning);
    assert!(price_european(&theta, lt(), &call(100.0), RATE, 1.0, y_window(-0.1, 0.1)).unwrap().window_warning);
}

#[test]
fn calls_are_monotone_and_bounded() {
    let theta = exact_theta(30);
    let window = y_window(-12.0, 3.0);
    let forward = price_european(&theta, lt(), &call(1e-12), RATE, 1.0, window).unwrap().price;
    let mut last = f64::INFINITY;
    for k in 0..25 {
        let strike = 60.0 + 3.0 * k as f64;
        let p = price_european(&theta, lt(), &call(strike), RATE, 1.0, window).unwrap().price;
        assert!(p <= last + 1e-12 && p >= 0.0 && p <= forward);
        last = p;
    }
    assert!((forward - 100.0).abs() < 1e-6, "{forward}");
}

#[test]
fn transformed_and_recovered_densities_give_the_same_price() {
    let theta = exact_theta(30);
    let rec = recover_original(&theta, lt());
    for strike in [90.0, 100.0, 110.0] {
        for payoff in [call(strike), put(strike)] {
            let a = price_european(&theta, lt(), &payoff, RATE, 1.0, y_window(-12.0, 3.0)).unwrap().price;
            let b = price_with_density(|x| rec.eval(x), &payoff, RATE, 1.0, (-12.0, 3.0)).unwrap();
            assert!((a - b).abs() <= 1e-8, "{a} {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn transform_consistency_for_random_networks(seed in 0u64..1000, scale in 0.3f64..2.0, shift in -0.5f64..0.5) {
        let raw = random_theta(&mut seeded(seed), 4);
        let t = LinearTransform::new(scale, shift).unwrap();
        let theta = transformed_mixture(&raw, t);
        let rec = recover_original(&theta, t);
        let payoff = call(100.0);
        let a = price_european(&theta, t, &payoff, RATE, 1.0, (t.forward(-8.0), t.forward(8.0))).unwrap().price;
        let b = price_with_density(|x| rec.eval(x), &payoff, RATE, 1.0, (-8.0, 8.0)).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{} {}", a, b);
    }
}

fn bermudan(dates: usize, dividend: f64, q: usize) -> BermudanOutcome {
    let theta = exact_theta(12);
    let spec = BermudanSpec { strike: 100.0, dividend, rate: RATE, step: 1.0, dates, spot: 100.0 };
    let grid = SpatialGrid::new(100f64.ln() - 10.0, 100f64.ln() + 10.0, q).unwrap();
    price_bermudan(&theta, lt(), &spec, &grid, y_window(-12.0, 3.0)).unwrap()
}

#[test]
fn single_date_bermudan_is_the_european_put() {
    let b = bermudan(1, 0.0, 200).price;
    let e = price_european(&exact_theta(12), lt(), &put(100.0), RATE, 1.0, y_window(-12.0, 3.0)).unwrap().price;
    assert!((b - e).abs() <= 1e-8, "{b} {e}");
}

#[test]
fn bermudan_put_is_non_decreasing_in_strike() {
    let theta = exact_theta(12);
    let grid = SpatialGrid::new(100f64.ln() - 10.0, 100f64.ln() + 10.0, 400).unwrap();
    let prices: Vec<f64> = [96.0, 100.0, 104.0]
        .iter()
        .map(|&strike| {
            let spec = BermudanSpec { strike, dividend: 1.0, rate: RATE, step: 1.0, dates: 10, spot: 100.0 };
            price_bermudan(&theta, lt(), &spec, &grid, y_window(-12.0, 3.0)).unwrap().price
        })
        .collect();
    assert!(prices.windows(2).all(|w| w[1] >= w[0]), "{prices:?}");
}

#[test]
fn early_exercise_is_worth_at_least_the_european_put() {
    let ten_year = merton_mixture(&merton_params(), 10.0, 20);
    let euro = price_with_density(|x| ten_year.eval_density(x), &put(100.0), RATE, 10.0, (-25.0, 8.0)).unwrap();
    let berm = bermudan(10, 0.0, 800).price;
    assert!(berm >= euro, "{berm} < {euro}");
}

#[test]
fn ten_year_dividend_put_converges_to_the_benchmark() {
    let runs: Vec<(usize, f64)> = [200, 400, 800, 1600, 3200].iter().map(|&q| (q, bermudan(10, 1.0, q).price)).collect();
    let table = convergence_table(&runs);
    let finest = table.last().unwrap().price;
    assert!((finest - 24.7807).abs() <= 5e-3, "{table:?}");
    let changes: Vec<f64> = table.iter().filter_map(|r| r.change).collect();
    assert!(changes[3] < changes[0], "{table:?}");
}

#[test]
fn convergence_table_from_published_prices() {
    let rows = convergence_table(&[(200, 24.8323), (400, 24.7903), (800, 24.7838), (1600, 24.7812), (3200, 24.7806)]);
    assert!(rows[0].change.is_none() && rows[1].ratio.is_none());
    assert!((rows[1].change.unwrap() - 4.2e-2).abs() < 1e-9);
    assert!((rows[2].change.unwrap() - 6.5e-3).abs() < 1e-9);
    assert!((rows[2].ratio.unwrap() - 0.042 / 0.0065).abs() < 1e-6);
}

#[test]
fn constant_prices_have_zero_changes_and_no_ratios() {
    let rows = convergence_table(&[(200, 1.0), (400, 1.0), (800, 1.0)]);
    assert_eq!(rows.iter().filter_map(|r| r.change).collect::<Vec<_>>(), vec![0.0, 0.0]);
    assert!(rows.iter().all(|r| r.ratio.is_none()));
}

#[test]
fn invalid_inputs_are_rejected() {
    let theta = exact_theta(5);
    assert!(price_european(&theta, lt(), &call(-1.0), RATE, 1.0, (-1.0, 1.0)).is_err());
    assert!(price_european(&theta, lt(), &call(100.0), RATE, 1.0, (1.0, -1.0)).is_err());
    assert!(SpatialGrid::new(1.0, 0.0, 10).is_err());
    assert!(SpatialGrid::new(0.0, 1.0, 1).is_err());
    let grid = SpatialGrid::new(-1.0, 1.0, 10).unwrap();
    let spec = BermudanSpec { strike: 100.0, dividend: -1.0, rate: RATE, step: 1.0, dates: 3, spot: 100.0 };
    assert!(price_bermudan(&theta, lt(), &spec, &grid, (-1.0, 1.0)).is_err());
}
