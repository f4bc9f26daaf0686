use chrono::{NaiveDate, NaiveDateTime};
use hvtest_core::estimators::{realized_volatility, spot_series, truncated_rv, window_kn};
use hvtest_core::hettest::{decision, SpotAnalysis};
use hvtest_core::normal::{cdf, quantile, sf};
use hvtest_core::pipeline::clean;
use hvtest_core::{BaseModel, ModelSpec, SimGrid, Span, TestVariant, TickRecord, TuningParams};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn variant_path(variant: TestVariant, n: usize, seed: u64) -> Vec<f64> {
    let model = match variant {
        TestVariant::Plain => ModelSpec::new(BaseModel::heston_reference()),
        TestVariant::Truncated => {
            ModelSpec::new(BaseModel::constant_reference()).with_jumps(30.0, 0.5)
        }
        TestVariant::Preaveraged => {
            ModelSpec::new(BaseModel::constant_reference()).with_noise(0.005)
        }
    };
    model
        .simulate(SimGrid::new(n).unwrap(), seed)
        .unwrap()
        .obs()
        .to_vec()
}

fn variant() -> impl Strategy<Value = TestVariant> {
    prop_oneof![
        Just(TestVariant::Plain),
        Just(TestVariant::Truncated),
        Just(TestVariant::Preaveraged)
    ]
}

fn base_time() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2024, 3, 4)
        .unwrap()
        .and_hms_opt(9, 0, 0)
        .unwrap()
}

fn ticks() -> impl Strategy<Value = Vec<TickRecord>> {
    prop::collection::vec((0i64..30_000, -1.0f64..200.0, 0u64..500), 1..300).prop_map(|rows| {
        let mut rows: Vec<TickRecord> = rows
            .into_iter()
            .map(|(secs, price, size)| TickRecord {
                timestamp: base_time() + chrono::Duration::seconds(secs),
                price,
                size,
            })
            .collect();
        rows.sort_by_key(|t| t.timestamp);
        rows
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantile_inverts_cdf(p in 1e-300f64..1.0) {
        let q = quantile(p).unwrap();
        if p < 0.5 {
            prop_assert!(rel(cdf(q), p) < 1e-12, "p={p} q={q}");
        } else {
            prop_assert!(rel(sf(q), 1.0 - p) < 1e-9, "p={p} q={q}");
        }
    }

    #[test]
    fn statistic_is_location_scale_invariant(
        v in variant(),
        seed in any::<u64>(),
        m in -100.0f64..100.0,
        c in 0.01f64..100.0,
    ) {
        let tuning = TuningParams::default();
        let obs = variant_path(v, 2340, seed);
        let moved: Vec<f64> = obs.iter().map(|x| m + c * x).collect();
        let a = SpotAnalysis::compute(&obs, &tuning, v).unwrap().statistic();
        let b = SpotAnalysis::compute(&moved, &tuning, v).unwrap().statistic();
        prop_assert!(rel(a, b) < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn rejection_is_monotone_in_alpha(t in -10.0f64..10.0, a1 in 0.001f64..0.5, a2 in 0.001f64..0.5) {
        let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        if decision(t, lo).unwrap() {
            prop_assert!(decision(t, hi).unwrap());
        }
    }

    #[test]
    fn wide_threshold_keeps_every_increment(seed in any::<u64>(), n in 20usize..400) {
        let obs = variant_path(TestVariant::Truncated, n, seed);
        let max = obs.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        prop_assert_eq!(truncated_rv(&obs, max).unwrap(), realized_volatility(&obs).unwrap());
        let k = window_kn(n, 1.2).unwrap();
        prop_assert_eq!(spot_series(&obs, k, max).unwrap(), spot_series(&obs, k, f64::INFINITY).unwrap());
    }

    #[test]
    fn simulation_is_seeded(seed in any::<u64>(), n in 2usize..500) {
        let model = ModelSpec::new(BaseModel::heston_reference()).with_jumps(10.0, 0.5).with_noise(0.01);
        let g = SimGrid::new(n).unwrap();
        let a = model.simulate(g, seed).unwrap();
        let b = model.simulate(g, seed).unwrap();
        prop_assert_eq!(a.obs(), b.obs());
        prop_assert_eq!(a.obs().len(), n + 1);
        prop_assert!(a.true_spot_var().unwrap().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn cleaning_is_idempotent(rows in ticks()) {
        let session = Span::regular_session();
        let (once, stats) = clean(&rows, session);
        let (twice, _) = clean(&once, session);
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.len() <= stats.input);
        prop_assert!(once.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
        prop_assert!(once.iter().all(|t| t.price > 0.0));
    }
}
