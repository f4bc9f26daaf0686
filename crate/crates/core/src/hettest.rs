//! Tests of constant intraday volatility.
//!
//! Each variant compares localized spot-variance estimates against the
//! matching integrated-variance estimate. Under constant volatility
//!
//! ```text
//! T = √(m/(2n)) Σ_j { r (σ̂²_j − IV̂)² / (2 IV̂²) − 1 }
//! ```
//!
//! is asymptotically standard normal, with `m = r = k_n` for the plain and
//! truncated variants and `m = p_n l_n`, `r = l_n` for the pre-averaged
//! one. Under time-varying volatility `T` diverges to `+∞`, so the test
//! rejects when `T > z_{1−α}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    bipower_variation, compensated_sum, preavg_params, realized_volatility, spot_series,
    threshold_from_bv, truncated_rv, window_kn, DerivedWindows, PreavgBlocks, TuningParams,
};
use crate::normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestVariant {
    Plain,
    Truncated,
    #[serde(alias = "preavg")]
    Preaveraged,
}

impl TestVariant {
    pub const ALL: [TestVariant; 3] = [
        TestVariant::Plain,
        TestVariant::Truncated,
        TestVariant::Preaveraged,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TestVariant::Plain => "plain",
            TestVariant::Truncated => "truncated",
            TestVariant::Preaveraged => "preaveraged",
        }
    }
}

impl fmt::Display for TestVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(TestVariant::Plain),
            "truncated" | "thr" => Ok(TestVariant::Truncated),
            "preaveraged" | "preavg" | "pre" => Ok(TestVariant::Preaveraged),
            other => Err(Error::param(format!("unknown test variant `{other}`"))),
        }
    }
}

/// Result of one test on one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub variant: TestVariant,
    pub n: usize,
    pub statistic: f64,
    pub alpha: f64,
    pub critical: f64,
    pub reject: bool,
    /// `1 − Φ(statistic)`.
    pub p_value: f64,
    pub iv_hat: f64,
    pub block_count: usize,
    pub windows: DerivedWindows,
    #[serde(skip)]
    pub spot_estimates: Vec<f64>,
}

impl TestOutcome {
    /// Re-evaluate the decision at another level without recomputing anything.
    pub fn rejects_at(&self, alpha: f64) -> Result<bool> {
        decision(self.statistic, alpha)
    }
}

/// Spot estimates, their studentizing IV estimate and the window weights.
#[derive(Debug, Clone)]
pub struct SpotAnalysis {
    pub variant: TestVariant,
    pub n: usize,
    pub spots: Vec<f64>,
    pub iv_hat: f64,
    pub windows: DerivedWindows,
    /// Raw increments summarised by one spot block.
    span: usize,
    /// Effective sample size of one spot estimate (`k_n` or `l_n`).
    local: usize,
}

impl SpotAnalysis {
    pub fn compute(obs: &[f64], tuning: &TuningParams, variant: TestVariant) -> Result<Self> {
        tuning.validate()?;
        if obs.len() < 3 {
            return Err(Error::Data(format!(
                "need at least 3 observations, got {}",
                obs.len()
            )));
        }
        let n = obs.len() - 1;
        match variant {
            TestVariant::Plain | TestVariant::Truncated => {
                let k = window_kn(n, tuning.theta)?;
                if k < 2 || 2 * k > n {
                    return Err(Error::config(format!(
                        "spot window k_n = {k} outside [2, n/2] at n = {n}"
                    )));
                }
                let (nu, iv) = if variant == TestVariant::Plain {
                    (None, realized_volatility(obs)?)
                } else {
                    let bv = bipower_variation(obs)?;
                    let nu = threshold_from_bv(bv, n, tuning.varpi, tuning.trunc_mult)?;
                    (Some(nu), truncated_rv(obs, nu)?)
                };
                if !(iv > 0.0) {
                    return Err(Error::degenerate("zero realized volatility"));
                }
                let spots = spot_series(obs, k, nu.unwrap_or(f64::INFINITY))?;
                Ok(Self {
                    variant,
                    n,
                    spots,
                    iv_hat: iv,
                    windows: DerivedWindows {
                        k_n: Some(k),
                        p_n: None,
                        l_n: None,
                        nu_n: nu,
                        phi_n: None,
                    },
                    span: k,
                    local: k,
                })
            }
            TestVariant::Preaveraged => {
                let (p, l) =
                    preavg_params(n, tuning.c_pre, tuning.chi, tuning.a_ker, tuning.b_ker)?;
                let blocks = PreavgBlocks::new(obs, p, l, tuning.weight, tuning.preavg_skip_first)?;
                if blocks.spot_count() == 0 {
                    return Err(Error::config(format!("no complete spot block at n = {n}")));
                }
                let iv = blocks.iv();
                if !(iv > 0.0) {
                    return Err(Error::degenerate("zero pre-averaged realized volatility"));
                }
                Ok(Self {
                    variant,
                    n,
                    spots: blocks.spot_series(),
                    iv_hat: iv,
                    windows: DerivedWindows {
                        k_n: None,
                        p_n: Some(p),
                        l_n: Some(l),
                        nu_n: None,
                        phi_n: Some(blocks.phi_n),
                    },
                    span: p * l,
                    local: l,
                })
            }
        }
    }

    /// Raw increments covered by each spot block.
    pub fn block_span(&self) -> usize {
        self.span
    }

    pub fn statistic(&self) -> f64 {
        let r = self.local as f64;
        let two_iv2 = 2.0 * self.iv_hat * self.iv_hat;
        let sum = compensated_sum(
            self.spots
                .iter()
                .map(|s| r * (s - self.iv_hat).powi(2) / two_iv2 - 1.0),
        );
        (self.span as f64 / (2.0 * self.n as f64)).sqrt() * sum
    }

    /// `(m/n) Σ_j (σ̂²_j − IV̂)²`, the empirical `∫ (σ_s² − IV)² ds`.
    pub fn variation_functional(&self) -> f64 {
        self.span as f64 / self.n as f64
            * compensated_sum(self.spots.iter().map(|s| (s - self.iv_hat).powi(2)))
    }

    pub fn outcome(self, alpha: f64) -> Result<TestOutcome> {
        let statistic = self.statistic();
        let critical = critical_value(alpha)?;
        Ok(TestOutcome {
            variant: self.variant,
            n: self.n,
            statistic,
            alpha,
            critical,
            reject: statistic > critical,
            p_value: normal::sf(statistic),
            iv_hat: self.iv_hat,
            block_count: self.spots.len(),
            windows: self.windows,
            spot_estimates: self.spots,
        })
    }
}

/// `z_{1−α}`.
pub fn critical_value(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!(
            "significance level {alpha} outside (0, 1)"
        )));
    }
    normal::quantile(1.0 - alpha)
}

/// One-sided rejection rule `statistic > z_{1−α}`.
pub fn decision(statistic: f64, alpha: f64) -> Result<bool> {
    Ok(statistic > critical_value(alpha)?)
}

pub fn run_test(
    obs: &[f64],
    tuning: &TuningParams,
    variant: TestVariant,
    alpha: f64,
) -> Result<TestOutcome> {
    critical_value(alpha)?;
    SpotAnalysis::compute(obs, tuning, variant)?.outcome(alpha)
}

/// Plain test: realized volatility against uniform-kernel spot estimates.
pub fn test_continuous(obs: &[f64], tuning: &TuningParams, alpha: f64) -> Result<TestOutcome> {
    run_test(obs, tuning, TestVariant::Plain, alpha)
}

/// Jump-robust test using bipower-calibrated truncation.
pub fn test_truncated(obs: &[f64], tuning: &TuningParams, alpha: f64) -> Result<TestOutcome> {
    run_test(obs, tuning, TestVariant::Truncated, alpha)
}

/// Noise-robust test on non-overlapping pre-averaged increments.
pub fn test_preaveraged(obs: &[f64], tuning: &TuningParams, alpha: f64) -> Result<TestOutcome> {
    run_test(obs, tuning, TestVariant::Preaveraged, alpha)
}

pub fn variation_functional(
    obs: &[f64],
    tuning: &TuningParams,
    variant: TestVariant,
) -> Result<f64> {
    Ok(SpotAnalysis::compute(obs, tuning, variant)?.variation_functional())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{BaseModel, ModelSpec, SimGrid};

    fn linear(n: usize, delta: f64) -> Vec<f64> {
        (0..=n).map(|i| 3.0 + delta * i as f64).collect()
    }

    #[test]
    fn equal_increments_give_closed_form_statistic() {
        let tuning = TuningParams {
            theta: 1.0,
            ..Default::default()
        };
        for delta in [0.01, -0.2, 1.5] {
            let out = test_continuous(&linear(100, delta), &tuning, 0.05).unwrap();
            assert_eq!(out.windows.k_n, Some(10));
            assert_eq!(out.block_count, 10);
            assert!((out.statistic + (10.0f64 / 200.0).sqrt() * 10.0).abs() < 1e-12);
            assert!((out.statistic + 2.236_067_977_499_79).abs() < 1e-12);
            assert!(!out.reject);
            assert_eq!(out.spot_estimates.len(), out.block_count);
            let vf =
                variation_functional(&linear(100, delta), &tuning, TestVariant::Plain).unwrap();
            assert!(vf.abs() < 1e-20);
        }
    }

    #[test]
    fn flat_path_is_degenerate() {
        let flat = vec![4.6; 101];
        for v in TestVariant::ALL {
            let err = run_test(&flat, &TuningParams::default(), v, 0.05).unwrap_err();
            assert!(matches!(err, Error::Degenerate(_)), "{v}: {err}");
        }
    }

    #[test]
    fn truncated_matches_plain_without_large_moves() {
        let g = SimGrid::new(2340).unwrap();
        let spec = ModelSpec::new(BaseModel::constant_reference());
        let tuning = TuningParams::default();
        let mut checked = 0;
        for seed in 0..20 {
            let p = spec.simulate(g, seed).unwrap();
            let nu =
                crate::estimators::truncation_threshold(p.obs(), tuning.varpi, tuning.trunc_mult)
                    .unwrap();
            if p.increments().all(|d| d.abs() <= nu) {
                let a = test_continuous(p.obs(), &tuning, 0.05).unwrap();
                let b = test_truncated(p.obs(), &tuning, 0.05).unwrap();
                assert_eq!(a.statistic.to_bits(), b.statistic.to_bits());
                checked += 1;
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn constant_preaveraged_magnitude_closed_form() {
        // Increments repeat with period p_n and p_n | n, so every
        // pre-averaged value is equal and the spot and IV estimates coincide.
        let n = 1095;
        let t = TuningParams::default();
        let (p, l) = preavg_params(n, t.c_pre, t.chi, t.a_ker, t.b_ker).unwrap();
        let obs: Vec<f64> = (0..=n)
            .map(|i| ((i % p) as f64 * 0.37).sin() * 0.01 + i as f64 * 1e-3)
            .collect();
        assert_eq!((p, l), (15, 6));
        let out = test_preaveraged(&obs, &t, 0.05).unwrap();
        let k = (n / (p * l)) as f64;
        let want = -((p * l) as f64 / (2.0 * n as f64)).sqrt() * k;
        assert_eq!(out.block_count, n / (p * l));
        assert!(
            (out.statistic - want).abs() < 1e-9,
            "{} vs {want}",
            out.statistic
        );
    }

    #[test]
    fn decision_examples() {
        assert!(!decision(0.0, 0.05).unwrap());
        assert!(decision(2.0, 0.05).unwrap());
        assert!(!decision(2.0, 0.01).unwrap());
        assert!((critical_value(0.05).unwrap() - 1.644_853_626_951_472_7).abs() < 1e-12);
        assert!((critical_value(0.01).unwrap() - 2.326_347_874_040_841).abs() < 1e-12);
        for a in [0.0, 1.0, -0.5, 2.0] {
            assert!(matches!(decision(1.0, a), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn decision_is_monotone() {
        let alphas = [0.001, 0.01, 0.05, 0.1, 0.2, 0.5];
        let stats: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.1).collect();
        for &a in &alphas {
            let d: Vec<bool> = stats.iter().map(|&s| decision(s, a).unwrap()).collect();
            assert!(d.windows(2).all(|w| w[0] <= w[1]));
        }
        for &s in &stats {
            let d: Vec<bool> = alphas.iter().map(|&a| decision(s, a).unwrap()).collect();
            assert!(d.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn too_small_grid_is_configuration_error() {
        let obs: Vec<f64> = (0..=20).map(|i| (i as f64).sin()).collect();
        let err = test_preaveraged(&obs, &TuningParams::default(), 0.05).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
    }

    #[test]
    fn outcome_json_is_flat() {
        let out = test_continuous(&linear(100, 0.1), &TuningParams::default(), 0.05).unwrap();
        let v: serde_json::Value = serde_json::to_value(&out).unwrap();
        for key in [
            "variant",
            "n",
            "statistic",
            "alpha",
            "critical",
            "reject",
            "iv_hat",
            "block_count",
            "windows",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["variant"], "plain");
        assert!(v.get("spot_estimates").is_none());
    }
}
