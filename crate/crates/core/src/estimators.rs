//! Integrated and spot variance estimators.
//!
//! Three regimes are covered:
//!
//! - plain: realized volatility and the one-sided uniform-kernel spot
//!   estimator over `k_n` increments;
//! - truncated: the same sums restricted to increments with
//!   `|Δ_i| ≤ ν_n`, where `ν_n = mult · √BV_n · (1/n)^ϖ` is calibrated by
//!   bipower variation;
//! - pre-averaged: non-overlapping blocks of `p_n` increments weighted by
//!   `g(i/p_n)`, with spot estimates pooling `l_n` such blocks.
//!
//! Every function reads observations only through their increments, so
//! all outputs are invariant to adding a constant to the path.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = KahanSum::default();
    for x in it {
        acc.add(x);
    }
    acc.total()
}

/// Weight function `g` on `[0, 1]` used for pre-averaging.
#[derive(Clone, Copy)]
pub enum WeightFunction {
    /// `g(x) = min(x, 1 − x)`.
    Triangle,
    /// User supplied; validated when weights are built.
    Custom(fn(f64) -> f64),
}

impl WeightFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            WeightFunction::Triangle => x.min(1.0 - x),
            WeightFunction::Custom(g) => g(x),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightFunction::Triangle => "triangle",
            WeightFunction::Custom(_) => "custom",
        }
    }

    /// Checks the boundary and square-integrability conditions numerically.
    pub fn validate(&self) -> Result<()> {
        let g0 = self.eval(0.0);
        let g1 = self.eval(1.0);
        if g0.abs() > 1e-12 || g1.abs() > 1e-12 {
            return Err(Error::config(format!(
                "weight function must vanish at 0 and 1 (g(0)={g0}, g(1)={g1})"
            )));
        }
        const M: usize = 4096;
        let mut l2 = 0.0;
        for i in 0..M {
            let v = self.eval((i as f64 + 0.5) / M as f64);
            if !v.is_finite() {
                return Err(Error::config("weight function is not finite on [0, 1]"));
            }
            l2 += v * v;
        }
        l2 /= M as f64;
        if !(l2 > 0.0) {
            return Err(Error::config("weight function has zero L2 norm"));
        }
        Ok(())
    }
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl PartialEq for WeightFunction {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (WeightFunction::Triangle, WeightFunction::Triangle) => true,
            (WeightFunction::Custom(a), WeightFunction::Custom(b)) => std::ptr::fn_addr_eq(*a, *b),
            _ => false,
        }
    }
}

impl Serialize for WeightFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for WeightFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "triangle" => Ok(WeightFunction::Triangle),
            other => Err(serde::de::Error::custom(format!(
                "unknown weight function `{other}` (expected `triangle`)"
            ))),
        }
    }
}

/// Tuning constants for all three test variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningParams {
    /// `k_n = ⌊θ √n⌋`.
    pub theta: f64,
    /// Truncation exponent ϖ.
    pub varpi: f64,
    /// Multiplier in front of `√BV_n`.
    pub trunc_mult: f64,
    /// `p_n = ⌊c · n^{1/2+χ}⌋`.
    pub c_pre: f64,
    pub chi: f64,
    /// `l_n = ⌊a · n^b⌋`.
    pub a_ker: f64,
    pub b_ker: f64,
    pub weight: WeightFunction,
    /// Spot blocks for the pre-averaged variant are `k·l_n .. (k+1)·l_n`
    /// by default; `k·l_n+1 ..= (k+1)·l_n` when true.
    pub preavg_skip_first: bool,
}

impl Default for TuningParams {
    fn default() -> Self {
        Self {
            theta: 1.2,
            varpi: 0.499,
            trunc_mult: 4.0,
            c_pre: 1.0 / 3.0,
            chi: 0.05,
            a_ker: 2.0,
            b_ker: 0.17,
            weight: WeightFunction::Triangle,
            preavg_skip_first: false,
        }
    }
}

impl TuningParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.theta,
            self.varpi,
            self.trunc_mult,
            self.c_pre,
            self.chi,
            self.a_ker,
            self.b_ker,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("tuning constants must be finite"));
        }
        if self.theta <= 0.0 {
            return Err(Error::config("theta must be positive"));
        }
        if !(self.varpi > 0.0 && self.varpi < 1.0) {
            return Err(Error::config("varpi must lie in (0, 1)"));
        }
        if self.trunc_mult <= 0.0 {
            return Err(Error::config("truncation multiplier must be positive"));
        }
        if self.c_pre <= 0.0 {
            return Err(Error::config("pre-averaging constant must be positive"));
        }
        if !(self.chi > 0.0 && self.chi < 0.5) {
            return Err(Error::config("chi must lie in (0, 1/2)"));
        }
        if self.a_ker <= 0.0 {
            return Err(Error::config("kernel constant must be positive"));
        }
        if !(self.b_ker > 0.0 && self.b_ker < 1.0) {
            return Err(Error::config("kernel exponent must lie in (0, 1)"));
        }
        self.weight.validate()
    }
}

/// Window sizes and thresholds a test actually used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedWindows {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_n: Option<f64>,
}

fn check_obs(obs: &[f64], min_len: usize) -> Result<()> {
    if obs.len() < min_len {
        return Err(Error::Data(format!(
            "need at least {min_len} observations, got {}",
            obs.len()
        )));
    }
    if let Some(i) = obs.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite observation at index {i}")));
    }
    Ok(())
}

#[inline]
fn incr(obs: &[f64], i: usize) -> f64 {
    obs[i] - obs[i - 1]
}

/// Spot window `k_n = ⌊θ √n⌋`.
pub fn window_kn(n: usize, theta: f64) -> Result<usize> {
    if n < 4 {
        return Err(Error::config(format!(
            "grid size {n} too small for a spot window"
        )));
    }
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::config("theta must be positive"));
    }
    let k = (theta * (n as f64).sqrt()).floor();
    if k < 1.0 || k >= n as f64 {
        return Err(Error::config(format!(
            "spot window {k} outside [1, {})",
            n - 1
        )));
    }
    Ok(k as usize)
}

/// `Σ_{i=1}^n (Δ_i X)²`.
pub fn realized_volatility(obs: &[f64]) -> Result<f64> {
    check_obs(obs, 2)?;
    Ok(compensated_sum(
        (1..obs.len()).map(|i| incr(obs, i).powi(2)),
    ))
}

fn block_sum(obs: &[f64], start: usize, len: usize, nu: f64) -> f64 {
    compensated_sum((start + 1..=start + len).map(|i| {
        let d = incr(obs, i);
        if d.abs() <= nu {
            d * d
        } else {
            0.0
        }
    }))
}

fn spot_block_count(n: usize, k_n: usize) -> Result<usize> {
    if k_n == 0 || k_n > n {
        return Err(Error::config(format!(
            "spot window {k_n} incompatible with n = {n}"
        )));
    }
    Ok(n / k_n)
}

/// `(n/k_n) Σ_{i=jk_n+1}^{(j+1)k_n} (Δ_i X)²`, the spot variance at `j·k_n/n`.
pub fn spot_volatility(obs: &[f64], j: usize, k_n: usize) -> Result<f64> {
    truncated_spot(obs, j, k_n, f64::INFINITY)
}

/// `(π/2) Σ_{i=2}^n |Δ_i||Δ_{i−1}|`.
pub fn bipower_variation(obs: &[f64]) -> Result<f64> {
    check_obs(obs, 3)?;
    let s = compensated_sum((2..obs.len()).map(|i| (incr(obs, i) * incr(obs, i - 1)).abs()));
    Ok(FRAC_PI_2 * s)
}

/// `ν_n = mult · √BV_n · (1/n)^ϖ`.
pub fn truncation_threshold(obs: &[f64], varpi: f64, trunc_mult: f64) -> Result<f64> {
    let bv = bipower_variation(obs)?;
    threshold_from_bv(bv, obs.len() - 1, varpi, trunc_mult)
}

pub fn threshold_from_bv(bv: f64, n: usize, varpi: f64, trunc_mult: f64) -> Result<f64> {
    if !(varpi > 0.0 && varpi < 1.0) || !(trunc_mult > 0.0) {
        return Err(Error::config(
            "truncation needs 0 < varpi < 1 and a positive multiplier",
        ));
    }
    if !(bv > 0.0) {
        return Err(Error::degenerate("zero bipower variation (flat path)"));
    }
    Ok(trunc_mult * bv.sqrt() * (1.0 / n as f64).powf(varpi))
}

/// Realized volatility over increments with `|Δ_i| ≤ nu_n`.
pub fn truncated_rv(obs: &[f64], nu_n: f64) -> Result<f64> {
    check_obs(obs, 2)?;
    if !(nu_n > 0.0) {
        return Err(Error::param("truncation threshold must be positive"));
    }
    Ok(block_sum(obs, 0, obs.len() - 1, nu_n))
}

/// Spot estimator of block `j` over increments with `|Δ_i| ≤ nu_n`.
pub fn truncated_spot(obs: &[f64], j: usize, k_n: usize, nu_n: f64) -> Result<f64> {
    check_obs(obs, 2)?;
    if !(nu_n > 0.0) {
        return Err(Error::param("truncation threshold must be positive"));
    }
    let n = obs.len() - 1;
    let count = spot_block_count(n, k_n)?;
    if j >= count {
        return Err(Error::Index { index: j, count });
    }
    Ok(n as f64 / k_n as f64 * block_sum(obs, j * k_n, k_n, nu_n))
}

/// All `⌊n/k_n⌋` spot estimates at once.
pub fn spot_series(obs: &[f64], k_n: usize, nu_n: f64) -> Result<Vec<f64>> {
    check_obs(obs, 2)?;
    let n = obs.len() - 1;
    let count = spot_block_count(n, k_n)?;
    let scale = n as f64 / k_n as f64;
    Ok((0..count)
        .map(|j| scale * block_sum(obs, j * k_n, k_n, nu_n))
        .collect())
}

/// Pre-averaging block length and kernel width for grid size `n`.
pub fn preavg_params(
    n: usize,
    c_pre: f64,
    chi: f64,
    a_ker: f64,
    b_ker: f64,
) -> Result<(usize, usize)> {
    if n < 4 {
        return Err(Error::config(format!(
            "grid size {n} too small for pre-averaging"
        )));
    }
    let nf = n as f64;
    let p = (c_pre * nf.powf(0.5 + chi)).floor();
    let l = (a_ker * nf.powf(b_ker)).floor();
    if !(p >= 2.0) {
        return Err(Error::config(format!(
            "pre-averaging block p_n = {p} < 2 at n = {n}"
        )));
    }
    if !(l >= 1.0) {
        return Err(Error::config(format!(
            "kernel width l_n = {l} < 1 at n = {n}"
        )));
    }
    let (p, l) = (p as usize, l as usize);
    if p * l >= n {
        return Err(Error::config(format!("p_n·l_n = {} >= n = {n}", p * l)));
    }
    Ok((p, l))
}

/// `g(i/p_n)` for `i = 1..=p_n` and `φ_n = (1/p_n) Σ g_i²`.
pub fn preavg_weights(p_n: usize, weight: WeightFunction) -> Result<(Vec<f64>, f64)> {
    if p_n < 2 {
        return Err(Error::config(format!("pre-averaging block {p_n} < 2")));
    }
    weight.validate()?;
    let w: Vec<f64> = (1..=p_n)
        .map(|i| weight.eval(i as f64 / p_n as f64))
        .collect();
    let phi = compensated_sum(w.iter().map(|g| g * g)) / p_n as f64;
    if !(phi > 0.0) {
        return Err(Error::config(
            "weights have zero energy at this block length",
        ));
    }
    Ok((w, phi))
}

fn preavg_values_with(obs: &[f64], weights: &[f64]) -> Vec<f64> {
    let p = weights.len();
    let n = obs.len() - 1;
    (0..n / p)
        .map(|j| {
            compensated_sum(
                weights
                    .iter()
                    .enumerate()
                    .map(|(i, g)| g * incr(obs, j * p + i + 1)),
            )
        })
        .collect()
}

/// Non-overlapping pre-averaged increments `Σ_i g_i Δ_{jp_n+i}`, `j < ⌊n/p_n⌋`.
pub fn preavg_increments(obs: &[f64], p_n: usize, weight: WeightFunction) -> Result<Vec<f64>> {
    check_obs(obs, 2)?;
    if p_n > obs.len() - 1 {
        return Err(Error::config(format!(
            "block length {p_n} exceeds n = {}",
            obs.len() - 1
        )));
    }
    let (w, _) = preavg_weights(p_n, weight)?;
    Ok(preavg_values_with(obs, &w))
}

/// `(1/φ_n) Σ_j Z̄_j²`.
pub fn preavg_iv(obs: &[f64], p_n: usize, weight: WeightFunction) -> Result<f64> {
    let vals = preavg_increments(obs, p_n, weight)?;
    let (_, phi) = preavg_weights(p_n, weight)?;
    Ok(compensated_sum(vals.iter().map(|v| v * v)) / phi)
}

/// Pre-averaged block values plus everything needed to form spot estimates.
#[derive(Debug, Clone)]
pub struct PreavgBlocks {
    pub n: usize,
    pub p_n: usize,
    pub l_n: usize,
    pub phi_n: f64,
    pub values: Vec<f64>,
    pub skip_first: bool,
}

impl PreavgBlocks {
    pub fn new(
        obs: &[f64],
        p_n: usize,
        l_n: usize,
        weight: WeightFunction,
        skip_first: bool,
    ) -> Result<Self> {
        check_obs(obs, 2)?;
        let n = obs.len() - 1;
        if l_n == 0 || p_n * l_n > n {
            return Err(Error::config(format!(
                "p_n·l_n = {} exceeds n = {n}",
                p_n * l_n
            )));
        }
        let (w, phi_n) = preavg_weights(p_n, weight)?;
        let values = preavg_values_with(obs, &w);
        Ok(Self {
            n,
            p_n,
            l_n,
            phi_n,
            values,
            skip_first,
        })
    }

    pub fn iv(&self) -> f64 {
        compensated_sum(self.values.iter().map(|v| v * v)) / self.phi_n
    }

    /// Spot blocks that fit: at most `⌊n/(p_n l_n)⌋`, fewer when the shifted
    /// index range runs past the last pre-averaged value.
    pub fn spot_count(&self) -> usize {
        let nominal = self.n / (self.p_n * self.l_n);
        let offset = usize::from(self.skip_first);
        let fit = self.values.len().saturating_sub(offset) / self.l_n;
        nominal.min(fit)
    }

    pub fn spot(&self, k: usize) -> Result<f64> {
        let count = self.spot_count();
        if k >= count {
            return Err(Error::Index { index: k, count });
        }
        let start = k * self.l_n + usize::from(self.skip_first);
        let s = compensated_sum(self.values[start..start + self.l_n].iter().map(|v| v * v));
        Ok(self.n as f64 / (self.p_n as f64 * self.l_n as f64 * self.phi_n) * s)
    }

    pub fn spot_series(&self) -> Vec<f64> {
        (0..self.spot_count())
            .map(|k| self.spot(k).expect("index in range"))
            .collect()
    }
}

/// `(n/(p_n l_n φ_n)) Σ_{j=kl_n}^{(k+1)l_n-1} Z̄_j²`, blocks counted from zero.
pub fn preavg_spot(
    obs: &[f64],
    k: usize,
    p_n: usize,
    l_n: usize,
    weight: WeightFunction,
) -> Result<f64> {
    PreavgBlocks::new(obs, p_n, l_n, weight, false)?.spot(k)
}
