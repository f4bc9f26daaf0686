//! Synthetic log-price paths on a uniform grid over one trading day.
//!
//! Two base models are supported: constant volatility (`dX = σ dW`) and a
//! Heston-type square-root variance driven by a correlated Brownian pair.
//! Both are discretised with an Euler step. Compound-Poisson jumps and
//! i.i.d. Gaussian observation noise can be laid over any path.
//!
//! The Heston variance uses full truncation: the previous variance enters
//! both the mean-reversion drift and the diffusion as `max(v, 0)`, and the
//! recorded spot variance is that truncated value.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Uniform grid `i/n`, `i = 0..=n`, on the unit day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimGrid {
    n: usize,
}

impl SimGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::param(format!(
                "grid needs at least 2 increments, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HestonParams {
    pub kappa: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub x0: f64,
    pub v0: f64,
}

impl HestonParams {
    /// Calibration used in the simulation study: fast reversion from an
    /// initial variance of 1 towards 0.04 with strong leverage.
    pub fn reference() -> Self {
        Self {
            kappa: 5.0,
            alpha: 0.04,
            gamma: 5.0,
            rho: -(0.5f64).sqrt(),
            x0: 1.0,
            v0: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.kappa, self.alpha, self.gamma, self.rho, self.x0, self.v0,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("Heston parameters must be finite"));
        }
        if self.kappa <= 0.0 || self.alpha <= 0.0 || self.gamma < 0.0 {
            return Err(Error::param(
                "Heston needs kappa > 0, alpha > 0, gamma >= 0",
            ));
        }
        if self.rho.abs() > 1.0 {
            return Err(Error::param(format!(
                "correlation {} outside [-1, 1]",
                self.rho
            )));
        }
        if self.v0 <= 0.0 {
            return Err(Error::param("initial variance must be positive"));
        }
        Ok(())
    }
}

/// Volatility dynamics of the latent efficient log-price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseModel {
    Constant { sigma: f64, x0: f64 },
    Heston(HestonParams),
}

impl BaseModel {
    /// Constant volatility with `σ = 1`, `X_0 = 1`.
    pub fn constant_reference() -> Self {
        BaseModel::Constant {
            sigma: 1.0,
            x0: 1.0,
        }
    }

    pub fn heston_reference() -> Self {
        BaseModel::Heston(HestonParams::reference())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BaseModel::Constant { sigma, x0 } => check_sigma(*sigma).and_then(|_| {
                if x0.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("x0 must be finite"))
                }
            }),
            BaseModel::Heston(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    pub lambda: f64,
    pub sigma_jump: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub eta: f64,
}

/// Full data-generating process: base dynamics plus optional overlays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub base: BaseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<JumpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

impl ModelSpec {
    pub fn new(base: BaseModel) -> Self {
        Self {
            base,
            jumps: None,
            noise: None,
        }
    }

    pub fn with_jumps(mut self, lambda: f64, sigma_jump: f64) -> Self {
        self.jumps = Some(JumpSpec { lambda, sigma_jump });
        self
    }

    pub fn with_noise(mut self, eta: f64) -> Self {
        self.noise = Some(NoiseSpec { eta });
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if let Some(j) = self.jumps {
            check_jump_params(j.lambda, j.sigma_jump)?;
        }
        if let Some(e) = self.noise {
            check_eta(e.eta)?;
        }
        Ok(())
    }

    /// Simulate one path. Each component draws from its own stream of
    /// `seed`, so enabling an overlay leaves the base path bit-identical.
    pub fn simulate(&self, grid: SimGrid, seed: u64) -> Result<SamplePath> {
        self.validate()?;
        let mut path = match self.base {
            BaseModel::Constant { sigma, x0 } => {
                simulate_constant(grid, sigma, x0, &mut stream_rng(seed, Stream::Diffusion))?
            }
            BaseModel::Heston(p) => simulate_heston(
                grid,
                &p,
                &mut stream_rng(seed, Stream::Diffusion),
                &mut stream_rng(seed, Stream::Volatility),
            )?,
        };
        if let Some(j) = self.jumps {
            path = overlay_jumps(
                path,
                j.lambda,
                j.sigma_jump,
                &mut stream_rng(seed, Stream::Jumps),
            )?;
        }
        if let Some(e) = self.noise {
            path = overlay_noise(path, e.eta, &mut stream_rng(seed, Stream::Noise))?;
        }
        Ok(path)
    }
}

/// Which overlays produced a path's observations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathLabels {
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jumps: Option<JumpLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpLabel {
    pub lambda: f64,
    pub sigma_jump: f64,
    pub count: usize,
}

/// Equally spaced log-price record on the unit day.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: SimGrid,
    obs: Vec<f64>,
    true_spot_var: Option<Vec<f64>>,
    pub labels: PathLabels,
}

impl SamplePath {
    /// Wrap observed log-prices `obs[0..=n]`.
    pub fn from_obs(obs: Vec<f64>) -> Result<Self> {
        if obs.len() < 3 {
            return Err(Error::Data(format!(
                "path needs at least 3 observations, got {}",
                obs.len()
            )));
        }
        if let Some(i) = obs.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite observation at index {i}")));
        }
        let grid = SimGrid::new(obs.len() - 1)?;
        Ok(Self {
            grid,
            obs,
            true_spot_var: None,
            labels: PathLabels::default(),
        })
    }

    pub fn with_true_spot_var(mut self, var: Vec<f64>) -> Result<Self> {
        if var.len() != self.obs.len() {
            return Err(Error::Data(
                "spot variance length differs from observations".into(),
            ));
        }
        if var.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Data(
                "spot variance must be finite and nonnegative".into(),
            ));
        }
        self.true_spot_var = Some(var);
        Ok(self)
    }

    pub fn grid(&self) -> SimGrid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn obs(&self) -> &[f64] {
        &self.obs
    }

    pub fn true_spot_var(&self) -> Option<&[f64]> {
        self.true_spot_var.as_deref()
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.obs.windows(2).map(|w| w[1] - w[0])
    }

    /// Left-point Riemann approximation of `∫₀¹ (σ_s² − IV)² ds` from the
    /// recorded spot variance, with `IV` its own Riemann sum.
    pub fn true_variation_functional(&self) -> Option<f64> {
        let v = self.true_spot_var.as_ref()?;
        let n = self.grid.n as f64;
        let left = &v[..v.len() - 1];
        let iv = left.iter().sum::<f64>() / n;
        Some(left.iter().map(|s| (s - iv).powi(2)).sum::<f64>() / n)
    }

    /// Write `index,time,obs[,true_spot_var]` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match &self.true_spot_var {
            Some(var) => {
                w.write_record(["index", "time", "obs", "true_spot_var"])?;
                for (i, (x, v)) in self.obs.iter().zip(var).enumerate() {
                    w.write_record([
                        i.to_string(),
                        fmt_num(self.grid.time(i)),
                        fmt_num(*x),
                        fmt_num(*v),
                    ])?;
                }
            }
            None => {
                w.write_record(["index", "time", "obs"])?;
                for (i, x) in self.obs.iter().enumerate() {
                    w.write_record([i.to_string(), fmt_num(self.grid.time(i)), fmt_num(*x)])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        let has_var = match cols.as_slice() {
            ["index", "time", "obs"] => false,
            ["index", "time", "obs", "true_spot_var"] => true,
            _ => {
                return Err(Error::Input(format!(
                    "expected header index,time,obs[,true_spot_var], got {}",
                    cols.join(",")
                )))
            }
        };
        let mut obs = Vec::new();
        let mut var = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |col: usize| -> Result<f64> {
                rec.get(col)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::Input(format!("row {}: bad value in column {col}", row + 2))
                    })
            };
            let idx: usize = rec
                .get(0)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Input(format!("row {}: bad index", row + 2)))?;
            if idx != row {
                return Err(Error::Input(format!(
                    "row {}: expected index {row}, got {idx}",
                    row + 2
                )));
            }
            obs.push(parse(2)?);
            if has_var {
                var.push(parse(3)?);
            }
        }
        let path = SamplePath::from_obs(obs)?;
        if has_var {
            path.with_true_spot_var(var)
        } else {
            Ok(path)
        }
    }
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param(format!(
            "volatility must be positive and finite, got {sigma}"
        )));
    }
    Ok(())
}

fn check_jump_params(lambda: f64, sigma_jump: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param(format!(
            "jump intensity must be >= 0, got {lambda}"
        )));
    }
    if !(sigma_jump.is_finite() && sigma_jump >= 0.0) {
        return Err(Error::param(format!(
            "jump size deviation must be >= 0, got {sigma_jump}"
        )));
    }
    Ok(())
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::param(format!(
            "noise deviation must be >= 0, got {eta}"
        )));
    }
    Ok(())
}

/// Euler path of `dX = σ dW` started at `x0`.
pub fn simulate_constant<R: Rng + ?Sized>(
    grid: SimGrid,
    sigma: f64,
    x0: f64,
    rng: &mut R,
) -> Result<SamplePath> {
    check_sigma(sigma)?;
    let scale = sigma * grid.dt().sqrt();
    let mut obs = Vec::with_capacity(grid.n + 1);
    let mut x = x0;
    obs.push(x);
    for _ in 0..grid.n {
        let z: f64 = StandardNormal.sample(rng);
        x += scale * z;
        obs.push(x);
    }
    let var = vec![sigma * sigma; grid.n + 1];
    let mut path = SamplePath::from_obs(obs)?.with_true_spot_var(var)?;
    path.labels.model = Some("constant".into());
    Ok(path)
}

/// Full-truncation Euler path of the Heston model. `w_rng` drives the
/// price Brownian motion, `b_rng` the independent part of the variance.
pub fn simulate_heston<R1, R2>(
    grid: SimGrid,
    params: &HestonParams,
    w_rng: &mut R1,
    b_rng: &mut R2,
) -> Result<SamplePath>
where
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    params.validate()?;
    let dt = grid.dt();
    let sdt = dt.sqrt();
    let rho_perp = (1.0 - params.rho * params.rho).max(0.0).sqrt();
    let mut obs = Vec::with_capacity(grid.n + 1);
    let mut var = Vec::with_capacity(grid.n + 1);
    let mut x = params.x0;
    let mut v = params.v0;
    obs.push(x);
    var.push(v);
    for _ in 0..grid.n {
        let dw = sdt * Distribution::<f64>::sample(&StandardNormal, w_rng);
        let db = sdt * Distribution::<f64>::sample(&StandardNormal, b_rng);
        let vp = v.max(0.0);
        let root = vp.sqrt();
        x += root * dw;
        v += params.kappa * (params.alpha - vp) * dt
            + params.gamma * root * (params.rho * dw + rho_perp * db);
        obs.push(x);
        var.push(v.max(0.0));
    }
    let mut path = SamplePath::from_obs(obs)?.with_true_spot_var(var)?;
    path.labels.model = Some("heston".into());
    Ok(path)
}

/// Add compound-Poisson jumps `Σ γ_j 1{τ_j ≤ t}` with `N ~ Poisson(λ)`,
/// `τ_j ~ U[0,1]` and `γ_j ~ N(0, sigma_jump²)`.
pub fn overlay_jumps<R: Rng + ?Sized>(
    path: SamplePath,
    lambda: f64,
    sigma_jump: f64,
    rng: &mut R,
) -> Result<SamplePath> {
    check_jump_params(lambda, sigma_jump)?;
    if lambda == 0.0 {
        return Ok(path);
    }
    let count = Poisson::new(lambda)
        .map_err(|e| Error::param(format!("Poisson intensity: {e}")))?
        .sample(rng) as usize;
    let times: Vec<f64> = (0..count).map(|_| rng.random::<f64>()).collect();
    let jumps: Vec<(f64, f64)> = times
        .into_iter()
        .map(|t| {
            (
                t,
                sigma_jump * Distribution::<f64>::sample(&StandardNormal, rng),
            )
        })
        .collect();
    let mut out = apply_jumps(path, &jumps);
    out.labels.jumps = Some(JumpLabel {
        lambda,
        sigma_jump,
        count,
    });
    Ok(out)
}

/// Shift the path by explicit `(time, size)` jumps. A jump at `τ` lands in
/// the increment `i` with `τ ∈ ((i−1)/n, i/n]`.
pub fn apply_jumps(mut path: SamplePath, jumps: &[(f64, f64)]) -> SamplePath {
    let n = path.grid.n;
    // Cumulative shift per observation index, built from a difference array.
    let mut delta = vec![0.0; n + 2];
    for &(tau, size) in jumps {
        let bucket = ((tau * n as f64).ceil() as usize).clamp(1, n);
        delta[bucket] += size;
    }
    let mut shift = 0.0;
    for (x, d) in path.obs.iter_mut().zip(&delta) {
        shift += d;
        *x += shift;
    }
    path
}

/// Add i.i.d. `N(0, eta²)` noise to every observation.
pub fn overlay_noise<R: Rng + ?Sized>(
    mut path: SamplePath,
    eta: f64,
    rng: &mut R,
) -> Result<SamplePath> {
    check_eta(eta)?;
    if eta == 0.0 {
        return Ok(path);
    }
    for x in path.obs.iter_mut() {
        *x += eta * Distribution::<f64>::sample(&StandardNormal, rng);
    }
    path.labels.noise_eta = Some(eta);
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat(n: usize) -> SamplePath {
        SamplePath::from_obs(vec![1.0; n + 1]).unwrap()
    }

    #[test]
    fn grid_rejects_tiny_n() {
        assert!(SimGrid::new(1).is_err());
        let g = SimGrid::new(4).unwrap();
        assert_eq!(g.time(4), 1.0);
    }

    #[test]
    fn constant_rejects_nonpositive_sigma() {
        let g = SimGrid::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                simulate_constant(g, s, 1.0, &mut rng),
                Err(Error::Parameter(_))
            ));
        }
    }

    #[test]
    fn constant_tiny_sigma_is_nearly_flat() {
        let g = SimGrid::new(4).unwrap();
        let p = simulate_constant(g, 1e-300, 1.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(p.obs().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn simulation_is_deterministic() {
        let g = SimGrid::new(500).unwrap();
        let spec = ModelSpec::new(BaseModel::heston_reference())
            .with_jumps(20.0, 0.5)
            .with_noise(0.01);
        let a = spec.simulate(g, 99).unwrap();
        let b = spec.simulate(g, 99).unwrap();
        assert_eq!(a, b);
        let c = spec.simulate(g, 100).unwrap();
        assert_ne!(a.obs(), c.obs());
    }

    #[test]
    fn overlays_do_not_perturb_base_path() {
        let g = SimGrid::new(300).unwrap();
        let base = ModelSpec::new(BaseModel::constant_reference());
        let plain = base.simulate(g, 5).unwrap();
        let jumpy = base.with_jumps(20.0, 0.5).simulate(g, 5).unwrap();
        let noisy = base.with_noise(0.01).simulate(g, 5).unwrap();
        let both = base
            .with_jumps(20.0, 0.5)
            .with_noise(0.01)
            .simulate(g, 5)
            .unwrap();
        // Noise on top of jumps equals the jump path plus the same noise draws.
        for i in 0..=300 {
            let eps = noisy.obs()[i] - plain.obs()[i];
            let jump = jumpy.obs()[i] - plain.obs()[i];
            assert!((both.obs()[i] - (plain.obs()[i] + jump + eps)).abs() < 1e-12);
        }
    }

    #[test]
    fn jump_overlay_only_moves_later_observations() {
        let g = SimGrid::new(1000).unwrap();
        let base = ModelSpec::new(BaseModel::constant_reference());
        let plain = base.simulate(g, 8).unwrap();
        let jumpy = base.with_jumps(5.0, 0.5).simulate(g, 8).unwrap();
        let first = plain
            .obs()
            .iter()
            .zip(jumpy.obs())
            .position(|(a, b)| a != b);
        if let Some(first) = first {
            assert!(first >= 1);
            assert!(plain.obs()[..first] == jumpy.obs()[..first]);
        }
    }

    #[test]
    fn gamma_zero_heston_is_constant_variance() {
        let g = SimGrid::new(200).unwrap();
        let p = HestonParams {
            kappa: 5.0,
            alpha: 0.04,
            gamma: 0.0,
            rho: -0.5,
            x0: 1.0,
            v0: 0.04,
        };
        let path = simulate_heston(
            g,
            &p,
            &mut stream_rng(1, Stream::Diffusion),
            &mut stream_rng(1, Stream::Volatility),
        )
        .unwrap();
        assert!(path
            .true_spot_var()
            .unwrap()
            .iter()
            .all(|v| (v - 0.04).abs() < 1e-15));
        // Same Brownian draws as a constant-vol path with σ = 0.2.
        let c = simulate_constant(g, 0.2, 1.0, &mut stream_rng(1, Stream::Diffusion)).unwrap();
        for (a, b) in path.obs().iter().zip(c.obs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn heston_reference_stays_nonnegative() {
        let g = SimGrid::new(23_400).unwrap();
        let spec = ModelSpec::new(BaseModel::heston_reference());
        let mut touched_zero = 0;
        for seed in 0..20 {
            let p = spec.simulate(g, seed).unwrap();
            let v = p.true_spot_var().unwrap();
            assert!(v.iter().all(|&x| x >= 0.0));
            touched_zero += v.iter().filter(|&&x| x == 0.0).count();
        }
        // The Feller condition fails badly here, so truncation is exercised.
        assert!(touched_zero > 0);
    }

    #[test]
    fn forced_jump_lands_in_expected_increment() {
        let p = apply_jumps(flat(10), &[(0.5 + 1e-9, 0.5)]);
        let inc: Vec<f64> = p.increments().collect();
        for (i, d) in inc.iter().enumerate() {
            if i + 1 == 6 {
                assert_eq!(*d, 0.5);
            } else {
                assert_eq!(*d, 0.0);
            }
        }
        // A jump exactly on a grid point belongs to the increment ending there.
        let p = apply_jumps(flat(10), &[(0.5, 1.0)]);
        let inc: Vec<f64> = p.increments().collect();
        assert_eq!(inc[4], 1.0);
    }

    #[test]
    fn zero_intensity_and_zero_noise_are_identity() {
        let g = SimGrid::new(50).unwrap();
        let p = ModelSpec::new(BaseModel::constant_reference())
            .simulate(g, 1)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(overlay_jumps(p.clone(), 0.0, 0.5, &mut rng).unwrap(), p);
        assert_eq!(overlay_noise(p.clone(), 0.0, &mut rng).unwrap(), p);
        assert!(overlay_jumps(p.clone(), -1.0, 0.5, &mut rng).is_err());
        assert!(overlay_noise(p, -0.1, &mut rng).is_err());
    }

    #[test]
    fn poisson_jump_count_mean() {
        let g = SimGrid::new(100).unwrap();
        let total: usize = (0..2000u64)
            .map(|s| {
                let p =
                    overlay_jumps(flat(100), 20.0, 0.5, &mut stream_rng(s, Stream::Jumps)).unwrap();
                p.labels.jumps.unwrap().count
            })
            .sum();
        let _ = g;
        let mean = total as f64 / 2000.0;
        assert!((mean - 20.0).abs() < 1.0, "mean jump count {mean}");
    }

    #[test]
    fn increments_have_unit_scaled_variance_and_gaussian_kurtosis() {
        let n = 23_400;
        let g = SimGrid::new(n).unwrap();
        let spec = ModelSpec::new(BaseModel::constant_reference());
        let mut sum2 = 0.0;
        let mut count = 0usize;
        let mut pooled = Vec::new();
        for seed in 0..1000u64 {
            let p = spec.simulate(g, seed).unwrap();
            for d in p.increments() {
                sum2 += d * d;
                count += 1;
            }
            if pooled.len() < 10_000 {
                pooled.extend(p.increments().take(10).map(|d| d * (n as f64).sqrt()));
            }
        }
        let var = sum2 / count as f64;
        assert!(
            (var * n as f64 - 1.0).abs() < 0.05,
            "variance ratio {}",
            var * n as f64
        );
        let m = pooled.len() as f64;
        let mean = pooled.iter().sum::<f64>() / m;
        let m2 = pooled.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / m;
        let m4 = pooled.iter().map(|z| (z - mean).powi(4)).sum::<f64>() / m;
        let kurt = m4 / (m2 * m2);
        assert!((kurt - 3.0).abs() < 0.2, "kurtosis {kurt}");
    }

    #[test]
    fn heston_mean_variance_between_long_run_and_start() {
        let g = SimGrid::new(23_400).unwrap();
        let spec = ModelSpec::new(BaseModel::heston_reference());
        let mut acc = 0.0;
        for seed in 0..1000u64 {
            let p = spec.simulate(g, seed).unwrap();
            let v = p.true_spot_var().unwrap();
            acc += v[..v.len() - 1].iter().sum::<f64>() / 23_400.0;
        }
        let mean = acc / 1000.0;
        // E v_t = α + (v0 − α)e^{−κt} integrates to ≈ 0.2306 over the day.
        assert!(mean > 0.04 && mean < 1.0, "mean integrated variance {mean}");
    }

    #[test]
    fn noise_dominates_flat_path_rv() {
        let p = overlay_noise(flat(23_400), 0.01, &mut stream_rng(17, Stream::Noise)).unwrap();
        let rv: f64 = p.increments().map(|d| d * d).sum();
        assert!((rv - 4.68).abs() / 4.68 < 0.05, "rv {rv}");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = SimGrid::new(40).unwrap();
        let p = ModelSpec::new(BaseModel::heston_reference())
            .simulate(g, 3)
            .unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,time,obs,true_spot_var\n"));
        let back = SamplePath::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.obs(), p.obs());
        assert_eq!(back.true_spot_var(), p.true_spot_var());
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let bad = "idx,obs\n0,1\n";
        assert!(matches!(
            SamplePath::read_csv(bad.as_bytes()),
            Err(Error::Input(_))
        ));
    }
}
