//! Seeded, parallel Monte Carlo experiments for size and power.
//!
//! An experiment crosses overlays (jump intensities or noise levels) with
//! grid sizes, and runs every cell under the null model (constant
//! volatility) and, optionally, an alternative (stochastic volatility).
//! Replication `r` of scenario `s` always draws from
//! `replication_seed(master_seed, s, r)`, so reports do not depend on the
//! number of worker threads or on scheduling.

use std::fmt::Write as _;
use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{preavg_params, window_kn, TuningParams};
use crate::hettest::{critical_value, SpotAnalysis, TestVariant};
use crate::normal;
use crate::rng::replication_seed;
use crate::sim::{BaseModel, ModelSpec, SimGrid};

pub use crate::normal::quantile as normal_quantile;

/// Contamination laid over the base model in one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Overlay {
    None,
    Jumps { lambda: f64, sigma_jump: f64 },
    Noise { eta: f64 },
}

impl Overlay {
    pub fn label(&self) -> String {
        match self {
            Overlay::None => "none".into(),
            Overlay::Jumps { lambda, .. } => format!("lambda={lambda}"),
            Overlay::Noise { eta } => format!("eta={eta}"),
        }
    }

    pub fn apply(&self, base: BaseModel) -> ModelSpec {
        let spec = ModelSpec::new(base);
        match *self {
            Overlay::None => spec,
            Overlay::Jumps { lambda, sigma_jump } => spec.with_jumps(lambda, sigma_jump),
            Overlay::Noise { eta } => spec.with_noise(eta),
        }
    }

    /// Jump scenarios use truncation, noise scenarios pre-averaging.
    pub fn default_variant(&self) -> TestVariant {
        match self {
            Overlay::None => TestVariant::Plain,
            Overlay::Jumps { lambda, .. } if *lambda == 0.0 => TestVariant::Plain,
            Overlay::Jumps { .. } => TestVariant::Truncated,
            Overlay::Noise { .. } => TestVariant::Preaveraged,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    Null,
    Alternative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    pub null_model: BaseModel,
    #[serde(default)]
    pub alt_model: Option<BaseModel>,
    /// Fixed variant for every scenario; `None` picks it from the overlay.
    #[serde(default)]
    pub variant: Option<TestVariant>,
    pub n_values: Vec<usize>,
    pub overlays: Vec<Overlay>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    pub reps: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub tuning: TuningParams,
}

pub fn default_alphas() -> Vec<f64> {
    vec![0.10, 0.05, 0.01]
}

impl ExperimentSpec {
    /// Single-cell experiment under the null model only.
    pub fn null_only(base: BaseModel, overlay: Overlay, n: usize, reps: usize, seed: u64) -> Self {
        Self {
            name: String::new(),
            null_model: base,
            alt_model: None,
            variant: None,
            n_values: vec![n],
            overlays: vec![overlay],
            alphas: default_alphas(),
            reps,
            master_seed: seed,
            tuning: TuningParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::param("reps must be at least 1"));
        }
        if self.n_values.is_empty() || self.overlays.is_empty() {
            return Err(Error::param(
                "experiment needs at least one grid size and one overlay",
            ));
        }
        if self.alphas.is_empty() {
            return Err(Error::param(
                "experiment needs at least one significance level",
            ));
        }
        for &a in &self.alphas {
            critical_value(a)?;
        }
        self.null_model.validate()?;
        if let Some(alt) = &self.alt_model {
            alt.validate()?;
        }
        for o in &self.overlays {
            o.apply(self.null_model).validate()?;
        }
        self.tuning.validate()
    }

    pub fn scenarios(&self) -> Vec<Scenario> {
        let hyps: &[Hypothesis] = if self.alt_model.is_some() {
            &[Hypothesis::Null, Hypothesis::Alternative]
        } else {
            &[Hypothesis::Null]
        };
        let mut out = Vec::new();
        for (oi, overlay) in self.overlays.iter().enumerate() {
            for (ni, &n) in self.n_values.iter().enumerate() {
                for (hi, &hypothesis) in [Hypothesis::Null, Hypothesis::Alternative]
                    .iter()
                    .enumerate()
                {
                    if !hyps.contains(&hypothesis) {
                        continue;
                    }
                    let base = match hypothesis {
                        Hypothesis::Null => self.null_model,
                        Hypothesis::Alternative => self.alt_model.expect("alternative present"),
                    };
                    out.push(Scenario {
                        index: ((oi * self.n_values.len() + ni) * 2 + hi) as u64,
                        hypothesis,
                        overlay: *overlay,
                        variant: self.variant.unwrap_or_else(|| overlay.default_variant()),
                        n,
                        model: overlay.apply(base),
                    });
                }
            }
        }
        out
    }
}

/// One `(overlay, n, hypothesis)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Position in the full grid; feeds the seed derivation.
    pub index: u64,
    pub hypothesis: Hypothesis,
    pub overlay: Overlay,
    pub variant: TestVariant,
    pub n: usize,
    pub model: ModelSpec,
}

fn check_windows(n: usize, tuning: &TuningParams, variant: TestVariant) -> Result<()> {
    match variant {
        TestVariant::Plain | TestVariant::Truncated => {
            let k = window_kn(n, tuning.theta)?;
            if k < 2 || 2 * k > n {
                return Err(Error::config(format!(
                    "spot window k_n = {k} outside [2, n/2] at n = {n}"
                )));
            }
            Ok(())
        }
        TestVariant::Preaveraged => {
            preavg_params(n, tuning.c_pre, tuning.chi, tuning.a_ker, tuning.b_ker).map(|_| ())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: u64,
    pub hypothesis: Hypothesis,
    pub overlay: String,
    pub variant: TestVariant,
    pub n: usize,
    pub alpha: f64,
    pub rejection_rate: Option<f64>,
    /// Replications that produced a statistic.
    pub reps: usize,
    pub failures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSamples {
    pub scenario: u64,
    pub hypothesis: Hypothesis,
    pub overlay: String,
    pub variant: TestVariant,
    pub n: usize,
    /// One entry per replication; `None` where the replication failed.
    pub statistics: Vec<Option<f64>>,
}

impl ScenarioSamples {
    pub fn values(&self) -> Vec<f64> {
        self.statistics.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McReport {
    pub name: String,
    pub alphas: Vec<f64>,
    pub rows: Vec<ReportRow>,
    pub samples: Vec<ScenarioSamples>,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Equality ignores wall-clock time.
impl PartialEq for McReport {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.alphas == other.alphas
            && self.rows == other.rows
            && self.samples == other.samples
    }
}

impl McReport {
    pub fn rate(&self, hypothesis: Hypothesis, overlay: &str, n: usize, alpha: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.hypothesis == hypothesis && r.overlay == overlay && r.n == n && r.alpha == alpha
            })
            .and_then(|r| r.rejection_rate)
    }

    pub fn samples_for(
        &self,
        hypothesis: Hypothesis,
        overlay: &str,
        n: usize,
    ) -> Option<&ScenarioSamples> {
        self.samples
            .iter()
            .find(|s| s.hypothesis == hypothesis && s.overlay == overlay && s.n == n)
    }

    /// One row per scenario × alpha.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "scenario",
            "hypothesis",
            "overlay",
            "variant",
            "n",
            "alpha",
            "rejection_rate",
            "reps",
            "failures",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.scenario.to_string(),
                format!("{:?}", r.hypothesis).to_lowercase(),
                r.overlay.clone(),
                r.variant.to_string(),
                r.n.to_string(),
                r.alpha.to_string(),
                r.rejection_rate
                    .map(crate::sim::fmt_num)
                    .unwrap_or_default(),
                r.reps.to_string(),
                r.failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Run in the current rayon pool.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<McReport> {
    spec.validate()?;
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for sc in spec.scenarios() {
        let label = sc.overlay.label();
        if let Err(e) = check_windows(sc.n, &spec.tuning, sc.variant) {
            for &alpha in &spec.alphas {
                rows.push(ReportRow {
                    scenario: sc.index,
                    hypothesis: sc.hypothesis,
                    overlay: label.clone(),
                    variant: sc.variant,
                    n: sc.n,
                    alpha,
                    rejection_rate: None,
                    reps: 0,
                    failures: spec.reps,
                    error: Some(e.to_string()),
                });
            }
            continue;
        }
        let grid = SimGrid::new(sc.n)?;
        let stats: Vec<Option<f64>> = (0..spec.reps as u64)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(spec.master_seed, sc.index, rep);
                let path = sc.model.simulate(grid, seed).ok()?;
                SpotAnalysis::compute(path.obs(), &spec.tuning, sc.variant)
                    .ok()
                    .map(|a| a.statistic())
            })
            .collect();
        let ok: Vec<f64> = stats.iter().flatten().copied().collect();
        let failures = stats.len() - ok.len();
        for &alpha in &spec.alphas {
            let crit = critical_value(alpha)?;
            let rate = if ok.is_empty() {
                None
            } else {
                Some(ok.iter().filter(|&&t| t > crit).count() as f64 / ok.len() as f64)
            };
            rows.push(ReportRow {
                scenario: sc.index,
                hypothesis: sc.hypothesis,
                overlay: label.clone(),
                variant: sc.variant,
                n: sc.n,
                alpha,
                rejection_rate: rate,
                reps: ok.len(),
                failures,
                error: ok
                    .is_empty()
                    .then(|| "every replication failed".to_string()),
            });
        }
        samples.push(ScenarioSamples {
            scenario: sc.index,
            hypothesis: sc.hypothesis,
            overlay: label,
            variant: sc.variant,
            n: sc.n,
            statistics: stats,
        });
    }
    Ok(McReport {
        name: spec.name.clone(),
        alphas: spec.alphas.clone(),
        rows,
        samples,
        elapsed: start.elapsed(),
    })
}

/// Run on a dedicated pool with `threads` workers (all cores when `None`).
pub fn run_experiment_with_threads(
    spec: &ExperimentSpec,
    threads: Option<usize>,
) -> Result<McReport> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(spec))
}

/// Size/Power × alpha pivot of a report, one line per overlay and grid size.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionTable {
    pub alphas: Vec<f64>,
    pub has_power: bool,
    pub lines: Vec<TableLine>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableLine {
    pub overlay: String,
    pub n: usize,
    pub variant: TestVariant,
    pub size: Vec<Option<f64>>,
    pub power: Vec<Option<f64>>,
}

pub fn rejection_table(report: &McReport) -> Result<RejectionTable> {
    if report.rows.is_empty() {
        return Err(Error::param("empty report"));
    }
    let has_power = report
        .rows
        .iter()
        .any(|r| r.hypothesis == Hypothesis::Alternative);
    let mut lines: Vec<TableLine> = Vec::new();
    for r in &report.rows {
        let line = match lines
            .iter_mut()
            .position(|l| l.overlay == r.overlay && l.n == r.n)
        {
            Some(i) => &mut lines[i],
            None => {
                lines.push(TableLine {
                    overlay: r.overlay.clone(),
                    n: r.n,
                    variant: r.variant,
                    size: vec![None; report.alphas.len()],
                    power: vec![None; report.alphas.len()],
                });
                lines.last_mut().expect("just pushed")
            }
        };
        if let Some(ai) = report.alphas.iter().position(|&a| a == r.alpha) {
            match r.hypothesis {
                Hypothesis::Null => line.size[ai] = r.rejection_rate,
                Hypothesis::Alternative => line.power[ai] = r.rejection_rate,
            }
        }
    }
    Ok(RejectionTable {
        alphas: report.alphas.clone(),
        has_power,
        lines,
    })
}

fn pct(a: f64) -> String {
    format!("{}%", (a * 1000.0).round() / 10.0)
}

impl RejectionTable {
    fn header(&self) -> Vec<String> {
        let mut h = vec![
            "overlay".to_string(),
            "n".to_string(),
            "variant".to_string(),
        ];
        h.extend(self.alphas.iter().map(|&a| format!("size_{}", pct(a))));
        if self.has_power {
            h.extend(self.alphas.iter().map(|&a| format!("power_{}", pct(a))));
        }
        h
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header())?;
        for l in &self.lines {
            let mut rec = vec![l.overlay.clone(), l.n.to_string(), l.variant.to_string()];
            let cols = if self.has_power {
                [&l.size, &l.power].to_vec()
            } else {
                vec![&l.size]
            };
            for col in cols {
                rec.extend(
                    col.iter()
                        .map(|v| v.map(crate::sim::fmt_num).unwrap_or_default()),
                );
            }
            w.write_record(rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Aligned plain-text rendering rounded to four decimals.
    pub fn to_text(&self) -> String {
        let header = self.header();
        let mut cells: Vec<Vec<String>> = vec![header];
        for l in &self.lines {
            let mut rec = vec![l.overlay.clone(), l.n.to_string(), l.variant.to_string()];
            let cols = if self.has_power {
                [&l.size, &l.power].to_vec()
            } else {
                vec![&l.size]
            };
            for col in cols {
                rec.extend(
                    col.iter()
                        .map(|v| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())),
                );
            }
            cells.push(rec);
        }
        let widths: Vec<usize> = (0..cells[0].len())
            .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:>w$}"))
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub bin_center: f64,
    pub count: usize,
    pub normal_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QqExport {
    /// `(normal_quantile((i − 0.5)/m), x_(i))`.
    pub pairs: Vec<(f64, f64)>,
    pub bin_width: f64,
    pub histogram: Vec<HistogramBin>,
    /// All samples equal: the QQ plot is a vertical line.
    pub degenerate: bool,
}

impl QqExport {
    pub fn qq_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["theoretical", "empirical"])?;
        for (t, e) in &self.pairs {
            w.write_record([crate::sim::fmt_num(*t), crate::sim::fmt_num(*e)])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("utf-8"))
    }

    pub fn histogram_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["bin_center", "count", "normal_density"])?;
        for b in &self.histogram {
            w.write_record([
                crate::sim::fmt_num(b.bin_center),
                b.count.to_string(),
                crate::sim::fmt_num(b.normal_density),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("utf-8"))
    }

    /// Least-squares slope of empirical on theoretical quantiles.
    pub fn slope(&self) -> f64 {
        qq_slope(&self.pairs)
    }
}

/// Linear-interpolation sample quantile of sorted data.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

const MAX_BINS: usize = 10_000;

pub fn export_qq(samples: &[f64]) -> Result<QqExport> {
    if samples.len() < 10 {
        return Err(Error::param(format!(
            "need at least 10 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data("samples must be finite".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let m = sorted.len();
    let pairs: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            (
                normal::quantile((i as f64 + 0.5) / m as f64).expect("interior probability"),
                x,
            )
        })
        .collect();
    let (min, max) = (sorted[0], sorted[m - 1]);
    let degenerate = min == max;
    let iqr = sorted_quantile(&sorted, 0.75) - sorted_quantile(&sorted, 0.25);
    let fd = 2.0 * iqr / (m as f64).cbrt();
    let (width, bins) = if degenerate {
        (0.0, 1)
    } else if fd > 0.0 {
        let b = (((max - min) / fd).ceil() as usize).clamp(1, MAX_BINS);
        ((max - min) / b as f64, b)
    } else {
        // Zero IQR with a nonzero range; fall back to Sturges.
        let b = ((m as f64).log2().ceil() as usize + 1).max(1);
        ((max - min) / b as f64, b)
    };
    let mut counts = vec![0usize; bins];
    for &x in &sorted {
        let idx = if width > 0.0 {
            (((x - min) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    let histogram = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let c = if width > 0.0 {
                min + (i as f64 + 0.5) * width
            } else {
                min
            };
            HistogramBin {
                bin_center: c,
                count,
                normal_density: normal::pdf(c),
            }
        })
        .collect();
    Ok(QqExport {
        pairs,
        bin_width: width,
        histogram,
        degenerate,
    })
}

pub fn qq_slope(pairs: &[(f64, f64)]) -> f64 {
    let m = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Kolmogorov–Smirnov distance between the empirical CDF and `Φ`.
pub fn ks_distance_normal(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let m = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal::cdf(x);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max)
}
