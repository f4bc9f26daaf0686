use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use hvtest_core::estimators::TuningParams;
use hvtest_core::hettest::run_test;
use hvtest_core::mc::{export_qq, ks_distance_normal, rejection_table, run_experiment, Overlay};
use hvtest_core::pipeline::{
    daily_report, prepare_days, spot_curve, PreparedDays, ReportConfig, Span,
};
use hvtest_core::sim::{fmt_num, JumpSpec, NoiseSpec};
use hvtest_core::{BaseModel, ExperimentSpec, ModelSpec, SamplePath, SimGrid, TestVariant};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{parse_list, parse_variant_grids, Format, RunConfig};
use crate::{CleanArgs, CliError, McArgs, QqArgs, ReportArgs, SimulateArgs, TestArgs, TuningArgs};

type Res<T = ()> = Result<T, CliError>;

fn tuning(cfg: &RunConfig, a: &TuningArgs) -> Res<TuningParams> {
    let mut t = cfg.tuning.unwrap_or_default();
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut t.theta, a.theta);
    set(&mut t.varpi, a.varpi);
    set(&mut t.trunc_mult, a.trunc_mult);
    set(&mut t.c_pre, a.c_pre);
    set(&mut t.chi, a.chi);
    set(&mut t.a_ker, a.a_ker);
    set(&mut t.b_ker, a.b_ker);
    t.validate()?;
    Ok(t)
}

fn parse_variant(s: &str) -> Res<TestVariant> {
    s.parse()
        .map_err(|e: hvtest_core::Error| CliError::config(e.to_string()))
}

fn required(p: Option<PathBuf>, flag: &str) -> Res<PathBuf> {
    p.ok_or_else(|| CliError::config(format!("missing --{flag} (or the matching config key)")))
}

fn open(path: &Path) -> Res<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(format!("cannot open {}: {e}", path.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Res {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, bytes)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn pretty(v: &impl Serialize) -> Res<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| CliError::io(e.to_string()))
}

fn with_config(v: &impl Serialize, config: &Value) -> Res<Value> {
    let mut v = serde_json::to_value(v).map_err(|e| CliError::io(e.to_string()))?;
    if let Value::Object(map) = &mut v {
        map.insert("config".into(), config.clone());
    }
    Ok(v)
}

/// Write a CSV plus its `<file>.meta.json` sidecar.
fn write_csv_with_meta(path: &Path, csv: &[u8], meta: &Value) -> Res {
    write_bytes(path, csv)?;
    let mut side = path.as_os_str().to_owned();
    side.push(".meta.json");
    write_bytes(Path::new(&side), pretty(meta)?.as_bytes())
}

fn stdout_write(s: &str) -> Res {
    let mut out = io::stdout().lock();
    out.write_all(s.as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn simulate(cfg: &RunConfig, a: SimulateArgs) -> Res {
    let mut sc = cfg.simulate.clone().unwrap_or_default();
    match a.model.as_deref() {
        Some("constant") if !matches!(sc.model, BaseModel::Constant { .. }) => {
            sc.model = BaseModel::constant_reference()
        }
        Some("heston") if !matches!(sc.model, BaseModel::Heston(_)) => {
            sc.model = BaseModel::heston_reference()
        }
        _ => {}
    }
    if let Some(s) = a.sigma {
        match &mut sc.model {
            BaseModel::Constant { sigma, .. } => *sigma = s,
            BaseModel::Heston(_) => {
                return Err(CliError::config(
                    "--sigma applies to the constant model only",
                ))
            }
        }
    }
    if let Some(v) = a.x0 {
        match &mut sc.model {
            BaseModel::Constant { x0, .. } => *x0 = v,
            BaseModel::Heston(p) => p.x0 = v,
        }
    }
    if let Some(n) = a.n {
        sc.n = n;
    }
    if let Some(lambda) = a.jumps {
        let sigma_jump = a
            .jump_sigma
            .or(sc.jumps.map(|j| j.sigma_jump))
            .unwrap_or(0.5);
        sc.jumps = Some(JumpSpec { lambda, sigma_jump });
    } else if let Some(sj) = a.jump_sigma {
        match &mut sc.jumps {
            Some(j) => j.sigma_jump = sj,
            None => return Err(CliError::config("--jump-sigma needs --jumps")),
        }
    }
    if let Some(eta) = a.noise {
        sc.noise = Some(NoiseSpec { eta });
    }
    if a.out.is_some() {
        sc.out = a.out;
    }
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let spec = ModelSpec {
        base: sc.model,
        jumps: sc.jumps,
        noise: sc.noise,
    };
    spec.validate()?;
    let path = spec.simulate(SimGrid::new(sc.n)?, seed)?;
    let config = json!({ "command": "simulate", "seed": seed, "simulate": sc });

    let mut summary = format!(
        "simulated n={} model={} seed={seed}",
        path.n(),
        path.labels.model.as_deref().unwrap_or("?")
    );
    match &path.labels.jumps {
        Some(j) => write!(
            summary,
            " jumps=lambda {} sigma {} ({} realized)",
            j.lambda, j.sigma_jump, j.count
        )
        .unwrap(),
        None => summary.push_str(" jumps=none"),
    }
    match path.labels.noise_eta {
        Some(eta) => write!(summary, " noise=eta {eta}").unwrap(),
        None => summary.push_str(" noise=none"),
    }

    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    match &sc.out {
        Some(out) => {
            let meta = json!({ "config": config, "labels": path.labels });
            write_csv_with_meta(out, &buf, &meta)?;
            println!("{summary}");
            println!("wrote {}", out.display());
        }
        None => {
            stdout_write(std::str::from_utf8(&buf).expect("utf-8"))?;
            eprintln!("{summary}");
        }
    }
    Ok(())
}

pub fn test(cfg: &RunConfig, a: TestArgs) -> Res {
    let mut tc = cfg.test.clone().unwrap_or_default();
    if a.input.is_some() {
        tc.input = a.input;
    }
    if let Some(v) = &a.variant {
        tc.variant = parse_variant(v)?;
    }
    if let Some(alpha) = a.alpha {
        tc.alpha = alpha;
    }
    if let Some(f) = a.format {
        tc.format = f;
    }
    let t = tuning(cfg, &a.tuning)?;
    let input = required(tc.input.clone(), "input")?;
    let path = SamplePath::read_csv(open(&input)?)?;
    let outcome = run_test(path.obs(), &t, tc.variant, tc.alpha)?;
    let config = json!({ "command": "test", "tuning": t, "test": tc });
    let text = match tc.format {
        Format::Json => pretty(&with_config(&outcome, &config)?)?,
        Format::Csv => {
            let w = &outcome.windows;
            let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
            let opt_u = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
            format!(
                "variant,n,statistic,alpha,critical,reject,p_value,iv_hat,block_count,k_n,p_n,l_n,nu_n,phi_n\n{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                outcome.variant,
                outcome.n,
                fmt_num(outcome.statistic),
                outcome.alpha,
                fmt_num(outcome.critical),
                outcome.reject,
                fmt_num(outcome.p_value),
                fmt_num(outcome.iv_hat),
                outcome.block_count,
                opt_u(w.k_n),
                opt_u(w.p_n),
                opt_u(w.l_n),
                opt(w.nu_n),
                opt(w.phi_n)
            )
        }
        Format::Text => {
            let mut rows: Vec<(&str, String)> = vec![
                ("variant", outcome.variant.to_string()),
                ("n", outcome.n.to_string()),
                ("statistic", fmt_num(outcome.statistic)),
                ("alpha", outcome.alpha.to_string()),
                ("critical", fmt_num(outcome.critical)),
                ("reject", outcome.reject.to_string()),
                ("p_value", fmt_num(outcome.p_value)),
                ("iv_hat", fmt_num(outcome.iv_hat)),
                ("block_count", outcome.block_count.to_string()),
            ];
            let w = &outcome.windows;
            for (k, v) in [("k_n", w.k_n), ("p_n", w.p_n), ("l_n", w.l_n)] {
                if let Some(v) = v {
                    rows.push((k, v.to_string()));
                }
            }
            for (k, v) in [("nu_n", w.nu_n), ("phi_n", w.phi_n)] {
                if let Some(v) = v {
                    rows.push((k, fmt_num(v)));
                }
            }
            rows.iter().map(|(k, v)| format!("{k:<12} {v}\n")).collect()
        }
    };
    stdout_write(&text)
}

pub fn mc(cfg: &RunConfig, a: McArgs) -> Res {
    let mut mc = cfg.mc.clone().unwrap_or_default();
    if let Some(v) = a.name {
        mc.name = v;
    }
    if let Some(v) = a.reps {
        mc.reps = v;
    }
    if let Some(v) = &a.n {
        mc.n_values = parse_list(v, "grid size")?;
    }
    if let Some(v) = &a.lambdas {
        mc.lambdas = parse_list(v, "jump intensity")?;
    }
    if let Some(v) = a.sigma_jump {
        mc.sigma_jump = v;
    }
    if let Some(v) = &a.etas {
        mc.etas = parse_list(v, "noise level")?;
    }
    if let Some(v) = &a.alphas {
        mc.alphas = parse_list(v, "alpha")?;
    }
    if let Some(v) = &a.variant {
        mc.variant = Some(parse_variant(v)?);
    }
    if a.no_power {
        mc.power = false;
    }
    if a.out_dir.is_some() {
        mc.out_dir = a.out_dir;
    }
    if let Some(f) = a.format {
        mc.format = f;
    }
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let t = tuning(cfg, &a.tuning)?;
    let mut overlays: Vec<Overlay> = mc
        .lambdas
        .iter()
        .map(|&lambda| Overlay::Jumps {
            lambda,
            sigma_jump: mc.sigma_jump,
        })
        .collect();
    overlays.extend(mc.etas.iter().map(|&eta| Overlay::Noise { eta }));
    if overlays.is_empty() {
        overlays.push(Overlay::None);
    }
    let spec = ExperimentSpec {
        name: mc.name.clone(),
        null_model: mc.null_model,
        alt_model: mc.power.then_some(mc.alt_model),
        variant: mc.variant,
        n_values: mc.n_values.clone(),
        overlays,
        alphas: mc.alphas.clone(),
        reps: mc.reps,
        master_seed: seed,
        tuning: t,
    };
    let report = run_experiment(&spec)?;
    let table = rejection_table(&report)?;
    let config = json!({ "command": "mc", "seed": seed, "tuning": t, "mc": mc });
    let report_json = pretty(&with_config(&report, &config)?)?;
    if let Some(dir) = &mc.out_dir {
        let meta = json!({ "config": config });
        let mut rates = Vec::new();
        report.write_csv(&mut rates)?;
        write_csv_with_meta(&dir.join(format!("{}_rates.csv", mc.name)), &rates, &meta)?;
        write_csv_with_meta(
            &dir.join(format!("{}_table.csv", mc.name)),
            table.to_csv()?.as_bytes(),
            &meta,
        )?;
        write_bytes(
            &dir.join(format!("{}_report.json", mc.name)),
            report_json.as_bytes(),
        )?;
    }
    match mc.format {
        Format::Text => stdout_write(&table.to_text())?,
        Format::Csv => stdout_write(&table.to_csv()?)?,
        Format::Json => stdout_write(&report_json)?,
    }
    for r in report.rows.iter().filter(|r| r.error.is_some()) {
        if r.alpha == report.alphas[0] {
            eprintln!(
                "scenario {} ({}, n={}): {}",
                r.scenario,
                r.overlay,
                r.n,
                r.error.as_deref().unwrap_or("")
            );
        }
    }
    if report.rows.iter().all(|r| r.rejection_rate.is_none()) {
        return Err(CliError::config("every scenario failed"));
    }
    Ok(())
}

fn statistics_from_json(v: &Value, scenario: Option<u64>) -> Res<(Vec<f64>, Value)> {
    let numbers = |arr: &Vec<Value>| -> Vec<f64> { arr.iter().filter_map(Value::as_f64).collect() };
    match v {
        Value::Array(arr) => Ok((numbers(arr), Value::Null)),
        Value::Object(map) => {
            if let Some(Value::Array(arr)) = map.get("statistics") {
                return Ok((numbers(arr), Value::Null));
            }
            let samples = map
                .get("samples")
                .and_then(Value::as_array)
                .ok_or_else(|| {
                    CliError::config("JSON has neither \"samples\" nor \"statistics\"")
                })?;
            let pick = match scenario {
                Some(s) => samples
                    .iter()
                    .find(|x| x.get("scenario").and_then(Value::as_u64) == Some(s))
                    .ok_or_else(|| CliError::config(format!("no scenario {s} in report")))?,
                None if samples.len() == 1 => &samples[0],
                None => {
                    let ids: Vec<String> = samples
                        .iter()
                        .map(|x| {
                            format!(
                                "{} ({} n={} {})",
                                x["scenario"],
                                x["overlay"].as_str().unwrap_or(""),
                                x["n"],
                                x["hypothesis"].as_str().unwrap_or("")
                            )
                        })
                        .collect();
                    return Err(CliError::config(format!(
                        "report holds several scenarios; pick one with --scenario: {}",
                        ids.join(", ")
                    )));
                }
            };
            let arr = pick
                .get("statistics")
                .and_then(Value::as_array)
                .ok_or_else(|| CliError::config("scenario has no statistics"))?;
            let mut desc = pick.clone();
            if let Value::Object(m) = &mut desc {
                m.remove("statistics");
            }
            Ok((numbers(arr), desc))
        }
        _ => Err(CliError::config("expected a JSON array or an MC report")),
    }
}

pub fn qq(cfg: &RunConfig, a: QqArgs) -> Res {
    let mut qc = cfg.qq.clone().unwrap_or_default();
    if a.input.is_some() {
        qc.input = a.input;
    }
    if a.scenario.is_some() {
        qc.scenario = a.scenario;
    }
    if a.out_prefix.is_some() {
        qc.out_prefix = a.out_prefix;
    }
    let input = required(qc.input.clone(), "input")?;
    let v: Value = serde_json::from_reader(open(&input)?)
        .map_err(|e| CliError::io(format!("{}: {e}", input.display())))?;
    let (stats, scenario) = statistics_from_json(&v, qc.scenario)?;
    let qq = export_qq(&stats)?;
    let prefix = qc
        .out_prefix
        .clone()
        .unwrap_or_else(|| input.with_extension(""));
    let config = json!({ "command": "qq", "qq": qc });
    let slope = qq.slope();
    let ks = ks_distance_normal(&stats);
    let meta = json!({
        "config": config,
        "scenario": scenario,
        "samples": stats.len(),
        "degenerate": qq.degenerate,
        "bin_width": qq.bin_width,
        "qq_slope": slope,
        "ks_distance": ks,
    });
    let with_suffix = |s: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(s);
        PathBuf::from(p)
    };
    let (qq_path, hist_path) = (with_suffix("_qq.csv"), with_suffix("_hist.csv"));
    write_csv_with_meta(&qq_path, qq.qq_csv()?.as_bytes(), &meta)?;
    write_csv_with_meta(&hist_path, qq.histogram_csv()?.as_bytes(), &meta)?;
    let mut s = format!(
        "samples={} qq_slope={} ks_distance={}",
        stats.len(),
        fmt_num(slope),
        fmt_num(ks)
    );
    if qq.degenerate {
        s.push_str(" degenerate=true");
    }
    stdout_write(&format!(
        "{s}\nwrote {}\nwrote {}\n",
        qq_path.display(),
        hist_path.display()
    ))
}

fn parse_span(s: &str) -> Res<Span> {
    s.parse()
        .map_err(|e: hvtest_core::Error| CliError::config(e.to_string()))
}

fn print_cleaning(p: &PreparedDays) -> String {
    let mut out = String::new();
    for (day, s) in &p.stats {
        writeln!(
            out,
            "{day} input={} outside_session={} nonpositive_price={} merged_groups={} merged_records={} zero_size_groups={} output={}",
            s.input, s.outside_session, s.nonpositive_price, s.merged_groups, s.merged_records, s.zero_size_groups, s.output
        )
        .unwrap();
    }
    for (day, e) in &p.day_errors {
        writeln!(out, "{day} skipped: {e}").unwrap();
    }
    if !p.row_errors.is_empty() {
        writeln!(out, "row errors: {}", p.row_errors.len()).unwrap();
        for e in p.row_errors.iter().take(20) {
            writeln!(out, "  {e}").unwrap();
        }
    }
    out
}

fn cleaning_json(p: &PreparedDays) -> Value {
    json!({
        "days": p.stats.iter().map(|(d, s)| json!({ "day": d, "stats": s })).collect::<Vec<_>>(),
        "day_errors": p.day_errors.iter().map(|(d, e)| json!({ "day": d, "error": e })).collect::<Vec<_>>(),
        "row_errors": p.row_errors,
    })
}

pub fn clean(cfg: &RunConfig, a: CleanArgs) -> Res {
    let mut cc = cfg.clean.clone().unwrap_or_default();
    if a.input.is_some() {
        cc.input = a.input;
    }
    if let Some(g) = a.grid_seconds {
        cc.grid_seconds = g;
    }
    if let Some(s) = &a.session {
        cc.session = parse_span(s)?;
    }
    if a.out_dir.is_some() {
        cc.out_dir = a.out_dir;
    }
    let input = required(cc.input.clone(), "input")?;
    let out_dir = required(cc.out_dir.clone(), "out-dir")?;
    let prepared = prepare_days(open(&input)?, cc.grid_seconds, cc.session)?;
    for s in &prepared.series {
        let mut buf = Vec::new();
        s.write_csv(&mut buf)?;
        write_bytes(&out_dir.join(format!("{}.csv", s.day)), &buf)?;
    }
    let config = json!({ "command": "clean", "clean": cc });
    write_bytes(
        &out_dir.join("cleaning_stats.json"),
        pretty(&with_config(&cleaning_json(&prepared), &config)?)?.as_bytes(),
    )?;
    stdout_write(&print_cleaning(&prepared))?;
    stdout_write(&format!(
        "wrote {} day(s) to {}\n",
        prepared.series.len(),
        out_dir.display()
    ))
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn report(cfg: &RunConfig, a: ReportArgs) -> Res {
    let mut rc = cfg.report.clone().unwrap_or_default();
    if a.input.is_some() {
        rc.input = a.input;
    }
    if let Some(v) = &a.variants {
        rc.variants = parse_variant_grids(v)?;
    }
    if let Some(v) = &a.spans {
        rc.spans = Span::parse_list(v).map_err(|e| CliError::config(e.to_string()))?;
    }
    if let Some(v) = &a.alphas {
        rc.alphas = parse_list(v, "alpha")?;
    }
    if let Some(v) = &a.session {
        rc.session = parse_span(v)?;
    }
    if let Some(v) = a.min_increment_factor {
        rc.min_increment_factor = v;
    }
    if a.out_dir.is_some() {
        rc.out_dir = a.out_dir;
    }
    let t = tuning(cfg, &a.tuning)?;
    let input = required(rc.input.clone(), "input")?;
    let out_dir = required(rc.out_dir.clone(), "out-dir")?;
    if rc.variants.is_empty() {
        return Err(CliError::config("no variants requested"));
    }
    let base = rc.variants.iter().fold(0, |g, v| gcd(g, v.grid_seconds));
    if base == 0 {
        return Err(CliError::config("grid_seconds must be positive"));
    }
    let prepared = prepare_days(open(&input)?, base, rc.session)?;
    let rcfg = ReportConfig {
        variants: rc.variants.clone(),
        tuning: t,
        alphas: rc.alphas.clone(),
        spans: rc.spans.clone(),
        min_increment_factor: rc.min_increment_factor,
    };
    let rep = daily_report(&prepared.series, &rcfg)?;
    let config = json!({ "command": "report", "tuning": t, "report": rc });
    let meta = json!({ "config": config });

    let mut table = Vec::new();
    rep.write_table_csv(&mut table)?;
    write_csv_with_meta(&out_dir.join("proportions.csv"), &table, &meta)?;
    let mut full = with_config(&rep, &config)?;
    if let Value::Object(m) = &mut full {
        m.insert("cleaning".into(), cleaning_json(&prepared));
    }
    write_bytes(
        &out_dir.join("daily_report.json"),
        pretty(&full)?.as_bytes(),
    )?;

    for vg in &rc.variants {
        let days: Vec<_> = prepared
            .series
            .iter()
            .filter_map(|s| s.decimate(vg.grid_seconds).ok())
            .collect();
        match spot_curve(&days, vg.variant, &t) {
            Ok(curve) => {
                let mut buf = Vec::new();
                curve.write_csv(&mut buf)?;
                let name = format!("spot_curve_{}_{}s.csv", vg.variant, vg.grid_seconds);
                write_csv_with_meta(&out_dir.join(name), &buf, &meta)?;
            }
            Err(e) => eprintln!("spot curve {} at {}s: {e}", vg.variant, vg.grid_seconds),
        }
    }

    let mut text = format!(
        "days={} usable={}\n",
        prepared.stats.len(),
        prepared.series.len()
    );
    for p in &rep.proportion_rejected {
        writeln!(
            text,
            "{:<12} {:>4}s  {}  alpha={:<5} rejected {:>4}/{:<4} proportion {}",
            p.variant.to_string(),
            p.grid_seconds,
            p.span,
            p.alpha,
            p.rejected,
            p.tested,
            p.proportion
                .map(|x| format!("{x:.4}"))
                .unwrap_or_else(|| "-".into())
        )
        .unwrap();
    }
    stdout_write(&text)?;
    stdout_write(&format!("wrote {}\n", out_dir.display()))
}

pub fn version() {
    println!("hvtest {}", env!("CARGO_PKG_VERSION"));
    println!("hvtest-core {}", hvtest_core::VERSION);
    println!("target {}-{}", std::env::consts::ARCH, std::env::consts::OS);
    println!(
        "profile {}",
        if cfg!(debug_assertions) {
            "debug"
        } else {
            "release"
        }
    );
}
