//! Writes the synthetic tick file used by the end-to-end pipeline checks.
//!
//! Ten trading days of Poisson-timed trades whose latent log-price has a
//! stepwise U-shaped variance profile (16x, 4x, 1x, 4x, 16x over the open and
//! close half hours), plus a few rows the cleaner must drop or merge.
//!
//!     cargo run -p hvtest-core --example tick_fixture > ticks.csv

use std::io::{self, BufWriter, Write};

use chrono::{Duration, NaiveDate, NaiveTime};
use hvtest_core::rng::{stream_rng, Stream};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

const SESSION: f64 = 23_400.0;
const DAILY_VAR: f64 = 1.0e-4;

fn multiplier(sec: f64) -> f64 {
    match sec {
        s if s < 1800.0 => 16.0,
        s if s < 3600.0 => 4.0,
        s if s < SESSION - 3600.0 => 1.0,
        s if s < SESSION - 1800.0 => 4.0,
        _ => 16.0,
    }
}

fn main() -> io::Result<()> {
    let mean_mult = (2.0 * 16.0 * 1800.0 + 2.0 * 4.0 * 1800.0 + (SESSION - 7200.0)) / SESSION;
    let open = NaiveTime::from_hms_opt(9, 30, 0).unwrap();
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "date,time,price,size")?;
    let mut day = NaiveDate::from_ymd_opt(2024, 3, 4).unwrap();
    let mut written = 0;
    let gap = Exp::new(0.25).unwrap();
    while written < 10 {
        if day.format("%u").to_string().parse::<u32>().unwrap() > 5 {
            day = day.succ_opt().unwrap();
            continue;
        }
        let mut rng = stream_rng(0x7d1c_0000 + written as u64, Stream::Diffusion);
        let mut x = (100.0f64).ln();
        let stamp = |s: f64| {
            (open + Duration::milliseconds((s * 1000.0).floor() as i64))
                .format("%H:%M:%S%.3f")
                .to_string()
        };
        writeln!(out, "{day},09:29:58.500,{:.4},200", x.exp())?;
        writeln!(out, "{day},09:30:00,{:.4},100", x.exp())?;
        if written == 2 {
            writeln!(out, "{day},09:3O:01,{:.4},100", x.exp())?;
        }
        let mut t = 0.0;
        loop {
            let dt: f64 = gap.sample(&mut rng);
            if t + dt > SESSION {
                break;
            }
            let var = DAILY_VAR / mean_mult * multiplier(t + dt / 2.0) * dt / SESSION;
            let z: f64 = StandardNormal.sample(&mut rng);
            x += var.sqrt() * z;
            t += dt;
            let event = rng.random_range(0..1000);
            let size = match rng.random_range(0..200) {
                _ if event == 1 => 0,
                0 => 0,
                _ => 100 * rng.random_range(1..=5u32),
            };
            let noise: f64 = StandardNormal.sample(&mut rng);
            writeln!(
                out,
                "{day},{},{:.4},{size}",
                stamp(t),
                (x + 2.0e-5 * noise).exp()
            )?;
            match event {
                0 => writeln!(out, "{day},{},0.0000,100", stamp(t))?,
                1 => {
                    // Same-second pair with no reported volume.
                    let z: f64 = StandardNormal.sample(&mut rng);
                    writeln!(out, "{day},{},{:.4},0", stamp(t), (x + 2.0e-5 * z).exp())?;
                    writeln!(out, "{day},{},{:.4},0", stamp(t), (x - 2.0e-5 * z).exp())?;
                }
                _ => {}
            }
        }
        writeln!(out, "{day},16:00:00,{:.4},300", x.exp())?;
        writeln!(out, "{day},16:00:03,{:.4},100", x.exp())?;
        written += 1;
        day = day.succ_opt().unwrap();
    }
    out.flush()
}
