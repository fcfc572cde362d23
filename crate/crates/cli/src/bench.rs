//! Per-cell performance statistics over many accepted paths.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use exactdiff_core::engine::{PathStats, Simulator};
use exactdiff_core::rng::stream;
use exactdiff_core::Error as CoreError;

use crate::config::ExperimentConfig;
use crate::error::{write_file, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    /// Stopped at a resource cap; printed as `--`.
    Incomplete,
    Error,
}

/// Means per accepted path for one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub algorithm: String,
    pub kappa: f64,
    pub y0: f64,
    pub status: Status,
    pub n_accepted: u64,
    pub attempts: Option<f64>,
    pub poisson_points: Option<f64>,
    pub skeleton_points: Option<f64>,
    /// Logical variates (one per Poisson count, normal, Gamma, ...).
    pub random_variables: Option<f64>,
    /// Raw 32/64-bit words drawn from the generator.
    pub raw_uniforms: Option<f64>,
    pub total_time_s: f64,
    pub rng_seed: u64,
    pub note: String,
}

enum Outcome {
    Done { stats: PathStats, logical: u64, raw: u64 },
    Capped(u64, String),
    Failed(u64, String),
    Skipped,
}

fn one_path(sim: &Simulator, seed: u64, k: u64) -> Outcome {
    let mut rng = stream(seed, k);
    match sim.sample(&mut rng) {
        Ok(s) => Outcome::Done { stats: *s.stats(), logical: rng.logical(), raw: rng.raw() },
        Err(CoreError::ResourceCap(m)) => Outcome::Capped(k, m),
        Err(e) => Outcome::Failed(k, e.to_string()),
    }
}

/// Runs `n_paths` replicates of one cell. Replicate `k` always uses stream
/// `(seed, k)`; once any replicate hits a cap the rest are skipped, since the
/// cell is then reported incomplete whatever they would have done.
pub fn run_cell(cfg: &ExperimentConfig, kappa: f64, y0: f64) -> Result<RunStats> {
    let sim = cfg.simulator(kappa, y0)?;
    let start = Instant::now();
    let stop = AtomicBool::new(false);
    let outcomes: Vec<Outcome> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|k| {
            if stop.load(Ordering::Relaxed) {
                return Outcome::Skipped;
            }
            let o = one_path(&sim, cfg.seed, k);
            if !matches!(o, Outcome::Done { .. }) {
                stop.store(true, Ordering::Relaxed);
            }
            o
        })
        .collect();
    let elapsed = start.elapsed().as_secs_f64();

    let mut row = RunStats {
        algorithm: cfg.algorithm.name().to_string(),
        kappa,
        y0,
        status: Status::Ok,
        n_accepted: 0,
        attempts: None,
        poisson_points: None,
        skeleton_points: None,
        random_variables: None,
        raw_uniforms: None,
        total_time_s: elapsed,
        rng_seed: cfg.seed,
        note: String::new(),
    };
    // lowest failing replicate among those run, so that the note names a real path
    let failed = outcomes.iter().filter_map(|o| match o {
        Outcome::Failed(k, m) => Some((*k, m)),
        _ => None,
    });
    if let Some((k, m)) = failed.min_by_key(|x| x.0) {
        row.status = Status::Error;
        row.note = format!("replicate {k}: {m}");
        return Ok(row);
    }
    let capped = outcomes.iter().filter_map(|o| match o {
        Outcome::Capped(k, m) => Some((*k, m)),
        _ => None,
    });
    if let Some((k, m)) = capped.min_by_key(|x| x.0) {
        row.status = Status::Incomplete;
        row.note = format!("replicate {k}: {m}");
        return Ok(row);
    }
    let (mut a, mut p, mut s, mut l, mut r) = (0u128, 0u128, 0u128, 0u128, 0u128);
    for o in &outcomes {
        if let Outcome::Done { stats, logical, raw } = o {
            a += stats.attempts as u128;
            p += stats.poisson_points as u128;
            s += stats.skeleton_points as u128;
            l += *logical as u128;
            r += *raw as u128;
        }
    }
    let n = outcomes.len() as u64;
    row.n_accepted = n;
    if n > 0 {
        let mean = |x: u128| Some(x as f64 / n as f64);
        row.attempts = mean(a);
        row.poisson_points = mean(p);
        row.skeleton_points = mean(s);
        row.random_variables = mean(l);
        row.raw_uniforms = mean(r);
    }
    Ok(row)
}

/// One row per sweep cell, sorted by `(kappa, y0)`.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<Vec<RunStats>> {
    if cfg.n_paths == 0 {
        return Ok(Vec::new());
    }
    let mut rows = Vec::new();
    for (kappa, y0) in cfg.cells() {
        let row = run_cell(cfg, kappa, y0)?;
        log::info!(
            "{} kappa={kappa} y0={y0}: {:?} {:?} attempts, {:?} Poisson points ({:.1}s)",
            row.algorithm,
            row.status,
            row.attempts,
            row.poisson_points,
            row.total_time_s
        );
        rows.push(row);
    }
    rows.sort_by(|x, y| x.kappa.total_cmp(&y.kappa).then(x.y0.total_cmp(&y.y0)));
    Ok(rows)
}

fn cell(out: &mut String, v: Option<f64>) {
    match v {
        Some(x) => write!(out, ",{x}").expect("writing to a string"),
        None => out.push_str(",--"),
    }
}

pub fn to_csv(rows: &[RunStats]) -> String {
    let mut out = String::from(
        "algorithm,kappa,y0,status,n_accepted,attempts,poisson_points,skeleton_points,random_variables,raw_uniforms,total_time_s,rng_seed,note\n",
    );
    for r in rows {
        let status = match r.status {
            Status::Ok => "ok",
            Status::Incomplete => "--",
            Status::Error => "error",
        };
        write!(out, "{},{},{},{status},{}", r.algorithm, r.kappa, r.y0, r.n_accepted).expect("writing to a string");
        for v in [r.attempts, r.poisson_points, r.skeleton_points, r.random_variables, r.raw_uniforms] {
            cell(&mut out, v);
        }
        writeln!(out, ",{},{},\"{}\"", r.total_time_s, r.rng_seed, r.note.replace('"', "'")).expect("writing to a string");
    }
    out
}

pub fn write_outputs(rows: &[RunStats], dir: &Path) -> Result<()> {
    write_file(dir.join("bench.csv"), &to_csv(rows))?;
    let json = serde_json::to_string_pretty(rows).expect("rows serialize");
    write_file(dir.join("bench.json"), &(json + "\n"))
}
