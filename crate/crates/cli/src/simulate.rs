//! Accepted skeletons and filled-in paths on a regular grid.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use exactdiff_core::rng::stream;

use crate::config::ExperimentConfig;
use crate::error::{write_file, Result};

type Replicate = (String, Vec<(f64, f64)>);

pub struct Simulated {
    /// One JSON object per replicate.
    pub skeletons: Vec<String>,
    /// `(replicate, t, y)` rows.
    pub path: Vec<(u64, f64, f64)>,
}

pub fn grid(horizon: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| if i == n { horizon } else { horizon * i as f64 / n as f64 }).collect()
}

pub fn run_simulate(cfg: &ExperimentConfig) -> Result<Simulated> {
    let sim = cfg.simulator(cfg.kappa, cfg.y0)?;
    let times = grid(cfg.horizon, cfg.simulate.grid);
    let per_path: Vec<Result<Replicate>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(cfg.seed, k);
            let mut s = sim.sample(&mut rng)?;
            let json = s.to_json();
            Ok((json, s.fill_in(&times, &mut rng)?))
        })
        .collect();
    let mut out = Simulated { skeletons: Vec::new(), path: Vec::new() };
    for (k, r) in per_path.into_iter().enumerate() {
        let (json, values) = r?;
        out.skeletons.push(json);
        out.path.extend(values.into_iter().map(|(t, y)| (k as u64, t, y)));
    }
    Ok(out)
}

pub fn write_outputs(s: &Simulated, dir: &Path) -> Result<()> {
    let mut json = String::from("[");
    for (k, sk) in s.skeletons.iter().enumerate() {
        json.push_str(if k == 0 { "\n  " } else { ",\n  " });
        json.push_str(sk);
    }
    json.push_str("\n]\n");
    write_file(dir.join("skeletons.json"), &json)?;
    let mut csv = String::from("replicate,t,y\n");
    for (k, t, y) in &s.path {
        writeln!(csv, "{k},{t},{y}").expect("writing to a string");
    }
    write_file(dir.join("paths.csv"), &csv)
}
