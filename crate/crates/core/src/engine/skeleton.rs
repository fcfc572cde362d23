use serde::{Deserialize, Serialize};

use crate::brownian::Extremum;
use crate::error::{domain, Result};
use crate::layered::{Branch, LayerIndex};
use crate::path::PathState;
use crate::rng::Source;

use super::PathStats;

/// What the accepted candidate was conditioned on, beyond its end points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Conditioning {
    None,
    Min(Extremum),
    Layer { index: LayerIndex, branch: Branch, extremum: Extremum },
}

/// An accepted path: finitely many exact points plus enough state to sample
/// the rest of the path from candidate bridge laws alone.
#[derive(Debug, Clone)]
pub struct Skeleton {
    points: Vec<(f64, f64)>,
    conditioning: Conditioning,
    kind: String,
    stats: PathStats,
    state: PathState,
}

#[derive(Serialize)]
struct Json<'a> {
    t: Vec<f64>,
    y: Vec<f64>,
    conditioning: &'a Conditioning,
    #[serde(flatten)]
    stats: &'a PathStats,
    kind: &'a str,
}

impl Skeleton {
    pub(crate) fn new(state: PathState, conditioning: Conditioning, kind: String, stats: PathStats) -> Self {
        Skeleton { points: state.points(), conditioning, kind, stats, state }
    }

    /// The skeleton as accepted, `(0, y)` first and `(T, Y_T)` last.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn conditioning(&self) -> &Conditioning {
        &self.conditioning
    }

    /// Candidate process name.
    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn attempts(&self) -> u64 {
        self.stats.attempts
    }

    pub fn stats(&self) -> &PathStats {
        &self.stats
    }

    pub fn duration(&self) -> f64 {
        self.state.duration()
    }

    pub fn end_value(&self) -> f64 {
        self.points.last().expect("skeletons contain their end points").1
    }

    /// Values at `times`, sampled given everything simulated so far. Requested
    /// times become part of the path, so later requests stay consistent.
    pub fn fill_in<R: Source + ?Sized>(&mut self, times: &[f64], rng: &mut R) -> Result<Vec<(f64, f64)>> {
        let t_end = self.duration();
        if let Some(&t) = times.iter().find(|&&t| !(t >= 0.0 && t <= t_end)) {
            return Err(domain(format!("fill-in time {t} outside [0, {t_end}]")));
        }
        times.iter().map(|&t| Ok((t, self.state.value_at(t, rng)?))).collect()
    }

    /// JSON object with the points as `t` and `y` arrays, the conditioning
    /// and the work counters.
    pub fn to_json(&self) -> String {
        let v = Json {
            t: self.points.iter().map(|p| p.0).collect(),
            y: self.points.iter().map(|p| p.1).collect(),
            conditioning: &self.conditioning,
            stats: &self.stats,
            kind: &self.kind,
        };
        serde_json::to_string(&v).expect("skeletons serialize")
    }
}
