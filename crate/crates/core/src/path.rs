//! Known points of a candidate path and on-demand interpolation between them.
//!
//! Values are stored in a working frame that may be the reflection of the
//! original coordinates, so that extremum-conditioned laws are always
//! expressed through the minimum.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_bridge_point, BesselOrder};
use crate::brownian::{bridge_point, excursion_point, BridgeSpec};
use crate::error::{domain, numeric, Result};
use crate::rng::Source;
use crate::series::{decide, Bracket, BarrierConfinement, ConditionalConfinement, Refinable};

const MAX_CAP_REJECTIONS: usize = 1_000_000;

/// Constraint on the running maximum of one segment, in working coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cap {
    Below(f64),
    Band(f64, f64),
}

#[derive(Debug, Clone)]
pub(crate) enum Law {
    Brownian,
    Bessel(BesselOrder<f64>),
    /// Brownian path whose minimum `floor` is attained at time `at`.
    Excursion { floor: f64, at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Class {
    Below,
    Band,
    Out,
}

pub(crate) enum SegmentProbability {
    Barrier(BarrierConfinement),
    Conditional(ConditionalConfinement),
}

impl Refinable for SegmentProbability {
    fn bracket(&self) -> Bracket {
        match self {
            SegmentProbability::Barrier(b) => b.bracket(),
            SegmentProbability::Conditional(c) => c.bracket(),
        }
    }

    fn refine(&mut self) -> bool {
        match self {
            SegmentProbability::Barrier(b) => b.refine(),
            SegmentProbability::Conditional(c) => c.refine(),
        }
    }
}

fn key(t: f64) -> u64 {
    // non-negative floats order like their bit patterns
    (t + 0.0).to_bits()
}

fn time(k: u64) -> f64 {
    f64::from_bits(k)
}

#[derive(Debug, Clone)]
pub(crate) struct PathState {
    law: Law,
    sign: f64,
    duration: f64,
    points: BTreeMap<u64, f64>,
    caps: BTreeMap<u64, Cap>,
}

impl PathState {
    /// `y` and `z` are in original coordinates; `sign = −1` reflects the frame.
    pub fn new(law: Law, sign: f64, y: f64, z: f64, duration: f64) -> Self {
        let mut points = BTreeMap::new();
        points.insert(key(0.0), sign * y);
        points.insert(key(duration), sign * z);
        if let Law::Excursion { floor, at } = law {
            points.insert(key(at), floor);
        }
        PathState { law, sign, duration, points, caps: BTreeMap::new() }
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Points in original coordinates, in time order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|(&k, &v)| (time(k), self.sign * v)).collect()
    }

    /// Consecutive point pairs in working coordinates.
    pub fn segments(&self) -> Vec<((f64, f64), (f64, f64))> {
        let pts: Vec<(f64, f64)> = self.points.iter().map(|(&k, &v)| (time(k), v)).collect();
        pts.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn set_cap(&mut self, left: f64, cap: Cap) {
        self.caps.insert(key(left), cap);
    }

    #[cfg(test)]
    pub fn caps(&self) -> Vec<(f64, Cap)> {
        self.caps.iter().map(|(&k, &c)| (time(k), c)).collect()
    }

    /// Value at `t` in original coordinates, simulating it if not yet known.
    pub fn value_at<R: Source + ?Sized>(&mut self, t: f64, rng: &mut R) -> Result<f64> {
        if !(t >= 0.0 && t <= self.duration) {
            return Err(domain(format!("time {t} outside [0, {}]", self.duration)));
        }
        let k = key(t);
        if let Some(&v) = self.points.get(&k) {
            return Ok(self.sign * v);
        }
        let (&k1, &v1) = self.points.range(..k).next_back().expect("left endpoint is always present");
        let (&k2, &v2) = self.points.range(k..).next().expect("right endpoint is always present");
        let (s1, s2) = (time(k1), time(k2));
        let v = match self.caps.get(&k1).copied() {
            None => self.interpolate(s1, v1, s2, v2, t, rng)?,
            Some(cap) => {
                let (v, left, right) = self.capped(s1, v1, s2, v2, t, cap, rng)?;
                self.caps.insert(k1, left);
                self.caps.insert(k, right);
                v
            }
        };
        self.points.insert(k, v);
        Ok(self.sign * v)
    }

    fn interpolate<R: Source + ?Sized>(&self, s1: f64, v1: f64, s2: f64, v2: f64, t: f64, rng: &mut R) -> Result<f64> {
        match self.law {
            Law::Brownian => bridge_point(&BridgeSpec::new(v1, v2, s2 - s1)?, t - s1, rng),
            Law::Bessel(order) => bessel_bridge_point(order, v1, v2, s2 - s1, t - s1, rng),
            Law::Excursion { floor, at } => excursion_point(floor, s1, v1, s2, v2, at, t, rng),
        }
    }

    // rejection from the unconstrained law; both halves must respect the cap
    #[allow(clippy::too_many_arguments)]
    fn capped<R: Source + ?Sized>(
        &self,
        s1: f64,
        v1: f64,
        s2: f64,
        v2: f64,
        t: f64,
        cap: Cap,
        rng: &mut R,
    ) -> Result<(f64, Cap, Cap)> {
        let (lo, hi) = match cap {
            Cap::Below(h) => (None, h),
            Cap::Band(lo, hi) => (Some(lo), hi),
        };
        let child = |c: Class| match (c, lo) {
            (Class::Below, Some(l)) => Cap::Below(l),
            (_, Some(l)) => Cap::Band(l, hi),
            (_, None) => Cap::Below(hi),
        };
        for _ in 0..MAX_CAP_REJECTIONS {
            let v = self.interpolate(s1, v1, s2, v2, t, rng)?;
            let left = self.classify((s1, v1), (t, v), lo, hi, rng)?;
            if left == Class::Out {
                continue;
            }
            let right = self.classify((t, v), (s2, v2), lo, hi, rng)?;
            if right == Class::Out {
                continue;
            }
            if lo.is_some() && left == Class::Below && right == Class::Below {
                continue;
            }
            return Ok((v, child(left), child(right)));
        }
        Err(numeric("capped interpolation kept rejecting"))
    }

    /// Probability that the segment's maximum stays below `h`, given the law.
    pub fn below_probability(&self, a: (f64, f64), b: (f64, f64), h: f64) -> Result<SegmentProbability> {
        let Law::Excursion { floor, at } = self.law else {
            return Err(domain("segment caps need a minimum-conditioned path"));
        };
        let dt = b.0 - a.0;
        Ok(if a.0 == at {
            SegmentProbability::Barrier(BarrierConfinement::new(h - floor, b.1 - floor, dt))
        } else if b.0 == at {
            SegmentProbability::Barrier(BarrierConfinement::new(h - floor, a.1 - floor, dt))
        } else {
            SegmentProbability::Conditional(ConditionalConfinement::new(floor, h, a.1, b.1, dt))
        })
    }

    /// Places the segment's maximum relative to `lo < hi` with a single uniform.
    pub fn classify<R: Source + ?Sized>(
        &self,
        a: (f64, f64),
        b: (f64, f64),
        lo: Option<f64>,
        hi: f64,
        rng: &mut R,
    ) -> Result<Class> {
        let u: f64 = rng.random();
        rng.tally(1);
        if !decide(&mut self.below_probability(a, b, hi)?, u)? {
            return Ok(Class::Out);
        }
        match lo {
            Some(l) if decide(&mut self.below_probability(a, b, l)?, u)? => Ok(Class::Below),
            Some(_) => Ok(Class::Band),
            None => Ok(Class::Below),
        }
    }
}
