//! Brownian bridges and their extrema.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_bridge_point, BesselOrder};
use crate::error::{domain, Result};
use crate::rng::Source;

/// Brownian bridge from `y` at time 0 to `z` at time `duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeSpec {
    pub y: f64,
    pub z: f64,
    pub duration: f64,
}

impl BridgeSpec {
    pub fn new(y: f64, z: f64, duration: f64) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() || !y.is_finite() || !z.is_finite() {
            return Err(domain(format!("bridge needs finite endpoints and duration > 0 (y={y}, z={z}, T={duration})")));
        }
        Ok(BridgeSpec { y, z, duration })
    }

    /// The same bridge with both endpoints negated.
    pub fn reflected(&self) -> Self {
        BridgeSpec { y: -self.y, z: -self.z, duration: self.duration }
    }

    pub fn low(&self) -> f64 {
        self.y.min(self.z)
    }

    pub fn high(&self) -> f64 {
        self.y.max(self.z)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t > 0.0 && t < self.duration {
            Ok(())
        } else {
            Err(domain(format!("time {t} outside (0, {})", self.duration)))
        }
    }

    // E(a) = 2(a−y)(a−z)/T, the exponent of the minimum's CDF
    fn exponent(&self, a: f64) -> f64 {
        2.0 * (a - self.y) * (a - self.z) / self.duration
    }
}

/// Extremum of a path together with the (a.s. unique) time it is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub value: f64,
    pub time: f64,
}

pub type MinRecord = Extremum;
pub type MaxRecord = Extremum;

/// Point at time `t` of the bridge; one normal variate.
pub fn bridge_point<R: Source + ?Sized>(spec: &BridgeSpec, t: f64, rng: &mut R) -> Result<f64> {
    spec.check_time(t)?;
    let s = spec.duration;
    let mean = spec.y + t / s * (spec.z - spec.y);
    let sd = (t * (s - t) / s).sqrt();
    let n: f64 = rng.sample(StandardNormal);
    rng.tally(1);
    Ok(mean + sd * n)
}

/// `P(min ≤ a) = exp(−2(a−y)(a−z)/T)` for `a ≤ min(y, z)`.
pub fn bridge_min_cdf(spec: &BridgeSpec, a: f64) -> Result<f64> {
    if a > spec.low() {
        return Err(domain(format!("{a} is above the bridge's lower endpoint {}", spec.low())));
    }
    Ok((-spec.exponent(a)).exp())
}

/// `P(max ≤ b) = 1 − exp(−2(b−y)(b−z)/T)` for `b ≥ max(y, z)`.
pub fn bridge_max_cdf(spec: &BridgeSpec, b: f64) -> Result<f64> {
    if b < spec.high() {
        return Err(domain(format!("{b} is below the bridge's upper endpoint {}", spec.high())));
    }
    Ok(-(-spec.exponent(b)).exp_m1())
}

/// Draws the minimum and its time, optionally conditioned to exceed `floor`.
pub fn sample_min<R: Source + ?Sized>(spec: &BridgeSpec, rng: &mut R, floor: Option<f64>) -> Result<MinRecord> {
    sample_min_in(spec, floor.unwrap_or(f64::NEG_INFINITY), spec.low(), rng)
}

/// Draws the minimum conditioned on `lo < min ≤ hi`, then its time.
pub fn sample_min_in<R: Source + ?Sized>(spec: &BridgeSpec, lo: f64, hi: f64, rng: &mut R) -> Result<MinRecord> {
    let hi = hi.min(spec.low());
    if !(lo < hi) {
        return Err(domain(format!("minimum band ({lo}, {hi}] has zero probability")));
    }
    let e_hi = spec.exponent(hi);
    let width = if lo.is_finite() { spec.exponent(lo) - e_hi } else { f64::INFINITY };
    if !(width > 0.0) {
        return Err(domain(format!("minimum band ({lo}, {hi}] has zero probability")));
    }
    let u: f64 = rng.random();
    rng.tally(1);
    let e = e_hi - (u * (-width).exp_m1()).ln_1p();
    let d = spec.y - spec.z;
    let mut m = 0.5 * ((spec.y + spec.z) - (d * d + 2.0 * spec.duration * e).sqrt());
    // rounding can push m a hair outside the band
    m = m.min(hi);
    if lo.is_finite() && m <= lo {
        m = lo + (hi - lo) * f64::EPSILON;
    }
    let time = time_of_min(spec, m, rng);
    Ok(Extremum { value: m, time })
}

/// Draws the maximum by reflection, optionally conditioned to stay below `ceiling`.
pub fn sample_max<R: Source + ?Sized>(spec: &BridgeSpec, rng: &mut R, ceiling: Option<f64>) -> Result<MaxRecord> {
    let r = sample_min(&spec.reflected(), rng, ceiling.map(|c| -c))?;
    Ok(Extremum { value: -r.value, time: r.time })
}

/// Time at which a bridge attains its minimum `m`.
///
/// With `θ₁ = y − m`, `θ₂ = z − m`, the ratio `V = (T − τ)/τ` is a two-component
/// mixture: with probability `θ₁/(θ₁ + θ₂)` it is inverse Gaussian with mean
/// `θ₂/θ₁` and shape `θ₂²/T`, otherwise it is the reciprocal of an inverse
/// Gaussian with mean `θ₁/θ₂` and shape `θ₁²/T`. Three logical variates.
pub fn time_of_min<R: Source + ?Sized>(spec: &BridgeSpec, m: f64, rng: &mut R) -> f64 {
    let s = spec.duration;
    let (a, b) = ((spec.y - m).max(0.0), (spec.z - m).max(0.0));
    rng.tally(3);
    let pick: f64 = rng.random();
    if a == 0.0 {
        return 0.0;
    }
    if b == 0.0 {
        return s;
    }
    let v = if pick * (a + b) < a {
        inverse_gaussian(b / a, b * b / s, rng)
    } else {
        1.0 / inverse_gaussian(a / b, a * a / s, rng)
    };
    (s / (1.0 + v)).clamp(0.0, s)
}

/// Density of the time of the minimum given the minimum, for `θ₁, θ₂ > 0`.
pub fn time_of_min_density(theta1: f64, theta2: f64, duration: f64, t: f64) -> f64 {
    if !(t > 0.0 && t < duration) {
        return 0.0;
    }
    let u = duration - t;
    let th = theta1 + theta2;
    let ln = theta1.ln() + theta2.ln() - th.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
        + 1.5 * (duration.ln() - t.ln() - u.ln())
        - theta1 * theta1 / (2.0 * t)
        - theta2 * theta2 / (2.0 * u)
        + th * th / (2.0 * duration);
    ln.exp()
}

// Michael–Schucany–Haas, written to avoid cancellation when mean/shape is large
fn inverse_gaussian<R: Source + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> f64 {
    let n: f64 = rng.sample(StandardNormal);
    let q = mean * n * n / (2.0 * shape);
    let x = mean / (1.0 + q + (q * q + 2.0 * q).sqrt());
    let u: f64 = rng.random();
    if u * (mean + x) <= mean {
        x
    } else {
        mean * mean / x
    }
}

/// Point at time `t` of the bridge conditioned on its minimum.
///
/// On either side of the minimum the path minus `m` is a Bessel(3) bridge
/// ending (or starting) at zero.
pub fn bridge_given_min<R: Source + ?Sized>(spec: &BridgeSpec, min: &MinRecord, t: f64, rng: &mut R) -> Result<f64> {
    if !(t >= 0.0 && t <= spec.duration) {
        return Err(domain(format!("time {t} outside [0, {}]", spec.duration)));
    }
    let (m, tau) = (min.value, min.time);
    if t == tau {
        return Ok(m);
    }
    if t == 0.0 {
        return Ok(spec.y);
    }
    if t == spec.duration {
        return Ok(spec.z);
    }
    excursion_point(m, 0.0, spec.y, spec.duration, spec.z, tau, t, rng)
}

/// Point at time `t` of the bridge conditioned on its maximum, by reflection.
pub fn bridge_given_max<R: Source + ?Sized>(spec: &BridgeSpec, max: &MaxRecord, t: f64, rng: &mut R) -> Result<f64> {
    let r = Extremum { value: -max.value, time: max.time };
    Ok(-bridge_given_min(&spec.reflected(), &r, t, rng)?)
}

/// Value at `t ∈ (s1, s2)` of a path known to have minimum `m` at `tau`, given
/// its values `v1` at `s1` and `v2` at `s2` with `tau ∉ (s1, s2)` except as an
/// endpoint. Used for on-demand interpolation between known points.
#[allow(clippy::too_many_arguments)]
pub(crate) fn excursion_point<R: Source + ?Sized>(
    m: f64,
    s1: f64,
    v1: f64,
    s2: f64,
    v2: f64,
    tau: f64,
    t: f64,
    rng: &mut R,
) -> Result<f64> {
    let three = BesselOrder::from_dimension(3.0)?;
    let (a, va, b, vb) = if t < tau {
        (s1, v1, s2.min(tau), if s2 <= tau { v2 } else { m })
    } else {
        (s1.max(tau), if s1 >= tau { v1 } else { m }, s2, v2)
    };
    let x = bessel_bridge_point(three, (va - m).max(0.0), (vb - m).max(0.0), b - a, t - a, rng)?;
    Ok(m + x)
}
