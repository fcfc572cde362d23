//! Draws from one-dimensional densities known up to a constant, by adaptive
//! quadrature on a truncated support and numerical inversion of the CDF.

use rand::Rng;

use std::sync::Arc;

use crate::bessel::ln_transition_density;
use crate::error::{domain, Result};
use crate::model::{Candidate, UnitDiffusion};
use crate::quad::{gk15, integrate_panels, Panel, Tolerance};
use crate::rng::Source;

// the support is cut where the density is e^{−DROP} below its peak
const DROP: f64 = 45.0;
const MAX_EXPANSIONS: usize = 60;

type LogDensity = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tabulated inverse-CDF sampler for a density given by its logarithm.
#[derive(Clone)]
pub struct EndpointSampler {
    panels: Vec<Panel<f64>>,
    cumulative: Vec<f64>,
    peak: f64,
    log_density: LogDensity,
}

impl std::fmt::Debug for EndpointSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EndpointSampler")
            .field("support", &self.support())
            .field("panels", &self.panels.len())
            .finish()
    }
}

fn nan_to_neg_inf(v: f64) -> f64 {
    if v.is_nan() { f64::NEG_INFINITY } else { v }
}

impl EndpointSampler {
    /// Density `∝ exp(−(u−y)²/2T + A(u))` on the model's state space, times
    /// the probability that the bridge to `u` stays above `floor` if given.
    pub fn brownian<M: UnitDiffusion<f64> + ?Sized + 'static>(
        model: Arc<M>,
        y: f64,
        duration: f64,
        floor: Option<f64>,
    ) -> Result<Self> {
        let (lo, hi) = (model.lower_boundary(), model.upper_boundary());
        let lo = floor.map_or(lo, |f| f.max(lo));
        let shift = model.antiderivative(y);
        let ld: LogDensity = Arc::new(move |u| {
            let mut v = -(u - y).powi(2) / (2.0 * duration) + model.antiderivative(u) - shift;
            if let Some(l) = floor {
                v += (-(-2.0 * (y - l) * (u - l) / duration).exp_m1()).ln();
            }
            nan_to_neg_inf(v)
        });
        Self::build(ld, y, duration.sqrt(), lo, hi)
    }

    /// Density `∝ p^δ_T(y, u) exp(Ã(u))` on `(0, ∞)`.
    pub fn bessel<M: UnitDiffusion<f64> + ?Sized + 'static>(model: Arc<M>, y: f64, duration: f64) -> Result<Self> {
        let Candidate::Bessel(order) = model.candidate() else {
            return Err(domain("Bessel endpoint sampler needs a Bessel candidate"));
        };
        let shift = model.biased_antiderivative(y);
        let ld: LogDensity = Arc::new(move |u| match ln_transition_density(order, duration, y, u) {
            Ok(p) => nan_to_neg_inf(p + model.biased_antiderivative(u) - shift),
            Err(_) => f64::NEG_INFINITY,
        });
        Self::build(ld, y, duration.sqrt(), 0.0, f64::INFINITY)
    }

    /// Any density on `(lo, hi)` given by its logarithm, located near `anchor`
    /// with spread of order `scale`.
    pub fn from_log_density<F>(log_density: F, anchor: f64, scale: f64, lo: f64, hi: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::build(Arc::new(move |u| nan_to_neg_inf(log_density(u))), anchor, scale, lo, hi)
    }

    fn build(ld: LogDensity, anchor: f64, scale: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(anchor > lo && anchor < hi) {
            return Err(domain(format!("start {anchor} outside the state space ({lo}, {hi})")));
        }
        // coarse scan for the peak
        let mut peak = f64::NEG_INFINITY;
        let mut arg = anchor;
        for k in -400..=400 {
            let u = anchor + k as f64 * scale / 20.0;
            if u > lo && u < hi {
                let v = ld(u);
                if v > peak {
                    peak = v;
                    arg = u;
                }
            }
        }
        // and inside a boundary layer the scan may step over
        if lo.is_finite() {
            for k in 1..=60 {
                let u = lo + (anchor - lo) * 0.5f64.powi(k);
                let v = ld(u);
                if v > peak {
                    peak = v;
                    arg = u;
                }
            }
        }
        if !peak.is_finite() {
            return Err(domain("endpoint density vanishes near the start"));
        }
        let left = Self::edge(&ld, arg, -scale, lo, peak)?;
        let right = Self::edge(&ld, arg, scale, hi, peak)?;
        let f = |u: f64| (ld(u) - peak).exp();
        let panels = integrate_panels(f, left, right, Tolerance { rel: 1e-12, abs: 0.0, max_panels: 20_000 })?;
        let mut cumulative = Vec::with_capacity(panels.len() + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for p in &panels {
            acc += p.value.max(0.0);
            cumulative.push(acc);
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(domain("endpoint density could not be normalised"));
        }
        Ok(EndpointSampler { panels, cumulative, peak, log_density: ld })
    }

    // walks outwards until the density has dropped by DROP or the boundary is reached
    fn edge(ld: &LogDensity, from: f64, step: f64, bound: f64, peak: f64) -> Result<f64> {
        let mut x = from;
        let mut h = step;
        for _ in 0..MAX_EXPANSIONS {
            let next = x + h;
            let past = if step < 0.0 { next <= bound } else { next >= bound };
            if past {
                return Ok(bound);
            }
            x = next;
            if ld(x) < peak - DROP {
                return Ok(x);
            }
            h *= 2.0;
        }
        Err(domain("endpoint density is not integrable: its tail does not decay"))
    }

    /// Normalising constant relative to the peak value.
    pub fn mass(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    pub fn support(&self) -> (f64, f64) {
        (self.panels[0].a, self.panels[self.panels.len() - 1].b)
    }

    /// Normalised density at `u`.
    pub fn density(&self, u: f64) -> f64 {
        ((self.log_density)(u) - self.peak).exp() / self.mass()
    }

    /// CDF at `u`.
    pub fn cdf(&self, u: f64) -> f64 {
        let (a, b) = self.support();
        if u <= a {
            return 0.0;
        }
        if u >= b {
            return 1.0;
        }
        let k = self.panels.partition_point(|p| p.b <= u);
        let p = &self.panels[k];
        let mut f = |v: f64| ((self.log_density)(v) - self.peak).exp();
        (self.cumulative[k] + gk15(&mut f, p.a, u).value) / self.mass()
    }

    /// One uniform, inverted through the tabulated CDF.
    pub fn sample<R: Source + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        rng.tally(1);
        self.quantile(u)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let target = u * self.mass();
        let k = (self.cumulative.partition_point(|&c| c <= target).max(1) - 1).min(self.panels.len() - 1);
        let p = &self.panels[k];
        let want = target - self.cumulative[k];
        let mut f = |v: f64| ((self.log_density)(v) - self.peak).exp();
        let (mut a, mut b) = (p.a, p.b);
        let mut x = if p.value > 0.0 { p.a + (p.b - p.a) * (want / p.value).clamp(0.0, 1.0) } else { 0.5 * (p.a + p.b) };
        for _ in 0..100 {
            let g = gk15(&mut f, p.a, x).value - want;
            if g > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let d = f(x);
            let newton = x - g / d;
            let next = if d > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) || b - a <= 4.0 * f64::EPSILON * x.abs() {
                return next;
            }
            x = next;
        }
        x
    }
}
