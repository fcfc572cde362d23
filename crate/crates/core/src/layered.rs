//! Layered Brownian bridges for diffusions confined to a finite interval.
//!
//! Layer `i` is the event `D_i` that the bridge minimum lies above `ȳ − a_i`
//! and its maximum below `z̄ + b_i` but not both within the previous layer,
//! where `ȳ = min(y, z)` and `z̄ = max(y, z)`. It is the union of `U_i` (the
//! maximum falls in its band) and `L_i` (the minimum falls in its band).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::brownian::{sample_min_in, BridgeSpec, Extremum};
use crate::error::{domain, numeric, Result};
use crate::path::{Cap, Class, Law, PathState};
use crate::rng::Source;
use crate::series::{decide, resolve, IntervalConfinement};

/// Layer offsets below `ȳ` (`a`) and above `z̄` (`b`), both starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Parameters of the default layer sequences.
///
/// Towards a finite boundary at distance `g` the offsets are
/// `g·(1 − (1 − c)/growth^(i−1))`, so the first layer covers a fraction `c` of
/// the gap and later layers accumulate at the boundary. Towards an infinite
/// boundary they are `c·√T·(growth^i − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayerScheme {
    pub c_a: f64,
    pub c_b: f64,
    pub growth: f64,
    pub max_index: usize,
}

impl Default for LayerScheme {
    fn default() -> Self {
        LayerScheme { c_a: 0.25, c_b: 0.25, growth: 2.0, max_index: LayerSpec::MAX_INDEX }
    }
}

impl LayerScheme {
    pub fn validate(&self) -> Result<()> {
        for (name, c) in [("c_a", self.c_a), ("c_b", self.c_b)] {
            if !(c > 0.0 && c < 1.0) {
                return Err(domain(format!("layer fraction {name} = {c} must lie in (0, 1)")));
            }
        }
        if !(self.growth > 1.0 && self.growth.is_finite()) {
            return Err(domain(format!("layer growth {} must exceed 1", self.growth)));
        }
        if self.max_index == 0 || self.max_index > LayerSpec::MAX_INDEX {
            return Err(domain(format!("max_index must lie in 1..={}", LayerSpec::MAX_INDEX)));
        }
        Ok(())
    }
}

/// Which extremum was found in its band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Upper,
    Lower,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerIndex {
    pub i: usize,
    pub which: Which,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerProbabilities {
    /// Probability that the maximum lies in band `i`.
    pub upper_band: f64,
    /// Probability that the minimum lies in band `i`.
    pub lower_band: f64,
    /// Probability of the layer event itself.
    pub layer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerDraw {
    Layer(usize),
    /// The bridge leaves the interval between the boundaries.
    Escape,
}

/// Mixture branch of a layered proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Max,
    Min,
}

impl LayerSpec {
    pub const MAX_INDEX: usize = 64;

    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() || a.len() < 2 {
            return Err(domain("layer sequences need equal lengths and at least one layer"));
        }
        if a.len() - 1 > Self::MAX_INDEX {
            return Err(domain(format!("at most {} layers are supported", Self::MAX_INDEX)));
        }
        for s in [&a, &b] {
            if s[0] != 0.0 || s.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(domain("layer offsets must start at 0 and increase strictly"));
            }
        }
        Ok(LayerSpec { a, b })
    }

    /// Default sequences for a bridge inside `(lower, upper)`.
    pub fn from_scheme(spec: &BridgeSpec, lower: f64, upper: f64, scheme: &LayerScheme) -> Result<Self> {
        scheme.validate()?;
        let ga = spec.low() - lower;
        let gb = upper - spec.high();
        if !(ga > 0.0 && gb > 0.0) {
            return Err(domain(format!("endpoints ({}, {}) must lie inside ({lower}, {upper})", spec.y, spec.z)));
        }
        let root = spec.duration.sqrt();
        let offset = |gap: f64, c: f64, i: usize| {
            if gap.is_finite() {
                gap * (1.0 - (1.0 - c) * scheme.growth.powi(1 - i as i32))
            } else {
                c * root * (scheme.growth.powi(i as i32) - 1.0)
            }
        };
        let (mut a, mut b) = (vec![0.0], vec![0.0]);
        for i in 1..=scheme.max_index {
            let (x, y) = (offset(ga, scheme.c_a, i), offset(gb, scheme.c_b, i));
            // stop once either sequence saturates in floating point
            if !(x > a[i - 1] && x < ga && y > b[i - 1] && y < gb) {
                break;
            }
            a.push(x);
            b.push(y);
        }
        if a.len() < 2 {
            return Err(domain("no usable layers for these endpoints"));
        }
        Ok(LayerSpec { a, b })
    }

    /// Checks that no layer crosses a boundary.
    pub fn check(&self, spec: &BridgeSpec, lower: f64, upper: f64) -> Result<()> {
        let (ga, gb) = (spec.low() - lower, upper - spec.high());
        if self.a.last().is_some_and(|&a| a > ga) || self.b.last().is_some_and(|&b| b > gb) {
            return Err(domain(format!("layers cross the boundaries ({lower}, {upper})")));
        }
        Ok(())
    }

    pub fn max_index(&self) -> usize {
        self.a.len() - 1
    }

    pub fn a(&self, i: usize) -> f64 {
        self.a[i]
    }

    pub fn b(&self, i: usize) -> f64 {
        self.b[i]
    }

    /// The layers seen from the reflected bridge.
    pub fn swapped(&self) -> Self {
        LayerSpec { a: self.b.clone(), b: self.a.clone() }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.max_index() {
            return Err(domain(format!("layer index {i} outside 1..={}", self.max_index())));
        }
        Ok(())
    }

    fn confinement(&self, spec: &BridgeSpec, i: usize) -> IntervalConfinement {
        if i == 0 {
            return IntervalConfinement::new(spec.low(), spec.high(), spec.y, spec.z, spec.duration);
        }
        IntervalConfinement::new(spec.low() - self.a[i], spec.high() + self.b[i], spec.y, spec.z, spec.duration)
    }
}

// E = 2x(x + |y − z|)/T, so that e^{−E} is the probability that the bridge
// reaches `x` beyond its nearer endpoint (either side, by symmetry)
fn edge_exponent(spec: &BridgeSpec, x: f64) -> f64 {
    if x.is_infinite() {
        return f64::INFINITY;
    }
    2.0 * x * (x + spec.high() - spec.low()) / spec.duration
}

// P(extremum falls in the band between offsets `inner < outer`)
fn band_probability(spec: &BridgeSpec, inner: f64, outer: f64) -> f64 {
    let e_in = edge_exponent(spec, inner);
    let e_out = edge_exponent(spec, outer);
    (-e_in).exp() * -(-(e_out - e_in)).exp_m1()
}

/// Band and layer probabilities of layer `i`.
pub fn layer_event_prob(spec: &BridgeSpec, layers: &LayerSpec, i: usize) -> Result<LayerProbabilities> {
    layers.check_index(i)?;
    let upper_band = band_probability(spec, layers.b[i - 1], layers.b[i]);
    let lower_band = band_probability(spec, layers.a[i - 1], layers.a[i]);
    let outer = resolve(&mut layers.confinement(spec, i), 1e-15)?;
    let inner = resolve(&mut layers.confinement(spec, i - 1), 1e-15)?;
    let layer = 0.5 * (outer.lower + outer.upper) - 0.5 * (inner.lower + inner.upper);
    Ok(LayerProbabilities { upper_band, lower_band, layer: layer.max(0.0) })
}

/// Probability that the bridge leaves `(lower, upper)`.
pub fn escape_probability(spec: &BridgeSpec, lower: f64, upper: f64) -> Result<f64> {
    let b = resolve(&mut IntervalConfinement::new(lower, upper, spec.y, spec.z, spec.duration), 1e-15)?;
    Ok(1.0 - 0.5 * (b.lower + b.upper))
}

/// Draws the layer of a bridge by inversion with a single uniform.
pub fn sample_layer<R: Source + ?Sized>(
    spec: &BridgeSpec,
    layers: &LayerSpec,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> Result<LayerDraw> {
    layers.check(spec, lower, upper)?;
    let u: f64 = rng.random();
    rng.tally(1);
    for i in 1..=layers.max_index() {
        if decide(&mut layers.confinement(spec, i), u)? {
            return Ok(LayerDraw::Layer(i));
        }
    }
    if decide(&mut IntervalConfinement::new(lower, upper, spec.y, spec.z, spec.duration), u)? {
        return Err(numeric(format!("bridge fell beyond layer {}", layers.max_index())));
    }
    Ok(LayerDraw::Escape)
}

/// Mixture weight of the maximum-band branch for layer `i`.
pub fn lambda_weight(spec: &BridgeSpec, layers: &LayerSpec, i: usize) -> Result<f64> {
    layers.check_index(i)?;
    let up = band_probability(spec, layers.b[i - 1], layers.b[i]);
    let down = band_probability(spec, layers.a[i - 1], layers.a[i]);
    if !(up + down > 0.0) {
        return Err(domain(format!("both extremum bands of layer {i} have zero probability")));
    }
    Ok(up / (up + down))
}

/// A candidate path drawn from the layer-`i` mixture proposal.
#[derive(Debug, Clone)]
pub struct LayerProposal {
    pub branch: Branch,
    /// The extremum drawn in its band, in original coordinates.
    pub extremum: Extremum,
    pub i: usize,
    pub(crate) state: PathState,
    frame: BridgeSpec,
    frame_layers: LayerSpec,
}

impl LayerProposal {
    /// Known points in original coordinates.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.state.points()
    }

    /// Value at `t`, simulated from the proposal law if not yet known.
    pub fn value_at<R: Source + ?Sized>(&mut self, t: f64, rng: &mut R) -> Result<f64> {
        self.state.value_at(t, rng)
    }
}

/// Flips the `λ` coin, draws the chosen extremum in its band and fills in `times`.
pub fn propose_layer_path<R: Source + ?Sized>(
    spec: &BridgeSpec,
    layers: &LayerSpec,
    i: usize,
    times: &[f64],
    rng: &mut R,
) -> Result<LayerProposal> {
    let lambda = lambda_weight(spec, layers, i)?;
    let u: f64 = rng.random();
    rng.tally(1);
    let branch = if u < lambda { Branch::Max } else { Branch::Min };
    let (frame, frame_layers, sign) = match branch {
        Branch::Max => (spec.reflected(), layers.swapped(), -1.0),
        Branch::Min => (*spec, layers.clone(), 1.0),
    };
    let low = frame.low();
    let m = sample_min_in(&frame, low - frame_layers.a[i], low - frame_layers.a[i - 1], rng)?;
    let state = PathState::new(Law::Excursion { floor: m.value, at: m.time }, sign, spec.y, spec.z, spec.duration);
    let mut p = LayerProposal {
        branch,
        extremum: Extremum { value: sign * m.value, time: m.time },
        i,
        state,
        frame,
        frame_layers,
    };
    for &t in times {
        p.value_at(t, rng)?;
    }
    Ok(p)
}

/// Rejection step correcting the mixture proposal to the law conditioned on
/// layer `i`: accepts with probability `1{D_i}/(1 + 1{U_i ∩ L_i})`.
///
/// On acceptance the segments of the path carry caps recording where their
/// maxima lie, so that later interpolation stays exact.
pub fn accept_layer_path<R: Source + ?Sized>(p: &mut LayerProposal, rng: &mut R) -> Result<Option<LayerIndex>> {
    let i = p.i;
    let hi = p.frame.high() + p.frame_layers.b[i];
    let lo = p.frame.high() + p.frame_layers.b[i - 1];
    let mut classes = Vec::new();
    for (a, b) in p.state.segments() {
        let c = p.state.classify(a, b, Some(lo), hi, rng)?;
        if c == Class::Out {
            return Ok(None);
        }
        classes.push((a.0, c));
    }
    let both = classes.iter().any(|(_, c)| *c == Class::Band);
    if both {
        let u: f64 = rng.random();
        rng.tally(1);
        if u >= 0.5 {
            return Ok(None);
        }
    }
    for (t, c) in classes {
        let cap = if c == Class::Band { Cap::Band(lo, hi) } else { Cap::Below(lo) };
        p.state.set_cap(t, cap);
    }
    let which = match (both, p.branch) {
        (true, _) => Which::Both,
        (false, Branch::Min) => Which::Lower,
        (false, Branch::Max) => Which::Upper,
    };
    Ok(Some(LayerIndex { i, which }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::bridge_max_cdf;
    use crate::brownian::bridge_min_cdf;
    use crate::rng::stream;

    fn spec(y: f64, z: f64, t: f64) -> BridgeSpec {
        BridgeSpec::new(y, z, t).unwrap()
    }

    #[test]
    fn default_layers_stay_inside_the_boundaries() {
        let s = spec(0.3, 0.5, 1.0);
        let l = LayerSpec::from_scheme(&s, 0.0, 1.0, &LayerScheme::default()).unwrap();
        assert!(l.max_index() > 40);
        assert!((l.a(1) - 0.075).abs() < 1e-15 && (l.b(1) - 0.125).abs() < 1e-15);
        l.check(&s, 0.0, 1.0).unwrap();
        let wide = LayerSpec::new(vec![0.0, 0.5], vec![0.0, 0.1]).unwrap();
        assert!(wide.check(&s, 0.0, 1.0).is_err());
    }

    #[test]
    fn band_probabilities_are_closed_form() {
        let s = spec(0.3, 0.5, 1.0);
        let l = LayerSpec::new(vec![0.0, 0.1, 0.2, 0.3], vec![0.0, 0.05, 0.1, 0.2]).unwrap();
        let p = layer_event_prob(&s, &l, 2).unwrap();
        let up = bridge_max_cdf(&s, 0.6).unwrap() - bridge_max_cdf(&s, 0.55).unwrap();
        let down = bridge_min_cdf(&s, 0.2).unwrap() - bridge_min_cdf(&s, 0.1).unwrap();
        assert!((p.upper_band - up).abs() < 1e-14);
        assert!((p.lower_band - down).abs() < 1e-14);
        let lambda = lambda_weight(&s, &l, 2).unwrap();
        assert!((lambda - up / (up + down)).abs() < 1e-12);
    }

    #[test]
    fn lambda_is_a_half_when_symmetric() {
        let s = spec(0.4, 0.4, 0.7);
        let l = LayerSpec::new(vec![0.0, 0.1, 0.25], vec![0.0, 0.1, 0.25]).unwrap();
        assert_eq!(lambda_weight(&s, &l, 1).unwrap(), 0.5);
        assert_eq!(lambda_weight(&s, &l, 2).unwrap(), 0.5);
    }

    #[test]
    fn lambda_is_reflection_invariant() {
        let s = spec(0.3, 0.5, 1.0);
        let l = LayerSpec::new(vec![0.0, 0.1, 0.2], vec![0.0, 0.05, 0.1]).unwrap();
        let a = lambda_weight(&s, &l, 2).unwrap();
        let b = lambda_weight(&s.reflected(), &l.swapped(), 2).unwrap();
        assert!((a - (1.0 - b)).abs() < 1e-15);
    }

    #[test]
    fn unreachable_upper_band_gives_zero_lambda() {
        let s = spec(0.0, 0.0, 0.01);
        let l = LayerSpec::new(vec![0.0, 0.1, 0.2], vec![0.0, 50.0, 60.0]).unwrap();
        assert_eq!(lambda_weight(&s, &l, 2).unwrap(), 0.0);
        let dead = LayerSpec::new(vec![0.0, 50.0, 60.0], vec![0.0, 50.0, 60.0]).unwrap();
        assert!(lambda_weight(&s, &dead, 2).is_err());
    }

    #[test]
    fn layers_and_escape_exhaust_the_probability() {
        let s = spec(0.3, 0.5, 1.0);
        let l = LayerSpec::from_scheme(&s, 0.0, 1.0, &LayerScheme::default()).unwrap();
        let total: f64 = (1..=l.max_index()).map(|i| layer_event_prob(&s, &l, i).unwrap().layer).sum();
        let escape = escape_probability(&s, 0.0, 1.0).unwrap();
        assert!((total + escape - 1.0).abs() < 1e-10);

        let free = LayerSpec::from_scheme(&s, f64::NEG_INFINITY, f64::INFINITY, &LayerScheme::default()).unwrap();
        let total: f64 = (1..=free.max_index()).map(|i| layer_event_prob(&s, &free, i).unwrap().layer).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn a_single_huge_layer_is_always_chosen() {
        let s = spec(0.3, 0.5, 1.0);
        let l = LayerSpec::new(vec![0.0, 1e3], vec![0.0, 1e3]).unwrap();
        let mut rng = stream(4, 0);
        for _ in 0..1000 {
            let d = sample_layer(&s, &l, f64::NEG_INFINITY, f64::INFINITY, &mut rng).unwrap();
            assert_eq!(d, LayerDraw::Layer(1));
        }
    }

    #[test]
    fn proposals_respect_the_drawn_band() {
        let s = spec(0.3, 0.5, 1.0);
        let l = LayerSpec::new(vec![0.0, 0.1, 0.2], vec![0.0, 0.05, 0.1]).unwrap();
        let mut rng = stream(5, 0);
        for _ in 0..2000 {
            let p = propose_layer_path(&s, &l, 2, &[0.25, 0.5, 0.75], &mut rng).unwrap();
            let e = p.extremum.value;
            match p.branch {
                Branch::Max => assert!((0.55..0.6).contains(&e)),
                Branch::Min => assert!(e > 0.1 && e <= 0.2),
            }
            for (_, v) in p.points() {
                match p.branch {
                    Branch::Max => assert!(v <= e),
                    Branch::Min => assert!(v >= e),
                }
            }
        }
    }

    #[test]
    fn acceptance_rate_matches_layer_bookkeeping() {
        let s = spec(0.3, 0.5, 1.0);
        let l = LayerSpec::new(vec![0.0, 0.1, 0.2], vec![0.0, 0.05, 0.1]).unwrap();
        let p = layer_event_prob(&s, &l, 2).unwrap();
        let want = p.layer / (p.upper_band + p.lower_band);
        let mut rng = stream(6, 0);
        let n = 100_000;
        let mut acc = 0;
        for _ in 0..n {
            let mut prop = propose_layer_path(&s, &l, 2, &[], &mut rng).unwrap();
            if accept_layer_path(&mut prop, &mut rng).unwrap().is_some() {
                acc += 1;
            }
        }
        let rate = acc as f64 / n as f64;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((rate - want).abs() < 3.0 * se, "{rate} vs {want} ± {se}");
    }

    #[test]
    fn proposals_leaving_the_layer_are_rejected() {
        let s = spec(0.3, 0.5, 1.0);
        let l = LayerSpec::new(vec![0.0, 0.02], vec![0.0, 0.02]).unwrap();
        let times: Vec<f64> = (1..20).map(|k| k as f64 / 20.0).collect();
        let mut rng = stream(7, 0);
        let mut outside = 0;
        for _ in 0..500 {
            let mut p = propose_layer_path(&s, &l, 1, &times, &mut rng).unwrap();
            let escaped = p.points().iter().any(|&(_, v)| v >= 0.52 || v <= 0.28);
            let verdict = accept_layer_path(&mut p, &mut rng).unwrap();
            if escaped {
                outside += 1;
                assert!(verdict.is_none());
            } else if let Some(idx) = verdict {
                assert_eq!(idx.which, Which::Both);
            }
        }
        assert!(outside > 100);
    }

    // the symmetric scheme: fair coin for the branch, accept on D_i, and a
    // second fair coin when both extrema fall in their bands
    fn symmetric_reference<R: Source>(s: &BridgeSpec, l: &LayerSpec, i: usize, times: &[f64], rng: &mut R) -> (Vec<(f64, f64)>, bool) {
        let u: f64 = rng.random();
        let (frame, fl, sign) = if u < 0.5 { (s.reflected(), l.swapped(), -1.0) } else { (*s, l.clone(), 1.0) };
        let m = sample_min_in(&frame, frame.low() - fl.a[i], frame.low() - fl.a[i - 1], rng).unwrap();
        let mut state = PathState::new(Law::Excursion { floor: m.value, at: m.time }, sign, s.y, s.z, s.duration);
        for &t in times {
            state.value_at(t, rng).unwrap();
        }
        let (lo, hi) = (frame.high() + fl.b[i - 1], frame.high() + fl.b[i]);
        let mut band = false;
        for (a, b) in state.segments() {
            match state.classify(a, b, Some(lo), hi, rng).unwrap() {
                Class::Out => return (state.points(), false),
                Class::Band => band = true,
                Class::Below => {}
            }
        }
        let keep = !band || rng.random::<f64>() < 0.5;
        (state.points(), keep)
    }

    #[test]
    fn symmetric_layers_reproduce_the_symmetric_scheme() {
        let s = spec(0.5, 0.5, 0.05);
        let l = LayerSpec::new(vec![0.0, 0.05, 0.15, 0.3], vec![0.0, 0.05, 0.15, 0.3]).unwrap();
        let times = [0.01, 0.02, 0.04];
        let mut accepted = 0;
        for k in 0..2000 {
            let i = 1 + (k % 3) as usize;
            let (want, keep) = symmetric_reference(&s, &l, i, &times, &mut stream(8, k));
            let mut rng = stream(8, k);
            let mut p = propose_layer_path(&s, &l, i, &times, &mut rng).unwrap();
            let got = accept_layer_path(&mut p, &mut rng).unwrap();
            assert_eq!(p.points(), want);
            assert_eq!(got.is_some(), keep);
            accepted += keep as u32;
        }
        assert!(accepted > 200 && accepted < 1900, "{accepted}");
    }
}
