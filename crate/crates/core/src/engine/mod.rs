//! The exact algorithms: biased endpoints, Poisson thinning and the
//! rejection loops, returning skeletons that can be filled in afterwards.

mod endpoint;
mod skeleton;

pub use endpoint::EndpointSampler;
pub use skeleton::{Conditioning, Skeleton};

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::brownian::{sample_min, BridgeSpec};
use crate::error::{domain, numeric, resource_cap, Result};
use crate::layered::{accept_layer_path, propose_layer_path, sample_layer, LayerDraw, LayerScheme, LayerSpec};
use crate::model::{phi, Candidate, UnitDiffusion};
use crate::path::{Law, PathState};
use crate::rng::Source;

/// Limits that turn runaway simulations into [`Error::ResourceCap`](crate::Error::ResourceCap).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineOptions {
    /// Candidates tried per accepted path.
    pub max_attempts: u64,
    /// Poisson points allowed in a single candidate.
    pub max_marks: u64,
    /// Inner proposals per layer draw (two-boundary algorithm).
    pub max_layer_proposals: u64,
}

impl EngineOptions {
    /// Storage for one mark `(χ, ψ)` held as two `f64`s.
    pub const BYTES_PER_MARK: u64 = 16;

    /// Caps the marks per candidate so that storing them all would fit in `bytes`.
    pub fn with_memory(mut self, bytes: u64) -> Self {
        self.max_marks = bytes / Self::BYTES_PER_MARK;
        self
    }
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { max_attempts: 1_000_000, max_marks: 0, max_layer_proposals: 1_000_000 }
            .with_memory(4 << 30)
    }
}

/// Per-path work counters, summed over all candidates of one accepted path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub attempts: u64,
    pub poisson_points: u64,
    pub skeleton_points: u64,
}

/// How the candidate's terminal value is chosen.
#[derive(Debug, Clone)]
pub enum Endpoint {
    /// Bridge mode.
    Fixed(f64),
    Biased(Arc<EndpointSampler>),
}

impl Endpoint {
    fn draw<R: Source + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Endpoint::Fixed(z) => *z,
            Endpoint::Biased(s) => s.sample(rng),
        }
    }
}

/// The Poisson process on `[0, T] × [0, r]`, represented by its count; the
/// marks themselves are drawn one at a time in generation order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonMarks {
    pub rate_bound: f64,
    pub duration: f64,
    pub count: u64,
}

impl PoissonMarks {
    /// Draws the count (one variate), refusing counts above `max_marks`.
    pub fn sample<R: Source + ?Sized>(rate_bound: f64, duration: f64, max_marks: u64, rng: &mut R) -> Result<Self> {
        if !(rate_bound >= 0.0) {
            return Err(domain(format!("negative or undefined rate bound {rate_bound}")));
        }
        let mean = rate_bound * duration;
        if !mean.is_finite() || mean > 1e18 {
            return Err(resource_cap(format!("Poisson mean {mean} is unbounded")));
        }
        let count = if mean > 0.0 {
            Poisson::new(mean).map_err(|e| numeric(format!("Poisson({mean}): {e}")))?.sample(rng) as u64
        } else {
            0
        };
        rng.tally(1);
        if count > max_marks {
            return Err(resource_cap(format!("{count} Poisson points exceed the cap of {max_marks}")));
        }
        Ok(PoissonMarks { rate_bound, duration, count })
    }

    fn next<R: Source + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let chi = rng.random::<f64>() * self.duration;
        let psi = rng.random::<f64>() * self.rate_bound;
        rng.tally(2);
        (chi, psi)
    }

    /// All marks, in generation order.
    pub fn materialize<R: Source + ?Sized>(&self, rng: &mut R) -> Vec<(f64, f64)> {
        (0..self.count).map(|_| self.next(rng)).collect()
    }
}

/// Outcome of checking the marks against the epigraph of `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Thinning {
    pub accepted: bool,
    /// Marks at which `φ` was evaluated before the decision was reached.
    pub evaluated: u64,
}

/// Whether every mark lies in the epigraph of `t ↦ φ(Y_t)`.
///
/// Marks are generated in order and evaluation stops at the first one below
/// the graph; the remaining marks are still drawn, so each candidate consumes
/// exactly `2N + 1` variates for its Poisson process.
pub fn thinning_event<R, F>(marks: &PoissonMarks, rng: &mut R, mut phi_at: F) -> Result<Thinning>
where
    R: Source + ?Sized,
    F: FnMut(f64, &mut R) -> Result<f64>,
{
    let mut evaluated = 0;
    let mut accepted = true;
    for _ in 0..marks.count {
        let (chi, psi) = marks.next(rng);
        if accepted {
            evaluated += 1;
            if psi < phi_at(chi, rng)? {
                accepted = false;
            }
        }
    }
    Ok(Thinning { accepted, evaluated })
}

fn check_common(y: f64, duration: f64) -> Result<()> {
    if !(duration > 0.0 && duration.is_finite()) || !y.is_finite() {
        return Err(domain(format!("need a finite start and a horizon T > 0 (y={y}, T={duration})")));
    }
    Ok(())
}

fn check_endpoint<M: UnitDiffusion<f64> + ?Sized>(model: &M, endpoint: &Endpoint) -> Result<()> {
    if let Endpoint::Fixed(z) = endpoint {
        if !(*z > model.lower_boundary() && *z < model.upper_boundary()) {
            return Err(domain(format!("end point {z} outside the state space")));
        }
    }
    Ok(())
}

fn brownian_only<M: UnitDiffusion<f64> + ?Sized>(model: &M) -> Result<()> {
    match model.candidate() {
        Candidate::Brownian => Ok(()),
        c => Err(domain(format!("this algorithm needs a Brownian candidate, the model uses {}", c.name()))),
    }
}

fn retry_limit(stats: &PathStats, options: &EngineOptions) -> Result<()> {
    if stats.attempts >= options.max_attempts {
        return Err(resource_cap(format!("no candidate accepted in {} attempts", stats.attempts)));
    }
    Ok(())
}

// draws marks for a candidate and thins them against the path
fn thin_candidate<M, R>(
    model: &M,
    state: &mut PathState,
    rate: f64,
    duration: f64,
    options: &EngineOptions,
    stats: &mut PathStats,
    rng: &mut R,
) -> Result<bool>
where
    M: UnitDiffusion<f64> + ?Sized,
    R: Source + ?Sized,
{
    let marks = PoissonMarks::sample(rate, duration, options.max_marks, rng)?;
    stats.poisson_points += marks.count;
    let t = thinning_event(&marks, rng, |chi, rng| phi(model, state.value_at(chi, rng)?))?;
    stats.skeleton_points += t.evaluated;
    Ok(t.accepted)
}

/// Exact algorithm for a globally bounded `φ`, Brownian candidate.
pub fn run_ea1<M, R>(model: &M, y: f64, duration: f64, endpoint: &Endpoint, options: &EngineOptions, rng: &mut R) -> Result<Skeleton>
where
    M: UnitDiffusion<f64> + ?Sized,
    R: Source + ?Sized,
{
    check_common(y, duration)?;
    brownian_only(model)?;
    check_endpoint(model, endpoint)?;
    if model.lower_boundary().is_finite() || model.upper_boundary().is_finite() {
        return Err(domain("the one-sided-free algorithm needs a model on the whole real line"));
    }
    let r = model.phi_upper_bound().ok_or_else(|| domain("phi has no finite global upper bound"))?;
    let mut stats = PathStats::default();
    loop {
        retry_limit(&stats, options)?;
        stats.attempts += 1;
        let z = endpoint.draw(rng);
        let mut state = PathState::new(Law::Brownian, 1.0, y, z, duration);
        if thin_candidate(model, &mut state, r, duration, options, &mut stats, rng)? {
            return Ok(Skeleton::new(state, Conditioning::None, model.candidate().name(), stats));
        }
    }
}

/// Exact algorithm for `φ` bounded above on every `[m, ∞)`: the candidate's
/// minimum is drawn first and fixes the Poisson rate.
///
/// With `positivity` the minimum is conditioned to stay above the model's
/// lower boundary, and a free endpoint must come from a sampler built with
/// that floor.
pub fn run_ea2<M, R>(
    model: &M,
    y: f64,
    duration: f64,
    endpoint: &Endpoint,
    positivity: bool,
    options: &EngineOptions,
    rng: &mut R,
) -> Result<Skeleton>
where
    M: UnitDiffusion<f64> + ?Sized,
    R: Source + ?Sized,
{
    check_common(y, duration)?;
    brownian_only(model)?;
    check_endpoint(model, endpoint)?;
    let lower = model.lower_boundary();
    if positivity && !lower.is_finite() {
        return Err(domain("positivity conditioning needs a finite lower boundary"));
    }
    let floor = positivity.then_some(lower);
    let mut stats = PathStats::default();
    loop {
        retry_limit(&stats, options)?;
        stats.attempts += 1;
        let z = endpoint.draw(rng);
        let spec = BridgeSpec::new(y, z, duration)?;
        let min = sample_min(&spec, rng, floor)?;
        if !(min.value > lower) {
            // the candidate left the state space
            continue;
        }
        let r = model
            .phi_band_sup(min.value, model.upper_boundary())
            .ok_or_else(|| numeric(format!("phi is unbounded above the minimum {}", min.value)))?;
        let law = Law::Excursion { floor: min.value, at: min.time };
        let mut state = PathState::new(law, 1.0, y, z, duration);
        if thin_candidate(model, &mut state, r, duration, options, &mut stats, rng)? {
            return Ok(Skeleton::new(state, Conditioning::Min(min), model.candidate().name(), stats));
        }
    }
}

/// Exact algorithm with a Bessel candidate and bounded `φ̃`.
pub fn run_bessel_ea1<M, R>(
    model: &M,
    y: f64,
    duration: f64,
    endpoint: &Endpoint,
    options: &EngineOptions,
    rng: &mut R,
) -> Result<Skeleton>
where
    M: UnitDiffusion<f64> + ?Sized,
    R: Source + ?Sized,
{
    check_common(y, duration)?;
    let Candidate::Bessel(order) = model.candidate() else {
        return Err(domain("the Bessel algorithm needs a Bessel candidate"));
    };
    if order.delta() < 2.0 {
        return Err(domain(format!("Bessel candidate needs delta >= 2, got {}", order.delta())));
    }
    if !(y > 0.0) {
        return Err(domain(format!("the Bessel algorithm needs y > 0, got {y}")));
    }
    if let Endpoint::Fixed(z) = endpoint {
        if !(*z > 0.0) {
            return Err(domain(format!("end point {z} must be positive")));
        }
    }
    let r = model.phi_upper_bound().ok_or_else(|| domain("phi has no finite upper bound"))?;
    let mut stats = PathStats::default();
    loop {
        retry_limit(&stats, options)?;
        stats.attempts += 1;
        let z = endpoint.draw(rng);
        let mut state = PathState::new(Law::Bessel(order), 1.0, y, z, duration);
        if thin_candidate(model, &mut state, r, duration, options, &mut stats, rng)? {
            return Ok(Skeleton::new(state, Conditioning::None, model.candidate().name(), stats));
        }
    }
}

/// Exact algorithm for a diffusion on a finite interval, using layers whose
/// offsets accumulate at each boundary.
pub fn run_ea3_two_boundary<M, R>(
    model: &M,
    y: f64,
    duration: f64,
    endpoint: &Endpoint,
    scheme: &LayerScheme,
    options: &EngineOptions,
    rng: &mut R,
) -> Result<Skeleton>
where
    M: UnitDiffusion<f64> + ?Sized,
    R: Source + ?Sized,
{
    check_common(y, duration)?;
    brownian_only(model)?;
    check_endpoint(model, endpoint)?;
    let (lower, upper) = (model.lower_boundary(), model.upper_boundary());
    if !(lower.is_finite() && upper.is_finite()) {
        return Err(domain("the two-boundary algorithm needs finite boundaries"));
    }
    if !(y > lower && y < upper) {
        return Err(domain(format!("start {y} outside ({lower}, {upper})")));
    }
    let mut stats = PathStats::default();
    loop {
        retry_limit(&stats, options)?;
        stats.attempts += 1;
        let z = endpoint.draw(rng);
        let spec = BridgeSpec::new(y, z, duration)?;
        let layers = LayerSpec::from_scheme(&spec, lower, upper, scheme)?;
        let i = match sample_layer(&spec, &layers, lower, upper, rng)? {
            LayerDraw::Escape => continue,
            LayerDraw::Layer(i) => i,
        };
        let r = model
            .phi_band_sup(spec.low() - layers.a(i), spec.high() + layers.b(i))
            .ok_or_else(|| numeric(format!("phi is unbounded on layer {i}")))?;
        let mut proposals = 0;
        let (mut proposal, index) = loop {
            if proposals >= options.max_layer_proposals {
                return Err(resource_cap(format!("no layered proposal accepted in {proposals} tries")));
            }
            proposals += 1;
            let mut p = propose_layer_path(&spec, &layers, i, &[], rng)?;
            if let Some(index) = accept_layer_path(&mut p, rng)? {
                break (p, index);
            }
        };
        if thin_candidate(model, &mut proposal.state, r, duration, options, &mut stats, rng)? {
            let conditioning = Conditioning::Layer { index, branch: proposal.branch, extremum: proposal.extremum };
            return Ok(Skeleton::new(proposal.state, conditioning, model.candidate().name(), stats));
        }
    }
}

/// Which exact algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Ea1,
    Ea2,
    BesselEa1,
    Ea3,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Ea1 => "ea1",
            Algorithm::Ea2 => "ea2",
            Algorithm::BesselEa1 => "bessel-ea1",
            Algorithm::Ea3 => "ea3",
        }
    }
}

/// A model, an algorithm and a start point, with the endpoint sampler built once.
#[derive(Clone)]
pub struct Simulator {
    model: Arc<dyn UnitDiffusion<f64>>,
    algorithm: Algorithm,
    y: f64,
    duration: f64,
    endpoint: Endpoint,
    positivity: bool,
    layers: LayerScheme,
    options: EngineOptions,
}

impl Simulator {
    /// `end = Some(z)` selects bridge mode.
    pub fn new(
        model: Arc<dyn UnitDiffusion<f64>>,
        algorithm: Algorithm,
        y: f64,
        duration: f64,
        end: Option<f64>,
        positivity: bool,
    ) -> Result<Self> {
        check_common(y, duration)?;
        let endpoint = match end {
            Some(z) => Endpoint::Fixed(z),
            None => {
                let sampler = match algorithm {
                    Algorithm::BesselEa1 => EndpointSampler::bessel(model.clone(), y, duration)?,
                    Algorithm::Ea2 if positivity => {
                        EndpointSampler::brownian(model.clone(), y, duration, Some(model.lower_boundary()))?
                    }
                    _ => EndpointSampler::brownian(model.clone(), y, duration, None)?,
                };
                Endpoint::Biased(Arc::new(sampler))
            }
        };
        Ok(Simulator {
            model,
            algorithm,
            y,
            duration,
            endpoint,
            positivity,
            layers: LayerScheme::default(),
            options: EngineOptions::default(),
        })
    }

    pub fn with_layers(mut self, layers: LayerScheme) -> Self {
        self.layers = layers;
        self
    }

    pub fn with_options(mut self, options: EngineOptions) -> Self {
        self.options = options;
        self
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    /// One accepted path.
    pub fn sample<R: Source + ?Sized>(&self, rng: &mut R) -> Result<Skeleton> {
        let m = self.model.as_ref();
        let (y, t, e, o) = (self.y, self.duration, &self.endpoint, &self.options);
        match self.algorithm {
            Algorithm::Ea1 => run_ea1(m, y, t, e, o, rng),
            Algorithm::Ea2 => run_ea2(m, y, t, e, self.positivity, o, rng),
            Algorithm::BesselEa1 => run_bessel_ea1(m, y, t, e, o, rng),
            Algorithm::Ea3 => run_ea3_two_boundary(m, y, t, e, &self.layers, o, rng),
        }
    }
}
