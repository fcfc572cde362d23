//! Random sources with variate accounting.
//!
//! Every sampler in the crate takes an `R: Source`. Plain generators work out of
//! the box; wrapping one in [`Counted`] additionally records how many raw words
//! were drawn and how many logical variates (one per Poisson count, Gamma,
//! normal, Bessel-discrete draw, ...) were produced.

use rand::rngs::StdRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::{ChaCha12Rng, ChaCha20Rng, ChaCha8Rng};

pub trait Source: RngCore {
    /// Records `n` logical variates. No-op unless the source counts.
    #[inline]
    fn tally(&mut self, _n: u64) {}
}

impl Source for ChaCha8Rng {}
impl Source for ChaCha12Rng {}
impl Source for ChaCha20Rng {}
impl Source for StdRng {}

impl<S: Source + ?Sized> Source for &mut S {
    #[inline]
    fn tally(&mut self, n: u64) {
        (**self).tally(n)
    }
}

/// Counting wrapper around any generator.
#[derive(Debug, Clone)]
pub struct Counted<R> {
    inner: R,
    raw: u64,
    logical: u64,
}

impl<R> Counted<R> {
    pub fn new(inner: R) -> Self {
        Counted { inner, raw: 0, logical: 0 }
    }

    /// 32- or 64-bit words consumed so far.
    pub fn raw(&self) -> u64 {
        self.raw
    }

    /// Logical variates produced so far.
    pub fn logical(&self) -> u64 {
        self.logical
    }

    pub fn into_inner(self) -> R {
        self.inner
    }
}

impl<R: RngCore> RngCore for Counted<R> {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.raw += 1;
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.raw += 1;
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.raw += dst.len().div_ceil(8) as u64;
        self.inner.fill_bytes(dst)
    }
}

impl<R: RngCore> Source for Counted<R> {
    #[inline]
    fn tally(&mut self, n: u64) {
        self.logical += n;
    }
}

pub type StreamRng = Counted<ChaCha8Rng>;

/// Independent stream `index` derived from a master `seed`.
///
/// Replicate `k` of a run always uses `stream(seed, k)`, so results do not
/// depend on how replicates are scheduled across threads.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    Counted::new(rng)
}
