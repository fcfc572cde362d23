//! Probabilities that Brownian bridges stay inside intervals, as refinable
//! certified brackets built from alternating image-series expansions.
//!
//! A bracket `[lower, upper]` always contains the exact probability (floating
//! point rounding is accounted for), and every refinement returns a bracket
//! nested in the previous one. Random coins with these probabilities can then
//! be flipped exactly by refining until the uniform is separated.

use crate::error::{numeric, Result};

const MAX_REFINEMENTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
}

impl Bracket {
    pub fn exact(p: f64) -> Self {
        Bracket { lower: p, upper: p }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    // both operands enclose the same value, so the result is never empty
    fn intersect(self, other: Bracket) -> Self {
        let lower = self.lower.max(other.lower);
        let upper = self.upper.min(other.upper);
        if lower <= upper {
            Bracket { lower, upper }
        } else {
            Bracket { lower: upper, upper: lower }
        }
    }

    fn clamp(self) -> Self {
        Bracket { lower: self.lower.clamp(0.0, 1.0), upper: self.upper.clamp(0.0, 1.0) }
    }
}

/// A probability known through nested, certified brackets.
pub trait Refinable {
    fn bracket(&self) -> Bracket;
    /// Tightens the bracket; returns `false` once no further progress is possible.
    fn refine(&mut self) -> bool;
}

/// Returns whether `u < p`, refining `p` only as far as needed.
pub fn decide<S: Refinable + ?Sized>(p: &mut S, u: f64) -> Result<bool> {
    for _ in 0..MAX_REFINEMENTS {
        let b = p.bracket();
        if u < b.lower {
            return Ok(true);
        }
        if u >= b.upper {
            return Ok(false);
        }
        if !p.refine() {
            break;
        }
    }
    let b = p.bracket();
    Err(numeric(format!("could not separate {u} from bracket [{}, {}]", b.lower, b.upper)))
}

/// Refines until the bracket is narrower than `tol` and returns it.
pub fn resolve<S: Refinable + ?Sized>(p: &mut S, tol: f64) -> Result<Bracket> {
    for _ in 0..MAX_REFINEMENTS {
        let b = p.bracket();
        if b.width() <= tol {
            return Ok(b);
        }
        if !p.refine() {
            return Ok(b);
        }
    }
    Err(numeric("bracket failed to close"))
}

// partial sums 1 − t1 + t2 − ... of an alternating series whose terms are
// non-increasing from `certified_from` on
#[derive(Debug, Clone)]
struct Alternating {
    k: usize,
    sum: f64,
    prev: f64,
    abs: f64,
    last_term: f64,
    certified_from: usize,
    best: Bracket,
}

impl Alternating {
    fn new(certified_from: usize) -> Self {
        Alternating {
            k: 0,
            sum: 1.0,
            prev: 1.0,
            abs: 1.0,
            last_term: f64::INFINITY,
            certified_from,
            best: Bracket { lower: 0.0, upper: 1.0 },
        }
    }

    fn push(&mut self, term: f64) {
        self.k += 1;
        self.prev = self.sum;
        if self.k % 2 == 1 {
            self.sum -= term;
        } else {
            self.sum += term;
        }
        self.abs += term.abs();
        if self.k > self.certified_from && term > self.last_term * (1.0 + 1e-12) {
            // the analytic monotonicity condition guarantees this never happens
            self.certified_from = usize::MAX;
        }
        self.last_term = term;
        if self.k >= self.certified_from {
            let slack = 8.0 * f64::EPSILON * self.abs;
            let fresh = Bracket { lower: self.sum.min(self.prev) - slack, upper: self.sum.max(self.prev) + slack };
            self.best = self.best.intersect(fresh);
        }
    }

    fn bracket(&self) -> Bracket {
        self.best
    }
}

/// `P(lo < B_s < hi for all s ∈ [0, T])` for a Brownian bridge from `x` to `y`.
#[derive(Debug, Clone)]
pub struct IntervalConfinement {
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Exact(f64),
    Series { lo: f64, hi: f64, x: f64, y: f64, duration: f64, state: Alternating },
}

impl IntervalConfinement {
    pub fn new(lo: f64, hi: f64, x: f64, y: f64, duration: f64) -> Self {
        let inside = |v: f64| v > lo && v < hi;
        let kind = if !(inside(x) && inside(y)) {
            Kind::Exact(0.0)
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            Kind::Exact(1.0)
        } else if hi == f64::INFINITY {
            Kind::Exact(-(-2.0 * (x - lo) * (y - lo) / duration).exp_m1())
        } else if lo == f64::NEG_INFINITY {
            Kind::Exact(-(-2.0 * (hi - x) * (hi - y) / duration).exp_m1())
        } else {
            Kind::Series { lo, hi, x, y, duration, state: Alternating::new(1) }
        };
        IntervalConfinement { kind }
    }

    fn term(lo: f64, hi: f64, x: f64, y: f64, t: f64, k: usize) -> f64 {
        let d = hi - lo;
        let j = k.div_ceil(2) as f64;
        if k % 2 == 1 {
            (-2.0 / t * (d * j + lo - x) * (d * j + lo - y)).exp()
                + (-2.0 / t * (d * j - hi + x) * (d * j - hi + y)).exp()
        } else {
            (-2.0 * j / t * d * (d * j + x - y)).exp() + (-2.0 * j / t * d * (d * j - x + y)).exp()
        }
    }
}

impl Refinable for IntervalConfinement {
    fn bracket(&self) -> Bracket {
        match &self.kind {
            Kind::Exact(p) => Bracket::exact(*p),
            Kind::Series { state, .. } => state.bracket(),
        }
    }

    fn refine(&mut self) -> bool {
        match &mut self.kind {
            Kind::Exact(_) => false,
            Kind::Series { lo, hi, x, y, duration, state } => {
                let before = state.bracket();
                let k = state.k + 1;
                state.push(Self::term(*lo, *hi, *x, *y, *duration, k));
                state.bracket() != before || state.last_term > 0.0
            }
        }
    }
}

/// `P(B_s < c + d on [0, T] | B_s > c on (0, T])` for a Brownian bridge that
/// starts at its lower barrier `c` and ends at `c + w`, `0 < w < d`.
///
/// Equivalently (by reflection) a bridge starting at an upper barrier.
#[derive(Debug, Clone)]
pub struct BarrierConfinement {
    kind: BarrierKind,
}

#[derive(Debug, Clone)]
enum BarrierKind {
    Exact(f64),
    Series { d: f64, w: f64, duration: f64, pairs: usize, sum: f64, abs: f64, first_certified: usize, best: Bracket },
}

impl BarrierConfinement {
    pub fn new(d: f64, w: f64, duration: f64) -> Self {
        let kind = if !(w < d) || !(w >= 0.0) {
            BarrierKind::Exact(0.0)
        } else if d == f64::INFINITY {
            BarrierKind::Exact(1.0)
        } else {
            // s ↦ s exp(−(s² − w²)/2T) decreases once s ≥ √T
            let first = ((duration.sqrt() + w) / (2.0 * d)).ceil().max(1.0) as usize;
            BarrierKind::Series {
                d,
                w,
                duration,
                pairs: 0,
                sum: 1.0,
                abs: 1.0,
                first_certified: first,
                best: Bracket { lower: 0.0, upper: 1.0 },
            }
        };
        BarrierConfinement { kind }
    }

    // e^{−2jd(jd−w)/T}
    fn lead(d: f64, w: f64, t: f64, j: f64) -> f64 {
        (-2.0 * j * d * (j * d - w) / t).exp()
    }

    fn pair(d: f64, w: f64, t: f64, j: f64) -> f64 {
        let a = Self::lead(d, w, t, j);
        let b = a * (-4.0 * j * d * w / t).exp();
        let ratio = if w > 0.0 { -(-4.0 * j * d * w / t).exp_m1() / w } else { 4.0 * j * d / t };
        2.0 * j * d * a * ratio - (a + b)
    }

    fn next_leading_term(d: f64, w: f64, t: f64, j: f64) -> f64 {
        let a = Self::lead(d, w, t, j);
        if w > 0.0 {
            (2.0 * j * d - w) / w * a
        } else {
            f64::INFINITY
        }
    }
}

impl Refinable for BarrierConfinement {
    fn bracket(&self) -> Bracket {
        match &self.kind {
            BarrierKind::Exact(p) => Bracket::exact(*p),
            BarrierKind::Series { best, .. } => *best,
        }
    }

    fn refine(&mut self) -> bool {
        match &mut self.kind {
            BarrierKind::Exact(_) => false,
            BarrierKind::Series { d, w, duration, pairs, sum, abs, first_certified, best } => {
                *pairs += 1;
                let p = Self::pair(*d, *w, *duration, *pairs as f64);
                *sum -= p;
                *abs += p.abs();
                if *pairs + 1 >= *first_certified {
                    let tail = Self::next_leading_term(*d, *w, *duration, (*pairs + 1) as f64);
                    let slack = 8.0 * f64::EPSILON * *abs;
                    *best = best.intersect(Bracket { lower: *sum - tail - slack, upper: *sum + slack });
                }
                p > 0.0 || *pairs < *first_certified + 2
            }
        }
    }
}

/// `P(max < h | min > m)` for a Brownian bridge between two points strictly
/// above `m`: an interval confinement divided by the one-sided probability.
#[derive(Debug, Clone)]
pub struct ConditionalConfinement {
    inner: IntervalConfinement,
    denominator: f64,
}

impl ConditionalConfinement {
    pub fn new(m: f64, h: f64, x: f64, y: f64, duration: f64) -> Self {
        let denominator = -(-2.0 * (x - m) * (y - m) / duration).exp_m1();
        ConditionalConfinement { inner: IntervalConfinement::new(m, h, x, y, duration), denominator }
    }
}

impl Refinable for ConditionalConfinement {
    fn bracket(&self) -> Bracket {
        let b = self.inner.bracket();
        if self.denominator <= 0.0 {
            return Bracket { lower: 0.0, upper: 1.0 };
        }
        let tol = 4.0 * f64::EPSILON;
        Bracket { lower: b.lower / self.denominator * (1.0 - tol), upper: b.upper / self.denominator * (1.0 + tol) }
            .clamp()
    }

    fn refine(&mut self) -> bool {
        self.inner.refine()
    }
}
