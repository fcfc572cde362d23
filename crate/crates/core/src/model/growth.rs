//! Population-growth diffusion with `σ²(x) = τx + ωx²`, after the Lamperti
//! transform `z = (2/√ω) asinh(√(ωx/τ))`. The boundary sits at `z = 0` and is
//! an entrance boundary with Bessel(4)-like behaviour, `α(z) ≈ 3/(2z)`.

use super::{Candidate, UnitDiffusion};
use crate::error::{domain, spec, Result};
use crate::real::{half, lit, two, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthModelParams<T = f64> {
    kappa: T,
    tau: T,
    omega: T,
}

impl<T: Real> GrowthModelParams<T> {
    pub fn new(kappa: T, tau: T, omega: T) -> Result<Self> {
        if !(kappa > T::zero()) || !kappa.is_finite() {
            return Err(spec(format!("growth rate kappa must be > 0, got {kappa}")));
        }
        if !(tau >= T::zero()) || !(omega > T::zero()) || !tau.is_finite() || !omega.is_finite() {
            return Err(spec(format!("growth model needs tau >= 0 and omega > 0 (tau={tau}, omega={omega})")));
        }
        if omega == kappa + kappa {
            return Err(spec("growth model needs omega != 2 kappa"));
        }
        Ok(GrowthModelParams { kappa, tau, omega })
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    /// `σ(x) = √(τx + ωx²)` in the original population coordinate.
    pub fn sigma(&self, x: T) -> T {
        (self.tau * x + self.omega * x * x).sqrt()
    }

    /// Transformed coordinate of a population size `x ≥ 0`.
    pub fn from_state(&self, x: T) -> Result<T> {
        if !(self.tau > T::zero()) || !(x >= T::zero()) {
            return Err(domain(format!("transform needs tau > 0 and x >= 0 (tau={}, x={x})", self.tau)));
        }
        let w = self.omega.sqrt();
        Ok(two::<T>() / w * (self.omega * x / self.tau).sqrt().asinh())
    }

    /// Population size for a transformed value `z ≥ 0`.
    pub fn to_state(&self, z: T) -> Result<T> {
        if !(self.tau > T::zero()) || !(z >= T::zero()) {
            return Err(domain(format!("transform needs tau > 0 and z >= 0 (tau={}, z={z})", self.tau)));
        }
        let s = (self.omega.sqrt() * z * half()).sinh();
        Ok(self.tau / self.omega * s * s)
    }

    fn p(&self) -> T {
        lit::<T>(4.0) * self.kappa / self.omega - two()
    }

    /// Sharper constant bounds on [`growth_phi_expr`]: `min(0, κ²/ω − κ)` and
    /// `(ω−2κ)²/(4ω) + κ`.
    pub fn sharp_bounds(&self) -> (T, T) {
        let (k, w) = (self.kappa, self.omega);
        let d = w - k - k;
        ((k * k / w - k).min(T::zero()), d * d / (lit::<T>(4.0) * w) + k)
    }
}

fn ln_cosh<T: Real>(v: T) -> T {
    let v = v.abs();
    if v < T::one() {
        let s = (v * half()).sinh();
        (two::<T>() * s * s).ln_1p()
    } else {
        v + (-(v + v)).exp().ln_1p() - two::<T>().ln()
    }
}

fn ln_sinh<T: Real>(v: T) -> T {
    if v < lit(20.0) {
        v.sinh().ln()
    } else {
        v + (-(v + v)).exp().neg().ln_1p() - two::<T>().ln()
    }
}

// 1/sinh²(x) − 1/x²
fn csch2_minus_inverse_square<T: Real>(x: T) -> T {
    if x.abs() < lit(0.05) {
        let x2 = x * x;
        lit::<T>(-1.0 / 3.0)
            + x2 * (lit::<T>(1.0 / 15.0) + x2 * (lit::<T>(-2.0 / 189.0) + x2 * lit::<T>(1.0 / 675.0)))
    } else {
        let s = x.sinh();
        T::one() / (s * s) - T::one() / (x * x)
    }
}

struct Pieces<T> {
    x: T,
    th: T,
    c: T,
    // 1 − cosh^p(x/2) and (1 − cosh^p)/cosh^p
    d: T,
    d_over_q: T,
    lc: T,
}

fn pieces<T: Real>(params: &GrowthModelParams<T>, z: T) -> Pieces<T> {
    let x = params.omega.sqrt() * z;
    let lc = ln_cosh(x * half());
    let pl = params.p() * lc;
    Pieces {
        x,
        th: (x * half()).tanh(),
        c: (x * half()).cosh(),
        d: -pl.exp_m1(),
        d_over_q: (-pl).exp_m1(),
        lc,
    }
}

/// Drift `α(z)` of the transformed growth model.
pub fn growth_drift<T: Real>(params: &GrowthModelParams<T>, z: T) -> Result<T> {
    if !(z > T::zero()) {
        return Err(domain(format!("growth drift needs z > 0, got {z}")));
    }
    Ok(drift(params, z))
}

fn drift<T: Real>(params: &GrowthModelParams<T>, z: T) -> T {
    let (k, w) = (params.kappa, params.omega);
    let sw = w.sqrt();
    let p = pieces(params, z);
    let coth = T::one() / p.x.tanh();
    k / sw * p.th - sw * half() * coth + (w - k - k) / sw * p.th / p.d
}

fn drift_derivative<T: Real>(params: &GrowthModelParams<T>, z: T) -> T {
    let (k, w) = (params.kappa, params.omega);
    let p = pieces(params, z);
    let c2 = p.c * p.c;
    let s2 = p.x.sinh() * p.x.sinh();
    let q_over_d2 = T::one() / (p.d * p.d_over_q);
    let last = T::one() / (two::<T>() * c2 * p.d) + params.p() * half() * p.th * p.th * q_over_d2;
    k / (two::<T>() * c2) + w / (two::<T>() * s2) + (w - k - k) * last
}

fn antiderivative<T: Real>(params: &GrowthModelParams<T>, z: T) -> T {
    let (k, w) = (params.kappa, params.omega);
    let p = pieces(params, z);
    let pl = params.p() * p.lc;
    let ln_d = if pl > lit(30.0) { pl + (-pl).exp().neg().ln_1p() } else { p.d.abs().ln() };
    (two::<T>() - (k + k) / w) * p.lc - half::<T>() * ln_sinh(p.x) + ln_d
}

/// The bracketed form of `α² − β² + α′ − β′` for the Bessel(4) candidate,
/// `(ω−2κ)²/(4ω) + (3ω + 8κ(cosh √ωz − 1))/(4 sinh² √ωz) − κ²/(ω cosh²(√ωz/2)) − 3/(4z²)`,
/// rearranged to avoid cancellation near the boundary.
pub fn growth_phi_expr<T: Real>(params: &GrowthModelParams<T>, z: T) -> Result<T> {
    if !(z > T::zero()) {
        return Err(domain(format!("growth functional needs z > 0, got {z}")));
    }
    Ok(expr(params, z))
}

fn expr<T: Real>(params: &GrowthModelParams<T>, z: T) -> T {
    let (k, w) = (params.kappa, params.omega);
    let x = w.sqrt() * z;
    let d = w - k - k;
    let c = (x * half()).cosh();
    let four = lit::<T>(4.0);
    d * d / (four * w) + lit::<T>(0.75) * w * csch2_minus_inverse_square(x) + (k - k * k / w) / (c * c)
}

/// Bounds `(−κ, (ω−2κ)²/(4ω) + 2κ)` on [`growth_phi_expr`] (un-halved).
pub fn growth_phi_bounds<T: Real>(params: &GrowthModelParams<T>) -> (T, T) {
    let (k, w) = (params.kappa, params.omega);
    let d = w - k - k;
    (-k, d * d / (lit::<T>(4.0) * w) + k + k)
}

/// Which constant bounds on the Girsanov functional the sampler uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GrowthBounds {
    /// [`growth_phi_bounds`].
    Printed,
    /// [`GrowthModelParams::sharp_bounds`].
    #[default]
    Sharp,
}

/// The transformed growth model paired with a candidate process.
#[derive(Debug, Clone, Copy)]
pub struct GrowthModel<T = f64> {
    params: GrowthModelParams<T>,
    candidate: Candidate<T>,
    lower: T,
    upper: T,
    // coefficient of 1/z² added to the bracketed expression
    extra: T,
}

impl<T: Real> GrowthModel<T> {
    /// Bessel candidates need `2 ≤ δ ≤ 4`; only `δ = 4` gives a bounded `φ̃`.
    pub fn new(params: GrowthModelParams<T>, candidate: Candidate<T>, bounds: GrowthBounds) -> Result<Self> {
        let extra = match candidate {
            Candidate::Brownian => lit(0.75),
            Candidate::Bessel(o) => {
                let d = o.delta();
                if d < two() || d > lit(4.0) {
                    return Err(spec(format!("growth model needs a Bessel candidate with 2 <= delta <= 4, got {d}")));
                }
                (lit::<T>(3.0) - (d - T::one()) * (d - lit(3.0))) / lit(4.0)
            }
        };
        let (lower, upper) = match bounds {
            GrowthBounds::Printed => growth_phi_bounds(&params),
            GrowthBounds::Sharp => params.sharp_bounds(),
        };
        Ok(GrowthModel { params, candidate, lower, upper, extra })
    }

    pub fn params(&self) -> &GrowthModelParams<T> {
        &self.params
    }
}

impl<T: Real> UnitDiffusion<T> for GrowthModel<T> {
    fn drift(&self, u: T) -> T {
        drift(&self.params, u)
    }
    fn drift_derivative(&self, u: T) -> T {
        drift_derivative(&self.params, u)
    }
    fn antiderivative(&self, u: T) -> T {
        antiderivative(&self.params, u)
    }
    fn lower_boundary(&self) -> T {
        T::zero()
    }
    fn candidate(&self) -> Candidate<T> {
        self.candidate
    }
    fn girsanov(&self, u: T) -> T {
        expr(&self.params, u) + self.extra / (u * u)
    }
    fn phi_lower_bound(&self) -> T {
        half::<T>() * self.lower
    }
    fn phi_upper_bound(&self) -> Option<T> {
        if self.extra == T::zero() {
            Some(half::<T>() * (self.upper - self.lower))
        } else {
            None
        }
    }
    fn phi_band_sup(&self, lo: T, _hi: T) -> Option<T> {
        if !(lo > T::zero()) {
            return self.phi_upper_bound();
        }
        let top = self.upper + self.extra / (lo * lo);
        top.is_finite().then(|| half::<T>() * (top - self.lower))
    }
}
