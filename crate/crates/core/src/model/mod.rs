//! Target diffusions with unit diffusion coefficient.
//!
//! A model supplies the drift `α`, its antiderivative `A`, its boundaries, the
//! candidate process the exact algorithms propose from, and the bounds on the
//! functional `φ` (Brownian candidate) or `φ̃` (Bessel candidate).

mod basic;
mod growth;

pub use basic::{Conditioned, JacobiDrift, SineDrift, WideSenseBessel, ZeroDrift};
pub use growth::{
    growth_drift, growth_phi_bounds, growth_phi_expr, GrowthBounds, GrowthModel, GrowthModelParams,
};

use crate::bessel::BesselOrder;
use crate::error::{domain, numeric, Result};
use crate::quad::{gk15, integrate, Tolerance};
use crate::real::{half, lit, Real};

/// Process the exact algorithms propose paths from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Candidate<T = f64> {
    Brownian,
    Bessel(BesselOrder<T>),
}

impl<T: Real> Candidate<T> {
    pub fn bessel(delta: T) -> Result<Self> {
        Ok(Candidate::Bessel(BesselOrder::from_dimension(delta)?))
    }

    /// Drift `β` of the candidate (zero for Brownian motion).
    pub fn drift(&self, u: T) -> T {
        match self {
            Candidate::Brownian => T::zero(),
            Candidate::Bessel(o) => (o.delta() - T::one()) * half() / u,
        }
    }

    /// `β² + β′`.
    pub fn drift_energy(&self, u: T) -> T {
        match self {
            Candidate::Brownian => T::zero(),
            Candidate::Bessel(o) => {
                let c = (o.delta() - T::one()) * half();
                (c * c - c) / (u * u)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Candidate::Brownian => "brownian".to_string(),
            Candidate::Bessel(o) => format!("bessel({})", o.delta()),
        }
    }
}

/// A one-dimensional diffusion `dY = α(Y) dt + dB` paired with a candidate law.
///
/// `phi_lower_bound` and the upper bounds are on the halved scale, so that
/// `φ(u) = ½[α² − β² + α′ − β′](u) − ℓ` lies in `[0, r]`.
pub trait UnitDiffusion<T: Real = f64>: Send + Sync {
    fn drift(&self, u: T) -> T;

    fn drift_derivative(&self, u: T) -> T {
        central_difference(|v| self.drift(v), u)
    }

    /// `A(u) = ∫ α`, up to an additive constant.
    fn antiderivative(&self, u: T) -> T;

    fn lower_boundary(&self) -> T {
        T::neg_infinity()
    }

    fn upper_boundary(&self) -> T {
        T::infinity()
    }

    fn candidate(&self) -> Candidate<T>;

    /// `α² − β² + α′ − β′` (with `β ≡ 0` for a Brownian candidate).
    fn girsanov(&self, u: T) -> T {
        let a = self.drift(u);
        a * a + self.drift_derivative(u) - self.candidate().drift_energy(u)
    }

    /// `ℓ ≤ ½ girsanov(u)` for all interior `u`.
    fn phi_lower_bound(&self) -> T;

    /// `sup φ` over the whole state space, if finite.
    fn phi_upper_bound(&self) -> Option<T>;

    /// `sup φ` over `(lo, hi)`; defaults to the global bound.
    fn phi_band_sup(&self, _lo: T, _hi: T) -> Option<T> {
        self.phi_upper_bound()
    }

    /// `Ã(u) = A(u) − ((δ−1)/2) ln u` for Bessel candidates, `A(u)` otherwise.
    fn biased_antiderivative(&self, u: T) -> T {
        match self.candidate() {
            Candidate::Brownian => self.antiderivative(u),
            Candidate::Bessel(o) => self.antiderivative(u) - (o.delta() - T::one()) * half() * u.ln(),
        }
    }
}

/// Central difference with step `max(1e−6, 1e−8|u|)`.
pub fn central_difference<T: Real, F: Fn(T) -> T>(f: F, u: T) -> T {
    let h = lit::<T>(1e-6).max(lit::<T>(1e-8) * u.abs());
    (f(u + h) - f(u - h)) / (h + h)
}

fn interior<T: Real, M: UnitDiffusion<T> + ?Sized>(model: &M, u: T) -> Result<()> {
    if u > model.lower_boundary() && u < model.upper_boundary() {
        Ok(())
    } else {
        Err(domain(format!(
            "{u} is not interior to ({}, {})",
            model.lower_boundary(),
            model.upper_boundary()
        )))
    }
}

/// `φ(u)` (or `φ̃(u)` for Bessel candidates).
pub fn phi<T: Real, M: UnitDiffusion<T> + ?Sized>(model: &M, u: T) -> Result<T> {
    interior(model, u)?;
    let v = half::<T>() * model.girsanov(u) - model.phi_lower_bound();
    if v.is_nan() {
        return Err(numeric(format!("phi is NaN at {u}")));
    }
    Ok(v)
}

/// `η(x) = ∫_ξ^x du/σ(u)` by adaptive quadrature.
pub fn lamperti_transform<T: Real, F: Fn(T) -> T>(sigma: F, xi: T, x: T) -> Result<T> {
    let mut bad = None;
    let r = integrate(
        |u: T| {
            let s = sigma(u);
            if !(s > T::zero()) {
                bad.get_or_insert(u);
                return T::zero();
            }
            T::one() / s
        },
        xi,
        x,
        Tolerance::default(),
    );
    if let Some(u) = bad {
        return Err(domain(format!("diffusion coefficient is not positive at {u}")));
    }
    Ok(r?.value)
}

/// Drift `α*(u) = α(u) + S′(u)/(S(u) − S(0))` of `base` conditioned to exit
/// through the top before hitting 0, where `S′ = exp(−2A)`.
pub fn conditioned_drift<T: Real, M: UnitDiffusion<T> + ?Sized>(base: &M, u: T) -> Result<T> {
    if !(u > T::zero()) {
        return Err(domain(format!("conditioned drift needs u > 0, got {u}")));
    }
    let s = scale_increment(base, u)?;
    Ok(base.drift(u) + (-(base.antiderivative(u) + base.antiderivative(u))).exp() / s)
}

/// `S(u) − S(0) = ∫_0^u exp(−2A)`.
///
/// A fixed composite rule is tried first so that the result varies smoothly
/// with `u` (derivatives of the conditioned drift are taken numerically).
pub(crate) fn scale_increment<T: Real, M: UnitDiffusion<T> + ?Sized>(base: &M, u: T) -> Result<T> {
    let a0 = base.antiderivative(u);
    let mut f = |s: T| {
        let v = (-(base.antiderivative(u * s) - a0) * lit(2.0)).exp();
        if v.is_finite() { v } else { T::infinity() }
    };
    const PANELS: usize = 32;
    let (mut value, mut error) = (T::zero(), T::zero());
    for i in 0..PANELS {
        let p = gk15(&mut f, lit::<T>(i as f64 / PANELS as f64), lit::<T>((i + 1) as f64 / PANELS as f64));
        value = value + p.value;
        error = error + p.error;
    }
    if !(value.is_finite() && error <= lit::<T>(1e-13) * value) {
        value = integrate(f, T::zero(), T::one(), Tolerance::rel(1e-12))
            .map_err(|_| domain("scale function integral diverges at 0"))?
            .value;
    }
    let v = value * u * (-(a0 + a0)).exp();
    if !v.is_finite() || v <= T::zero() {
        return Err(domain("scale function integral diverges at 0"));
    }
    Ok(v)
}
