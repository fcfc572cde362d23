use super::{conditioned_drift, scale_increment, Candidate, UnitDiffusion};
use crate::bessel::BesselOrder;
use crate::error::{domain, spec, Result};
use crate::real::{half, lit, Real};
use crate::special::bessel_i_scaled;

/// `α ≡ 0`, optionally restricted to an interval (the bridge is then
/// conditioned to stay inside it).
#[derive(Debug, Clone, Copy)]
pub struct ZeroDrift<T = f64> {
    lower: T,
    upper: T,
}

impl<T: Real> ZeroDrift<T> {
    pub fn new() -> Self {
        ZeroDrift { lower: T::neg_infinity(), upper: T::infinity() }
    }

    pub fn on_interval(lower: T, upper: T) -> Result<Self> {
        if !(lower < upper) {
            return Err(spec(format!("empty interval ({lower}, {upper})")));
        }
        Ok(ZeroDrift { lower, upper })
    }
}

impl<T: Real> Default for ZeroDrift<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> UnitDiffusion<T> for ZeroDrift<T> {
    fn drift(&self, _u: T) -> T {
        T::zero()
    }
    fn drift_derivative(&self, _u: T) -> T {
        T::zero()
    }
    fn antiderivative(&self, _u: T) -> T {
        T::zero()
    }
    fn lower_boundary(&self) -> T {
        self.lower
    }
    fn upper_boundary(&self) -> T {
        self.upper
    }
    fn candidate(&self) -> Candidate<T> {
        Candidate::Brownian
    }
    fn girsanov(&self, _u: T) -> T {
        T::zero()
    }
    fn phi_lower_bound(&self) -> T {
        T::zero()
    }
    fn phi_upper_bound(&self) -> Option<T> {
        Some(T::zero())
    }
}

/// `α(u) = sin u`, for which `½(α² + α′)` ranges over `[−½, 5/8]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SineDrift;

impl<T: Real> UnitDiffusion<T> for SineDrift {
    fn drift(&self, u: T) -> T {
        u.sin()
    }
    fn drift_derivative(&self, u: T) -> T {
        u.cos()
    }
    fn antiderivative(&self, u: T) -> T {
        -u.cos()
    }
    fn candidate(&self) -> Candidate<T> {
        Candidate::Brownian
    }
    fn phi_lower_bound(&self) -> T {
        lit(-0.5)
    }
    fn phi_upper_bound(&self) -> Option<T> {
        Some(lit(0.625 + 0.5))
    }
}

/// `α(u) = c(1/u − 1/(1−u))` on `(0, 1)` with `c > 1`, so that both
/// boundaries are inaccessible and `φ` blows up at either end.
#[derive(Debug, Clone, Copy)]
pub struct JacobiDrift<T = f64> {
    c: T,
}

impl<T: Real> JacobiDrift<T> {
    pub fn new(c: T) -> Result<Self> {
        if !(c > T::one()) || !c.is_finite() {
            return Err(spec(format!("Jacobi drift needs c > 1, got {c}")));
        }
        Ok(JacobiDrift { c })
    }

    // α² + α′ as a quadratic in w = 1/(u(1−u)) ≥ 4
    fn energy(&self, w: T) -> T {
        let c = self.c;
        (c * c - c) * w * w - (lit::<T>(4.0) * c * c - c - c) * w
    }

    fn w(u: T) -> T {
        T::one() / (u * (T::one() - u))
    }
}

impl<T: Real> UnitDiffusion<T> for JacobiDrift<T> {
    fn drift(&self, u: T) -> T {
        self.c * (T::one() / u - T::one() / (T::one() - u))
    }
    fn drift_derivative(&self, u: T) -> T {
        let v = T::one() - u;
        -self.c * (T::one() / (u * u) + T::one() / (v * v))
    }
    fn antiderivative(&self, u: T) -> T {
        self.c * (u * (T::one() - u)).ln()
    }
    fn lower_boundary(&self) -> T {
        T::zero()
    }
    fn upper_boundary(&self) -> T {
        T::one()
    }
    fn candidate(&self) -> Candidate<T> {
        Candidate::Brownian
    }
    fn girsanov(&self, u: T) -> T {
        self.energy(Self::w(u))
    }
    fn phi_lower_bound(&self) -> T {
        let c = self.c;
        let vertex = (c + c - T::one()) / (c - T::one());
        half::<T>() * self.energy(vertex.max(lit(4.0)))
    }
    fn phi_upper_bound(&self) -> Option<T> {
        None
    }
    fn phi_band_sup(&self, lo: T, hi: T) -> Option<T> {
        if !(lo > T::zero()) || !(hi < T::one()) || !(lo < hi) {
            return None;
        }
        let w_hi = Self::w(lo).max(Self::w(hi));
        let w_lo = Self::w(half::<T>().max(lo).min(hi));
        let top = self.energy(w_hi).max(self.energy(w_lo));
        Some(half::<T>() * top - self.phi_lower_bound())
    }
}

/// Drift `(2ν+1)/(2x) + ρ I_{ν+1}(ρx)/I_ν(ρx)` of the Bessel process in the
/// wide sense.
pub fn wide_sense_bessel_drift<T: Real>(nu: T, rho: T, x: T) -> Result<T> {
    if !(rho >= T::zero()) || !(nu >= -T::one()) {
        return Err(domain(format!("wide-sense Bessel drift needs rho >= 0, nu >= -1 (nu={nu}, rho={rho})")));
    }
    if !(x > T::zero()) {
        return Err(domain(format!("wide-sense Bessel drift needs x > 0, got {x}")));
    }
    let base = (nu + nu + T::one()) * half() / x;
    if rho == T::zero() {
        return Ok(base);
    }
    Ok(base + rho * bessel_ratio(nu, rho * x)?)
}

fn bessel_ratio<T: Real>(nu: T, s: T) -> Result<T> {
    Ok(bessel_i_scaled(nu + T::one(), s)? / bessel_i_scaled(nu, s)?)
}

/// Bessel process in the wide sense, proposed from the Bessel process of
/// dimension `2ν + 2`. The Girsanov functional is the constant `ρ²`, so every
/// candidate is accepted.
#[derive(Debug, Clone, Copy)]
pub struct WideSenseBessel<T = f64> {
    nu: T,
    rho: T,
    order: BesselOrder<T>,
}

impl<T: Real> WideSenseBessel<T> {
    pub fn new(nu: T, rho: T) -> Result<Self> {
        if !(nu >= T::zero()) || !(rho >= T::zero()) {
            return Err(spec(format!("wide-sense Bessel target needs nu >= 0, rho >= 0 (nu={nu}, rho={rho})")));
        }
        Ok(WideSenseBessel { nu, rho, order: BesselOrder::from_order(nu)? })
    }
}

impl<T: Real> UnitDiffusion<T> for WideSenseBessel<T> {
    fn drift(&self, u: T) -> T {
        wide_sense_bessel_drift(self.nu, self.rho, u).unwrap_or(T::nan())
    }
    fn drift_derivative(&self, u: T) -> T {
        let k = self.nu + self.nu + T::one();
        let base = -k * half() / (u * u);
        if self.rho == T::zero() {
            return base;
        }
        let s = self.rho * u;
        let r = bessel_ratio(self.nu, s).unwrap_or(T::nan());
        base + self.rho * self.rho * (T::one() - r * r - k * r / s)
    }
    fn antiderivative(&self, u: T) -> T {
        if self.rho == T::zero() {
            return (self.nu + self.nu + T::one()) * half() * u.ln();
        }
        let s = self.rho * u;
        half::<T>() * u.ln() + bessel_i_scaled(self.nu, s).unwrap_or(T::nan()).ln() + s
    }
    fn lower_boundary(&self) -> T {
        T::zero()
    }
    fn candidate(&self) -> Candidate<T> {
        Candidate::Bessel(self.order)
    }
    fn phi_lower_bound(&self) -> T {
        half::<T>() * self.rho * self.rho
    }
    fn phi_upper_bound(&self) -> Option<T> {
        Some(T::zero())
    }
}

/// `base` conditioned to escape upwards before hitting 0, proposed from the
/// Bessel(3) process. For this candidate the Girsanov functional of the
/// conditioned law equals `α² + α′` of the base, so the base's bounds carry
/// over unchanged.
#[derive(Debug, Clone)]
pub struct Conditioned<M> {
    base: M,
}

impl<M> Conditioned<M> {
    pub fn new<T: Real>(base: M) -> Result<Self>
    where
        M: UnitDiffusion<T>,
    {
        if base.candidate() != Candidate::Brownian {
            return Err(spec("conditioning needs a base model with a Brownian candidate"));
        }
        Ok(Conditioned { base })
    }

    pub fn base(&self) -> &M {
        &self.base
    }
}

impl<T: Real, M: UnitDiffusion<T>> UnitDiffusion<T> for Conditioned<M> {
    fn drift(&self, u: T) -> T {
        conditioned_drift(&self.base, u).unwrap_or(T::nan())
    }
    fn antiderivative(&self, u: T) -> T {
        self.base.antiderivative(u) + scale_increment(&self.base, u).map(|s| s.ln()).unwrap_or(T::nan())
    }
    fn lower_boundary(&self) -> T {
        T::zero()
    }
    fn upper_boundary(&self) -> T {
        self.base.upper_boundary()
    }
    fn candidate(&self) -> Candidate<T> {
        Candidate::Bessel(BesselOrder::from_dimension(lit(3.0)).expect("valid dimension"))
    }
    fn girsanov(&self, u: T) -> T {
        let a = self.base.drift(u);
        a * a + self.base.drift_derivative(u)
    }
    fn phi_lower_bound(&self) -> T {
        self.base.phi_lower_bound()
    }
    fn phi_upper_bound(&self) -> Option<T> {
        self.base.phi_upper_bound()
    }
    fn phi_band_sup(&self, lo: T, hi: T) -> Option<T> {
        self.base.phi_band_sup(lo, hi)
    }
}
