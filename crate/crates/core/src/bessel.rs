//! Bessel processes: the discrete Bessel(ν, x) law, transition densities and
//! exact (squared) Bessel bridge samplers.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{domain, numeric, Result};
use crate::real::{half, lit, two, Real};
use crate::rng::Source;
use crate::special::{bessel_i_scaled, ln_gamma};

/// Dimension `δ` of a Bessel process together with its order `ν = (δ−2)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselOrder<T = f64> {
    delta: T,
    nu: T,
}

impl<T: Real> BesselOrder<T> {
    pub fn from_dimension(delta: T) -> Result<Self> {
        if !(delta >= T::zero()) || !delta.is_finite() {
            return Err(domain(format!("Bessel dimension must be finite and >= 0, got {delta}")));
        }
        Ok(BesselOrder { delta, nu: (delta - two()) * half() })
    }

    pub fn from_order(nu: T) -> Result<Self> {
        Self::from_dimension(two::<T>() * nu + two())
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn nu(&self) -> T {
        self.nu
    }
}

/// Law of `W` with `P(W = n) ∝ (x/2)^{2n+ν} / (n! Γ(ν+n+1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselDiscrete<T = f64> {
    nu: T,
    x: T,
}

impl<T: Real> BesselDiscrete<T> {
    pub fn new(nu: T, x: T) -> Result<Self> {
        if !(nu >= -T::one()) || !(x >= T::zero()) || !x.is_finite() || !nu.is_finite() {
            return Err(domain(format!("Bessel({nu}, {x}) needs nu >= -1 and finite x >= 0")));
        }
        Ok(BesselDiscrete { nu, x })
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    pub fn x(&self) -> T {
        self.x
    }

    // the atom when x = 0
    fn degenerate_at(&self) -> u64 {
        if self.nu == -T::one() {
            1
        } else {
            0
        }
    }

    /// `ln P(W = n)`.
    pub fn ln_pmf(&self, n: u64) -> T {
        if self.x == T::zero() {
            return if n == self.degenerate_at() { T::zero() } else { T::neg_infinity() };
        }
        let nf = lit::<T>(n as f64);
        let ln_i = bessel_i_scaled(self.nu, self.x).expect("validated parameters").ln() + self.x;
        (two::<T>() * nf + self.nu) * (self.x * half()).ln()
            - ln_gamma(nf + T::one())
            - ln_gamma(self.nu + nf + T::one())
            - ln_i
    }

    pub fn pmf(&self, n: u64) -> T {
        self.ln_pmf(n).exp()
    }

    /// `E[W] = (x/2) I_{ν+1}(x) / I_ν(x)`.
    pub fn mean(&self) -> T {
        if self.x == T::zero() {
            return lit(self.degenerate_at() as f64);
        }
        let num = bessel_i_scaled(self.nu + T::one(), self.x).expect("validated parameters");
        let den = bessel_i_scaled(self.nu, self.x).expect("validated parameters");
        self.x * half() * num / den
    }

    // ratio P(W = n+1) / P(W = n)
    fn ratio(&self, n: T) -> T {
        let q = self.x * self.x / lit(4.0);
        q / ((n + T::one()) * (self.nu + n + T::one()))
    }
}

impl BesselDiscrete<f64> {
    /// One draw by CDF inversion, consuming exactly one uniform.
    ///
    /// The pmf is scanned outward from its mode using the ratio recurrence,
    /// which keeps the cost proportional to the spread of the law rather than
    /// to its location.
    pub fn sample<R: Source + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        rng.tally(1);
        if self.x == 0.0 {
            return self.degenerate_at();
        }
        if self.nu == -1.0 {
            // W − 1 ~ Bessel(1, x)
            return 1 + BesselDiscrete { nu: 1.0, x: self.x }.draw(u, rng);
        }
        self.draw(u, rng)
    }

    fn draw<R: Source + ?Sized>(&self, u: f64, rng: &mut R) -> u64 {
        if self.x < LARGE_ARGUMENT {
            self.invert(u)
        } else {
            self.reject(u, rng)
        }
    }

    // smallest n with P(n+1) ≤ P(n)
    fn mode(&self) -> u64 {
        let nu = self.nu;
        let root = (-(nu + 2.0) + (nu * nu + self.x * self.x).sqrt()) / 2.0;
        let mut m = root.max(0.0).floor() as u64;
        while m > 0 && self.ratio((m - 1) as f64) <= 1.0 {
            m -= 1;
        }
        while self.ratio(m as f64) > 1.0 {
            m += 1;
        }
        m
    }

    // ln P(m + k) − ln P(m)
    fn ln_pmf_shift(&self, m: u64, k: i64) -> f64 {
        let q = self.x * self.x / 4.0;
        let (a, b) = (m as f64 + 1.0, m as f64 + self.nu + 1.0);
        let kf = k as f64;
        kf * (q / (a * b)).ln() - ln_gamma_shift(a, kf) - ln_gamma_shift(b, kf)
    }

    // Rejection from a flat centre with geometric tails; the pmf is
    // log-concave, so the secant slopes at m ± j bound it beyond them.
    fn reject<R: Source + ?Sized>(&self, first: f64, rng: &mut R) -> u64 {
        let m = self.mode();
        let j = ((self.x.sqrt() / 2.0).round() as u64).max(2);
        let left_end = m.saturating_sub(j);
        let right_end = m + j;
        let ln_r = self.ln_pmf_shift(m, j as i64);
        let rho_r = self.ratio((right_end - 1) as f64);
        let right_mass = ln_r.exp() * rho_r / (1.0 - rho_r);
        let (ln_l, rho_l, left_mass) = if left_end > 0 {
            let ln_l = self.ln_pmf_shift(m, -((m - left_end) as i64));
            let rho_l = 1.0 / self.ratio(left_end as f64);
            (ln_l, rho_l, ln_l.exp() * rho_l / (1.0 - rho_l))
        } else {
            (0.0, 0.0, 0.0)
        };
        let centre = (right_end - left_end + 1) as f64;
        let total = centre + right_mass + left_mass;
        let mut u = first;
        loop {
            let pick = u * total;
            let v: f64 = rng.random();
            let (n, ln_env) = if pick < centre {
                (left_end + (pick as u64).min(right_end - left_end), 0.0)
            } else if pick < centre + right_mass {
                let g = geometric(rho_r, rng.random());
                (right_end + 1 + g, ln_r + (g + 1) as f64 * rho_r.ln())
            } else {
                let g = geometric(rho_l, rng.random());
                if g + 1 > left_end {
                    u = rng.random();
                    continue;
                }
                (left_end - 1 - g, ln_l + (g + 1) as f64 * rho_l.ln())
            };
            let ln_p = self.ln_pmf_shift(m, n as i64 - m as i64);
            if v.ln() <= ln_p - ln_env {
                return n;
            }
            u = rng.random();
        }
    }

    // inversion cost grows like √x; beyond this the rejection sampler is used
    fn invert(&self, u: f64) -> u64 {
        const FLOOR: f64 = 1e-18;
        let nu = self.nu;
        let mode = ((-nu + (nu * nu + self.x * self.x).sqrt()) / 2.0 - 1.0).max(0.0).round() as u64;

        // weights relative to the mode
        let mut below = Vec::new();
        let mut w = 1.0;
        let mut n = mode;
        while n > 0 {
            w /= self.ratio((n - 1) as f64);
            if w < FLOOR {
                break;
            }
            below.push(w);
            n -= 1;
        }
        let lo = mode - below.len() as u64;
        let mut weights: Vec<f64> = below.into_iter().rev().collect();
        weights.push(1.0);
        let mut w = 1.0;
        let mut n = mode;
        loop {
            w *= self.ratio(n as f64);
            n += 1;
            if w < FLOOR {
                break;
            }
            weights.push(w);
        }
        let total: f64 = weights.iter().sum();
        let target = u * total;
        let mut acc = 0.0;
        for (k, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return lo + k as u64;
            }
        }
        log::warn!("Bessel({}, {}) inversion reached its tail cutoff", self.nu, self.x);
        lo + weights.len() as u64 - 1
    }
}

const LARGE_ARGUMENT: f64 = 1000.0;

// number of failures before the first success, P(g) ∝ ρ^g
fn geometric(rho: f64, u: f64) -> u64 {
    let g = ((1.0 - u).ln() / rho.ln()).floor();
    if g.is_finite() && g >= 0.0 { g.min(u64::MAX as f64 / 2.0) as u64 } else { 0 }
}

// lnΓ(a + k) − lnΓ(a) − k ln a without cancellation for large arguments
fn ln_gamma_shift(a: f64, k: f64) -> f64 {
    let c = a + k;
    if a.min(c) < 15.0 {
        return ln_gamma(c) - ln_gamma(a) - k * a.ln();
    }
    let corr = |z: f64| {
        let z2 = z * z;
        (1.0 / 12.0 - (1.0 / 360.0 - 1.0 / (1260.0 * z2)) / z2) / z
    };
    (c - 0.5) * (k / a).ln_1p() - k + corr(c) - corr(a)
}

/// Transition density `p^δ_t(y, z)` of the Bessel process of dimension `δ`.
pub fn transition_density<T: Real>(order: BesselOrder<T>, t: T, y: T, z: T) -> Result<T> {
    Ok(ln_transition_density(order, t, y, z)?.exp())
}

/// Logarithm of [`transition_density`].
pub fn ln_transition_density<T: Real>(order: BesselOrder<T>, t: T, y: T, z: T) -> Result<T> {
    if !(z > T::zero()) || !(t > T::zero()) || !(y >= T::zero()) {
        return Err(domain(format!("Bessel transition density needs t > 0, y >= 0, z > 0 (t={t}, y={y}, z={z})")));
    }
    let nu = order.nu();
    if y == T::zero() {
        if !(order.delta() > T::zero()) {
            return Err(domain("Bessel transition from 0 needs delta > 0"));
        }
        return Ok((two::<T>() * nu + T::one()) * z.ln()
            - z * z / (two::<T>() * t)
            - nu * two::<T>().ln()
            - (nu + T::one()) * t.ln()
            - ln_gamma(nu + T::one()));
    }
    let arg = y * z / t;
    let scaled = bessel_i_scaled(nu, arg)?;
    Ok(-t.ln() + (nu + T::one()) * z.ln() - nu * y.ln() - (y - z) * (y - z) / (two::<T>() * t)
        + scaled.ln())
}

fn check_time(t: f64, horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !(t > 0.0 && t < horizon) {
        return Err(domain(format!("bridge time {t} outside (0, {horizon})")));
    }
    Ok(())
}

/// Point at time `t` of a squared Bessel bridge running from `y` to `z`
/// (squared-process endpoints) over `[0, horizon]`.
///
/// Draws `W ~ Bessel(ν, √(yz)/T)`, `V ~ Poisson(½[y(T−t)/(tT) + zt/(T(T−t))])`
/// and returns `Gamma(V + 2W + ν + 1)` with rate `T/(2t(T−t))`. Three logical
/// variates are tallied.
pub fn squared_bessel_bridge_point<R: Source + ?Sized>(
    order: BesselOrder<f64>,
    y: f64,
    z: f64,
    horizon: f64,
    t: f64,
    rng: &mut R,
) -> Result<f64> {
    check_time(t, horizon)?;
    if !(order.delta() > 0.0) {
        return Err(domain("squared Bessel bridge needs delta > 0"));
    }
    if !(y >= 0.0) || !(z >= 0.0) {
        return Err(domain(format!("squared Bessel bridge endpoints must be >= 0 (y={y}, z={z})")));
    }
    let s = horizon - t;
    let nu = order.nu();
    let w = BesselDiscrete::new(nu, (y * z).sqrt() / horizon)?.sample(rng);
    let lambda = 0.5 * (y * s / (t * horizon) + z * t / (horizon * s));
    let v = if lambda > 0.0 {
        Poisson::new(lambda)
            .map_err(|e| numeric(format!("Poisson({lambda}): {e}")))?
            .sample(rng)
    } else {
        0.0
    };
    let shape = v + 2.0 * w as f64 + nu + 1.0;
    let scale = 2.0 * t * s / horizon;
    let g = Gamma::new(shape, scale)
        .map_err(|e| numeric(format!("Gamma({shape}, {scale}): {e}")))?
        .sample(rng);
    rng.tally(2);
    Ok(g)
}

/// Point at time `t` of a Bessel bridge from `y` to `z` (unsquared).
pub fn bessel_bridge_point<R: Source + ?Sized>(
    order: BesselOrder<f64>,
    y: f64,
    z: f64,
    horizon: f64,
    t: f64,
    rng: &mut R,
) -> Result<f64> {
    Ok(squared_bessel_bridge_point(order, y * y, z * z, horizon, t, rng)?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, integrate_to_infinity, Tolerance};
    use crate::rng::stream;
    use crate::stats::chi_square;

    fn chi_square_against_pmf(nu: f64, x: f64, n: usize, seed: u64) -> f64 {
        let d = BesselDiscrete::new(nu, x).unwrap();
        let mut rng = stream(seed, 0);
        let draws: Vec<u64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let sd = (x.sqrt() / 2.0).max(1.0);
        let centre = d.mean();
        let lo = (centre - 6.0 * sd).max(0.0) as u64;
        let hi = (centre + 6.0 * sd) as u64;
        let width = ((hi - lo) / 60).max(1);
        let bins = ((hi - lo) / width + 1) as usize;
        // cell 0 collects everything outside [lo, hi]
        let (mut obs, mut exp) = (vec![0.0; bins + 1], vec![0.0; bins + 1]);
        for &w in &draws {
            let b = if w < lo || w > hi { 0 } else { 1 + ((w - lo) / width) as usize };
            obs[b.min(bins)] += 1.0;
        }
        let mut inside = 0.0;
        for k in lo..=hi {
            let b = 1 + ((k - lo) / width) as usize;
            let p = d.pmf(k) * n as f64;
            exp[b.min(bins)] += p;
            inside += p;
        }
        exp[0] = (n as f64 - inside).max(0.0);
        chi_square(&obs, &exp, 0).unwrap().1
    }

    #[test]
    fn large_argument_sampler_matches_pmf() {
        for (nu, x) in [(0.5, 1.0e3), (1.0, 2.5e3), (0.5, 1.0e5), (0.0, 1.0e9)] {
            let p = chi_square_against_pmf(nu, x, 100_000, 31);
            assert!(p > 1e-3, "nu={nu} x={x}: p={p}");
        }
    }

    #[test]
    fn ln_gamma_shift_matches_direct_differences() {
        for (a, k) in [(20.0f64, 3.0f64), (150.5, -40.0), (1e6, 1234.0), (30.0, -14.0)] {
            let direct = ln_gamma(a + k) - ln_gamma(a) - k * a.ln();
            let scale = ln_gamma(a + k).abs() + ln_gamma(a).abs();
            assert!((ln_gamma_shift(a, k) - direct).abs() < 1e-9 + 1e-14 * scale, "{a} {k}");
        }
    }

    #[test]
    fn order_and_dimension_agree() {
        let o = BesselOrder::from_dimension(3.0).unwrap();
        assert_eq!(o.nu(), 0.5);
        assert_eq!(BesselOrder::from_order(0.5).unwrap(), o);
        assert!(BesselOrder::from_dimension(-0.1).is_err());
    }

    #[test]
    fn degenerate_argument_is_a_point_mass() {
        let d = BesselDiscrete::new(0.7, 0.0).unwrap();
        assert_eq!(d.pmf(0), 1.0);
        assert_eq!(d.pmf(3), 0.0);
        let mut rng = stream(1, 0);
        for _ in 0..100 {
            assert_eq!(d.sample(&mut rng), 0);
        }
    }

    #[test]
    fn pmf_normalizes() {
        let d = BesselDiscrete::new(0.5, 2.0).unwrap();
        let mut total = 0.0_f64;
        let mut n = 0;
        while total < 1.0 - 1e-14 && n < 200 {
            total += d.pmf(n);
            n += 1;
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pmf_zero_against_series_value() {
        // I0(1) = 1.2660658777520083...
        let d = BesselDiscrete::new(0.0_f64, 1.0).unwrap();
        assert!((d.pmf(0) - 1.0 / 1.266_065_877_752_008_4).abs() < 1e-14);
    }

    #[test]
    fn recurrence_agrees_with_direct_formula() {
        let d = BesselDiscrete::new(1.3_f64, 7.5).unwrap();
        let mut p = d.pmf(0);
        for n in 0..50 {
            let direct = d.pmf(n);
            assert!(((p - direct) / direct).abs() < 1e-12, "n={n}");
            p *= d.ratio(n as f64);
        }
    }

    #[test]
    fn mean_matches_truncated_sum() {
        for (nu, x) in [(1.0, 4.0), (0.0, 0.3), (2.5, 40.0)] {
            let d = BesselDiscrete::new(nu, x).unwrap();
            let s: f64 = (0..400).map(|n| n as f64 * d.pmf(n)).sum();
            assert!((d.mean() - s).abs() < 1e-11 * s.max(1.0));
        }
    }

    #[test]
    fn order_minus_one_shifts_support() {
        let d = BesselDiscrete::new(-1.0, 2.0).unwrap();
        assert_eq!(d.pmf(0), 0.0);
        let mut rng = stream(3, 0);
        for _ in 0..1000 {
            assert!(d.sample(&mut rng) >= 1);
        }
    }

    #[test]
    fn large_argument_sampling_is_centred() {
        let d = BesselDiscrete::new(1.0, 1.0e6).unwrap();
        let mut rng = stream(5, 0);
        let n = 2000;
        let m: f64 = (0..n).map(|_| d.sample(&mut rng) as f64).sum::<f64>() / n as f64;
        assert!((m - d.mean()).abs() < 50.0);
    }

    #[test]
    fn density_normalizes() {
        let o = BesselOrder::from_dimension(3.0).unwrap();
        let r = integrate_to_infinity(
            |z: f64| if z > 0.0 { transition_density(o, 0.5, 1.2, z).unwrap() } else { 0.0 },
            0.0,
            Tolerance::default(),
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rayleigh_from_zero() {
        let o = BesselOrder::from_dimension(2.0).unwrap();
        for z in [0.1_f64, 1.0, 2.5] {
            let t = 0.7;
            let want = z / t * (-z * z / (2.0 * t)).exp();
            assert!((transition_density(o, t, 0.0, z).unwrap() - want).abs() < 1e-14);
        }
    }

    #[test]
    fn three_dimensional_radial_density() {
        // radial part of a 3-d Gaussian started at distance y, integrated over the sphere
        let (t, y, z): (f64, f64, f64) = (1.0, 1.0, 2.0);
        let shell = integrate(
            |c: f64| {
                let d2 = y * y + z * z - 2.0 * y * z * c;
                (-d2 / (2.0 * t)).exp() * 2.0 * std::f64::consts::PI
            },
            -1.0,
            1.0,
            Tolerance::rel(1e-13),
        )
        .unwrap()
        .value;
        let want = z * z * shell / (2.0 * std::f64::consts::PI * t).powf(1.5);
        let o = BesselOrder::from_dimension(3.0).unwrap();
        assert!((transition_density(o, t, y, z).unwrap() - want).abs() < 1e-8);
    }

    #[test]
    fn chapman_kolmogorov() {
        let o = BesselOrder::from_dimension(3.0).unwrap();
        let (s, t, y, z) = (0.3, 0.7, 1.0, 2.0);
        let r = integrate_to_infinity(
            |u: f64| {
                if u > 0.0 {
                    transition_density(o, s, y, u).unwrap() * transition_density(o, t, u, z).unwrap()
                } else {
                    0.0
                }
            },
            0.0,
            Tolerance::rel(1e-12),
        )
        .unwrap();
        assert!((r.value - transition_density(o, s + t, y, z).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn density_rejects_bad_arguments() {
        let o = BesselOrder::from_dimension(3.0).unwrap();
        assert!(transition_density(o, 1.0, 1.0, 0.0).is_err());
        assert!(transition_density(o, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn bridge_time_must_be_interior() {
        let o = BesselOrder::from_dimension(3.0).unwrap();
        let mut rng = stream(1, 1);
        assert!(squared_bessel_bridge_point(o, 1.0, 1.0, 1.0, 1.0, &mut rng).is_err());
        assert!(squared_bessel_bridge_point(o, 1.0, 1.0, 1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn zero_endpoints_give_exponential() {
        let o = BesselOrder::from_dimension(2.0).unwrap();
        let mut rng = stream(2, 0);
        let (horizon, t) = (1.0, 0.3);
        let n = 200_000;
        let m: f64 = (0..n)
            .map(|_| squared_bessel_bridge_point(o, 0.0, 0.0, horizon, t, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        let want = 2.0 * t * (horizon - t) / horizon;
        assert!((m - want).abs() < 4.0 * want / (n as f64).sqrt());
    }

    #[test]
    fn near_start_concentrates() {
        let o = BesselOrder::from_dimension(3.0).unwrap();
        let mut rng = stream(4, 0);
        let xs: Vec<f64> = (0..2000)
            .map(|_| bessel_bridge_point(o, 1.0, 1.0, 1.0, 1e-6, &mut rng).unwrap())
            .collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt();
        assert!(sd < 0.01);
        assert!((m - 1.0).abs() < 0.01);
    }

    #[test]
    fn bridge_point_tallies_three_variates() {
        let o = BesselOrder::from_dimension(4.0).unwrap();
        let mut rng = stream(9, 0);
        squared_bessel_bridge_point(o, 1.0, 2.0, 1.0, 0.5, &mut rng).unwrap();
        assert_eq!(rng.logical(), 3);
    }
}
