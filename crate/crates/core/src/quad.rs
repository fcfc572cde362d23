//! Adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{numeric, Result};
use crate::real::{half, lit, Real};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Stopping rule for the adaptive schemes.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-10, abs: 0.0, max_panels: 4000 }
    }
}

impl Tolerance {
    pub fn rel(rel: f64) -> Self {
        Tolerance { rel, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub error: T,
}

/// One leaf of an adaptive partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel<T> {
    pub a: T,
    pub b: T,
    pub value: T,
    pub error: T,
}

/// Single 15-point Kronrod rule with the embedded Gauss estimate as error.
pub fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> Panel<T> {
    let c = (a + b) * half();
    let h = (b - a) * half();
    let fc = f(c);
    let mut k = fc * lit(WGK[7]);
    let mut g = fc * lit(WG[3]);
    for j in 0..7 {
        let dx = h * lit(XGK[j]);
        let s = f(c - dx) + f(c + dx);
        k = k + s * lit(WGK[j]);
        if j % 2 == 1 {
            g = g + s * lit(WG[j / 2]);
        }
    }
    Panel { a, b, value: k * h, error: ((k - g) * h).abs() }
}

/// Adaptive partition of `[a, b]`; leaves are returned in left-to-right order.
pub fn integrate_panels<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    tol: Tolerance,
) -> Result<Vec<Panel<T>>> {
    let mut panels = vec![gk15(&mut f, a, b)];
    loop {
        let (value, error) = totals(&panels);
        if !value.is_finite() || !error.is_finite() {
            return Err(numeric("integrand is not finite on the range"));
        }
        let target = lit::<T>(tol.abs).max(lit::<T>(tol.rel) * value.abs());
        if error <= target {
            break;
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, -T::one()), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let p = panels[worst];
        let mid = (p.a + p.b) * half();
        if panels.len() >= tol.max_panels || !(mid > p.a && mid < p.b) {
            return Err(numeric(format!(
                "quadrature did not converge: value {value}, error {error} after {} panels",
                panels.len()
            )));
        }
        panels[worst] = gk15(&mut f, p.a, mid);
        panels.push(gk15(&mut f, mid, p.b));
    }
    panels.sort_by(|x, y| x.a.partial_cmp(&y.a).expect("finite panel bounds"));
    Ok(panels)
}

fn totals<T: Real>(panels: &[Panel<T>]) -> (T, T) {
    panels
        .iter()
        .fold((T::zero(), T::zero()), |(v, e), p| (v + p.value, e + p.error))
}

/// `∫_a^b f` to the requested tolerance.
pub fn integrate<T: Real, F: FnMut(T) -> T>(f: F, a: T, b: T, tol: Tolerance) -> Result<Integral<T>> {
    if a == b {
        return Ok(Integral { value: T::zero(), error: T::zero() });
    }
    if a > b {
        let r = integrate(f, b, a, tol)?;
        return Ok(Integral { value: -r.value, error: r.error });
    }
    let (value, error) = totals(&integrate_panels(f, a, b, tol)?);
    Ok(Integral { value, error })
}

/// `∫_a^∞ f` via the substitution `u = a + s/(1−s)`.
pub fn integrate_to_infinity<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, tol: Tolerance) -> Result<Integral<T>> {
    integrate(
        |s: T| {
            let w = T::one() - s;
            let v = f(a + s / w) / (w * w);
            if v.is_nan() { T::zero() } else { v }
        },
        T::zero(),
        T::one(),
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x: f64| x.powi(5) - 3.0 * x * x, -1.0, 2.0, Tolerance::default()).unwrap();
        assert!((r.value - (64.0 / 6.0 - 1.0 / 6.0 - 9.0)).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_tail() {
        let r = integrate_to_infinity(|x: f64| (-x * x / 2.0).exp(), 0.0, Tolerance::default()).unwrap();
        assert!((r.value - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let r = integrate(|x: f64| x.exp(), 1.0, 0.0, Tolerance::default()).unwrap();
        assert!((r.value + (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn panels_cover_range_in_order() {
        let p = integrate_panels(|x: f64| (10.0 * x).sin().abs(), 0.0, 3.0, Tolerance::rel(1e-9)).unwrap();
        assert_eq!(p[0].a, 0.0);
        assert_eq!(p.last().unwrap().b, 3.0);
        for w in p.windows(2) {
            assert_eq!(w[0].b, w[1].a);
        }
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        assert!(integrate(|_x: f64| f64::NAN, 0.0, 1.0, Tolerance::default()).is_err());
    }
}
