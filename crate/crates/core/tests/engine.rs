use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use exactdiff_core::brownian::BridgeSpec;
use exactdiff_core::engine::{
    run_ea1, run_ea2, run_ea3_two_boundary, thinning_event, Algorithm, Conditioning, Endpoint, EndpointSampler,
    EngineOptions, PoissonMarks, Simulator,
};
use exactdiff_core::layered::LayerScheme;
use exactdiff_core::model::{
    phi, Candidate, GrowthBounds, GrowthModel, GrowthModelParams, JacobiDrift, SineDrift, UnitDiffusion,
    WideSenseBessel, ZeroDrift,
};
use exactdiff_core::rng::stream;
use exactdiff_core::stats::{chi_square, effective_size, ks_p_value, ks_statistic, ks_two_sample, mean_se};

fn opts() -> EngineOptions {
    EngineOptions::default().with_memory(1 << 28)
}

// Euler scheme for dY = α(Y) dt + dB, returning Y_T (None if it leaves (lo, hi))
fn euler<R: Rng>(drift: impl Fn(f64) -> f64, y: f64, t: f64, dt: f64, lo: f64, hi: f64, rng: &mut R) -> Option<f64> {
    let n = (t / dt).round() as usize;
    let sd = dt.sqrt();
    let mut x = y;
    for _ in 0..n {
        let e: f64 = rng.sample(StandardNormal);
        x += drift(x) * dt + sd * e;
        if !(x > lo && x < hi) {
            return None;
        }
    }
    Some(x)
}

#[test]
fn unbiased_brownian_endpoint_is_normal() {
    let s = EndpointSampler::brownian(Arc::new(ZeroDrift::new()), 0.3, 0.5, None).unwrap();
    let mut rng = stream(11, 0);
    let xs: Vec<f64> = (0..100_000).map(|_| s.sample(&mut rng)).collect();
    let (m, se) = mean_se(&xs);
    assert!((m - 0.3).abs() < 4.0 * se);
    let n = Normal::new(0.3, 0.5f64.sqrt()).unwrap();
    let d = ks_statistic(xs, |x| n.cdf(x));
    assert!(ks_p_value(d, 1e5) > 1e-3, "D={d}");
}

#[test]
fn unbiased_bessel_endpoint_follows_the_transition_density() {
    // ρ = 0, ν = ½: the target is the Bessel(3) process itself, so Ã is constant
    let (y, t) = (0.7, 0.4);
    let s = EndpointSampler::bessel(Arc::new(WideSenseBessel::new(0.5, 0.0).unwrap()), y, t).unwrap();
    // radial part of the 3-dimensional heat kernel, integrated by Simpson's rule
    let g = |u: f64| (-(u * u) / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt();
    let dens = |z: f64| z / y * (g(z - y) - g(z + y));
    let cdf = |z: f64| {
        let n = 2000;
        let h = z / n as f64;
        let mut acc = dens(0.0) + dens(z);
        for i in 1..n {
            acc += dens(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };
    for z in [0.3, 0.7, 1.5] {
        assert!((s.cdf(z) - cdf(z)).abs() < 1e-8, "z={z}");
    }
    let mut rng = stream(12, 0);
    let xs: Vec<f64> = (0..20_000).map(|_| s.sample(&mut rng)).collect();
    let d = ks_statistic(xs, cdf);
    assert!(ks_p_value(d, 2e4) > 1e-3, "D={d}");
}

#[test]
fn growth_endpoint_matches_a_rejection_sampler() {
    let p = GrowthModelParams::new(1.0, 1.0, 3.0).unwrap();
    let m = GrowthModel::new(p, Candidate::bessel(4.0).unwrap(), GrowthBounds::Sharp).unwrap();
    let (y, t) = (1.0, 0.15);
    let s = EndpointSampler::bessel(Arc::new(m), y, t).unwrap();
    let shift = m.biased_antiderivative(y);
    let top = (1..=40_000).map(|i| m.biased_antiderivative(i as f64 * 5e-4) - shift).fold(f64::MIN, f64::max) + 1e-6;
    // Bessel(4) at time T is the norm of a 4-dimensional Gaussian
    let mut rng = stream(13, 0);
    let mut xs = Vec::new();
    while xs.len() < 20_000 {
        let v: [f64; 4] = std::array::from_fn(|k| {
            let e: f64 = rng.sample(StandardNormal);
            e * t.sqrt() + if k == 0 { y } else { 0.0 }
        });
        let u = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if rng.random::<f64>().ln() < m.biased_antiderivative(u) - shift - top {
            xs.push(u);
        }
    }
    let d = ks_statistic(xs, |u| s.cdf(u));
    assert!(ks_p_value(d, 2e4) > 1e-3, "D={d}");
}

#[test]
fn constant_phi_is_accepted_with_probability_exp_minus_ct() {
    let (c, t, n) = (0.8, 1.5, 100_000);
    let mut rng = stream(14, 0);
    let mut accepted = 0.0;
    for _ in 0..n {
        let marks = PoissonMarks::sample(2.0 * c, t, u64::MAX, &mut rng).unwrap();
        if thinning_event(&marks, &mut rng, |_, _| Ok(c)).unwrap().accepted {
            accepted += 1.0;
        }
    }
    let p = (-c * t).exp();
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((accepted / n as f64 - p).abs() < 3.0 * se);
}

#[test]
fn empty_marks_are_accepted() {
    let marks = PoissonMarks { rate_bound: 1.0, duration: 1.0, count: 0 };
    let mut rng = stream(1, 0);
    let t = thinning_event(&marks, &mut rng, |_, _| Ok(f64::INFINITY)).unwrap();
    assert!(t.accepted && t.evaluated == 0);
}

#[test]
fn marks_consume_two_per_point_plus_one() {
    let mut rng = stream(15, 0);
    for k in 0..200 {
        let before = rng.logical();
        let marks = PoissonMarks::sample(5.0, 1.0, u64::MAX, &mut rng).unwrap();
        let level = if k % 2 == 0 { 2.5 } else { 0.0 };
        let t = thinning_event(&marks, &mut rng, |_, _| Ok(level)).unwrap();
        assert_eq!(rng.logical() - before, 2 * marks.count + 1);
        assert!(t.evaluated <= marks.count);
    }
}

#[test]
fn mark_cap_is_a_resource_error() {
    let mut rng = stream(16, 0);
    let e = PoissonMarks::sample(1e6, 1.0, 10, &mut rng).unwrap_err();
    assert!(matches!(e, exactdiff_core::Error::ResourceCap(_)));
    assert!(PoissonMarks::sample(f64::INFINITY, 1.0, 10, &mut rng).is_err());
}

#[test]
fn zero_drift_accepts_every_candidate() {
    let m = ZeroDrift::new();
    let mut rng = stream(17, 0);
    for k in 0..1000 {
        let end = if k % 2 == 0 { Endpoint::Fixed(0.4) } else { Endpoint::Biased(Arc::new(EndpointSampler::brownian(Arc::new(m), 0.0, 1.0, None).unwrap())) };
        let s = run_ea1(&m, 0.0, 1.0, &end, &opts(), &mut rng).unwrap();
        assert_eq!(s.attempts(), 1);
        assert_eq!(s.points().first().unwrap(), &(0.0, 0.0));
    }
}

#[test]
fn sine_drift_endpoint_matches_euler() {
    let sim = Simulator::new(Arc::new(SineDrift), Algorithm::Ea1, 0.0, 1.0, None, false).unwrap();
    let n = 20_000;
    let exact: Vec<f64> = (0..n).map(|k| sim.sample(&mut stream(18, k)).unwrap().end_value()).collect();
    let mut rng = stream(19, 0);
    let approx: Vec<f64> = (0..n)
        .map(|_| euler(f64::sin, 0.0, 1.0, 1e-3, f64::NEG_INFINITY, f64::INFINITY, &mut rng).unwrap())
        .collect();
    let d = ks_two_sample(exact, approx);
    assert!(ks_p_value(d, effective_size(n as usize, n as usize)) > 1e-3, "D={d}");
}

#[test]
fn attempts_are_geometric_with_the_acceptance_rate() {
    let sim = Simulator::new(Arc::new(SineDrift), Algorithm::Ea1, 0.0, 2.0, None, false).unwrap();
    let n = 20_000;
    let attempts: Vec<u64> = (0..n).map(|k| sim.sample(&mut stream(20, k)).unwrap().attempts()).collect();
    let mean = attempts.iter().sum::<u64>() as f64 / n as f64;
    let p = 1.0 / mean;
    let top = 12;
    let mut obs = vec![0.0; top + 1];
    for &a in &attempts {
        obs[(a as usize - 1).min(top)] += 1.0;
    }
    let mut exp: Vec<f64> = (0..top).map(|k| n as f64 * p * (1.0 - p).powi(k as i32)).collect();
    exp.push(n as f64 * (1.0 - p).powi(top as i32));
    let (_, pv) = chi_square(&obs, &exp, 1).unwrap();
    assert!(pv > 0.01, "p={pv}");

    // 1/E[attempts] against E[exp(−∫φ)] over biased Brownian bridges on a fine grid
    let m = SineDrift;
    let ends = EndpointSampler::brownian(Arc::new(m), 0.0, 2.0, None).unwrap();
    let r: f64 = UnitDiffusion::<f64>::phi_upper_bound(&m).unwrap();
    let mut rng = stream(21, 0);
    let steps = 400;
    let h = 2.0 / steps as f64;
    let weights: Vec<f64> = (0..10_000)
        .map(|_| {
            let z = ends.sample(&mut rng);
            let mut w = vec![0.0; steps + 1];
            for i in 1..=steps {
                let e: f64 = rng.sample(StandardNormal);
                w[i] = w[i - 1] + h.sqrt() * e;
            }
            let mut integral = 0.0;
            for i in 0..=steps {
                let s = i as f64 * h;
                let x = w[i] - s / 2.0 * w[steps] + s / 2.0 * z;
                let f = phi(&m, x).unwrap();
                assert!((0.0..=r + 1e-12).contains(&f));
                integral += f * if i == 0 || i == steps { h / 2.0 } else { h };
            }
            (-integral).exp()
        })
        .collect();
    let (q, se) = mean_se(&weights);
    let p_se = p * (1.0 - p).sqrt() / (n as f64).sqrt();
    assert!((q - p).abs() < 3.0 * (se * se + p_se * p_se).sqrt() + 1e-3, "{q} vs {p}");
}

#[test]
fn positivity_keeps_paths_above_zero() {
    let m = ZeroDrift::on_interval(0.0, f64::INFINITY).unwrap();
    let mut rng = stream(22, 0);
    for _ in 0..500 {
        let mut s = run_ea2(&m, 0.2, 1.0, &Endpoint::Fixed(0.3), true, &opts(), &mut rng).unwrap();
        let Conditioning::Min(min) = *s.conditioning() else { panic!("EA2 records the minimum") };
        assert!(min.value > 0.0 && min.time > 0.0 && min.time < 1.0);
        let times: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        for (_, v) in s.fill_in(&times, &mut rng).unwrap() {
            assert!(v >= min.value);
        }
    }
    let free = Simulator::new(Arc::new(m), Algorithm::Ea2, 0.2, 1.0, None, true).unwrap();
    for k in 0..200 {
        assert!(free.sample(&mut stream(23, k)).unwrap().points().iter().all(|p| p.1 > 0.0));
    }
}

#[test]
fn bessel_target_with_bessel_candidate_always_accepts() {
    let sim = Simulator::new(Arc::new(WideSenseBessel::new(1.0, 0.0).unwrap()), Algorithm::BesselEa1, 1.0, 1.0, None, false)
        .unwrap();
    let times: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    for k in 0..2000 {
        let mut rng = stream(24, k);
        let mut s = sim.sample(&mut rng).unwrap();
        assert_eq!(s.attempts(), 1);
        assert_eq!(s.kind(), "bessel(4)");
        assert!(s.fill_in(&times, &mut rng).unwrap().iter().all(|p| p.1 > 0.0));
    }
}

#[test]
fn growth_bessel_fill_in_is_positive_and_consistent() {
    let p = GrowthModelParams::new(10.0, 1.0, 3.0).unwrap();
    let m = GrowthModel::new(p, Candidate::bessel(4.0).unwrap(), GrowthBounds::Sharp).unwrap();
    let sim = Simulator::new(Arc::new(m), Algorithm::BesselEa1, 0.5, 0.15, Some(1.0), false).unwrap();
    let mut rng = stream(25, 0);
    for _ in 0..200 {
        let mut s = sim.sample(&mut rng).unwrap();
        let known = s.points().to_vec();
        assert!(s.stats().skeleton_points <= s.stats().poisson_points);
        let times: Vec<f64> = known.iter().map(|p| p.0).collect();
        assert_eq!(s.fill_in(&times, &mut rng).unwrap(), known);
        let grid: Vec<f64> = (1..60).map(|i| i as f64 * 0.0025).collect();
        let first = s.fill_in(&grid, &mut rng).unwrap();
        assert!(first.iter().all(|p| p.1 > 0.0));
        assert_eq!(s.fill_in(&grid, &mut rng).unwrap(), first);
        assert!(s.fill_in(&[0.2], &mut rng).is_err());
    }
}

#[test]
fn two_stage_fill_in_matches_direct_fill_in() {
    let sim = Simulator::new(Arc::new(SineDrift), Algorithm::Ea1, 0.0, 1.0, Some(0.5), false).unwrap();
    let n = 20_000;
    let (mut direct, mut staged) = (Vec::new(), Vec::new());
    for k in 0..n {
        let mut rng = stream(26, k);
        let mut s = sim.sample(&mut rng).unwrap();
        let mut t = s.clone();
        direct.push(s.fill_in(&[0.3], &mut rng).unwrap()[0].1);
        t.fill_in(&[0.6], &mut rng).unwrap();
        staged.push(t.fill_in(&[0.3], &mut rng).unwrap()[0].1);
    }
    let d = ks_two_sample(direct, staged);
    assert!(ks_p_value(d, effective_size(n as usize, n as usize)) > 1e-3, "D={d}");
}

// density at T/2 of the bridge from y to z killed outside (0, 1), by its sine series
fn confined_midpoint_density(y: f64, z: f64, t: f64) -> impl Fn(f64) -> f64 {
    let kernel = move |s: f64, a: f64, b: f64| {
        (1..200)
            .map(|k| {
                let w = k as f64 * std::f64::consts::PI;
                2.0 * (w * a).sin() * (w * b).sin() * (-w * w * s / 2.0).exp()
            })
            .sum::<f64>()
    };
    move |x: f64| kernel(t / 2.0, y, x) * kernel(t / 2.0, x, z)
}

#[test]
fn layered_zero_drift_midpoint_matches_the_confined_bridge() {
    let (y, z, t) = (0.3, 0.6, 0.4);
    let m = ZeroDrift::on_interval(0.0, 1.0).unwrap();
    let scheme = LayerScheme::default();
    let mut xs = Vec::new();
    for k in 0..20_000 {
        let mut rng = stream(27, k);
        let mut s = run_ea3_two_boundary(&m, y, t, &Endpoint::Fixed(z), &scheme, &opts(), &mut rng).unwrap();
        assert!(matches!(s.conditioning(), Conditioning::Layer { .. }));
        xs.push(s.fill_in(&[t / 2.0], &mut rng).unwrap()[0].1);
    }
    let f = confined_midpoint_density(y, z, t);
    let n = 4000;
    let grid: Vec<f64> = (0..=n).map(|i| f(i as f64 / n as f64)).collect();
    let mut cum = vec![0.0; n + 1];
    for i in 1..=n {
        cum[i] = cum[i - 1] + 0.5 * (grid[i] + grid[i - 1]) / n as f64;
    }
    let total = cum[n];
    let cdf = |x: f64| {
        let p = (x.clamp(0.0, 1.0) * n as f64).min(n as f64 - 1e-9);
        let i = p.floor() as usize;
        (cum[i] + (p - i as f64) * (cum[i + 1] - cum[i])) / total
    };
    let d = ks_statistic(xs, cdf);
    assert!(ks_p_value(d, 2e4) > 1e-3, "D={d}");
}

#[test]
fn layered_jacobi_endpoint_matches_euler() {
    let c = 2.0;
    let m = JacobiDrift::new(c).unwrap();
    let (y, t) = (0.4, 0.05);
    let sim = Simulator::new(Arc::new(m), Algorithm::Ea3, y, t, None, false).unwrap();
    let n = 10_000;
    let exact: Vec<f64> = (0..n).map(|k| sim.sample(&mut stream(28, k)).unwrap().end_value()).collect();
    assert!(exact.iter().all(|&v| v > 0.0 && v < 1.0));
    let mut rng = stream(29, 0);
    let drift = |u: f64| c * (1.0 / u - 1.0 / (1.0 - u));
    let mut approx = Vec::new();
    while approx.len() < n as usize {
        if let Some(v) = euler(drift, y, t, 1e-5, 0.0, 1.0, &mut rng) {
            approx.push(v);
        }
    }
    let d = ks_two_sample(exact, approx);
    assert!(ks_p_value(d, effective_size(n as usize, n as usize)) > 1e-3, "D={d}");
}

#[test]
fn drivers_reject_unsuitable_models() {
    let mut rng = stream(30, 0);
    let o = opts();
    let jac = JacobiDrift::new(2.0).unwrap();
    assert!(run_ea1(&jac, 0.5, 1.0, &Endpoint::Fixed(0.5), &o, &mut rng).is_err());
    let wsb = WideSenseBessel::new(1.0, 0.0).unwrap();
    assert!(run_ea1(&wsb, 0.5, 1.0, &Endpoint::Fixed(0.5), &o, &mut rng).is_err());
    assert!(run_ea2(&ZeroDrift::new(), 0.5, 1.0, &Endpoint::Fixed(0.5), true, &o, &mut rng).is_err());
    assert!(run_ea3_two_boundary(&SineDrift, 0.0, 1.0, &Endpoint::Fixed(0.5), &LayerScheme::default(), &o, &mut rng).is_err());
    assert!(Simulator::new(Arc::new(wsb), Algorithm::BesselEa1, 0.0, 1.0, Some(1.0), false).unwrap().sample(&mut rng).is_err());
    assert!(BridgeSpec::new(0.0, 0.0, 0.0).is_err());
}

#[test]
fn skeleton_json_round_trips_through_serde() {
    let sim = Simulator::new(Arc::new(SineDrift), Algorithm::Ea1, 0.0, 1.0, Some(0.25), false).unwrap();
    let s = sim.sample(&mut stream(31, 0)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
    let ts: Vec<f64> = v["t"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let ys: Vec<f64> = v["y"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let pts: Vec<(f64, f64)> = ts.into_iter().zip(ys).collect();
    assert_eq!(pts, s.points());
    assert_eq!(v["attempts"].as_u64().unwrap(), s.attempts());
    assert_eq!(v["conditioning"]["type"], "none");
    let c: Conditioning = serde_json::from_value(v["conditioning"].clone()).unwrap();
    assert_eq!(&c, s.conditioning());
    assert!(pts.windows(2).all(|w| w[0].0 < w[1].0));
}
