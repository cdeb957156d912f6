//! Statistical checks on the trace samplers against independent oracles:
//! closed-form Poisson moments, Simpson-rule quadrature of the rate, and a
//! Kolmogorov-Smirnov test on time-rescaled arrivals. All seeds are fixed.

use cachefield::popularity::{
    sample_trace, GaussianContent, PopularityVector, RateModel, ShotNoiseContent,
};
use cachefield::state_space::ContentId;

/// Simpson-rule quadrature, the oracle for expected request counts.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels * 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

#[test]
fn static_model_counts_match_homogeneous_poisson_mean() {
    let rates = [0.35, 0.65];
    let model = RateModel::Static(PopularityVector::new(rates.to_vec()).unwrap());
    let horizon = 80.0;
    let seeds = 1000;
    let mut totals = [0u64; 2];
    for seed in 0..seeds {
        for &(_, c) in sample_trace(&model, horizon, seed).unwrap().requests() {
            totals[c.0] += 1;
        }
    }
    for l in 0..2 {
        let expect = rates[l] * horizon;
        let mean = totals[l] as f64 / seeds as f64;
        // Poisson variance equals the mean
        let sigma = (expect / seeds as f64).sqrt();
        assert!(
            (mean - expect).abs() <= 3.0 * sigma,
            "content {l}: mean {mean} vs {expect} (3 sigma = {})",
            3.0 * sigma
        );
    }
}

#[test]
fn shot_noise_lifetime_counts_match_amplitude() {
    // with the horizon far beyond the decay scale the lifetime count is A
    let amplitude = 40.0;
    let model = RateModel::ShotNoise {
        contents: vec![
            ShotNoiseContent {
                amplitude,
                decay: 0.05,
                onset: 10.0,
            },
            ShotNoiseContent {
                amplitude: 5.0,
                decay: 0.05,
                onset: 0.0,
            },
        ],
    };
    let horizon = 10.0 + 60.0 / 0.05;
    let seeds = 1000;
    let mut total = 0u64;
    for seed in 0..seeds {
        total += sample_trace(&model, horizon, seed)
            .unwrap()
            .requests()
            .iter()
            .filter(|&&(_, c)| c == ContentId(0))
            .count() as u64;
    }
    let mean = total as f64 / seeds as f64;
    let sigma = (amplitude / seeds as f64).sqrt();
    assert!(
        (mean - amplitude).abs() <= 3.0 * sigma,
        "mean {mean} vs {amplitude}"
    );
}

#[test]
fn gaussian_thinning_matches_quadrature_in_time_bins() {
    let amplitude = 30.0;
    let sigma = 50.0;
    let peak = 200.0;
    let model = RateModel::GaussianPulse {
        contents: vec![GaussianContent { amplitude, peak }],
        sigma,
    };
    let horizon = 400.0;
    let seeds = 1000;
    let n_bins = 8;
    let bin_width = horizon / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    for seed in 0..seeds {
        for &(t, _) in sample_trace(&model, horizon, seed).unwrap().requests() {
            counts[((t / bin_width) as usize).min(n_bins - 1)] += 1;
        }
    }
    let rate = |t: f64| {
        amplitude / ((2.0 * std::f64::consts::PI).sqrt() * sigma)
            * (-(t - peak) * (t - peak) / (2.0 * sigma * sigma)).exp()
    };
    for (b, &count) in counts.iter().enumerate() {
        let a = b as f64 * bin_width;
        let expect = simpson(rate, a, a + bin_width, 200);
        let mean = count as f64 / seeds as f64;
        let tol = 3.0 * (expect.max(1e-6) / seeds as f64).sqrt();
        assert!(
            (mean - expect).abs() <= tol,
            "bin {b}: mean {mean} vs {expect} (tol {tol})"
        );
    }
}

#[test]
fn shot_noise_rescaled_arrivals_pass_kolmogorov_smirnov() {
    let amplitude = 2000.0;
    let decay = 0.01;
    let onset = 25.0;
    let model = RateModel::ShotNoise {
        contents: vec![ShotNoiseContent {
            amplitude,
            decay,
            onset,
        }],
    };
    let horizon = onset + 3000.0;
    let trace = sample_trace(&model, horizon, 2024).unwrap();
    let times: Vec<f64> = trace.times().collect();
    assert!(times.len() > 500, "need a long arrival sequence");

    // time rescaling: s = Lambda(t) turns the arrivals into a unit-rate
    // Poisson process, so the increments are Exp(1) draws
    let integrated = |t: f64| amplitude * (1.0 - (-decay * (t - onset)).exp());
    let mut uniforms: Vec<f64> = Vec::with_capacity(times.len());
    let mut prev = 0.0;
    for &t in &times {
        let s = integrated(t);
        uniforms.push(1.0 - (-(s - prev)).exp());
        prev = s;
    }
    uniforms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = uniforms.len() as f64;
    let mut d = 0.0f64;
    for (i, &u) in uniforms.iter().enumerate() {
        let hi = (i + 1) as f64 / n - u;
        let lo = u - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    // asymptotic critical value at alpha = 0.01
    let critical = 1.62762 / n.sqrt();
    assert!(d <= critical, "KS statistic {d} exceeds {critical}");
}
