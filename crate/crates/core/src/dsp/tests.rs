use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;

const FS: f64 = 30.0;

fn sine(f: f64, n: usize, amp: f64, phase: f64) -> Vec<f64> {
    (0..n).map(|i| amp * (2.0 * PI * f * i as f64 / FS + phase).sin()).collect()
}

fn filter() -> FilterSpec {
    FilterSpec::bandpass(BandConfig::FILTER, FS).unwrap()
}

#[test]
fn design_is_stable_and_unit_gain_at_centre() {
    let spec = filter();
    assert!(spec.section.is_stable());
    assert_eq!(spec.order, 2);
    // the prewarped centre maps back to the geometric mean of the edges
    let centre = (BandConfig::FILTER.f_lo * BandConfig::FILTER.f_hi).sqrt();
    let g = spec.section.magnitude(centre, FS);
    assert!((g - 1.0).abs() < 1e-3, "{g}");
    assert!(spec.section.magnitude(0.0, FS) < 1e-12);
}

#[test]
fn magnitude_matches_analog_prototype_under_warping() {
    let spec = filter();
    let warp = |f: f64| 2.0 * FS * (PI * f / FS).tan();
    let (wl, wh) = (warp(0.75), warp(2.5));
    for f in [0.3, 0.75, 1.2, 1.5, 2.5, 4.0, 9.0] {
        let w = warp(f);
        // |jBΩ / (ω0² − Ω² + jBΩ)|
        let num = (wh - wl) * w;
        let den = ((wl * wh - w * w).powi(2) + num * num).sqrt();
        let analog = num / den;
        assert!((spec.section.magnitude(f, FS) - analog).abs() < 1e-9, "f={f}");
    }
    // band edges sit at the half-power point
    assert!((spec.section.magnitude(0.75, FS) - 0.5f64.sqrt()).abs() < 1e-9);
}

#[test]
fn in_band_sinusoid_passes() {
    let x = sine(1.5, 512, 1.0, 0.3);
    let y = butterworth_bandpass(&x, &filter()).unwrap();
    assert_eq!(y.len(), x.len());
    let trim = &y[64..448];
    let peak = trim.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(peak >= 0.9, "{peak}");
}

#[test]
fn dc_and_zero_are_removed() {
    let y = butterworth_bandpass(&[5.0; 512], &filter()).unwrap();
    let worst = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst < 0.01 * 5.0, "{worst}");
    assert!(butterworth_bandpass(&[0.0; 64], &filter()).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn invalid_filter_inputs() {
    assert!(FilterSpec::bandpass(BandConfig { f_lo: 2.0, f_hi: 1.0 }, FS).is_err());
    assert!(FilterSpec::bandpass(BandConfig { f_lo: 1.0, f_hi: 16.0 }, FS).is_err());
    assert!(filtfilt(&filter().section, &[1.0; 9]).is_err());
}

#[test]
fn lfilter_impulse_response_follows_recursion() {
    let s = filter().section;
    let mut x = vec![0.0; 20];
    x[0] = 1.0;
    let y = lfilter(&s, &x, [0.0, 0.0]);
    // y[n] = Σ b_k x[n−k] − a1 y[n−1] − a2 y[n−2]
    let mut want = vec![0.0; 20];
    for n in 0..20 {
        let xb: f64 = (0..3).filter(|&k| k <= n).map(|k| s.b[k] * x[n - k]).sum();
        let ya = if n >= 1 { s.a[0] * want[n - 1] } else { 0.0 } + if n >= 2 { s.a[1] * want[n - 2] } else { 0.0 };
        want[n] = xb - ya;
    }
    for (a, b) in y.iter().zip(&want) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn welch_peak_at_sinusoid_frequency() {
    let x = sine(1.5, 512, 1.0, 0.0);
    let psd = welch_psd(&x, FS, &WelchConfig::default()).unwrap();
    assert_eq!(psd.method, PsdMethod::Welch);
    assert_eq!(psd.freqs.len(), 1025);
    let bin = FS / 2048.0;
    let hr = estimate_hr(&psd, BandConfig::HEART_RATE).unwrap();
    assert!((hr / 60.0 - 1.5).abs() <= bin, "{hr}");
}

#[test]
fn welch_power_concentrates_near_the_tone() {
    let x = sine(1.5, 512, 1.0, 0.7);
    let psd = welch_psd(&x, FS, &WelchConfig::default()).unwrap();
    let band = BandConfig::HEART_RATE;
    // native resolution of a 128-sample segment
    let native = FS / 128.0;
    let (mut near, mut total) = (0.0, 0.0);
    for (f, p) in psd.freqs.iter().zip(&psd.power) {
        if band.contains(*f) {
            total += p;
            if (f - 1.5).abs() <= 2.0 * native {
                near += p;
            }
        }
    }
    assert!(near / total >= 0.8, "{}", near / total);
}

#[test]
fn white_noise_is_flatter_than_a_tone() {
    let ratio = |p: &[f64]| {
        let mut sorted = p.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted[sorted.len() - 1] / sorted[sorted.len() / 2]
    };
    let band_power = |x: &[f64]| -> Vec<f64> {
        let psd = welch_psd(x, FS, &WelchConfig::default()).unwrap();
        psd.freqs
            .iter()
            .zip(&psd.power)
            .filter(|(f, _)| BandConfig::HEART_RATE.contains(**f))
            .map(|(_, p)| *p)
            .collect()
    };
    let tone = ratio(&band_power(&sine(1.5, 512, 1.0, 0.0)));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let noise: Vec<f64> = (0..512).map(|_| rng.sample(StandardNormal)).collect();
        assert!(ratio(&band_power(&noise)) < tone);
    }
}

#[test]
fn welch_argument_errors() {
    assert!(welch_psd(&[0.0; 100], FS, &WelchConfig::default()).is_err());
    let bad = WelchConfig { overlap: 128, ..WelchConfig::default() };
    assert!(welch_psd(&[0.0; 512], FS, &bad).is_err());
}

#[test]
fn rectangular_periodogram_matches_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
    let psd = periodogram(&x, FS, 64, Window::Rectangular).unwrap();
    assert_eq!(psd.method, PsdMethod::Periodogram);
    for (k, &p) in psd.power.iter().enumerate() {
        let (mut re, mut im) = (0.0, 0.0);
        for (n, &v) in x.iter().enumerate() {
            let ph = 2.0 * PI * (k * n) as f64 / 64.0;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        let factor = if k == 0 || k == 32 { 1.0 } else { 2.0 };
        let want = factor * (re * re + im * im) / (FS * 40.0);
        assert!((p - want).abs() < 1e-12, "bin {k}");
    }
}

fn synthetic_psd(peaks: &[(f64, f64)]) -> PsdEstimate {
    let freqs: Vec<f64> = (0..=300).map(|i| i as f64 * 0.01).collect();
    let power =
        freqs.iter().map(|f| peaks.iter().find(|(pf, _)| (pf - f).abs() < 1e-9).map_or(0.01, |p| p.1)).collect();
    PsdEstimate { freqs, power, method: PsdMethod::Periodogram, config: WelchConfig::default() }
}

#[test]
fn hr_examples() {
    let band = BandConfig::HEART_RATE;
    assert!((estimate_hr(&synthetic_psd(&[(1.5, 1.0)]), band).unwrap() - 90.0).abs() < 1e-9);
    assert!((estimate_hr(&synthetic_psd(&[(1.0, 1.0)]), band).unwrap() - 60.0).abs() < 1e-9);
    assert!((estimate_hr(&synthetic_psd(&[(1.0, 1.0), (2.0, 1.2)]), band).unwrap() - 120.0).abs() < 1e-9);
    // ties keep the lower frequency
    assert!((estimate_hr(&synthetic_psd(&[(1.0, 1.0), (2.0, 1.0)]), band).unwrap() - 60.0).abs() < 1e-9);
    assert!(estimate_hr(&synthetic_psd(&[]), BandConfig { f_lo: 5.0, f_hi: 6.0 }).is_err());
}

#[test]
fn filtering_keeps_the_peak() {
    let x = sine(1.3, 512, 1.0, 0.2);
    let cfg = WelchConfig::default();
    let before = estimate_hr(&welch_psd(&x, FS, &cfg).unwrap(), BandConfig::HEART_RATE).unwrap();
    let y = butterworth_bandpass(&x, &filter()).unwrap();
    let after = estimate_hr(&welch_psd(&y, FS, &cfg).unwrap(), BandConfig::HEART_RATE).unwrap();
    assert!((before - after).abs() <= 60.0 * FS / 2048.0 + 1e-9, "{before} vs {after}");
}

#[test]
fn pearson_examples() {
    let x = [1.0, 2.0, 4.0, 3.0];
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    assert!((pearson_corr(&x, &x).unwrap() - 1.0).abs() < 1e-15);
    assert!((pearson_corr(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
    assert_eq!(pearson_corr(&x, &[2.0; 4]), None);
    assert_eq!(pearson_corr(&[1.0], &[1.0]), None);
    assert_eq!(pearson_corr(&x, &x[..3]), None);
}

#[test]
fn psd_dump_has_two_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("psd.txt");
    let psd = welch_psd(&sine(1.0, 256, 1.0, 0.0), FS, &WelchConfig::default()).unwrap();
    write_psd(&path, &psd).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), psd.freqs.len());
    assert!(rows.iter().all(|r| r.split_whitespace().count() == 2));
}

proptest! {
    #[test]
    fn filter_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..128).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..128).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = filter();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let fx = butterworth_bandpass(&x, &spec).unwrap();
        let fy = butterworth_bandpass(&y, &spec).unwrap();
        let fm = butterworth_bandpass(&mix, &spec).unwrap();
        for i in 0..128 {
            prop_assert!((fm[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn hr_is_scale_invariant(f in 0.8f64..2.8, scale in 0.01f64..100.0) {
        let x = sine(f, 512, 1.0, 0.4);
        let xs: Vec<f64> = x.iter().map(|v| v * scale).collect();
        let cfg = WelchConfig::default();
        let a = estimate_hr(&welch_psd(&x, FS, &cfg).unwrap(), BandConfig::HEART_RATE).unwrap();
        let b = estimate_hr(&welch_psd(&xs, FS, &cfg).unwrap(), BandConfig::HEART_RATE).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn correlation_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = pearson_corr(&x, &y).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
    }
}
