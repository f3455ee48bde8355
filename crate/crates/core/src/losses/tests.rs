use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dsp::BandConfig;
use crate::tensor::gradcheck::check_gradients;
use crate::tensor::DiffTensor;

const FS: f64 = 30.0;

fn vec1(v: Vec<f64>) -> DiffTensor<f64> {
    let n = v.len();
    DiffTensor::new(v, vec![n]).unwrap()
}

fn sine_bpm(bpm: f64, n: usize, phase: f64) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * bpm / 60.0 * i as f64 / FS + phase).sin()).collect()
}

fn random(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn basis(len: usize) -> PsdBasis<f64> {
    PsdBasis::new(len, FS, BandConfig::HEART_RATE, HrGrid::default(), PmfNorm::Sum).unwrap()
}

#[test]
fn pearson_identities() {
    let x = vec1(random(50, 1));
    assert!(neg_pearson(&x, &x).unwrap().item().abs() < 1e-12);
    assert!((neg_pearson(&x.neg().unwrap(), &x).unwrap().item() - 2.0).abs() < 1e-12);
}

#[test]
fn pearson_matches_direct_formula() {
    let (a, b) = (random(64, 2), random(64, 3));
    let n = 64.0;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    let want = 1.0 - cov / (va * vb).sqrt();
    assert!((neg_pearson(&vec1(a), &vec1(b)).unwrap().item() - want).abs() < 1e-12);
}

#[test]
fn constant_prediction_gives_unit_loss_without_gradient() {
    let before = degenerate_pearson_count();
    let pred = DiffTensor::<f64>::parameter(vec![0.5; 20], vec![20]).unwrap();
    let loss = neg_pearson(&pred, &vec1(random(20, 4))).unwrap();
    assert_eq!(loss.item(), 1.0);
    loss.backward().unwrap();
    assert!(pred.grad().unwrap().iter().all(|&g| g == 0.0));
    assert!(degenerate_pearson_count() > before);
}

#[test]
fn pearson_rejects_bad_lengths() {
    assert!(neg_pearson(&vec1(vec![1.0]), &vec1(vec![1.0])).is_err());
    assert!(neg_pearson(&vec1(random(4, 5)), &vec1(random(5, 6))).is_err());
}

#[test]
fn pearson_gradient() {
    let gt = vec1(random(32, 7));
    let report = check_gradients(&[vec1(random(32, 8))], 1e-5, |v| {
        neg_pearson(&v[0], &gt).map_err(|e| match e {
            LossError::Tensor(t) => t,
            other => panic!("{other}"),
        })
    })
    .unwrap();
    assert!(report.max_rel_err < 1e-6, "{report:?}");
}

#[test]
fn pmf_mode_of_pure_tone() {
    let d = psd_distribution(&sine_bpm(90.0, 512, 0.0), FS, BandConfig::HEART_RATE, HrGrid::default()).unwrap();
    assert!((d.mu - 90.0).abs() <= 1.0, "{}", d.mu);
    assert!((d.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(d.pmf.len(), 141);
}

#[test]
fn pmf_mode_of_dominant_component() {
    let x: Vec<f64> =
        sine_bpm(60.0, 512, 0.0).iter().zip(sine_bpm(120.0, 512, 0.0)).map(|(a, b)| a + 0.3 * b).collect();
    let d = psd_distribution(&x, FS, BandConfig::HEART_RATE, HrGrid::default()).unwrap();
    assert!((d.mu - 60.0).abs() <= 1.0, "{}", d.mu);
}

#[test]
fn zero_signal_maps_to_uniform() {
    let d = psd_distribution(&[0.0; 64], FS, BandConfig::HEART_RATE, HrGrid::default()).unwrap();
    assert!(d.pmf.iter().all(|&p| (p - 1.0 / 141.0).abs() < 1e-15));
}

#[test]
fn pmf_is_scale_invariant() {
    let b = basis(128);
    let x = random(128, 9);
    let p = b.pmf(&vec1(x.clone())).unwrap();
    let q = b.pmf(&vec1(x.iter().map(|v| 7.5 * v).collect())).unwrap();
    for (a, c) in p.data().iter().zip(q.data()) {
        assert!((a - c).abs() < 1e-12);
    }
}

#[test]
fn pmf_excludes_out_of_band_bins() {
    let band = BandConfig::from_bpm(60.0, 100.0);
    let b = PsdBasis::<f64>::new(128, FS, band, HrGrid::default(), PmfNorm::Sum).unwrap();
    let p = b.pmf(&vec1(random(128, 10))).unwrap();
    for (i, &v) in p.data().iter().enumerate() {
        let bpm = 40.0 + i as f64;
        assert_eq!(v == 0.0, !(60.0..=100.0).contains(&bpm), "bpm {bpm}");
    }
    let empty = BandConfig::from_bpm(181.0, 190.0);
    assert!(PsdBasis::<f64>::new(128, FS, empty, HrGrid::default(), PmfNorm::Sum).is_err());
    assert!(PsdBasis::<f64>::new(15, FS, BandConfig::HEART_RATE, HrGrid::default(), PmfNorm::Sum).is_err());
}

#[test]
fn power_matches_direct_dtft_at_exact_bins() {
    // a grid point whose frequency lands exactly on a transform bin needs no interpolation
    let len = 64;
    let b = basis(len);
    let x = random(len, 11);
    let power = b.power(&vec1(x.clone())).unwrap();
    let mean = x.iter().sum::<f64>() / len as f64;
    for g in 0..141 {
        let f = (40.0 + g as f64) / 60.0;
        let r = f * b.nfft as f64 / FS;
        if (r - r.round()).abs() > 1e-9 {
            continue;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (n, v) in x.iter().enumerate() {
            let ph = 2.0 * PI * f * n as f64 / FS;
            re += (v - mean) * ph.cos();
            im -= (v - mean) * ph.sin();
        }
        assert!((power.data()[g] - (re * re + im * im)).abs() < 1e-9);
    }
}

#[test]
fn softmax_normalization_switch() {
    let b = PsdBasis::<f64>::new(64, FS, BandConfig::HEART_RATE, HrGrid::default(), PmfNorm::Softmax).unwrap();
    let p = b.pmf(&vec1(random(64, 12))).unwrap();
    assert!((p.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn pmf_gradient() {
    let b = basis(32);
    let w = vec1(random(141, 13));
    let report = check_gradients(&[vec1(random(32, 14))], 1e-5, |v| {
        b.pmf(&v[0])
            .map_err(|e| match e {
                LossError::Tensor(t) => t,
                other => panic!("{other}"),
            })?
            .mul(&w)?
            .sum()
    })
    .unwrap();
    assert!(report.max_rel_err < 1e-6, "{report:?}");
}

#[test]
fn matched_prediction_beats_shifted_one() {
    let b = basis(256);
    let gt = vec1(sine_bpm(80.0, 256, 0.0));
    let gt_pmf = b.distribution(&gt).unwrap().pmf;
    let same = freq_ce(&b.pmf(&gt).unwrap(), &gt_pmf).unwrap().item();
    let shifted = freq_ce(&b.pmf(&vec1(sine_bpm(81.0, 256, 0.0))).unwrap(), &gt_pmf).unwrap().item();
    let peak = gt_pmf[HrGrid::default().nearest(80.0)];
    assert!((same + peak.ln()).abs() < 1e-9);
    assert!(same < shifted, "{same} vs {shifted}");
}

#[test]
fn uniform_prediction_cross_entropy() {
    let uniform = vec1(vec![1.0 / 141.0; 141]);
    let ce = freq_ce(&uniform, &gaussian_pmf(75.0, 3.0, HrGrid::default()).unwrap().pmf).unwrap();
    assert!((ce.item() - 141f64.ln()).abs() < 1e-9);
    assert!((141f64.ln() - 4.9488).abs() < 1e-4);
}

#[test]
fn gaussian_pmf_shape() {
    let grid = HrGrid::default();
    let g = gaussian_pmf(110.0, 3.0, grid).unwrap();
    assert!((g.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let centre = grid.nearest(110.0);
    for k in 1..20 {
        assert!((g.pmf[centre - k] - g.pmf[centre + k]).abs() < 1e-15);
    }
    assert_eq!(gaussian_pmf(90.3, 3.0, grid).unwrap().argmax(), grid.nearest(90.3));
    let ratio = g.pmf[centre] / g.pmf[centre + 3];
    assert!((ratio - 0.5f64.exp()).abs() < 1e-6);
    assert!(gaussian_pmf(90.0, 0.0, grid).is_err());
    assert!(gaussian_pmf(90.0, -1.0, grid).is_err());
}

#[test]
fn gaussian_divergence_matches_closed_form() {
    let grid = HrGrid::default();
    assert!(hr_kl_gauss(90.0, 90.0, 3.0, grid).unwrap().abs() < 1e-12);
    let kl = hr_kl_gauss(90.0, 93.0, 3.0, grid).unwrap();
    assert!((kl - 0.5).abs() < 0.01, "{kl}");
    for dmu in 0..=10 {
        let kl = hr_kl_gauss(100.0, 100.0 + dmu as f64, 3.0, grid).unwrap();
        let closed = (dmu as f64).powi(2) / 18.0;
        assert!((kl - closed).abs() < 0.01, "Δμ={dmu}: {kl} vs {closed}");
    }
}

#[test]
fn divergence_of_a_distribution_with_itself() {
    let p = psd_distribution(&random(64, 15), FS, BandConfig::HEART_RATE, HrGrid::default()).unwrap();
    assert!(kl_divergence(&p.pmf, &p.pmf).abs() < 1e-12);
    let g = gaussian_pmf(72.0, 3.0, HrGrid::default()).unwrap();
    let kl = hr_kl_psd(72.0, &vec1(g.pmf.clone()), 3.0, HrGrid::default()).unwrap();
    assert!(kl.item().abs() < 1e-12);
}

#[test]
fn kl_modes_agree_on_identity_and_floor_zero_bins() {
    let b = basis(256);
    let x = vec1(sine_bpm(70.0, 256, 0.1));
    let mu = b.distribution(&x).unwrap().mu;
    let gg = hr_kl(mu, &x, &b, 3.0, KlMode::GaussGauss).unwrap();
    assert!(gg.item().abs() < 1e-12);
    // a pmf with zero bins is floored, never infinite
    let mut spike = vec![0.0; 141];
    spike[30] = 1.0;
    let kl = hr_kl_psd(100.0, &vec1(spike), 3.0, HrGrid::default()).unwrap().item();
    assert!(kl.is_finite() && kl > 20.0);
}

#[test]
fn schedule_values() {
    let s = LossSchedule::default();
    assert_eq!(beta_schedule(&s.at_epoch(1)).unwrap(), 1.0);
    let last = beta_schedule(&s.at_epoch(30)).unwrap();
    assert!((last - 1.5f64.powf(29.0 / 30.0)).abs() < 1e-12);
    assert!((last - 1.4799).abs() < 1e-4);
    let off = LossSchedule { lambda: 0.0, ..s };
    assert_eq!(beta_schedule(&off.at_epoch(17)).unwrap(), 0.0);
    let mut prev = 0.0;
    for e in 1..=30 {
        let b = beta_schedule(&s.at_epoch(e)).unwrap();
        assert!(b >= prev);
        prev = b;
    }
    assert!(beta_schedule(&s.at_epoch(0)).is_err());
    assert!(beta_schedule(&LossSchedule { theta: 0.0, ..s }).is_err());
}

fn context(len: usize) -> LossContext<f64> {
    LossContext::new(basis(len))
}

#[test]
fn overall_decomposition() {
    let ctx = context(128);
    let gt = vec1(sine_bpm(75.0, 128, 0.0));
    let pred = vec1(random(128, 16));
    let s = LossSchedule::default().at_epoch(12);
    let parts = overall_loss(&pred, &gt, 75.0, &s, &ctx).unwrap();
    let want = s.alpha_time * parts.l_time + parts.beta * (parts.l_ce + parts.l_hr);
    assert!((parts.total.item() - want).abs() < 1e-12);
    assert_eq!(parts.beta, beta_schedule(&s).unwrap());

    let off = LossSchedule { lambda: 0.0, ..s };
    let parts = overall_loss(&pred, &gt, 75.0, &off, &ctx).unwrap();
    assert!((parts.total.item() - parts.l_time).abs() < 1e-12);
}

#[test]
fn matched_prediction_leaves_spectral_residual() {
    let ctx = context(128);
    let gt = vec1(sine_bpm(75.0, 128, 0.0));
    let mu = ctx.basis.distribution(&gt).unwrap().mu;
    let parts = overall_loss(&gt, &gt, mu, &LossSchedule::default(), &ctx).unwrap();
    assert!(parts.l_time.abs() < 1e-12);
    assert!(hr_kl(mu, &gt, &ctx.basis, 3.0, KlMode::GaussGauss).unwrap().item().abs() < 1e-12);
    assert!(parts.l_ce > 0.0);
}

#[test]
fn overall_gradient() {
    let ctx = context(64);
    let gt = vec1(sine_bpm(100.0, 64, 0.3));
    let s = LossSchedule::default().at_epoch(5);
    let report = check_gradients(&[vec1(random(64, 17))], 1e-5, |v| {
        Ok(overall_loss(&v[0], &gt, 100.0, &s, &ctx)
            .map_err(|e| match e {
                LossError::Tensor(t) => t,
                other => panic!("{other}"),
            })?
            .total)
    })
    .unwrap();
    assert!(report.max_rel_err < 1e-4, "{report:?}");
}

#[test]
fn batch_loss_is_mean_of_rows() {
    let ctx = context(32);
    let rows = [random(32, 18), random(32, 19)];
    let pred = DiffTensor::new(rows.concat(), vec![2, 32]).unwrap();
    let gts = [vec1(sine_bpm(70.0, 32, 0.0)), vec1(sine_bpm(120.0, 32, 0.0))];
    let s = LossSchedule::default();
    let batch = batch_loss(&pred, &gts, &[70.0, 120.0], &s, &ctx).unwrap();
    let a = overall_loss(&vec1(rows[0].clone()), &gts[0], 70.0, &s, &ctx).unwrap();
    let b = overall_loss(&vec1(rows[1].clone()), &gts[1], 120.0, &s, &ctx).unwrap();
    assert!((batch.total.item() - 0.5 * (a.total.item() + b.total.item())).abs() < 1e-12);
    assert!((batch.l_ce - 0.5 * (a.l_ce + b.l_ce)).abs() < 1e-12);
    assert!(batch_loss(&pred, &gts[..1], &[70.0], &s, &ctx).is_err());
}

proptest! {
    #[test]
    fn pearson_affine_invariance(seed in any::<u64>(), a in 0.01f64..50.0, b in -10.0f64..10.0) {
        let x = random(40, seed);
        let gt = vec1(random(40, seed.wrapping_add(1)));
        let base = neg_pearson(&vec1(x.clone()), &gt).unwrap().item();
        let moved = neg_pearson(&vec1(x.iter().map(|v| a * v + b).collect()), &gt).unwrap().item();
        prop_assert!((base - moved).abs() < 1e-9);
        prop_assert!((0.0..=2.0).contains(&base));
    }

    #[test]
    fn schedule_monotone_for_growing_theta(theta in 1.0f64..4.0, total in 1usize..60) {
        let s = LossSchedule { theta, epoch_total: total, ..LossSchedule::default() };
        let mut prev = f64::NEG_INFINITY;
        for e in 1..=total {
            let b = beta_schedule(&s.at_epoch(e)).unwrap();
            prop_assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn psd_pmf_sums_to_one(seed in any::<u64>()) {
        let d = psd_distribution(&random(48, seed), FS, BandConfig::HEART_RATE, HrGrid::default()).unwrap();
        prop_assert!((d.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(d.pmf.iter().all(|&p| p >= 0.0));
    }
}
