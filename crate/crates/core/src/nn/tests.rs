use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::tensor::gradcheck::check_gradients;
use crate::tensor::{DiffTensor, TensorError};

fn random(dims: &[usize], seed: u64) -> DiffTensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dims.iter().product();
    DiffTensor::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), dims.to_vec()).unwrap()
}

/// Sum of the output weighted by a fixed random tensor, so that gradients
/// are not trivially constant.
fn projected(y: &DiffTensor<f64>, seed: u64) -> crate::tensor::Result<DiffTensor<f64>> {
    y.mul(&random(y.dims(), seed))?.sum()
}

#[test]
fn pointwise_kernel_doubles_input() {
    let x = random(&[1, 1, 2, 3, 3], 1);
    let w = DiffTensor::new(vec![2.0], vec![1, 1, 1, 1, 1]).unwrap();
    let y = conv3d(&x, &w, None, (1, 1, 1), (0, 0, 0)).unwrap();
    for (a, b) in y.data().iter().zip(x.data()) {
        assert_eq!(*a, 2.0 * b);
    }
}

#[test]
fn ones_kernel_on_constant_input() {
    let x = DiffTensor::<f64>::full(0.5, vec![1, 1, 5, 5, 5]).unwrap();
    let w = DiffTensor::<f64>::full(1.0, vec![1, 1, 3, 3, 3]).unwrap();
    let y = conv3d(&x, &w, None, (1, 1, 1), (1, 1, 1)).unwrap();
    assert_eq!(y.dims(), &[1, 1, 5, 5, 5]);
    // interior voxel (2,2,2); faces see fewer taps
    assert!((y.data()[(2 * 5 + 2) * 5 + 2] - 13.5).abs() < 1e-12);
    assert!((y.data()[0] - 4.0).abs() < 1e-12);
}

#[test]
fn conv_rank4_and_stride() {
    let x = random(&[2, 4, 6, 6], 2);
    let w = random(&[3, 2, 3, 3, 3], 3);
    let y = conv3d(&x, &w, None, (1, 2, 2), (1, 1, 1)).unwrap();
    assert_eq!(y.dims(), &[3, 4, 3, 3]);
}

#[test]
fn conv_errors() {
    let x = random(&[1, 2, 4, 4, 4], 4);
    let w = random(&[3, 3, 3, 3, 3], 5);
    assert!(matches!(conv3d(&x, &w, None, (1, 1, 1), (1, 1, 1)), Err(TensorError::ShapeMismatch { .. })));
    let big = random(&[1, 2, 5, 5, 5], 6);
    assert!(conv3d(&x, &big, None, (1, 1, 1), (0, 0, 0)).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(Conv3dParams::<f64>::init(2, 3, (3, 3, 3), (3, 1, 1), &mut rng).is_err());
}

#[test]
fn conv_gradients() {
    let inputs = vec![random(&[2, 2, 3, 4, 4], 7), random(&[3, 2, 3, 3, 3], 8), random(&[3], 9)];
    let report =
        check_gradients(&inputs, 1e-5, |v| projected(&conv3d(&v[0], &v[1], Some(&v[2]), (1, 1, 1), (1, 1, 1))?, 10))
            .unwrap();
    assert!(report.max_rel_err < 1e-6, "{report:?}");

    let strided =
        check_gradients(&inputs[..2], 1e-5, |v| projected(&conv3d(&v[0], &v[1], None, (1, 2, 2), (0, 1, 1))?, 11))
            .unwrap();
    assert!(strided.max_rel_err < 1e-6, "{strided:?}");
}

#[test]
fn batchnorm_constant_channel_maps_to_beta() {
    let bn = BatchNorm3d::<f64>::new(2).unwrap();
    let x = DiffTensor::full(3.0, vec![2, 2, 2, 2, 2]).unwrap();
    let y = bn.forward(&x, Mode::Train).unwrap();
    assert!(y.data().iter().all(|v| v.abs() < 1e-12));
    // running stats moved 10% toward the batch mean
    assert!((bn.running_stats().mean[0] - 0.3).abs() < 1e-12);
}

#[test]
fn batchnorm_standardizes_each_channel() {
    let bn = BatchNorm3d::<f64>::new(3).unwrap();
    let x = random(&[2, 3, 4, 3, 3], 12).mul_scalar(5.0).unwrap().add_scalar(2.0).unwrap();
    let y = bn.forward(&x, Mode::Train).unwrap();
    let per_n = 4 * 3 * 3;
    for c in 0..3 {
        let vals: Vec<f64> =
            (0..2).flat_map(|n| y.data()[(n * 3 + c) * per_n..(n * 3 + c + 1) * per_n].to_vec()).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 1e-10);
        assert!((var - 1.0).abs() < 1e-3);
    }
}

#[test]
fn batchnorm_gradients_both_modes() {
    let bn = BatchNorm3d::<f64>::new(3).unwrap();
    let x = random(&[2, 3, 2, 2, 2], 13);
    let gamma = random(&[3], 14).add_scalar(1.5).unwrap();
    let beta = random(&[3], 15);
    for mode in [Mode::Train, Mode::Eval] {
        let report = check_gradients(&[x.clone(), gamma.clone(), beta.clone()], 1e-5, |v| {
            let y = batchnorm3d(&v[0], &v[1], &v[2], &bn.running, mode, BN_EPS, BN_MOMENTUM)?;
            projected(&y, 16)
        })
        .unwrap();
        assert!(report.max_rel_err < 1e-5, "{mode:?}: {report:?}");
    }
}

#[test]
fn eval_mode_uses_running_stats() {
    let bn = BatchNorm3d::<f64>::new(1).unwrap();
    bn.set_running_stats(RunningStats { mean: vec![1.0], var: vec![4.0] });
    let x = DiffTensor::full(3.0, vec![1, 1, 1, 1, 2]).unwrap();
    let y = bn.forward(&x, Mode::Eval).unwrap();
    let want = 2.0 / (4.0 + BN_EPS).sqrt();
    assert!((y.data()[0] - want).abs() < 1e-12);
}

#[test]
fn temporal_shift_definition_example() {
    let plane = |v: [f64; 3]| v.to_vec();
    let data: Vec<f64> = [plane([1., 2., 3.]), plane([4., 5., 6.]), plane([7., 8., 9.])].concat();
    let x = DiffTensor::new(data, vec![1, 3, 3, 1, 1]).unwrap();
    let y = temporal_shift(&x).unwrap();
    assert_eq!(y.data(), &[0., 1., 2., 5., 6., 0., 7., 8., 9.]);
}

#[test]
fn temporal_shift_constant_in_time() {
    let x = DiffTensor::<f64>::full(2.0, vec![1, 6, 4, 2, 2]).unwrap();
    let y = temporal_shift(&x).unwrap();
    let frame = |c: usize, t: usize| &y.data()[(c * 4 + t) * 4..(c * 4 + t + 1) * 4];
    for c in 0..6 {
        for t in 0..4 {
            let zeroed = (c < 2 && t == 0) || ((2..4).contains(&c) && t == 3);
            let want = if zeroed { 0.0 } else { 2.0 };
            assert!(frame(c, t).iter().all(|&v| v == want), "c={c} t={t}");
        }
    }
}

#[test]
fn temporal_shift_needs_two_frames() {
    let x = DiffTensor::<f64>::zeros(vec![1, 3, 1, 2, 2]).unwrap();
    assert!(temporal_shift(&x).is_err());
}

#[test]
fn shift_split_sends_remainder_to_static_block() {
    assert_eq!(shift_blocks(3), (1, 1));
    assert_eq!(shift_blocks(8), (2, 2));
    assert_eq!(shift_blocks(2), (0, 0));
}

#[test]
fn shift_pool_upsample_gradients() {
    let x = vec![random(&[2, 5, 4, 2, 4], 17)];
    for which in 0..3 {
        let report = check_gradients(&x, 1e-5, |v| {
            let y = match which {
                0 => temporal_shift(&v[0])?,
                1 => maxpool3d(&v[0], (2, 2, 2))?,
                _ => upsample_temporal(&v[0], 3)?,
            };
            projected(&y, 18)
        })
        .unwrap();
        assert!(report.max_rel_err < 1e-6, "case {which}: {report:?}");
    }
}

#[test]
fn maxpool_examples() {
    let x = DiffTensor::<f64>::new(vec![1., 2., 3., 4.], vec![1, 1, 1, 2, 2]).unwrap();
    assert_eq!(maxpool3d(&x, (1, 2, 2)).unwrap().data(), &[4.0]);
    let c = DiffTensor::<f64>::full(1.5, vec![1, 2, 4, 4, 4]).unwrap();
    let p = maxpool3d(&c, (2, 2, 2)).unwrap();
    assert_eq!(p.dims(), &[1, 2, 2, 2, 2]);
    assert!(p.data().iter().all(|&v| v == 1.5));
    assert!(maxpool3d(&c, (3, 2, 2)).is_err());
}

#[test]
fn maxpool_routes_tie_gradient_to_first() {
    let x = DiffTensor::<f64>::parameter(vec![1., 1., 1., 1.], vec![1, 1, 1, 2, 2]).unwrap();
    maxpool3d(&x, (1, 2, 2)).unwrap().sum().unwrap().backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![1., 0., 0., 0.]);
}

#[test]
fn dropout_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let x = random(&[1, 2, 3, 2, 2], 20);
    assert_eq!(dropout(&x, 0.0, Mode::Train, &mut rng).unwrap().data(), x.data());
    assert_eq!(dropout(&x, 0.7, Mode::Eval, &mut rng).unwrap().data(), x.data());
    assert!(dropout(&x, 1.0, Mode::Train, &mut rng).is_err());
    assert!(dropout(&x, -0.1, Mode::Train, &mut rng).is_err());
}

#[test]
fn dropout_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 100_000;
    let x = DiffTensor::<f64>::full(1.0, vec![1, 1, 1, 1, n]).unwrap();
    let y = dropout(&x, 0.5, Mode::Train, &mut rng).unwrap();
    let survivors = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
    assert!((0.49..=0.51).contains(&survivors), "{survivors}");
    let mean = y.data().iter().sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() < 0.02, "{mean}");
}

#[test]
fn upsample_examples() {
    let x = DiffTensor::<f64>::new(vec![1., 2.], vec![1, 1, 2, 1, 1]).unwrap();
    assert_eq!(upsample_temporal(&x, 1).unwrap().data(), x.data());
    assert_eq!(upsample_temporal(&x, 2).unwrap().data(), &[1., 1., 2., 2.]);
    assert!(upsample_temporal(&x, 0).is_err());
}

#[test]
fn upsample_gradient_sums_copies() {
    let x = DiffTensor::<f64>::parameter(vec![1., 2.], vec![1, 1, 2, 1, 1]).unwrap();
    let w = DiffTensor::new(vec![1., 10., 100., 1000.], vec![1, 1, 4, 1, 1]).unwrap();
    upsample_temporal(&x, 2).unwrap().mul(&w).unwrap().sum().unwrap().backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![11., 1100.]);
}

fn attention_fixture(c: usize, seed: u64) -> (AttentionParams<f64>, Conv3dParams<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = AttentionParams::init(c, &mut rng).unwrap();
    let conv = Conv3dParams::init(c, c, (1, 3, 3), (0, 1, 1), &mut rng).unwrap();
    (a, conv)
}

#[test]
fn uniform_input_gives_half_mask() {
    let (a, _) = attention_fixture(4, 22);
    let x = DiffTensor::<f64>::full(0.3, vec![1, 4, 3, 4, 5]).unwrap();
    let m = attention_weights(&x, &a).unwrap();
    assert!(m.data().iter().all(|v| (v - 0.5).abs() < 1e-12));
}

#[test]
fn mask_sums_to_half_area_per_frame() {
    let (a, _) = attention_fixture(3, 23);
    let x = random(&[2, 3, 4, 5, 6], 24).mul_scalar(4.0).unwrap();
    let m = attention_weights(&x, &a).unwrap();
    for frame in m.data().chunks(30) {
        assert!((frame.iter().sum::<f64>() - 15.0).abs() < 1e-9);
    }
}

#[test]
fn attention_gradients() {
    let (a, c) = attention_fixture(3, 25);
    let inputs =
        vec![random(&[1, 3, 3, 4, 4], 26), a.weight.detach(), a.bias.detach(), c.weight.detach(), c.bias.detach()];
    let report = check_gradients(&inputs, 1e-5, |v| {
        let a = AttentionParams { weight: v[1].clone(), bias: v[2].clone() };
        let c = Conv3dParams::from_tensors(v[3].clone(), v[4].clone(), (1, 1, 1), (0, 1, 1))?;
        projected(&attention_mask(&v[0], &a, &c)?, 27)
    })
    .unwrap();
    assert!(report.max_rel_err < 1e-6, "{report:?}");
}

#[test]
fn attention_channel_mismatch() {
    let (a, c) = attention_fixture(3, 28);
    let x = random(&[1, 4, 2, 2, 2], 29);
    assert!(attention_mask(&x, &a, &c).is_err());
}

proptest! {
    #[test]
    fn shift_preserves_shape_and_inverts_on_interior(c in 1usize..7, t in 3usize..6, seed in any::<u64>()) {
        let x = random(&[1, c, t, 2, 2], seed);
        let y = temporal_shift(&x).unwrap();
        prop_assert_eq!(y.dims(), x.dims());
        // the adjoint shift undoes the forward one on frames 1..t-1
        let x_param = x.to_parameter();
        let y2 = temporal_shift(&x_param).unwrap();
        y2.mul(&DiffTensor::new(y.to_vec(), y.dims().to_vec()).unwrap()).unwrap().sum().unwrap().backward().unwrap();
        let back = x_param.grad().unwrap();
        for ci in 0..c {
            for ti in 1..t - 1 {
                for k in 0..4 {
                    let i = (ci * t + ti) * 4 + k;
                    prop_assert!((back[i] - x.data()[i]).abs() < 1e-12);
                }
            }
        }
    }
}
