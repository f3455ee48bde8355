use rand::Rng;

use crate::tensor::{DiffTensor, Result, Scalar, TensorError};

use super::Mode;

fn dims5(op: &'static str, x: &DiffTensor<impl Scalar>) -> Result<[usize; 5]> {
    match *x.dims() {
        [n, c, t, h, w] => Ok([n, c, t, h, w]),
        _ => Err(TensorError::InvalidArgument { op, reason: format!("expected [N, C, T, H, W], got {:?}", x.dims()) }),
    }
}

/// Channel split used by the temporal shift: `(forward, backward)` block sizes.
/// The static block takes the remaining `C − 2⌊C/3⌋` channels.
pub fn shift_blocks(channels: usize) -> (usize, usize) {
    (channels / 3, channels / 3)
}

fn shift_copy<T: Scalar>(src: &[T], dims: [usize; 5], dir: i8) -> Vec<T> {
    // dir = +1 applies out[t] = in[t-1] to block 0 and out[t] = in[t+1] to block 1;
    // dir = -1 applies the adjoint.
    let [n, c, t, h, w] = dims;
    let plane = h * w;
    let (fwd, bwd) = shift_blocks(c);
    let mut out = vec![T::zero(); src.len()];
    for ni in 0..n {
        for ci in 0..c {
            let base = (ni * c + ci) * t * plane;
            let lag: isize = if ci < fwd {
                1
            } else if ci < fwd + bwd {
                -1
            } else {
                0
            } * dir as isize;
            for ti in 0..t {
                let from = ti as isize - lag;
                if from < 0 || from >= t as isize {
                    continue;
                }
                let (d, s) = (base + ti * plane, base + from as usize * plane);
                out[d..d + plane].copy_from_slice(&src[s..s + plane]);
            }
        }
    }
    out
}

/// Shifts the first third of the channels forward in time and the second
/// third backward by one frame; vacated frames are zero.
pub fn temporal_shift<T: Scalar>(x: &DiffTensor<T>) -> Result<DiffTensor<T>> {
    let dims = dims5("temporal_shift", x)?;
    if dims[2] < 2 {
        return Err(TensorError::InvalidArgument {
            op: "temporal_shift",
            reason: format!("need at least 2 frames, got {}", dims[2]),
        });
    }
    DiffTensor::from_op(
        "temporal_shift",
        shift_copy(x.data(), dims, 1),
        x.shape().clone(),
        vec![x.clone()],
        Box::new(move |g, _| vec![Some(shift_copy(g, dims, -1))]),
    )
}

/// Nearest-neighbour repetition of every frame `factor` times.
pub fn upsample_temporal<T: Scalar>(x: &DiffTensor<T>, factor: usize) -> Result<DiffTensor<T>> {
    let [n, c, t, h, w] = dims5("upsample_temporal", x)?;
    if factor == 0 {
        return Err(TensorError::InvalidArgument {
            op: "upsample_temporal",
            reason: "factor must be at least 1".into(),
        });
    }
    let plane = h * w;
    let xd = x.data();
    let mut out = Vec::with_capacity(xd.len() * factor);
    for nc in 0..n * c {
        for ti in 0..t {
            let s = (nc * t + ti) * plane;
            for _ in 0..factor {
                out.extend_from_slice(&xd[s..s + plane]);
            }
        }
    }
    let shape = x.shape().with_dim(2, t * factor);
    DiffTensor::from_op(
        "upsample_temporal",
        out,
        shape,
        vec![x.clone()],
        Box::new(move |g, _| {
            let mut grad = vec![T::zero(); n * c * t * plane];
            for nc in 0..n * c {
                for ti in 0..t {
                    let d = (nc * t + ti) * plane;
                    for r in 0..factor {
                        let s = (nc * t * factor + ti * factor + r) * plane;
                        for (gd, &gv) in grad[d..d + plane].iter_mut().zip(&g[s..s + plane]) {
                            *gd = *gd + gv;
                        }
                    }
                }
            }
            vec![Some(grad)]
        }),
    )
}

/// Inverted dropout: survivors are scaled by `1/(1 − rate)`. Identity in eval mode.
pub fn dropout<T: Scalar, R: Rng>(x: &DiffTensor<T>, rate: f64, mode: Mode, rng: &mut R) -> Result<DiffTensor<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(TensorError::InvalidArgument { op: "dropout", reason: format!("rate {rate} outside [0, 1)") });
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok(x.clone());
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.numel()).map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep }).collect();
    let mask = DiffTensor::from_shape(mask, x.shape().clone())?;
    x.mul(&mask)
}
