use rand::Rng;

use crate::tensor::{DiffTensor, ReduceKind, Result, Scalar, TensorError};

use super::conv::{conv3d, Conv3dParams};
use super::temporal::temporal_shift;

/// Single-output 1×1×1 convolution producing the attention logits.
#[derive(Debug, Clone)]
pub struct AttentionParams<T: Scalar> {
    /// `[1, C, 1, 1, 1]`
    pub weight: DiffTensor<T>,
    /// `[1]`
    pub bias: DiffTensor<T>,
}

impl<T: Scalar> AttentionParams<T> {
    pub fn init<R: Rng>(channels: usize, rng: &mut R) -> Result<Self> {
        let bound = 1.0 / (channels as f64).sqrt();
        let w = (0..channels).map(|_| T::of(rng.random_range(-bound..bound))).collect();
        Ok(AttentionParams {
            weight: DiffTensor::parameter(w, vec![1, channels, 1, 1, 1])?,
            bias: DiffTensor::parameter(vec![T::zero()], vec![1])?,
        })
    }

    pub fn channels(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn param_count(&self) -> usize {
        self.weight.numel() + self.bias.numel()
    }
}

/// Soft spatial mask `H·W·σ(w_a·x + b_a) / (2‖σ(w_a·x + b_a)‖₁)`, with the
/// L1 norm taken per frame over the spatial plane. Shape `[N, 1, T, H, W]`.
pub fn attention_weights<T: Scalar>(x: &DiffTensor<T>, a: &AttentionParams<T>) -> Result<DiffTensor<T>> {
    let &[_, c, _, h, w] = x.dims() else {
        return Err(TensorError::InvalidArgument {
            op: "attention_mask",
            reason: format!("expected [N, C, T, H, W], got {:?}", x.dims()),
        });
    };
    if a.channels() != c {
        return Err(TensorError::ShapeMismatch {
            op: "attention_mask",
            lhs: x.dims().to_vec(),
            rhs: a.weight.dims().to_vec(),
        });
    }
    let logits = conv3d(x, &a.weight, Some(&a.bias), (1, 1, 1), (0, 0, 0))?;
    let gate = logits.sigmoid()?;
    let norm = gate.reduce(ReduceKind::L1Norm, &[3, 4], true)?;
    gate.div(&norm)?.mul_scalar(T::of((h * w) as f64 / 2.0))
}

/// `(w_c·ts(x) + b_c) ⊙ mask(x)`: the shifted convolution branch gated by
/// [`attention_weights`], broadcast over channels.
pub fn attention_mask<T: Scalar>(
    x: &DiffTensor<T>,
    a: &AttentionParams<T>,
    c: &Conv3dParams<T>,
) -> Result<DiffTensor<T>> {
    if c.in_channels() != x.dims().get(1).copied().unwrap_or(0) {
        return Err(TensorError::ShapeMismatch {
            op: "attention_mask",
            lhs: x.dims().to_vec(),
            rhs: c.weight.dims().to_vec(),
        });
    }
    let mask = attention_weights(x, a)?;
    let branch = c.forward(&temporal_shift(x)?)?;
    branch.mul(&mask)
}
