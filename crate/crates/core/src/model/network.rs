use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nn::{
    attention_mask, conv3d, dropout, maxpool3d, temporal_shift, upsample_temporal, AttentionParams, BatchNorm3d,
    Conv3dParams, Mode, Triple,
};
use crate::tensor::{DiffTensor, Scalar};

use super::config::{ArchConfig, UPSAMPLE_FACTOR};
use super::diff::{as_batch, make_diff_stack};
use super::ModelError;

/// Convolution followed by batch normalization and ReLU.
#[derive(Debug, Clone)]
pub struct Stem<T: Scalar> {
    pub conv: Conv3dParams<T>,
    pub bn: BatchNorm3d<T>,
}

impl<T: Scalar> Stem<T> {
    fn init<R: Rng>(cin: usize, cout: usize, kernel: Triple, padding: Triple, rng: &mut R) -> Result<Self, ModelError> {
        Ok(Stem { conv: Conv3dParams::init(cin, cout, kernel, padding, rng)?, bn: BatchNorm3d::new(cout)? })
    }

    pub fn forward(&self, x: &DiffTensor<T>, mode: Mode) -> Result<DiffTensor<T>, ModelError> {
        Ok(self.bn.forward(&self.conv.forward(x)?, mode)?.relu()?)
    }
}

#[derive(Debug, Clone)]
pub struct FusionStem<T: Scalar> {
    /// Raw frames, `(1,5,5)`.
    pub stem11: Stem<T>,
    /// Difference stack, `(1,5,5)`.
    pub stem12: Stem<T>,
    /// `(3,3,3)` over the raw branch.
    pub stem21: Stem<T>,
    /// `(3,3,3)` over the blended branch.
    pub stem22: Stem<T>,
}

#[derive(Debug, Clone)]
pub struct StasBlock<T: Scalar> {
    pub conv: Conv3dParams<T>,
    pub bn: BatchNorm3d<T>,
    pub attention: AttentionParams<T>,
    pub post_shift: Conv3dParams<T>,
    pub pool: Triple,
    pub dropout: f64,
    pub use_attention: bool,
}

impl<T: Scalar> StasBlock<T> {
    fn init<R: Rng>(cin: usize, cout: usize, pool: Triple, cfg: &ArchConfig, rng: &mut R) -> Result<Self, ModelError> {
        Ok(StasBlock {
            conv: Conv3dParams::init(cin, cout, (3, 3, 3), (1, 1, 1), rng)?,
            bn: BatchNorm3d::new(cout)?,
            attention: AttentionParams::init(cout, rng)?,
            post_shift: Conv3dParams::init(cout, cout, (1, 3, 3), (0, 1, 1), rng)?,
            pool,
            dropout: cfg.dropout,
            use_attention: cfg.attention,
        })
    }

    /// Temporal shift, convolution, BN, ReLU, attention, max pool, dropout.
    pub fn forward<R: Rng>(&self, x: &DiffTensor<T>, mode: Mode, rng: &mut R) -> Result<DiffTensor<T>, ModelError> {
        let z = self.bn.forward(&self.conv.forward(&temporal_shift(x)?)?, mode)?.relu()?;
        let z = if self.use_attention { attention_mask(&z, &self.attention, &self.post_shift)? } else { z };
        let pooled = maxpool3d(&z, self.pool)?;
        Ok(dropout(&pooled, self.dropout, mode, rng)?)
    }
}

#[derive(Debug, Clone)]
pub struct UdfHead<T: Scalar> {
    pub temporal_conv: Conv3dParams<T>,
    /// `[C, 1]`
    pub linear_weight: DiffTensor<T>,
    /// `[1]`
    pub linear_bias: DiffTensor<T>,
}

impl<T: Scalar> UdfHead<T> {
    fn init<R: Rng>(c: usize, rng: &mut R) -> Result<Self, ModelError> {
        let bound = 1.0 / (c as f64).sqrt();
        let w = (0..c).map(|_| T::of(rng.random_range(-bound..bound))).collect();
        Ok(UdfHead {
            temporal_conv: Conv3dParams::init(c, c, (3, 1, 1), (1, 0, 0), rng)?,
            linear_weight: DiffTensor::parameter(w, vec![c, 1])?,
            linear_bias: DiffTensor::parameter(vec![T::zero()], vec![1])?,
        })
    }

    /// `[N, C, T', h, w]` features to an `[N, 2T']` waveform.
    pub fn forward(&self, x: &DiffTensor<T>) -> Result<DiffTensor<T>, ModelError> {
        let up = upsample_temporal(x, UPSAMPLE_FACTOR)?;
        let y = self.temporal_conv.forward(&up)?;
        let &[n, c, t, _, _] = y.dims() else { unreachable!("conv3d output is rank 5") };
        let pooled = y.mean_axes(&[3, 4], true)?;
        // a 1×1×1 convolution is the per-frame linear map C → 1
        let w = self.linear_weight.reshape(vec![1, c, 1, 1, 1])?;
        let out = conv3d(&pooled, &w, Some(&self.linear_bias), (1, 1, 1), (0, 0, 0))?;
        Ok(out.reshape(vec![n, t])?)
    }
}

macro_rules! param_slots {
    ($m:expr $(, $mu:ident)?) => {{
        let m = $m;
        let mut out = Vec::new();
        macro_rules! conv {
            ($name:expr, $c:expr) => {
                out.push((concat!($name, ".weight"), & $($mu)? $c.weight));
                out.push((concat!($name, ".bias"), & $($mu)? $c.bias));
            };
        }
        macro_rules! bn {
            ($name:expr, $b:expr) => {
                out.push((concat!($name, ".gamma"), & $($mu)? $b.gamma));
                out.push((concat!($name, ".beta"), & $($mu)? $b.beta));
            };
        }
        macro_rules! stas {
            ($name:expr, $s:expr) => {
                conv!(concat!($name, ".conv"), $s.conv);
                bn!(concat!($name, ".bn"), $s.bn);
                out.push((concat!($name, ".attention.weight"), & $($mu)? $s.attention.weight));
                out.push((concat!($name, ".attention.bias"), & $($mu)? $s.attention.bias));
                conv!(concat!($name, ".post_shift"), $s.post_shift);
            };
        }
        conv!("fusion.stem11.conv", m.fusion.stem11.conv);
        bn!("fusion.stem11.bn", m.fusion.stem11.bn);
        conv!("fusion.stem12.conv", m.fusion.stem12.conv);
        bn!("fusion.stem12.bn", m.fusion.stem12.bn);
        conv!("fusion.stem21.conv", m.fusion.stem21.conv);
        bn!("fusion.stem21.bn", m.fusion.stem21.bn);
        conv!("fusion.stem22.conv", m.fusion.stem22.conv);
        bn!("fusion.stem22.bn", m.fusion.stem22.bn);
        stas!("stas1", m.stas1);
        stas!("stas2", m.stas2);
        conv!("head.temporal_conv", m.head.temporal_conv);
        out.push(("head.linear.weight", & $($mu)? m.head.linear_weight));
        out.push(("head.linear.bias", & $($mu)? m.head.linear_bias));
        out
    }};
}

/// The complete network together with the configuration that shaped it.
#[derive(Debug, Clone)]
pub struct Model<T: Scalar> {
    pub config: ArchConfig,
    pub fusion: FusionStem<T>,
    pub stas1: StasBlock<T>,
    pub stas2: StasBlock<T>,
    pub head: UdfHead<T>,
}

impl<T: Scalar> Model<T> {
    /// Fresh weights drawn from a ChaCha8 stream seeded with `seed`.
    pub fn new(config: ArchConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c0, c1, c2) = (config.stem_channels, config.stage1_channels, config.stage2_channels);
        let fusion = FusionStem {
            stem11: Stem::init(3, c0, (1, 5, 5), (0, 2, 2), &mut rng)?,
            stem12: Stem::init(12, c0, (1, 5, 5), (0, 2, 2), &mut rng)?,
            stem21: Stem::init(c0, c0, (3, 3, 3), (1, 1, 1), &mut rng)?,
            stem22: Stem::init(c0, c0, (3, 3, 3), (1, 1, 1), &mut rng)?,
        };
        let stas1 = StasBlock::init(c0, c1, (1, 2, 2), &config, &mut rng)?;
        let stas2 = StasBlock::init(c1, c2, (2, 2, 2), &config, &mut rng)?;
        let head = UdfHead::init(c2, &mut rng)?;
        Ok(Model { config, fusion, stas1, stas2, head })
    }

    /// Learnable tensors in a fixed order, with dotted names.
    pub fn parameters(&self) -> Vec<(&'static str, &DiffTensor<T>)> {
        param_slots!(self)
    }

    pub fn parameters_mut(&mut self) -> Vec<(&'static str, &mut DiffTensor<T>)> {
        param_slots!(self, mut)
    }

    /// Batch-norm layers whose running statistics are part of the state.
    pub fn batch_norms(&self) -> Vec<(&'static str, &BatchNorm3d<T>)> {
        vec![
            ("fusion.stem11.bn", &self.fusion.stem11.bn),
            ("fusion.stem12.bn", &self.fusion.stem12.bn),
            ("fusion.stem21.bn", &self.fusion.stem21.bn),
            ("fusion.stem22.bn", &self.fusion.stem22.bn),
            ("stas1.bn", &self.stas1.bn),
            ("stas2.bn", &self.stas2.bn),
        ]
    }

    /// Runtime tally of learnable scalars.
    pub fn param_count(&self) -> usize {
        self.parameters().iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn zero_grad(&self) {
        for (_, p) in self.parameters() {
            p.zero_grad();
        }
    }

    fn check_clip(&self, clip: &DiffTensor<T>) -> Result<DiffTensor<T>, ModelError> {
        let batch = as_batch(clip)?;
        let c = &self.config;
        match *batch.dims() {
            [_, 3, t, h, w] if (t, h, w) == (c.frames, c.height, c.width) => Ok(batch),
            _ => Err(ModelError::Shape(format!(
                "clip {:?} does not match configured [N, 3, {}, {}, {}]",
                clip.dims(),
                c.frames,
                c.height,
                c.width
            ))),
        }
    }

    /// `(I_raw, I_diff)`: the first-level stems over the frames and the
    /// difference stack.
    pub fn stem_branches(
        &self,
        clip: &DiffTensor<T>,
        mode: Mode,
    ) -> Result<(DiffTensor<T>, DiffTensor<T>), ModelError> {
        let clip = self.check_clip(clip)?;
        let raw = self.fusion.stem11.forward(&clip, mode)?;
        let diff = make_diff_stack(&clip, self.config.diff_mode)?;
        Ok((raw, self.fusion.stem12.forward(&diff, mode)?))
    }

    /// `α·Stem21(I_raw) + β·Stem22(α·I_raw + β·I_diff)`. With `β = 0` the
    /// second branch contributes nothing and is skipped.
    pub fn fuse(
        &self,
        raw: &DiffTensor<T>,
        diff: Option<&DiffTensor<T>>,
        mode: Mode,
    ) -> Result<DiffTensor<T>, ModelError> {
        let (alpha, beta) = self.config.fusion_weights();
        let first = self.fusion.stem21.forward(raw, mode)?.mul_scalar(T::of(alpha))?;
        if beta == 0.0 {
            return Ok(first);
        }
        let diff = diff.ok_or_else(|| ModelError::Shape("differential branch required when beta_fuse ≠ 0".into()))?;
        let blend = raw.mul_scalar(T::of(alpha))?.add(&diff.mul_scalar(T::of(beta))?)?;
        let second = self.fusion.stem22.forward(&blend, mode)?;
        Ok(first.add(&second.mul_scalar(T::of(beta))?)?)
    }

    /// Stem output `[N, C_stem, T, H, W]`.
    pub fn fusion_stem(&self, clip: &DiffTensor<T>, mode: Mode) -> Result<DiffTensor<T>, ModelError> {
        let (_, beta) = self.config.fusion_weights();
        if beta == 0.0 {
            let clip = self.check_clip(clip)?;
            let raw = self.fusion.stem11.forward(&clip, mode)?;
            return self.fuse(&raw, None, mode);
        }
        let (raw, diff) = self.stem_branches(clip, mode)?;
        self.fuse(&raw, Some(&diff), mode)
    }

    /// Both STAS stages and the head applied to a stem output.
    pub fn decode<R: Rng>(&self, stem: &DiffTensor<T>, mode: Mode, rng: &mut R) -> Result<DiffTensor<T>, ModelError> {
        let x = self.stas1.forward(stem, mode, rng)?;
        let x = self.stas2.forward(&x, mode, rng)?;
        self.head.forward(&x)
    }

    /// `[N, 3, T, H, W]` (or a single `[3, T, H, W]` clip) to `[N, T]`.
    pub fn forward<R: Rng>(&self, clip: &DiffTensor<T>, mode: Mode, rng: &mut R) -> Result<DiffTensor<T>, ModelError> {
        let stem = self.fusion_stem(clip, mode)?;
        self.decode(&stem, mode, rng)
    }

    /// Eval-mode forward; dropout is inactive so no randomness is consumed.
    pub fn predict(&self, clip: &DiffTensor<T>) -> Result<DiffTensor<T>, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        self.forward(clip, Mode::Eval, &mut rng)
    }
}
