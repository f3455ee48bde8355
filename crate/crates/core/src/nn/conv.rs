use rand::Rng;
use rayon::prelude::*;

use crate::tensor::{DiffTensor, Result, Scalar, Shape, TensorError};

pub type Triple = (usize, usize, usize);

/// Learnable 3D convolution: weight `[out, in, kt, kh, kw]`, bias `[out]`.
#[derive(Debug, Clone)]
pub struct Conv3dParams<T: Scalar> {
    pub weight: DiffTensor<T>,
    pub bias: DiffTensor<T>,
    pub stride: Triple,
    pub padding: Triple,
}

impl<T: Scalar> Conv3dParams<T> {
    /// Uniform init in `±1/√fan_in` for weight and bias.
    pub fn init<R: Rng>(
        in_channels: usize,
        out_channels: usize,
        kernel: Triple,
        padding: Triple,
        rng: &mut R,
    ) -> Result<Self> {
        check_padding(kernel, padding)?;
        let fan_in = in_channels * kernel.0 * kernel.1 * kernel.2;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut draw = |n: usize| -> Vec<T> { (0..n).map(|_| T::of(rng.random_range(-bound..bound))).collect() };
        let weight = draw(out_channels * fan_in);
        let bias = draw(out_channels);
        Ok(Conv3dParams {
            weight: DiffTensor::parameter(weight, vec![out_channels, in_channels, kernel.0, kernel.1, kernel.2])?,
            bias: DiffTensor::parameter(bias, vec![out_channels])?,
            stride: (1, 1, 1),
            padding,
        })
    }

    pub fn from_tensors(weight: DiffTensor<T>, bias: DiffTensor<T>, stride: Triple, padding: Triple) -> Result<Self> {
        let d = weight.dims();
        if d.len() != 5 || bias.dims() != [d[0]] {
            return Err(TensorError::ShapeMismatch { op: "conv3d_params", lhs: d.to_vec(), rhs: bias.dims().to_vec() });
        }
        check_padding((d[2], d[3], d[4]), padding)?;
        if stride.0 == 0 || stride.1 == 0 || stride.2 == 0 {
            return Err(TensorError::InvalidArgument { op: "conv3d_params", reason: "stride must be positive".into() });
        }
        Ok(Conv3dParams { weight, bias, stride, padding })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn kernel(&self) -> Triple {
        let d = self.weight.dims();
        (d[2], d[3], d[4])
    }

    pub fn param_count(&self) -> usize {
        self.weight.numel() + self.bias.numel()
    }

    pub fn forward(&self, x: &DiffTensor<T>) -> Result<DiffTensor<T>> {
        conv3d(x, &self.weight, Some(&self.bias), self.stride, self.padding)
    }
}

fn check_padding(kernel: Triple, padding: Triple) -> Result<()> {
    if padding.0 >= kernel.0 || padding.1 >= kernel.1 || padding.2 >= kernel.2 {
        return Err(TensorError::InvalidArgument {
            op: "conv3d",
            reason: format!("padding {padding:?} must be smaller than kernel {kernel:?}"),
        });
    }
    Ok(())
}

#[derive(Clone, Copy)]
struct Geometry {
    n: usize,
    c: usize,
    o: usize,
    // padded input extents
    tp: usize,
    hp: usize,
    wp: usize,
    k: Triple,
    s: Triple,
    p: Triple,
    // output extents
    ot: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn in_plane(&self) -> usize {
        self.tp * self.hp * self.wp
    }
    fn out_plane(&self) -> usize {
        self.ot * self.oh * self.ow
    }
    fn kernel_len(&self) -> usize {
        self.k.0 * self.k.1 * self.k.2
    }
}

fn pad_input<T: Scalar>(x: &[T], g: &Geometry, t: usize, h: usize, w: usize) -> Vec<T> {
    if g.p == (0, 0, 0) {
        return x.to_vec();
    }
    let mut out = vec![T::zero(); g.n * g.c * g.in_plane()];
    for nc in 0..g.n * g.c {
        for ti in 0..t {
            for hi in 0..h {
                let src = ((nc * t + ti) * h + hi) * w;
                let dst = ((nc * g.tp + ti + g.p.0) * g.hp + hi + g.p.1) * g.wp + g.p.2;
                out[dst..dst + w].copy_from_slice(&x[src..src + w]);
            }
        }
    }
    out
}

fn crop_grad<T: Scalar>(gp: &[T], g: &Geometry, t: usize, h: usize, w: usize) -> Vec<T> {
    if g.p == (0, 0, 0) {
        return gp.to_vec();
    }
    let mut out = vec![T::zero(); g.n * g.c * t * h * w];
    for nc in 0..g.n * g.c {
        for ti in 0..t {
            for hi in 0..h {
                let dst = ((nc * t + ti) * h + hi) * w;
                let src = ((nc * g.tp + ti + g.p.0) * g.hp + hi + g.p.1) * g.wp + g.p.2;
                out[dst..dst + w].copy_from_slice(&gp[src..src + w]);
            }
        }
    }
    out
}

#[inline]
fn axpy<T: Scalar>(dst: &mut [T], src: &[T], a: T) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + a * s;
    }
}

/// Dot product with eight interleaved partial sums, which lets the
/// compiler keep them in vector registers.
#[inline]
fn lane_dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    const LANES: usize = 8;
    let mut acc = [T::zero(); LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] = acc[l] + xa[l] * xb[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail = tail + x * y;
    }
    acc.iter().fold(tail, |s, &v| s + v)
}

/// 3D convolution of `x [N, C, T, H, W]` (or `[C, T, H, W]`) with zero padding.
pub fn conv3d<T: Scalar>(
    x: &DiffTensor<T>,
    weight: &DiffTensor<T>,
    bias: Option<&DiffTensor<T>>,
    stride: Triple,
    padding: Triple,
) -> Result<DiffTensor<T>> {
    if x.dims().len() == 4 {
        let d = x.dims();
        let batched = x.reshape(vec![1, d[0], d[1], d[2], d[3]])?;
        let y = conv3d(&batched, weight, bias, stride, padding)?;
        let yd = y.dims()[1..].to_vec();
        return y.reshape(yd);
    }
    let (&[n, c, t, h, w], &[o, wc, kt, kh, kw]) = (x.dims(), weight.dims()) else {
        return Err(TensorError::ShapeMismatch { op: "conv3d", lhs: x.dims().to_vec(), rhs: weight.dims().to_vec() });
    };
    if c != wc {
        return Err(TensorError::ShapeMismatch { op: "conv3d", lhs: x.dims().to_vec(), rhs: weight.dims().to_vec() });
    }
    if let Some(b) = bias {
        if b.dims() != [o] {
            return Err(TensorError::ShapeMismatch { op: "conv3d", lhs: vec![o], rhs: b.dims().to_vec() });
        }
    }
    let (tp, hp, wp) = (t + 2 * padding.0, h + 2 * padding.1, w + 2 * padding.2);
    if kt > tp || kh > hp || kw > wp {
        return Err(TensorError::InvalidArgument {
            op: "conv3d",
            reason: format!("kernel {:?} larger than padded input {:?}", (kt, kh, kw), (tp, hp, wp)),
        });
    }
    let g = Geometry {
        n,
        c,
        o,
        tp,
        hp,
        wp,
        k: (kt, kh, kw),
        s: stride,
        p: padding,
        ot: (tp - kt) / stride.0 + 1,
        oh: (hp - kh) / stride.1 + 1,
        ow: (wp - kw) / stride.2 + 1,
    };
    let xp = pad_input(x.data(), &g, t, h, w);
    let wd = weight.data();
    let bd: Vec<T> = bias.map_or_else(|| vec![T::zero(); o], |b| b.to_vec());

    let mut out = vec![T::zero(); n * o * g.out_plane()];
    out.par_chunks_mut(g.out_plane()).enumerate().for_each(|(no, plane)| {
        let (ni, oi) = (no / o, no % o);
        plane.fill(bd[oi]);
        for ci in 0..c {
            let xin = &xp[(ni * c + ci) * g.in_plane()..(ni * c + ci + 1) * g.in_plane()];
            let wk = &wd[(oi * c + ci) * g.kernel_len()..(oi * c + ci + 1) * g.kernel_len()];
            forward_plane(plane, xin, wk, &g);
        }
    });

    let mut parents = vec![x.clone(), weight.clone()];
    if let Some(b) = bias {
        parents.push(b.clone());
    }
    let has_bias = bias.is_some();
    let wt = weight.clone();
    let out_shape = Shape::new(vec![n, o, g.ot, g.oh, g.ow])?;
    DiffTensor::from_op(
        "conv3d",
        out,
        out_shape,
        parents,
        Box::new(move |gout, needs| {
            let gx = needs[0].then(|| {
                let gp = backward_input(gout, wt.data(), &g);
                crop_grad(&gp, &g, t, h, w)
            });
            let gw = needs[1].then(|| backward_weight(gout, &xp, &g));
            let mut grads = vec![gx, gw];
            if has_bias {
                grads.push(needs[2].then(|| {
                    let mut gb = vec![T::zero(); g.o];
                    for (no, plane) in gout.chunks(g.out_plane()).enumerate() {
                        let s = plane.iter().fold(0.0f64, |a, &v| a + v.as_f64());
                        gb[no % g.o] = gb[no % g.o] + T::of(s);
                    }
                    gb
                }));
            }
            grads
        }),
    )
}

/// `dst[i] += Σ_c taps[c]·x[i + c]`, with the tap count fixed at compile
/// time so the row loop vectorises.
#[inline]
fn row_taps_k<T: Scalar, const K: usize>(dst: &mut [T], x: &[T], taps: &[T]) {
    const B: usize = 8;
    let t: [T; K] = taps.try_into().expect("tap count");
    let n = dst.len();
    let x = &x[..n + K - 1];
    let blocks = n / B;
    for blk in 0..blocks {
        let d: &mut [T; B] = (&mut dst[blk * B..blk * B + B]).try_into().expect("block");
        let xb = &x[blk * B..blk * B + B + K - 1];
        let mut s = [T::zero(); B];
        for c in 0..K {
            let xs: &[T; B] = xb[c..c + B].try_into().expect("block");
            for l in 0..B {
                s[l] = s[l] + t[c] * xs[l];
            }
        }
        for l in 0..B {
            d[l] = d[l] + s[l];
        }
    }
    for i in blocks * B..n {
        let mut s = T::zero();
        for c in 0..K {
            s = s + t[c] * x[i + c];
        }
        dst[i] = dst[i] + s;
    }
}

#[inline]
fn row_taps<T: Scalar>(dst: &mut [T], x: &[T], taps: &[T]) {
    match taps.len() {
        1 => row_taps_k::<T, 1>(dst, x, taps),
        2 => row_taps_k::<T, 2>(dst, x, taps),
        3 => row_taps_k::<T, 3>(dst, x, taps),
        5 => row_taps_k::<T, 5>(dst, x, taps),
        _ => {
            for (c, &wv) in taps.iter().enumerate() {
                axpy(dst, &x[c..c + dst.len()], wv);
            }
        }
    }
}

/// Accumulates one (input channel → output channel) contribution.
///
/// Output rows are the outer loop so each destination row stays hot while
/// every kernel tap is applied to it.
fn forward_plane<T: Scalar>(plane: &mut [T], xin: &[T], wk: &[T], g: &Geometry) {
    let (kt, kh, kw) = g.k;
    for ot in 0..g.ot {
        for oh in 0..g.oh {
            let dst = &mut plane[(ot * g.oh + oh) * g.ow..(ot * g.oh + oh + 1) * g.ow];
            for a in 0..kt {
                let it = ot * g.s.0 + a;
                for b in 0..kh {
                    let ih = oh * g.s.1 + b;
                    let row = (it * g.hp + ih) * g.wp;
                    let taps = &wk[(a * kh + b) * kw..(a * kh + b + 1) * kw];
                    if g.s.2 == 1 {
                        row_taps(dst, &xin[row..row + g.wp], taps);
                    } else {
                        for (cidx, &wv) in taps.iter().enumerate() {
                            for (i, d) in dst.iter_mut().enumerate() {
                                *d = *d + wv * xin[row + cidx + i * g.s.2];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradient wrt the padded input.
fn backward_input<T: Scalar>(gout: &[T], wd: &[T], g: &Geometry) -> Vec<T> {
    let (kt, kh, kw) = g.k;
    let mut gp = vec![T::zero(); g.n * g.c * g.in_plane()];
    gp.par_chunks_mut(g.in_plane()).enumerate().for_each(|(nc, gin)| {
        let (ni, ci) = (nc / g.c, nc % g.c);
        let mut srcpad = vec![T::zero(); g.ow + 2 * (kw - 1)];
        let wflip: Vec<T> = (0..g.o)
            .flat_map(|oi| {
                let wk = &wd[(oi * g.c + ci) * g.kernel_len()..(oi * g.c + ci + 1) * g.kernel_len()];
                wk.chunks(kw).flat_map(|r| r.iter().rev().copied()).collect::<Vec<_>>()
            })
            .collect();
        for oi in 0..g.o {
            let go = &gout[(ni * g.o + oi) * g.out_plane()..(ni * g.o + oi + 1) * g.out_plane()];
            let wk = &wd[(oi * g.c + ci) * g.kernel_len()..(oi * g.c + ci + 1) * g.kernel_len()];
            for ot in 0..g.ot {
                for oh in 0..g.oh {
                    let src = &go[(ot * g.oh + oh) * g.ow..(ot * g.oh + oh + 1) * g.ow];
                    if g.s.2 == 1 {
                        // Gather form: gin[j] += Σ_c w[c]·src[j − c] over a zero-padded copy.
                        srcpad[kw - 1..kw - 1 + g.ow].copy_from_slice(src);
                    }
                    for a in 0..kt {
                        let it = ot * g.s.0 + a;
                        for b in 0..kh {
                            let ih = oh * g.s.1 + b;
                            if g.s.2 == 1 {
                                let row = (it * g.hp + ih) * g.wp;
                                let flipped = &wflip[(oi * kt * kh + a * kh + b) * kw..][..kw];
                                row_taps(&mut gin[row..row + g.wp], &srcpad, flipped);
                                continue;
                            }
                            let taps = &wk[(a * kh + b) * kw..(a * kh + b + 1) * kw];
                            for (cidx, &wv) in taps.iter().enumerate() {
                                let row = (it * g.hp + ih) * g.wp + cidx;
                                for (i, &s) in src.iter().enumerate() {
                                    let d = &mut gin[row + i * g.s.2];
                                    *d = *d + wv * s;
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    gp
}

fn backward_weight<T: Scalar>(gout: &[T], xp: &[T], g: &Geometry) -> Vec<T> {
    let (kt, kh, kw) = g.k;
    let klen = g.kernel_len();
    let mut gw = vec![T::zero(); g.o * g.c * klen];
    gw.par_chunks_mut(klen).enumerate().for_each(|(oc, gwk)| {
        let (oi, ci) = (oc / g.c, oc % g.c);
        let mut acc = vec![0.0f64; klen];
        for ni in 0..g.n {
            let go = &gout[(ni * g.o + oi) * g.out_plane()..(ni * g.o + oi + 1) * g.out_plane()];
            let xin = &xp[(ni * g.c + ci) * g.in_plane()..(ni * g.c + ci + 1) * g.in_plane()];
            for ot in 0..g.ot {
                for oh in 0..g.oh {
                    let src = &go[(ot * g.oh + oh) * g.ow..(ot * g.oh + oh + 1) * g.ow];
                    for a in 0..kt {
                        let it = ot * g.s.0 + a;
                        for b in 0..kh {
                            let ih = oh * g.s.1 + b;
                            for cidx in 0..kw {
                                let row = (it * g.hp + ih) * g.wp + cidx;
                                let mut dot = T::zero();
                                if g.s.2 == 1 {
                                    dot = lane_dot(src, &xin[row..row + g.ow]);
                                } else {
                                    for (i, &s) in src.iter().enumerate() {
                                        dot = dot + s * xin[row + i * g.s.2];
                                    }
                                }
                                acc[(a * kh + b) * kw + cidx] += dot.as_f64();
                            }
                        }
                    }
                }
            }
        }
        for (d, &v) in gwk.iter_mut().zip(&acc) {
            *d = T::of(v);
        }
    });
    gw
}
