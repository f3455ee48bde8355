use crate::tensor::{DiffTensor, Result, Scalar, Shape, TensorError};

use super::conv::Triple;

/// Non-overlapping max pooling with stride equal to the window.
///
/// Every spatio-temporal extent must be divisible by the window. Ties go to
/// the first element in `(t, h, w)` scan order.
pub fn maxpool3d<T: Scalar>(x: &DiffTensor<T>, window: Triple) -> Result<DiffTensor<T>> {
    let &[n, c, t, h, w] = x.dims() else {
        return Err(TensorError::InvalidArgument {
            op: "maxpool3d",
            reason: format!("expected [N, C, T, H, W], got {:?}", x.dims()),
        });
    };
    let (wt, wh, ww) = window;
    if wt == 0 || wh == 0 || ww == 0 || t % wt != 0 || h % wh != 0 || w % ww != 0 {
        return Err(TensorError::InvalidArgument {
            op: "maxpool3d",
            reason: format!("extent {:?} not divisible by window {window:?}", (t, h, w)),
        });
    }
    let (ot, oh, ow) = (t / wt, h / wh, w / ww);
    let xd = x.data();
    let mut out = Vec::with_capacity(n * c * ot * oh * ow);
    let mut argmax = Vec::with_capacity(out.capacity());
    for nc in 0..n * c {
        let base = nc * t * h * w;
        for a in 0..ot {
            for b in 0..oh {
                for d in 0..ow {
                    let mut best_i = base + ((a * wt) * h + b * wh) * w + d * ww;
                    let mut best = xd[best_i];
                    for i in 0..wt {
                        for j in 0..wh {
                            for k in 0..ww {
                                let idx = base + ((a * wt + i) * h + b * wh + j) * w + d * ww + k;
                                if xd[idx] > best {
                                    best = xd[idx];
                                    best_i = idx;
                                }
                            }
                        }
                    }
                    out.push(best);
                    argmax.push(best_i);
                }
            }
        }
    }
    crate::tensor::kinks::record(argmax.iter().map(|&i| i as u64));
    let len = xd.len();
    DiffTensor::from_op(
        "maxpool3d",
        out,
        Shape::new(vec![n, c, ot, oh, ow])?,
        vec![x.clone()],
        Box::new(move |g, _| {
            let mut grad = vec![T::zero(); len];
            for (&i, &gv) in argmax.iter().zip(g) {
                grad[i] = grad[i] + gv;
            }
            vec![Some(grad)]
        }),
    )
}
