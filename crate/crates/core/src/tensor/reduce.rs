use super::elementwise::sign;
use super::{broadcast_strides, DiffTensor, Result, Scalar, Shape, StridedWalk, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceKind {
    Sum,
    Mean,
    Max,
    /// Sum of absolute values.
    L1Norm,
}

impl ReduceKind {
    fn name(self) -> &'static str {
        match self {
            ReduceKind::Sum => "sum",
            ReduceKind::Mean => "mean",
            ReduceKind::Max => "max",
            ReduceKind::L1Norm => "l1_norm",
        }
    }
}

impl<T: Scalar> DiffTensor<T> {
    /// Reduces over `axes`. With `keepdim` the reduced axes stay as size 1.
    pub fn reduce(&self, kind: ReduceKind, axes: &[usize], keepdim: bool) -> Result<Self> {
        let op = kind.name();
        if axes.is_empty() {
            return Err(TensorError::EmptyReduction { op });
        }
        let rank = self.shape().rank();
        let mut reduced = vec![false; rank];
        for &axis in axes {
            if axis >= rank {
                return Err(TensorError::InvalidAxis { op, axis, rank });
            }
            reduced[axis] = true;
        }
        let kept_dims: Vec<usize> = self.dims().iter().zip(&reduced).map(|(&d, &r)| if r { 1 } else { d }).collect();
        let kept = Shape::from_vec_unchecked(kept_dims.clone());
        let out_shape = if keepdim {
            kept.clone()
        } else {
            Shape::from_vec_unchecked(self.dims().iter().zip(&reduced).filter(|(_, &r)| !r).map(|(&d, _)| d).collect())
        };
        let count = self.numel() / kept.numel();

        let in_strides = self.shape().strides();
        let out_strides = broadcast_strides(&kept);
        let x = self.data();
        let n_out = kept.numel();
        let mut argmax: Vec<usize> = Vec::new();
        let data: Vec<T> = match kind {
            ReduceKind::Sum | ReduceKind::Mean | ReduceKind::L1Norm => {
                let mut acc = vec![T::zero(); n_out];
                for (i, o) in StridedWalk::new(self.dims(), &in_strides, &out_strides) {
                    let v = if kind == ReduceKind::L1Norm { x[i].abs() } else { x[i] };
                    acc[o] = acc[o] + v;
                }
                if kind == ReduceKind::Mean {
                    let inv = T::one() / T::of(count as f64);
                    acc.iter_mut().for_each(|v| *v = *v * inv);
                }
                acc
            }
            ReduceKind::Max => {
                let mut best = vec![T::neg_infinity(); n_out];
                argmax = vec![usize::MAX; n_out];
                for (i, o) in StridedWalk::new(self.dims(), &in_strides, &out_strides) {
                    // strict comparison keeps the first index on ties
                    if argmax[o] == usize::MAX || x[i] > best[o] {
                        best[o] = x[i];
                        argmax[o] = i;
                    }
                }
                super::kinks::record(argmax.iter().map(|&i| i as u64));
                best
            }
        };
        if kind == ReduceKind::L1Norm {
            super::kinks::record_sides(x, T::zero());
        }

        let input = self.clone();
        DiffTensor::from_op(
            op,
            data,
            out_shape,
            vec![self.clone()],
            Box::new(move |g, _| {
                let mut grad = vec![T::zero(); input.numel()];
                match kind {
                    ReduceKind::Max => {
                        for (o, &i) in argmax.iter().enumerate() {
                            grad[i] = g[o];
                        }
                    }
                    _ => {
                        let scale = if kind == ReduceKind::Mean { T::one() / T::of(count as f64) } else { T::one() };
                        let in_strides = input.shape().strides();
                        let out_strides = broadcast_strides(&kept);
                        let x = input.data();
                        for (i, o) in StridedWalk::new(input.dims(), &in_strides, &out_strides) {
                            let local = if kind == ReduceKind::L1Norm { sign(x[i]) } else { T::one() };
                            grad[i] = g[o] * scale * local;
                        }
                    }
                }
                vec![Some(grad)]
            }),
        )
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum(&self) -> Result<Self> {
        self.reduce_all(ReduceKind::Sum)
    }

    pub fn mean(&self) -> Result<Self> {
        self.reduce_all(ReduceKind::Mean)
    }

    pub fn max(&self) -> Result<Self> {
        self.reduce_all(ReduceKind::Max)
    }

    pub fn l1_norm(&self) -> Result<Self> {
        self.reduce_all(ReduceKind::L1Norm)
    }

    fn reduce_all(&self, kind: ReduceKind) -> Result<Self> {
        if self.shape().rank() == 0 {
            return self.mul_scalar(T::one());
        }
        let axes: Vec<usize> = (0..self.shape().rank()).collect();
        self.reduce(kind, &axes, false)
    }

    pub fn sum_axes(&self, axes: &[usize], keepdim: bool) -> Result<Self> {
        self.reduce(ReduceKind::Sum, axes, keepdim)
    }

    pub fn mean_axes(&self, axes: &[usize], keepdim: bool) -> Result<Self> {
        self.reduce(ReduceKind::Mean, axes, keepdim)
    }

    /// Numerically stable softmax along `axis`.
    pub fn softmax(&self, axis: usize) -> Result<Self> {
        let rank = self.shape().rank();
        if axis >= rank {
            return Err(TensorError::InvalidAxis { op: "softmax", axis, rank });
        }
        let dims = self.dims();
        let len = dims[axis];
        let inner: usize = dims[axis + 1..].iter().product();
        let outer: usize = dims[..axis].iter().product();
        let x = self.data();
        let mut out = vec![T::zero(); x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let idx = |k: usize| base + k * inner;
                let m = (0..len).map(|k| x[idx(k)]).fold(T::neg_infinity(), T::max);
                let mut total = T::zero();
                for k in 0..len {
                    let e = (x[idx(k)] - m).exp();
                    out[idx(k)] = e;
                    total = total + e;
                }
                for k in 0..len {
                    out[idx(k)] = out[idx(k)] / total;
                }
            }
        }
        let y = out.clone();
        DiffTensor::from_op(
            "softmax",
            out,
            self.shape().clone(),
            vec![self.clone()],
            Box::new(move |g, _| {
                let mut grad = vec![T::zero(); y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let base = o * len * inner + i;
                        let idx = |k: usize| base + k * inner;
                        let dot = (0..len).fold(T::zero(), |acc, k| acc + g[idx(k)] * y[idx(k)]);
                        for k in 0..len {
                            grad[idx(k)] = y[idx(k)] * (g[idx(k)] - dot);
                        }
                    }
                }
                vec![Some(grad)]
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::check_gradients;

    fn t(data: &[f64], dims: &[usize]) -> DiffTensor<f64> {
        DiffTensor::from_f64(data, dims.to_vec()).unwrap()
    }

    #[test]
    fn sum_and_l1() {
        let x = t(&[1.0, -2.0, 3.0], &[3]);
        assert_eq!(x.sum().unwrap().item(), 2.0);
        assert_eq!(x.l1_norm().unwrap().item(), 6.0);
        assert_eq!(x.max().unwrap().item(), 3.0);
    }

    #[test]
    fn reduced_shapes() {
        let x = DiffTensor::<f64>::zeros(vec![2, 3, 4]).unwrap();
        assert_eq!(x.sum_axes(&[1], false).unwrap().dims(), &[2, 4]);
        assert_eq!(x.sum_axes(&[0, 2], true).unwrap().dims(), &[1, 3, 1]);
        assert_eq!(x.sum().unwrap().dims(), &[] as &[usize]);
    }

    #[test]
    fn axis_errors() {
        let x = DiffTensor::<f64>::zeros(vec![2, 3]).unwrap();
        assert!(matches!(x.sum_axes(&[], false), Err(TensorError::EmptyReduction { .. })));
        assert!(matches!(x.sum_axes(&[2], false), Err(TensorError::InvalidAxis { .. })));
        assert!(matches!(x.softmax(5), Err(TensorError::InvalidAxis { .. })));
    }

    #[test]
    fn softmax_sums_to_one() {
        let x = t(&[0.1, 2.0, -1.0, 0.5, 0.5, 0.5], &[2, 3]);
        let s = x.softmax(1).unwrap();
        for row in s.data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let s0 = x.softmax(0).unwrap();
        for c in 0..3 {
            assert!((s0.data()[c] + s0.data()[3 + c] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn max_ties_pick_first_index() {
        let x = DiffTensor::<f64>::parameter(vec![2.0, 5.0, 5.0, 1.0], vec![4]).unwrap();
        x.max().unwrap().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn reduction_gradients() {
        let inputs = vec![t(&[0.3, -1.2, 0.7, 1.9, -0.4, 0.8, 1.1, -0.6, 0.2, 2.5, -1.7, 0.9], &[2, 3, 2])];
        let weights = t(&[0.5, -1.0, 2.0, 0.3], &[2, 2]);
        for kind in [ReduceKind::Sum, ReduceKind::Mean, ReduceKind::Max, ReduceKind::L1Norm] {
            let w = weights.clone();
            let report =
                check_gradients(&inputs, 1e-5, move |x| x[0].reduce(kind, &[1], false)?.mul(&w)?.sum()).unwrap();
            assert!(report.max_rel_err < 1e-6, "{kind:?}: {report:?}");
        }
        for axis in 0..3 {
            let report = check_gradients(&inputs, 1e-5, |x| x[0].softmax(axis)?.mul(&x[0].square()?)?.sum()).unwrap();
            assert!(report.max_rel_err < 1e-4, "softmax axis {axis}: {report:?}");
        }
    }
}
