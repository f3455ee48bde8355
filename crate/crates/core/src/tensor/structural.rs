use super::{DiffTensor, Result, Scalar, Shape, TensorError};

impl<T: Scalar> DiffTensor<T> {
    /// Same buffer under a new shape with equal element count.
    pub fn reshape(&self, dims: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != self.numel() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                lhs: self.dims().to_vec(),
                rhs: shape.dims().to_vec(),
            });
        }
        DiffTensor::from_op(
            "reshape",
            self.to_vec(),
            shape,
            vec![self.clone()],
            Box::new(|g, _| vec![Some(g.to_vec())]),
        )
    }

    /// Sub-range `start..start+len` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Self> {
        let rank = self.shape().rank();
        if axis >= rank {
            return Err(TensorError::InvalidAxis { op: "narrow", axis, rank });
        }
        let size = self.dims()[axis];
        if len == 0 || start + len > size {
            return Err(TensorError::InvalidArgument {
                op: "narrow",
                reason: format!("range {start}..{} outside axis of size {size}", start + len),
            });
        }
        let outer: usize = self.dims()[..axis].iter().product();
        let inner: usize = self.dims()[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * len * inner);
        let x = self.data();
        for o in 0..outer {
            let base = (o * size + start) * inner;
            data.extend_from_slice(&x[base..base + len * inner]);
        }
        let full = self.numel();
        DiffTensor::from_op(
            "narrow",
            data,
            self.shape().with_dim(axis, len),
            vec![self.clone()],
            Box::new(move |g, _| {
                let mut grad = vec![T::zero(); full];
                for o in 0..outer {
                    let base = (o * size + start) * inner;
                    grad[base..base + len * inner].copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                vec![Some(grad)]
            }),
        )
    }

    /// Concatenates tensors along `axis`; all other axes must agree.
    pub fn concat(parts: &[DiffTensor<T>], axis: usize) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(TensorError::InvalidArgument { op: "concat", reason: "no inputs".into() });
        };
        let rank = first.shape().rank();
        if axis >= rank {
            return Err(TensorError::InvalidAxis { op: "concat", axis, rank });
        }
        for p in parts {
            let same = p.shape().rank() == rank
                && p.dims().iter().zip(first.dims()).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !same {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: first.dims().to_vec(),
                    rhs: p.dims().to_vec(),
                });
            }
        }
        let outer: usize = first.dims()[..axis].iter().product();
        let inner: usize = first.dims()[axis + 1..].iter().product();
        let sizes: Vec<usize> = parts.iter().map(|p| p.dims()[axis]).collect();
        let total: usize = sizes.iter().sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (p, &s) in parts.iter().zip(&sizes) {
                data.extend_from_slice(&p.data()[o * s * inner..(o + 1) * s * inner]);
            }
        }
        DiffTensor::from_op(
            "concat",
            data,
            first.shape().with_dim(axis, total),
            parts.to_vec(),
            Box::new(move |g, needs| {
                let mut offset = 0;
                sizes
                    .iter()
                    .zip(needs)
                    .map(|(&s, &need)| {
                        let start = offset;
                        offset += s;
                        need.then(|| {
                            let mut grad = Vec::with_capacity(outer * s * inner);
                            for o in 0..outer {
                                let base = (o * total + start) * inner;
                                grad.extend_from_slice(&g[base..base + s * inner]);
                            }
                            grad
                        })
                    })
                    .collect()
            }),
        )
    }
}
