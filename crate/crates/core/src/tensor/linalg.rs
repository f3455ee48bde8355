use super::{DiffTensor, Result, Scalar, Shape, TensorError};

/// `c[m×n] = a[m×k] · b[k×n]`, all row-major.
fn gemm<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in row.iter_mut().zip(brow) {
                *cv = *cv + av * bv;
            }
        }
    }
    c
}

fn transpose<T: Scalar>(x: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = x[r * cols + c];
        }
    }
    out
}

impl<T: Scalar> DiffTensor<T> {
    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let mismatch =
            || TensorError::ShapeMismatch { op: "matmul", lhs: self.dims().to_vec(), rhs: other.dims().to_vec() };
        let (&[m, k], &[k2, n]) = (self.dims(), other.dims()) else {
            return Err(mismatch());
        };
        if k != k2 {
            return Err(mismatch());
        }
        let data = gemm(self.data(), other.data(), m, k, n);
        let a = self.clone();
        let b = other.clone();
        DiffTensor::from_op(
            "matmul",
            data,
            Shape::from_vec_unchecked(vec![m, n]),
            vec![self.clone(), other.clone()],
            Box::new(move |g, needs| {
                // dA = G · Bᵀ, dB = Aᵀ · G
                let ga = needs[0].then(|| gemm(g, &transpose(b.data(), k, n), m, n, k));
                let gb = needs[1].then(|| gemm(&transpose(a.data(), m, k), g, k, m, n));
                vec![ga, gb]
            }),
        )
    }
}
