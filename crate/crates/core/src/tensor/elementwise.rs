use super::{broadcast_strides, DiffTensor, Result, Scalar, Shape, StridedWalk, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryKind {
    fn name(self) -> &'static str {
        match self {
            BinaryKind::Add => "add",
            BinaryKind::Sub => "sub",
            BinaryKind::Mul => "mul",
            BinaryKind::Div => "div",
        }
    }

    #[inline]
    fn apply<T: Scalar>(self, a: T, b: T) -> T {
        match self {
            BinaryKind::Add => a + b,
            BinaryKind::Sub => a - b,
            BinaryKind::Mul => a * b,
            BinaryKind::Div => a / b,
        }
    }
}

/// Output shape of a same-rank broadcast, where size-1 axes stretch.
fn broadcast_shape(op: &'static str, a: &Shape, b: &Shape) -> Result<Shape> {
    let mismatch = || TensorError::ShapeMismatch { op, lhs: a.dims().to_vec(), rhs: b.dims().to_vec() };
    if a.rank() != b.rank() {
        return Err(mismatch());
    }
    let dims = a
        .dims()
        .iter()
        .zip(b.dims())
        .map(|(&x, &y)| match (x, y) {
            (x, y) if x == y => Ok(x),
            (1, y) => Ok(y),
            (x, 1) => Ok(x),
            _ => Err(mismatch()),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Shape::from_vec_unchecked(dims))
}

/// Sums a gradient over the broadcast axes of `target`.
fn reduce_to<T: Scalar>(grad: &[T], out: &Shape, target: &Shape) -> Vec<T> {
    if out == target {
        return grad.to_vec();
    }
    let mut acc = vec![T::zero(); target.numel()];
    let out_strides = out.strides();
    let tgt_strides = broadcast_strides(target);
    for (g_off, t_off) in StridedWalk::new(out.dims(), &out_strides, &tgt_strides) {
        acc[t_off] = acc[t_off] + grad[g_off];
    }
    acc
}

impl<T: Scalar> DiffTensor<T> {
    fn binary(&self, other: &Self, kind: BinaryKind) -> Result<Self> {
        // a rank-0 operand broadcasts against any shape
        match (self.shape().rank(), other.shape().rank()) {
            (0, r) if r > 0 => return self.reshape(vec![1; r])?.binary(other, kind),
            (r, 0) if r > 0 => return self.binary(&other.reshape(vec![1; r])?, kind),
            _ => {}
        }
        let op = kind.name();
        let out_shape = broadcast_shape(op, self.shape(), other.shape())?;
        let data: Vec<T> = if self.shape() == other.shape() {
            self.data().iter().zip(other.data()).map(|(&a, &b)| kind.apply(a, b)).collect()
        } else {
            let sa = broadcast_strides(self.shape());
            let sb = broadcast_strides(other.shape());
            StridedWalk::new(out_shape.dims(), &sa, &sb)
                .map(|(ia, ib)| kind.apply(self.data()[ia], other.data()[ib]))
                .collect()
        };
        let a = self.clone();
        let b = other.clone();
        let shape = out_shape.clone();
        DiffTensor::from_op(
            op,
            data,
            out_shape,
            vec![self.clone(), other.clone()],
            Box::new(move |g, needs| {
                let sa = broadcast_strides(a.shape());
                let sb = broadcast_strides(b.shape());
                let walk = || StridedWalk::new(shape.dims(), &sa, &sb).enumerate();
                let (ad, bd) = (a.data(), b.data());
                let ga = needs[0].then(|| {
                    let full: Vec<T> = match kind {
                        BinaryKind::Add | BinaryKind::Sub => g.to_vec(),
                        BinaryKind::Mul => walk().map(|(i, (_, ib))| g[i] * bd[ib]).collect(),
                        BinaryKind::Div => walk().map(|(i, (_, ib))| g[i] / bd[ib]).collect(),
                    };
                    reduce_to(&full, &shape, a.shape())
                });
                let gb = needs[1].then(|| {
                    let full: Vec<T> = match kind {
                        BinaryKind::Add => g.to_vec(),
                        BinaryKind::Sub => g.iter().map(|&v| -v).collect(),
                        BinaryKind::Mul => walk().map(|(i, (ia, _))| g[i] * ad[ia]).collect(),
                        BinaryKind::Div => walk().map(|(i, (ia, ib))| -g[i] * ad[ia] / (bd[ib] * bd[ib])).collect(),
                    };
                    reduce_to(&full, &shape, b.shape())
                });
                vec![ga, gb]
            }),
        )
    }

    /// Elementwise sum; same-rank size-1 axes and rank-0 operands broadcast.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.binary(other, BinaryKind::Add)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.binary(other, BinaryKind::Sub)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.binary(other, BinaryKind::Mul)
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.binary(other, BinaryKind::Div)
    }

    pub fn add_scalar(&self, value: T) -> Result<Self> {
        let data = self.data().iter().map(|&x| x + value).collect();
        DiffTensor::from_op(
            "add_scalar",
            data,
            self.shape().clone(),
            vec![self.clone()],
            Box::new(|g, _| vec![Some(g.to_vec())]),
        )
    }

    /// Multiplies every element by `value`.
    pub fn mul_scalar(&self, value: T) -> Result<Self> {
        let data = self.data().iter().map(|&x| x * value).collect();
        DiffTensor::from_op(
            "scale",
            data,
            self.shape().clone(),
            vec![self.clone()],
            Box::new(move |g, _| vec![Some(g.iter().map(|&v| v * value).collect())]),
        )
    }

    pub fn neg(&self) -> Result<Self> {
        self.mul_scalar(-T::one())
    }

    /// Unary op whose derivative is expressed through input `x` and output `y`.
    fn unary(
        &self,
        op: &'static str,
        f: impl Fn(T) -> T,
        df: impl Fn(T, T) -> T + Send + Sync + 'static,
    ) -> Result<Self> {
        let data: Vec<T> = self.data().iter().map(|&x| f(x)).collect();
        let input = self.clone();
        let output = data.clone();
        DiffTensor::from_op(
            op,
            data,
            self.shape().clone(),
            vec![self.clone()],
            Box::new(move |g, _| {
                let grad = g.iter().zip(input.data()).zip(&output).map(|((&g, &x), &y)| g * df(x, y)).collect();
                vec![Some(grad)]
            }),
        )
    }

    pub fn relu(&self) -> Result<Self> {
        super::kinks::record_sides(self.data(), T::zero());
        self.unary(
            "relu",
            |x| if x > T::zero() { x } else { T::zero() },
            |x, _| if x > T::zero() { T::one() } else { T::zero() },
        )
    }

    pub fn sigmoid(&self) -> Result<Self> {
        self.unary(
            "sigmoid",
            |x| {
                if x >= T::zero() {
                    T::one() / (T::one() + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (T::one() + e)
                }
            },
            |_, y| y * (T::one() - y),
        )
    }

    pub fn exp(&self) -> Result<Self> {
        self.unary("exp", |x| x.exp(), |_, y| y)
    }

    /// Natural logarithm.
    pub fn ln(&self) -> Result<Self> {
        self.unary("ln", |x| x.ln(), |x, _| T::one() / x)
    }

    pub fn sqrt(&self) -> Result<Self> {
        self.unary("sqrt", |x| x.sqrt(), |_, y| T::of(0.5) / y)
    }

    pub fn square(&self) -> Result<Self> {
        self.unary("square", |x| x * x, |x, _| T::of(2.0) * x)
    }

    pub fn abs(&self) -> Result<Self> {
        super::kinks::record_sides(self.data(), T::zero());
        self.unary("abs", |x| x.abs(), |x, _| sign(x))
    }

    /// `max(x, floor)`; no gradient flows through clamped elements.
    pub fn clamp_min(&self, floor: T) -> Result<Self> {
        super::kinks::record_sides(self.data(), floor);
        self.unary(
            "clamp_min",
            move |x| if x < floor { floor } else { x },
            move |x, _| if x < floor { T::zero() } else { T::one() },
        )
    }
}

#[inline]
pub(crate) fn sign<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}
