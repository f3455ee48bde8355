use std::fmt;

use super::TensorError;

/// Ordered list of dimension sizes. Rank 0 denotes a scalar.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self, TensorError> {
        let dims = dims.into();
        if dims.contains(&0) {
            return Err(TensorError::InvalidShape { dims, reason: "dimension sizes must be positive" });
        }
        Ok(Shape(dims))
    }

    pub fn scalar() -> Self {
        Shape(Vec::new())
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    /// Row-major strides in elements.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.0.len()];
        for i in (0..self.0.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.0[i + 1];
        }
        strides
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.0[axis]
    }

    pub(crate) fn with_dim(&self, axis: usize, size: usize) -> Shape {
        let mut dims = self.0.clone();
        dims[axis] = size;
        Shape(dims)
    }

    pub(crate) fn from_vec_unchecked(dims: Vec<usize>) -> Shape {
        Shape(dims)
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "[{}]", parts.join("x"))
    }
}

impl From<&Shape> for Vec<usize> {
    fn from(s: &Shape) -> Self {
        s.0.clone()
    }
}

/// Odometer over a row-major index space that tracks two strided offsets at once.
///
/// Used for broadcasting and reductions: a stride of zero pins that axis.
pub(crate) struct StridedWalk<'a> {
    dims: &'a [usize],
    a_strides: &'a [usize],
    b_strides: &'a [usize],
    counter: Vec<usize>,
    a_off: usize,
    b_off: usize,
    remaining: usize,
}

impl<'a> StridedWalk<'a> {
    pub(crate) fn new(dims: &'a [usize], a_strides: &'a [usize], b_strides: &'a [usize]) -> Self {
        StridedWalk {
            dims,
            a_strides,
            b_strides,
            counter: vec![0; dims.len()],
            a_off: 0,
            b_off: 0,
            remaining: dims.iter().product(),
        }
    }
}

impl Iterator for StridedWalk<'_> {
    type Item = (usize, usize);

    #[inline]
    fn next(&mut self) -> Option<(usize, usize)> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let item = (self.a_off, self.b_off);
        for axis in (0..self.dims.len()).rev() {
            self.counter[axis] += 1;
            self.a_off += self.a_strides[axis];
            self.b_off += self.b_strides[axis];
            if self.counter[axis] < self.dims[axis] {
                break;
            }
            self.a_off -= self.a_strides[axis] * self.dims[axis];
            self.b_off -= self.b_strides[axis] * self.dims[axis];
            self.counter[axis] = 0;
        }
        Some(item)
    }
}

/// Strides of `shape` viewed inside a broadcast space of the same rank:
/// axes of size 1 get stride 0.
pub(crate) fn broadcast_strides(shape: &Shape) -> Vec<usize> {
    shape.strides().into_iter().zip(shape.dims()).map(|(s, &d)| if d == 1 { 0 } else { s }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strides_are_row_major() {
        let s = Shape::new(vec![2, 3, 4]).unwrap();
        assert_eq!(s.strides(), vec![12, 4, 1]);
        assert_eq!(s.numel(), 24);
        assert_eq!(Shape::scalar().numel(), 1);
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(Shape::new(vec![2, 0]).is_err());
    }

    #[test]
    fn walk_visits_every_offset_once() {
        let dims = [2, 3];
        let a = [3, 1];
        let b = [0, 1];
        let got: Vec<_> = StridedWalk::new(&dims, &a, &b).collect();
        assert_eq!(got, vec![(0, 0), (1, 1), (2, 2), (3, 0), (4, 1), (5, 2)]);
    }
}
