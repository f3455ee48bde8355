use std::cell::Cell;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use super::{Result, Scalar, Shape, TensorError};

/// Backward rule of a recorded op.
///
/// Receives the gradient of the op's output and, per parent, whether that
/// parent needs a gradient. Returns one optional gradient buffer per parent.
pub type BackwardFn<T> = Box<dyn Fn(&[T], &[bool]) -> Vec<Option<Vec<T>>> + Send + Sync>;

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Runs `f` with graph recording disabled on this thread.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    struct Restore(bool);
    impl Drop for Restore {
        fn drop(&mut self) {
            GRAD_ENABLED.with(|g| g.set(self.0));
        }
    }
    let prev = GRAD_ENABLED.with(|g| g.replace(false));
    let _restore = Restore(prev);
    f()
}

fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

struct GradNode<T: Scalar> {
    op: &'static str,
    parents: Vec<DiffTensor<T>>,
    backward: BackwardFn<T>,
    consumed: AtomicBool,
}

struct Inner<T: Scalar> {
    shape: Shape,
    data: Vec<T>,
    requires_grad: bool,
    grad: Mutex<Option<Vec<T>>>,
    node: Option<GradNode<T>>,
}

/// Dense tensor participating in a reverse-mode gradient graph.
///
/// Cloning is cheap: clones share the same buffer and graph node.
pub struct DiffTensor<T: Scalar> {
    inner: Arc<Inner<T>>,
}

impl<T: Scalar> Clone for DiffTensor<T> {
    fn clone(&self) -> Self {
        DiffTensor { inner: Arc::clone(&self.inner) }
    }
}

impl<T: Scalar> fmt::Debug for DiffTensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("DiffTensor");
        d.field("shape", &self.inner.shape).field("requires_grad", &self.inner.requires_grad);
        if let Some(node) = &self.inner.node {
            d.field("op", &node.op);
        }
        if self.inner.data.len() <= 16 {
            d.field("data", &self.inner.data);
        }
        d.finish()
    }
}

impl<T: Scalar> DiffTensor<T> {
    fn leaf(data: Vec<T>, shape: Shape, requires_grad: bool) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(TensorError::DataLength { expected: shape.numel(), found: data.len() });
        }
        Ok(DiffTensor { inner: Arc::new(Inner { shape, data, requires_grad, grad: Mutex::new(None), node: None }) })
    }

    /// Constant tensor (never accumulates gradient).
    pub fn new(data: Vec<T>, dims: impl Into<Vec<usize>>) -> Result<Self> {
        Self::leaf(data, Shape::new(dims)?, false)
    }

    /// Learnable leaf tensor.
    pub fn parameter(data: Vec<T>, dims: impl Into<Vec<usize>>) -> Result<Self> {
        Self::leaf(data, Shape::new(dims)?, true)
    }

    pub fn from_shape(data: Vec<T>, shape: Shape) -> Result<Self> {
        Self::leaf(data, shape, false)
    }

    pub fn scalar(value: T) -> Self {
        Self::leaf(vec![value], Shape::scalar(), false).expect("scalar has one element")
    }

    pub fn zeros(dims: impl Into<Vec<usize>>) -> Result<Self> {
        Self::full(T::zero(), dims)
    }

    pub fn full(value: T, dims: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        Self::leaf(vec![value; shape.numel()], shape, false)
    }

    pub fn from_f64(data: &[f64], dims: impl Into<Vec<usize>>) -> Result<Self> {
        Self::new(data.iter().map(|&v| T::of(v)).collect(), dims)
    }

    /// Records the result of an op.
    ///
    /// The node is attached only if gradients are enabled on this thread and
    /// some parent requires a gradient; otherwise the result is a constant.
    /// Fails with [`TensorError::NonFinite`] if `data` holds NaN or infinity.
    pub fn from_op(
        op: &'static str,
        data: Vec<T>,
        shape: Shape,
        parents: Vec<DiffTensor<T>>,
        backward: BackwardFn<T>,
    ) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(TensorError::DataLength { expected: shape.numel(), found: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op });
        }
        let track = grad_enabled() && parents.iter().any(|p| p.requires_grad());
        let node = track.then(|| GradNode { op, parents, backward, consumed: AtomicBool::new(false) });
        Ok(DiffTensor { inner: Arc::new(Inner { shape, data, requires_grad: track, grad: Mutex::new(None), node }) })
    }

    pub fn shape(&self) -> &Shape {
        &self.inner.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.inner.shape.dims()
    }

    pub fn numel(&self) -> usize {
        self.inner.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.inner.data
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.inner.data.clone()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.inner.data.iter().map(|v| v.as_f64()).collect()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> T {
        self.inner.data[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.inner.node.is_none()
    }

    /// Name of the op that produced this tensor, if it is a graph node.
    pub fn op_name(&self) -> Option<&'static str> {
        self.inner.node.as_ref().map(|n| n.op)
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.lock().expect("grad lock").clone()
    }

    pub fn grad_or_zeros(&self) -> Vec<T> {
        self.grad().unwrap_or_else(|| vec![T::zero(); self.numel()])
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.lock().expect("grad lock") = None;
    }

    /// Same values, cut from the graph.
    pub fn detach(&self) -> Self {
        Self::leaf(self.to_vec(), self.shape().clone(), false).expect("same shape")
    }

    /// Same values as a fresh learnable leaf.
    pub fn to_parameter(&self) -> Self {
        Self::leaf(self.to_vec(), self.shape().clone(), true).expect("same shape")
    }

    pub fn ptr_eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }

    fn key(&self) -> usize {
        Arc::as_ptr(&self.inner) as usize
    }

    /// Reverse-mode pass from a scalar loss.
    ///
    /// Every reachable leaf with `requires_grad` accumulates dLoss/dLeaf.
    /// A graph may be traversed only once; a second call fails with
    /// [`TensorError::GraphConsumed`].
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(TensorError::NonScalarLoss(self.dims().to_vec()));
        }
        if !self.requires_grad() {
            return Ok(());
        }
        if self.is_leaf() {
            accumulate(&self.inner.grad, &[T::one()]);
            return Ok(());
        }

        let order = self.topo_order();
        if order.iter().any(|t| t.inner.node.as_ref().is_some_and(|n| n.consumed.load(Ordering::Acquire))) {
            return Err(TensorError::GraphConsumed);
        }

        let mut pending: HashMap<usize, Vec<T>> = HashMap::new();
        pending.insert(self.key(), vec![T::one()]);
        for tensor in order.iter().rev() {
            let node = tensor.inner.node.as_ref().expect("interior node");
            node.consumed.store(true, Ordering::Release);
            let Some(grad_out) = pending.remove(&tensor.key()) else {
                continue;
            };
            let needs: Vec<bool> = node.parents.iter().map(|p| p.requires_grad()).collect();
            let grads = (node.backward)(&grad_out, &needs);
            debug_assert_eq!(grads.len(), node.parents.len(), "{}: gradient arity", node.op);
            for (parent, grad) in node.parents.iter().zip(grads) {
                let Some(grad) = grad else { continue };
                if !parent.requires_grad() {
                    continue;
                }
                debug_assert_eq!(grad.len(), parent.numel(), "{}: gradient length", node.op);
                if parent.is_leaf() {
                    accumulate(&parent.inner.grad, &grad);
                } else {
                    match pending.get_mut(&parent.key()) {
                        Some(acc) => acc.iter_mut().zip(&grad).for_each(|(a, &g)| *a = *a + g),
                        None => {
                            pending.insert(parent.key(), grad);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Interior nodes reachable from `self`, parents before children.
    fn topo_order(&self) -> Vec<DiffTensor<T>> {
        let mut order = Vec::new();
        let mut visited = HashSet::new();
        let mut stack: Vec<(DiffTensor<T>, bool)> = vec![(self.clone(), false)];
        while let Some((tensor, expanded)) = stack.pop() {
            if expanded {
                order.push(tensor);
                continue;
            }
            if !visited.insert(tensor.key()) {
                continue;
            }
            let Some(node) = tensor.inner.node.as_ref() else {
                continue;
            };
            let parents: Vec<_> =
                node.parents.iter().filter(|p| !p.is_leaf() && !visited.contains(&p.key())).cloned().collect();
            stack.push((tensor, true));
            stack.extend(parents.into_iter().map(|p| (p, false)));
        }
        order
    }
}

fn accumulate<T: Scalar>(slot: &Mutex<Option<Vec<T>>>, grad: &[T]) {
    let mut guard = slot.lock().expect("grad lock");
    match guard.as_mut() {
        Some(acc) => acc.iter_mut().zip(grad).for_each(|(a, &g)| *a = *a + g),
        None => *guard = Some(grad.to_vec()),
    }
}
