use std::sync::atomic::{AtomicUsize, Ordering};

use crate::tensor::{DiffTensor, Scalar};

use super::{LossError, Result};

static DEGENERATE: AtomicUsize = AtomicUsize::new(0);

/// How many times [`neg_pearson`] met a constant input in this process.
pub fn degenerate_pearson_count() -> usize {
    DEGENERATE.load(Ordering::Relaxed)
}

fn is_constant<T: Scalar>(x: &[T]) -> bool {
    let first = x[0];
    x.iter().all(|&v| v == first)
}

/// `1 − r` for the sample correlation `r` of two equal-length vectors.
///
/// A constant `pred` or `gt` has no defined correlation; the loss is then 1
/// with a zero gradient, and the event is counted and logged.
pub fn neg_pearson<T: Scalar>(pred: &DiffTensor<T>, gt: &DiffTensor<T>) -> Result<DiffTensor<T>> {
    if pred.dims().len() != 1 || pred.dims() != gt.dims() || pred.numel() < 2 {
        return Err(LossError::InvalidArgument(format!(
            "neg_pearson needs two equal-length vectors of at least 2 samples, got {:?} and {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    if is_constant(pred.data()) || is_constant(gt.data()) {
        DEGENERATE.fetch_add(1, Ordering::Relaxed);
        log::warn!("neg_pearson: constant input, correlation undefined; using loss 1");
        return Ok(pred.mul_scalar(T::zero())?.sum()?.add_scalar(T::one())?);
    }
    let pc = pred.sub(&pred.mean()?)?;
    let gc = gt.sub(&gt.mean()?)?;
    let cov = pc.mul(&gc)?.sum()?;
    let norm = pc.square()?.sum()?.mul(&gc.square()?.sum()?)?.sqrt()?;
    Ok(cov.div(&norm)?.neg()?.add_scalar(T::one())?)
}
