use crate::tensor::{DiffTensor, Scalar, TensorError};

use super::config::DiffMode;
use super::ModelError;

/// Frame offsets `(later, earlier)` of each of the four differences, in
/// channel-block order `D′₋₂, D′₋₁, D′₁, D′₂`.
pub fn diff_offsets(mode: DiffMode) -> [(isize, isize); 4] {
    match mode {
        DiffMode::Adjacent => [(-1, -2), (0, -1), (1, 0), (2, 1)],
        DiffMode::Center => [(-2, 0), (-1, 0), (1, 0), (2, 0)],
    }
}

/// Builds the 12-channel difference stack of a `[N, 3, T, H, W]` clip batch.
///
/// Channel `k·3 + c` holds difference `k` of colour `c`. Frame indices
/// outside the clip clamp to the nearest boundary frame. The result is a
/// constant: the clip is data, not a parameter.
pub fn make_diff_stack<T: Scalar>(clip: &DiffTensor<T>, mode: DiffMode) -> Result<DiffTensor<T>, ModelError> {
    let &[n, 3, t, h, w] = clip.dims() else {
        return Err(ModelError::Shape(format!("expected clip batch [N, 3, T, H, W], got {:?}", clip.dims())));
    };
    if t < 3 {
        return Err(ModelError::Shape(format!("difference stack needs at least 3 frames, got {t}")));
    }
    let plane = h * w;
    let src = clip.data();
    let offsets = diff_offsets(mode);
    let mut out = vec![T::zero(); n * 12 * t * plane];
    let clamp = |i: isize| i.clamp(0, t as isize - 1) as usize;
    for ni in 0..n {
        for (k, &(late, early)) in offsets.iter().enumerate() {
            for c in 0..3 {
                let src_base = (ni * 3 + c) * t * plane;
                let dst_base = (ni * 12 + k * 3 + c) * t * plane;
                for ti in 0..t {
                    let a = src_base + clamp(ti as isize + late) * plane;
                    let b = src_base + clamp(ti as isize + early) * plane;
                    let d = dst_base + ti * plane;
                    for p in 0..plane {
                        out[d + p] = src[a + p] - src[b + p];
                    }
                }
            }
        }
    }
    DiffTensor::new(out, vec![n, 12, t, h, w]).map_err(ModelError::from)
}

/// Adds a leading batch axis to a single `[3, T, H, W]` clip.
pub fn as_batch<T: Scalar>(clip: &DiffTensor<T>) -> Result<DiffTensor<T>, TensorError> {
    if clip.dims().len() == 4 {
        let mut dims = vec![1];
        dims.extend_from_slice(clip.dims());
        clip.reshape(dims)
    } else {
        Ok(clip.clone())
    }
}
