//! Central finite-difference gradient checking.
//!
//! Only the forward path of the function under test is used to build the
//! numeric estimate, so the comparison stays independent of every backward
//! rule it audits.
//!
//! Coordinates whose `±h` probes land on a different side of a kink (ReLU,
//! max, clamp) than the unperturbed point are excluded and counted in
//! [`GradReport::skipped`]; a central difference straddling a kink does not
//! estimate the derivative.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kinks::trace_branches;
use super::{no_grad, DiffTensor, Result, Scalar};

/// Smallest gradient norm used as the relative-error denominator.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradReport {
    /// `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂, REL_FLOOR)` per input, maximized.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub checked: usize,
    pub skipped: usize,
}

impl GradReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Checks every element of every input.
pub fn check_gradients<T, F>(inputs: &[DiffTensor<T>], h: f64, f: F) -> Result<GradReport>
where
    T: Scalar,
    F: Fn(&[DiffTensor<T>]) -> Result<DiffTensor<T>>,
{
    check_gradients_sampled(inputs, h, usize::MAX, 0, f)
}

/// Checks up to `per_input` randomly chosen elements of each input.
pub fn check_gradients_sampled<T, F>(
    inputs: &[DiffTensor<T>],
    h: f64,
    per_input: usize,
    seed: u64,
    f: F,
) -> Result<GradReport>
where
    T: Scalar,
    F: Fn(&[DiffTensor<T>]) -> Result<DiffTensor<T>>,
{
    let params: Vec<DiffTensor<T>> = inputs.iter().map(|t| t.to_parameter()).collect();
    f(&params)?.backward()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradReport { max_rel_err: 0.0, max_abs_err: 0.0, checked: 0, skipped: 0 };
    let detached: Vec<DiffTensor<T>> = inputs.iter().map(|t| t.detach()).collect();
    let (base, base_print) = trace_branches(|| no_grad(|| f(&detached)));
    base?;
    for (which, param) in params.iter().enumerate() {
        let analytic = param.grad_or_zeros();
        let n = param.numel();
        let indices: Vec<usize> = if per_input >= n {
            (0..n).collect()
        } else {
            let mut idx = sample(&mut rng, n, per_input).into_vec();
            idx.sort_unstable();
            idx
        };
        let (mut diff2, mut a2, mut n2) = (0.0f64, 0.0f64, 0.0f64);
        for &i in &indices {
            let eval = |delta: f64| -> Result<(f64, u64)> {
                let perturbed: Vec<DiffTensor<T>> = inputs
                    .iter()
                    .enumerate()
                    .map(|(j, t)| {
                        if j != which {
                            return Ok(t.detach());
                        }
                        let mut data = t.to_vec();
                        data[i] = T::of(data[i].as_f64() + delta);
                        DiffTensor::from_shape(data, t.shape().clone())
                    })
                    .collect::<Result<_>>()?;
                let (y, print) = trace_branches(|| no_grad(|| f(&perturbed)));
                Ok((y?.item().as_f64(), print))
            };
            let ((up, up_print), (down, down_print)) = (eval(h)?, eval(-h)?);
            if up_print != base_print || down_print != base_print {
                report.skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[i].as_f64();
            diff2 += (a - numeric).powi(2);
            a2 += a * a;
            n2 += numeric * numeric;
            report.max_abs_err = report.max_abs_err.max((a - numeric).abs());
            report.checked += 1;
        }
        // floor keeps round-off on an identically-zero gradient from reading as 100%
        let denom = a2.sqrt().max(n2.sqrt()).max(REL_FLOOR);
        let rel = diff2.sqrt() / denom;
        report.max_rel_err = report.max_rel_err.max(rel);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kink_straddling_coordinates_are_skipped() {
        let x = DiffTensor::<f64>::new(vec![1e-6, 0.5, -0.5], vec![3]).unwrap();
        let report = check_gradients(&[x], 1e-5, |v| v[0].relu()?.sum()).unwrap();
        assert_eq!(report.skipped, 1);
        assert_eq!(report.checked, 2);
        assert!(report.max_rel_err < 1e-9);
    }

    #[test]
    fn wrong_gradient_is_detected() {
        // the probe sees x², the recorded rule claims 3x
        let x = DiffTensor::<f64>::new(vec![1.0, 2.0], vec![2]).unwrap();
        let report = check_gradients(&[x], 1e-5, |v| {
            let sq = v[0].square()?;
            let data = sq.to_vec();
            let input = v[0].clone();
            let fake = DiffTensor::from_op(
                "fake",
                data,
                sq.shape().clone(),
                vec![input.clone()],
                Box::new(move |g, _| vec![Some(g.iter().zip(input.data()).map(|(g, x)| g * 3.0 * x).collect())]),
            )?;
            fake.sum()
        })
        .unwrap();
        assert!(report.max_rel_err > 0.1);
    }
}
