//! Hybrid GARCH-regularized loss.

use super::LossSpec;
use crate::error::{Error, Result};

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::invalid("mse of an empty batch"));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// `λ·MSE(truth, pred) + (1-λ)·MSE(garch, pred)`.
pub fn ginn_loss(truth: &[f64], garch: &[f64], pred: &[f64], spec: LossSpec) -> Result<f64> {
    let l = spec.lambda();
    Ok(l * mse(truth, pred)? + (1.0 - l) * mse(garch, pred)?)
}

/// Gradient of [`ginn_loss`] with respect to each prediction.
pub fn ginn_loss_grad(truth: &[f64], garch: &[f64], pred: &[f64], spec: LossSpec) -> Result<Vec<f64>> {
    if truth.len() != pred.len() || garch.len() != pred.len() {
        return Err(Error::invalid("truth, garch and prediction lengths differ"));
    }
    let l = spec.lambda();
    let scale = 2.0 / pred.len() as f64;
    Ok(pred
        .iter()
        .zip(truth.iter().zip(garch))
        .map(|(p, (t, g))| scale * (l * (p - t) + (1.0 - l) * (p - g)))
        .collect())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn spec(l: f64) -> LossSpec {
        LossSpec::new(l).unwrap()
    }

    #[test]
    fn examples() {
        assert_eq!(ginn_loss(&[1.0, 2.0], &[0.0, 0.0], &[1.0, 2.0], spec(1.0)).unwrap(), 0.0);
        assert_eq!(ginn_loss(&[1.0], &[0.0], &[0.5], spec(0.5)).unwrap(), 0.25);
        let l0 = ginn_loss(&[9.0, 9.0], &[1.0, 3.0], &[2.0, 2.0], spec(0.0)).unwrap();
        assert_eq!(l0, mse(&[1.0, 3.0], &[2.0, 2.0]).unwrap());
        assert!(ginn_loss(&[1.0], &[1.0, 2.0], &[1.0], spec(0.5)).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = [0.3, -1.2, 0.8];
        let g = [0.1, 0.4, -0.5];
        let p = [0.0, 0.2, 0.9];
        let s = spec(0.3);
        let grad = ginn_loss_grad(&t, &g, &p, s).unwrap();
        for i in 0..3 {
            let mut hi = p;
            let mut lo = p;
            hi[i] += 1e-6;
            lo[i] -= 1e-6;
            let fd = (ginn_loss(&t, &g, &hi, s).unwrap() - ginn_loss(&t, &g, &lo, s).unwrap()) / 2e-6;
            assert!((fd - grad[i]).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn convex_combination_and_linearity(
            rows in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..20),
            l in 0.0f64..=1.0,
        ) {
            let t: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let g: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let p: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let mt = mse(&t, &p).unwrap();
            let mg = mse(&g, &p).unwrap();
            let loss = ginn_loss(&t, &g, &p, spec(l)).unwrap();
            let tol = 1e-12 * (1.0 + mt.max(mg));
            prop_assert!(loss >= mt.min(mg) - tol && loss <= mt.max(mg) + tol);
            let l0 = ginn_loss(&t, &g, &p, spec(0.0)).unwrap();
            let l1 = ginn_loss(&t, &g, &p, spec(1.0)).unwrap();
            prop_assert!((loss - (l * l1 + (1.0 - l) * l0)).abs() <= tol);
        }
    }
}
