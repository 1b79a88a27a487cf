use alloc::format;

use crate::{Error, Result};

/// Clamp applied to the target probability before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

const NORMALIZATION_TOLERANCE: f64 = 1e-6;

fn validate(probs: &[f64; 2], target: usize) -> Result<()> {
    if target > 1 {
        return Err(Error::Contract(format!(
            "target class {target} is not 0 or 1"
        )));
    }
    let sum = probs[0] + probs[1];
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0)
        || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE
    {
        return Err(Error::Contract(format!(
            "probabilities {probs:?} are not a distribution"
        )));
    }
    Ok(())
}

/// Negative log-likelihood of `target` under a two-class distribution.
pub fn nll_loss(probs: [f64; 2], target: usize) -> Result<f64> {
    validate(&probs, target)?;
    Ok(-libm::log(probs[target].max(PROB_FLOOR)))
}

/// Gradient of [`nll_loss`] with respect to `probs`.
pub fn nll_backward(probs: [f64; 2], target: usize) -> Result<[f64; 2]> {
    validate(&probs, target)?;
    let mut grad = [0.0; 2];
    grad[target] = -1.0 / probs[target].max(PROB_FLOOR);
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(nll_loss([1.0, 0.0], 0).unwrap(), 0.0);
        assert!((nll_loss([0.5, 0.5], 1).unwrap() - core::f64::consts::LN_2).abs() < 1e-15);
        assert!((nll_loss([1.0, 0.0], 1).unwrap() - 27.631021115928547).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let h = 1e-6;
        let analytic = nll_backward([0.3, 0.7], 1).unwrap();
        // perturb the target entry only; the loss does not read the other entry
        let f = |p: f64| -libm::log(p);
        let numeric = (f(0.7 + h) - f(0.7 - h)) / (2.0 * h);
        assert!(((analytic[1] - numeric) / numeric).abs() < 1e-4);
        assert_eq!(analytic[0], 0.0);
    }

    #[test]
    fn rejects_non_distributions() {
        assert!(matches!(nll_loss([0.5, 0.6], 0), Err(Error::Contract(_))));
        assert!(nll_loss([-0.1, 1.1], 0).is_err());
        assert!(nll_loss([0.5, 0.5], 2).is_err());
        assert!(nll_loss([0.5, 0.5 + 5e-7], 0).is_ok());
    }
}
