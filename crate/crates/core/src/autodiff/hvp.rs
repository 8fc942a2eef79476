use crate::error::{MqatError, Result};

/// Scale-aware default finite-difference step, `1e-3·(1 + ‖w‖∞)`.
pub fn default_eps(weights: &[f32]) -> f32 {
    let max = weights.iter().fold(0f32, |m, &w| m.max(w.abs()));
    1e-3 * (1.0 + max)
}

/// Hessian-vector product by central differences of the gradient:
/// `(∇L(w+εv) − ∇L(w−εv)) / 2ε`.
///
/// `grad_fn` maps a flat parameter vector to the flat gradient there.
pub fn hvp_fd<F>(mut grad_fn: F, weights: &[f32], v: &[f32], eps: f32) -> Result<Vec<f32>>
where
    F: FnMut(&[f32]) -> Result<Vec<f32>>,
{
    if v.len() != weights.len() {
        return Err(MqatError::shape(
            "hvp_fd",
            format!(
                "direction has {} entries, weights {}",
                v.len(),
                weights.len()
            ),
        ));
    }
    if !(eps > 0.0) {
        return Err(MqatError::invalid(format!(
            "hvp_fd: eps {eps} must be positive"
        )));
    }
    let norm = v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>();
    if !(norm > 0.0) {
        return Err(MqatError::invalid(
            "hvp_fd: direction vector must be non-zero",
        ));
    }
    let probe = |sign: f32| -> Vec<f32> {
        weights
            .iter()
            .zip(v)
            .map(|(&w, &d)| w + sign * eps * d)
            .collect()
    };
    let plus = grad_fn(&probe(1.0))?;
    let minus = grad_fn(&probe(-1.0))?;
    if plus.len() != weights.len() || minus.len() != weights.len() {
        return Err(MqatError::shape(
            "hvp_fd",
            "gradient length differs from weights",
        ));
    }
    if plus.iter().chain(&minus).any(|g| !g.is_finite()) {
        return Err(MqatError::NonFinite {
            context: "gradient at hvp probe point".into(),
        });
    }
    let denom = 2.0 * eps as f64;
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(&p, &m)| ((p as f64 - m as f64) / denom) as f32)
        .collect())
}
