use super::levels::LevelRange;
use super::state::{QuantKind, QuantizerState};
use crate::autodiff::Tensor;
use crate::error::{MqatError, Result};

/// LSQ gradient scale `1/√(N·Q_P)`.
pub fn grad_scale(n_weights: usize, range: LevelRange) -> f32 {
    (1.0 / ((n_weights as f64) * range.pos as f64).sqrt()) as f32
}

/// Forward value of the LSQ fake quantizer.
///
/// The differentiable version lives on the tape
/// ([`Tape::fake_quant`](crate::autodiff::Tape::fake_quant)).
pub fn fake_quant_lsq(w: &Tensor, state: &QuantizerState) -> Result<Tensor> {
    if state.kind != QuantKind::Lsq {
        return Err(MqatError::invalid(format!(
            "fake_quant_lsq on a `{}` layer",
            state.kind.as_str()
        )));
    }
    quantize_tensor(w, state.range()?, state.scale)
}

/// `clamp(round(w/s))·s` elementwise.
pub fn quantize_tensor(w: &Tensor, range: LevelRange, step: f32) -> Result<Tensor> {
    if !(step > 0.0) {
        return Err(MqatError::invalid(format!(
            "step size {step} must be positive"
        )));
    }
    Ok(w.map(|v| range.quantize(v, step)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    fn lsq_state(bits: u8, scale: f32) -> QuantizerState {
        QuantizerState {
            kind: QuantKind::Lsq,
            bits,
            scale,
            ..QuantizerState::full_precision()
        }
    }

    #[test]
    fn grid_values_are_fixed_points() {
        let s = 0.37f32;
        let w = Tensor::new([5], (-2..=2).map(|k| k as f32 * s).collect()).unwrap();
        assert_eq!(fake_quant_lsq(&w, &lsq_state(3, s)).unwrap(), w);
    }

    #[test]
    fn rejects_non_lsq_state_and_bad_step() {
        let w = Tensor::scalar(0.3);
        assert!(fake_quant_lsq(&w, &QuantizerState::full_precision()).is_err());
        assert!(fake_quant_lsq(&w, &lsq_state(2, 0.0)).is_err());
    }

    #[test]
    fn step_gradient_follows_lsq_rule() {
        // w = [0.3, 5.0], s = 1, b = 2: inside → (0 − 0.3), outside → 1.
        let mut tape = Tape::new();
        let range = LevelRange::new(2).unwrap();
        let w = tape.leaf(Tensor::new([1, 2], vec![0.3, 5.0]).unwrap());
        let s = tape.leaf(Tensor::scalar(1.0));
        let q = tape.fake_quant(w, s, range, 0.5).unwrap();
        let zero = tape.constant(Tensor::new([1, 2], vec![0.0, 0.0]).unwrap());
        // mse = (q0² + q1²)/2 → dq = q = [0, 1]
        let loss = tape.mse(q, zero).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[0.0, 0.0]);
        let ds = g.get(s).unwrap().item().unwrap();
        assert!((ds - 0.5 * (0.0 * -0.3 + 1.0 * 1.0)).abs() < 1e-7, "{ds}");
    }

    #[test]
    fn gradient_scale_formula() {
        let r = LevelRange::new(4).unwrap();
        assert!((grad_scale(28, r) - 1.0 / 14.0).abs() < 1e-7);
    }
}
