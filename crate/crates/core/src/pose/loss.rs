use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{MqatError, Result};
use crate::metrics::{add_error, adi_error, MetricSet, Pose};

use super::dataset::PoseSample;
use super::model::{features, ModularModel, OUTPUT_DIM};

/// Weight of the squared translation error.
pub const TRANSLATION_WEIGHT: f64 = 1.0;

/// Geodesic rotation distance plus weighted squared translation error for
/// one prediction `[qw, qx, qy, qz, tx, ty, tz]`.
pub fn pose_loss(pred: &[f32], sample: &PoseSample) -> Result<f64> {
    if pred.len() != OUTPUT_DIM {
        return Err(MqatError::shape(
            "pose_loss",
            format!(
                "prediction has {} components, expected {OUTPUT_DIM}",
                pred.len()
            ),
        ));
    }
    let p: Vec<f64> = pred[..4].iter().map(|&v| v as f64).collect();
    let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(pn > 1e-12) {
        return Err(MqatError::invalid(
            "pose_loss: predicted quaternion has zero norm",
        ));
    }
    let q: Vec<f64> = sample.gt_rotation.iter().map(|&v| v as f64).collect();
    let qn = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let d: f64 = p.iter().zip(&q).map(|(a, b)| (a / pn) * (b / qn)).sum();
    let angle = 2.0 * d.abs().min(1.0).acos();
    let trans: f64 = pred[4..]
        .iter()
        .zip(&sample.gt_translation)
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum();
    Ok(angle + TRANSLATION_WEIGHT * trans)
}

/// Batch-mean pose loss recorded on the tape.
pub fn batch_loss(tape: &mut Tape, output: Var, samples: &[&PoseSample]) -> Result<Var> {
    let rows = samples.len();
    let mut q = Vec::with_capacity(rows * 4);
    let mut t = Vec::with_capacity(rows * 3);
    for s in samples {
        q.extend_from_slice(&s.gt_rotation);
        t.extend_from_slice(&s.gt_translation);
    }
    let gt_q = tape.constant(Tensor::new([rows, 4], q)?);
    let gt_t = tape.constant(Tensor::new([rows, 3], t)?);
    let pred_q = tape.slice_cols(output, 0, 4)?;
    let pred_t = tape.slice_cols(output, 4, OUTPUT_DIM)?;
    let rot = tape.quat_geodesic(pred_q, gt_q)?;
    // mean over B·3 elements ×3 = mean squared translation norm
    let mse = tape.mse(pred_t, gt_t)?;
    let trans = tape.scale(mse, (3.0 * TRANSLATION_WEIGHT) as f32)?;
    tape.add(rot, trans)
}

/// Decodes a prediction row into a pose; `None` for a degenerate quaternion.
pub fn decode_pose(row: &[f32]) -> Option<Pose> {
    let q = [row[0], row[1], row[2], row[3]].map(f64::from);
    let t = [row[4], row[5], row[6]].map(f64::from);
    Pose::from_quaternion(q, t).ok()
}

/// Per-sample (ADD, ADI) errors; degenerate predictions count as infinite.
pub fn pose_errors(model: &ModularModel, samples: &[PoseSample]) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(512) {
        let refs: Vec<&PoseSample> = chunk.iter().collect();
        let pred = model.predict(&features(&refs)?)?;
        for (i, s) in chunk.iter().enumerate() {
            let gq = s.gt_rotation.map(f64::from);
            let gt = Pose::from_quaternion(gq, s.gt_translation.map(f64::from))?;
            match decode_pose(pred.row(i)) {
                Some(est) => out.push((
                    add_error(&est, &gt, &s.vertices)?,
                    adi_error(&est, &gt, &s.vertices)?,
                )),
                None => out.push((f64::INFINITY, f64::INFINITY)),
            }
        }
    }
    Ok(out)
}

/// ADD/ADI accuracies of `model` on `samples`, labelled with `split`.
pub fn evaluate(model: &ModularModel, samples: &[PoseSample], split: &str) -> Result<MetricSet> {
    let errs = pose_errors(model, samples)?;
    let add: Vec<f64> = errs.iter().map(|e| e.0).collect();
    let adi: Vec<f64> = errs.iter().map(|e| e.1).collect();
    let diam: Vec<f64> = samples.iter().map(|s| s.diameter as f64).collect();
    MetricSet::from_errors(&add, &adi, &diam, split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::generate_dataset;

    fn sample() -> PoseSample {
        generate_dataset(3, 1, 0.0).unwrap().remove(0)
    }

    fn exact_pred(s: &PoseSample) -> Vec<f32> {
        s.gt_rotation
            .iter()
            .chain(&s.gt_translation)
            .copied()
            .collect()
    }

    #[test]
    fn perfect_prediction_is_zero() {
        let s = sample();
        assert!(pose_loss(&exact_pred(&s), &s).unwrap() < 1e-3);
    }

    #[test]
    fn antipodal_quaternion_same_loss() {
        let s = sample();
        let mut p = exact_pred(&s);
        p[0] += 0.2;
        p[6] += 0.1;
        let mut neg = p.clone();
        for v in &mut neg[..4] {
            *v = -*v;
        }
        assert_eq!(pose_loss(&p, &s).unwrap(), pose_loss(&neg, &s).unwrap());
    }

    #[test]
    fn quarter_turn_about_z() {
        let mut s = sample();
        s.gt_rotation = [1.0, 0.0, 0.0, 0.0];
        let h = std::f32::consts::FRAC_1_SQRT_2;
        let mut p = vec![h, 0.0, 0.0, h];
        p.extend_from_slice(&s.gt_translation);
        let l = pose_loss(&p, &s).unwrap();
        assert!((l - std::f64::consts::FRAC_PI_2).abs() < 1e-5, "{l}");
    }

    #[test]
    fn rejects_zero_quaternion_and_short_prediction() {
        let s = sample();
        assert!(pose_loss(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.0], &s).is_err());
        assert!(pose_loss(&[1.0; 6], &s).is_err());
    }

    #[test]
    fn tape_loss_matches_scalar_loss() {
        let data = generate_dataset(9, 4, 1.0).unwrap();
        let preds: Vec<Vec<f32>> = data
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut p = exact_pred(s);
                p[1] += 0.1 * i as f32;
                p[5] -= 0.05;
                p
            })
            .collect();
        let expected: f64 = data
            .iter()
            .zip(&preds)
            .map(|(s, p)| pose_loss(p, s).unwrap())
            .sum::<f64>()
            / 4.0;
        let mut tape = Tape::new();
        let out = tape.leaf(Tensor::from_rows(&preds).unwrap());
        let refs: Vec<&PoseSample> = data.iter().collect();
        let l = batch_loss(&mut tape, out, &refs).unwrap();
        assert!((tape.value(l).item().unwrap() as f64 - expected).abs() < 1e-5);
    }
}
