//! ADD / ADI pose errors and thresholded accuracies.

use serde::{Deserialize, Serialize};

use crate::error::{MqatError, Result};

pub type Mat3 = [[f64; 3]; 3];

/// Rotation matrix of a quaternion `(w, x, y, z)`; the input is normalized.
pub fn quat_to_matrix(q: [f64; 4]) -> Mat3 {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v / n);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

fn det(r: &Mat3) -> f64 {
    r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
        - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
}

/// Rigid transform `x ↦ R·x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    rotation: Mat3,
    translation: [f64; 3],
}

impl Pose {
    /// Validates `det(R) = 1` and `RᵀR = I` within 1e-5.
    pub fn new(rotation: Mat3, translation: [f64; 3]) -> Result<Self> {
        if (det(&rotation) - 1.0).abs() > 1e-5 {
            return Err(MqatError::invalid(format!(
                "rotation determinant {} is not 1",
                det(&rotation)
            )));
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| rotation[k][i] * rotation[k][j]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (dot - expected).abs() > 1e-5 {
                    return Err(MqatError::invalid("rotation matrix is not orthonormal"));
                }
            }
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_quaternion(q: [f64; 4], translation: [f64; 3]) -> Result<Self> {
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(n > 1e-12) || !n.is_finite() {
            return Err(MqatError::invalid("quaternion has zero or non-finite norm"));
        }
        Self::new(quat_to_matrix(q), translation)
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> [f64; 3] {
        self.translation
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let mut out = self.translation;
        for (i, o) in out.iter_mut().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                *o += self.rotation[i][j] * vj;
            }
        }
        out
    }

    /// `other ∘ self`: apply `self` first.
    pub fn then(&self, other: &Pose) -> Pose {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3)
                    .map(|k| other.rotation[i][k] * self.rotation[k][j])
                    .sum();
            }
        }
        Pose {
            rotation: r,
            translation: other.apply(self.translation),
        }
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn transformed(pose: &Pose, vertices: &[[f32; 3]]) -> Vec<[f64; 3]> {
    vertices
        .iter()
        .map(|v| pose.apply(v.map(f64::from)))
        .collect()
}

/// Mean distance between corresponding transformed vertices.
pub fn add_error(est: &Pose, gt: &Pose, vertices: &[[f32; 3]]) -> Result<f64> {
    if vertices.is_empty() {
        return Err(MqatError::invalid("ADD needs at least one vertex"));
    }
    let sum: f64 = transformed(est, vertices)
        .into_iter()
        .zip(transformed(gt, vertices))
        .map(|(a, b)| dist(a, b))
        .sum();
    Ok(sum / vertices.len() as f64)
}

/// Mean distance from each estimated vertex to its nearest ground-truth
/// vertex.
pub fn adi_error(est: &Pose, gt: &Pose, vertices: &[[f32; 3]]) -> Result<f64> {
    if vertices.is_empty() {
        return Err(MqatError::invalid("ADI needs at least one vertex"));
    }
    let gt_pts = transformed(gt, vertices);
    let sum: f64 = transformed(est, vertices)
        .into_iter()
        .map(|p| {
            gt_pts
                .iter()
                .map(|&g| dist(p, g))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(sum / vertices.len() as f64)
}

/// Fraction of errors strictly below `frac·diameter`.
pub fn threshold_accuracy(errors: &[f64], diameter: f64, frac: f64) -> Result<f64> {
    if !(diameter > 0.0) {
        return Err(MqatError::invalid(format!(
            "diameter {diameter} must be positive"
        )));
    }
    if errors.is_empty() {
        return Ok(0.0);
    }
    let thr = frac * diameter;
    let hits = errors.iter().filter(|&&e| e < thr).count();
    Ok(hits as f64 / errors.len() as f64)
}

/// A named accuracy value: which metric, on which split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub metric: String,
    pub split: String,
    pub value: f64,
}

/// The four thresholded accuracies reported for every evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub add_01d: Accuracy,
    pub add_05d: Accuracy,
    pub adi_01d: Accuracy,
    pub adi_05d: Accuracy,
}

impl MetricSet {
    /// Thresholds per-sample errors against each sample's diameter.
    pub fn from_errors(add: &[f64], adi: &[f64], diameters: &[f64], split: &str) -> Result<Self> {
        let acc = |errs: &[f64], frac: f64, name: &str| -> Result<Accuracy> {
            let mut hits = 0usize;
            for (e, d) in errs.iter().zip(diameters) {
                hits += threshold_accuracy(&[*e], *d, frac)? as usize;
            }
            Ok(Accuracy {
                metric: name.to_string(),
                split: split.to_string(),
                value: if errs.is_empty() {
                    0.0
                } else {
                    hits as f64 / errs.len() as f64
                },
            })
        };
        Ok(Self {
            add_01d: acc(add, 0.1, "ADD-0.1d")?,
            add_05d: acc(add, 0.5, "ADD-0.5d")?,
            adi_01d: acc(adi, 0.1, "ADI-0.1d")?,
            adi_05d: acc(adi, 0.5, "ADI-0.5d")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> Vec<[f32; 3]> {
        crate::pose::cube_vertices()
    }

    fn identity() -> Pose {
        Pose::from_quaternion([1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 3.0]).unwrap()
    }

    #[test]
    fn identical_poses_have_zero_error() {
        let p = Pose::from_quaternion([0.3, -0.2, 0.9, 0.1], [0.1, 0.2, 4.0]).unwrap();
        assert_eq!(add_error(&p, &p, &cube()).unwrap(), 0.0);
        assert_eq!(adi_error(&p, &p, &cube()).unwrap(), 0.0);
    }

    #[test]
    fn pure_shift_gives_shift_norm() {
        let gt = identity();
        let est = Pose::new(*gt.rotation(), [0.03, -0.04, 3.0]).unwrap();
        assert!((add_error(&est, &gt, &cube()).unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn empty_vertices_rejected() {
        let p = identity();
        assert!(add_error(&p, &p, &[]).is_err());
        assert!(adi_error(&p, &p, &[]).is_err());
    }

    #[test]
    fn symmetric_rotation_zeroes_adi_only() {
        // 90° about z maps the cube onto itself.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let gt = identity();
        let est = Pose::from_quaternion([h, 0.0, 0.0, h], [0.0, 0.0, 3.0]).unwrap();
        assert!(adi_error(&est, &gt, &cube()).unwrap() < 1e-7);
        assert!(add_error(&est, &gt, &cube()).unwrap() > 0.3);
    }

    #[test]
    fn threshold_counts() {
        let d = 2.0;
        let errs = [0.05 * d, 0.2 * d, 0.6 * d];
        assert!((threshold_accuracy(&errs, d, 0.1).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((threshold_accuracy(&errs, d, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(threshold_accuracy(&[0.0, 0.0], d, 0.1).unwrap(), 1.0);
        assert!(threshold_accuracy(&errs, 0.0, 0.1).is_err());
    }

    #[test]
    fn rejects_improper_rotation() {
        let mirror = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]];
        assert!(Pose::new(mirror, [0.0; 3]).is_err());
        let skew = [[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(Pose::new(skew, [0.0; 3]).is_err());
    }
}
