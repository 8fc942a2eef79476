//! Deterministic synthetic pose samples: a unit cube seen by a pinhole camera.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{MqatError, Result};
use crate::metrics::{quat_to_matrix, Mat3};

pub const FOCAL_PX: f64 = 500.0;
pub const PRINCIPAL_POINT: [f64; 2] = [0.0, 0.0];
pub const TRANSLATION_XY: (f64, f64) = (-0.5, 0.5);
pub const TRANSLATION_Z: (f64, f64) = (2.0, 6.0);

/// Unit cube: 8 corners then 6 face centers (V = 14).
pub fn cube_vertices() -> Vec<[f32; 3]> {
    let mut v = Vec::with_capacity(14);
    for &x in &[-0.5f32, 0.5] {
        for &y in &[-0.5f32, 0.5] {
            for &z in &[-0.5f32, 0.5] {
                v.push([x, y, z]);
            }
        }
    }
    for axis in 0..3 {
        for &s in &[-0.5f32, 0.5] {
            let mut c = [0f32; 3];
            c[axis] = s;
            v.push(c);
        }
    }
    v
}

/// Largest pairwise vertex distance.
pub fn mesh_diameter(vertices: &[[f32; 3]]) -> f64 {
    let mut best = 0f64;
    for (i, a) in vertices.iter().enumerate() {
        for b in &vertices[i + 1..] {
            let d = (0..3)
                .map(|k| (a[k] as f64 - b[k] as f64).powi(2))
                .sum::<f64>()
                .sqrt();
            best = best.max(d);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoseSample {
    /// `[u0, v0, u1, v1, …, vis0, vis1, …]`: projected pixels then 0/1 flags.
    pub input: Vec<f32>,
    /// Unit quaternion `(w, x, y, z)`.
    pub gt_rotation: [f32; 4],
    /// Meters.
    pub gt_translation: [f32; 3],
    pub vertices: Vec<[f32; 3]>,
    pub diameter: f32,
}

impl PoseSample {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }
}

/// Uniform rotation on SO(3) via Shoemake's subgroup algorithm.
pub fn random_quaternion<R: Rng + ?Sized>(rng: &mut R) -> [f64; 4] {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = [
        b * (tau * u3).cos(),
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
    ];
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.map(|v| v / n)
}

/// Pinhole projection of a camera-frame point.
pub fn project(p: [f64; 3]) -> [f64; 2] {
    [
        FOCAL_PX * p[0] / p[2] + PRINCIPAL_POINT[0],
        FOCAL_PX * p[1] / p[2] + PRINCIPAL_POINT[1],
    ]
}

fn transform(r: &Mat3, t: [f64; 3], v: [f32; 3]) -> [f64; 3] {
    let v = v.map(f64::from);
    let mut out = t;
    for i in 0..3 {
        for j in 0..3 {
            out[i] += r[i][j] * v[j];
        }
    }
    out
}

/// A vertex is visible when at least one cube face containing it faces the
/// camera.
fn cube_visibility(r: &Mat3, t: [f64; 3], vertices: &[[f32; 3]]) -> Vec<bool> {
    let mut faces = Vec::with_capacity(6);
    for axis in 0..3 {
        for &s in &[-0.5f32, 0.5] {
            let mut c = [0f32; 3];
            c[axis] = s;
            let center = transform(r, t, c);
            let normal: Vec<f64> = (0..3).map(|i| r[i][axis] * s.signum() as f64).collect();
            let facing = (0..3).map(|i| normal[i] * center[i]).sum::<f64>() < 0.0;
            faces.push((axis, s, facing));
        }
    }
    vertices
        .iter()
        .map(|v| {
            faces
                .iter()
                .any(|&(axis, s, facing)| facing && v[axis] == s)
        })
        .collect()
}

/// Builds one sample from an explicit pose (no noise).
pub fn render_sample(q: [f64; 4], t: [f64; 3], noise: &mut dyn FnMut() -> f64) -> PoseSample {
    let vertices = cube_vertices();
    let r = quat_to_matrix(q);
    let v = vertices.len();
    let mut input = vec![0f32; 3 * v];
    for (i, &vert) in vertices.iter().enumerate() {
        let uv = project(transform(&r, t, vert));
        input[2 * i] = (uv[0] + noise()) as f32;
        input[2 * i + 1] = (uv[1] + noise()) as f32;
    }
    for (i, vis) in cube_visibility(&r, t, &vertices).into_iter().enumerate() {
        input[2 * v + i] = if vis { 1.0 } else { 0.0 };
    }
    let diameter = mesh_diameter(&vertices) as f32;
    PoseSample {
        input,
        gt_rotation: q.map(|x| x as f32),
        gt_translation: t.map(|x| x as f32),
        vertices,
        diameter,
    }
}

/// Sample `index` of the stream rooted at `seed`; independent of other
/// indices.
pub fn generate_sample(seed: u64, index: u64, noise_std: f64) -> Result<PoseSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let q = random_quaternion(&mut rng);
    let t = [
        rng.random_range(TRANSLATION_XY.0..=TRANSLATION_XY.1),
        rng.random_range(TRANSLATION_XY.0..=TRANSLATION_XY.1),
        rng.random_range(TRANSLATION_Z.0..=TRANSLATION_Z.1),
    ];
    let normal = Normal::new(0.0, noise_std)
        .map_err(|e| MqatError::invalid(format!("noise_std {noise_std}: {e}")))?;
    let mut noise = || {
        if noise_std > 0.0 {
            normal.sample(&mut rng)
        } else {
            0.0
        }
    };
    Ok(render_sample(q, t, &mut noise))
}

/// `n` samples; identical arguments give bit-identical output.
pub fn generate_dataset(seed: u64, n: usize, noise_std: f64) -> Result<Vec<PoseSample>> {
    if n == 0 {
        return Err(MqatError::invalid("dataset size must be positive"));
    }
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(MqatError::invalid(format!(
            "noise_std {noise_std} must be finite and >= 0"
        )));
    }
    (0..n as u64)
        .into_par_iter()
        .map(|i| generate_sample(seed, i, noise_std))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_diameter_is_root_three() {
        let v = cube_vertices();
        assert_eq!(v.len(), 14);
        assert!((mesh_diameter(&v) - 3f64.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn same_seed_same_samples() {
        let a = generate_dataset(0, 2, 1.0).unwrap();
        let b = generate_dataset(0, 2, 1.0).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(1, 2, 1.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn quaternions_are_unit() {
        for s in generate_dataset(5, 200, 0.5).unwrap() {
            let n = s
                .gt_rotation
                .iter()
                .map(|&v| (v as f64).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn noiseless_identity_matches_pinhole_oracle() {
        let z = 3.0;
        let s = render_sample([1.0, 0.0, 0.0, 0.0], [0.0, 0.0, z], &mut || 0.0);
        for (i, v) in cube_vertices().iter().enumerate() {
            let (x, y, vz) = (v[0] as f64, v[1] as f64, v[2] as f64 + z);
            let u = 500.0 * x / vz;
            let w = 500.0 * y / vz;
            assert!((s.input[2 * i] as f64 - u).abs() < 1e-4);
            assert!((s.input[2 * i + 1] as f64 - w).abs() < 1e-4);
        }
        // Only the face pointing at the camera (-z) is visible head-on.
        let vis = &s.input[28..];
        for (i, v) in cube_vertices().iter().enumerate() {
            assert_eq!(vis[i] == 1.0, v[2] == -0.5, "vertex {i}");
        }
    }

    #[test]
    fn rejects_empty_dataset() {
        assert!(generate_dataset(0, 0, 0.0).is_err());
    }
}
