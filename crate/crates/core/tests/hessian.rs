//! Finite-difference HVPs and the Hutchinson estimator.

use mqat::autodiff::{default_eps, hvp_fd, Tape, Tensor};
use mqat::pose::{build_model, cube_vertices, generate_dataset, ArchConfig};
use mqat::sensitivity::{hutchinson_trace, model_sensitivities};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Symmetric matrix with a dominant positive diagonal.
fn spd(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = vec![vec![0f64; n]; n];
    for i in 0..n {
        for j in 0..i {
            let v = rng.random_range(-0.3..0.3);
            a[i][j] = v;
            a[j][i] = v;
        }
        a[i][i] = rng.random_range(1.0..4.0);
    }
    a
}

fn quadratic_grad(a: &[Vec<f64>]) -> impl Fn(&[f32]) -> mqat::Result<Vec<f32>> + '_ {
    move |w: &[f32]| {
        Ok(a.iter()
            .map(|row| row.iter().zip(w).map(|(x, &y)| x * y as f64).sum::<f64>() as f32)
            .collect())
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(-1f32..1.0)).collect()
}

#[test]
fn hvp_of_quadratic_is_exact_and_symmetric() {
    let a = spd(12, 1);
    let g = quadratic_grad(&a);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = random_vec(&mut rng, 12);
    let (u, v) = (random_vec(&mut rng, 12), random_vec(&mut rng, 12));
    let hv = hvp_fd(&g, &w, &v, default_eps(&w)).unwrap();
    let hu = hvp_fd(&g, &w, &u, default_eps(&w)).unwrap();
    for (i, row) in a.iter().enumerate() {
        let expect: f64 = row.iter().zip(&v).map(|(x, &y)| x * y as f64).sum();
        assert!(
            (hv[i] as f64 - expect).abs() < 1e-2 * (1.0 + expect.abs()),
            "row {i}"
        );
    }
    let (uhv, vhu) = (dot(&u, &hv), dot(&v, &hu));
    assert!(
        (uhv - vhu).abs() < 1e-2 * (1.0 + uhv.abs()),
        "{uhv} vs {vhu}"
    );
}

/// Smooth tape-built loss (no ReLU kinks inside the stencil).
fn smooth_grad(x: &Tensor, target: &Tensor, w: &[f32]) -> mqat::Result<Vec<f32>> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let wv = tape.leaf(Tensor::new([3, 4], w.to_vec())?);
    let tv = tape.constant(target.clone());
    let h = tape.matmul(xv, wv)?;
    let n = tape.l2_normalize(h)?;
    let geo = tape.quat_geodesic(h, tv)?;
    let m = tape.mse(n, tv)?;
    let s = tape.scale(geo, 0.5)?;
    let loss = tape.add(m, s)?;
    Ok(tape.backward(loss)?.get(wv).unwrap().data().to_vec())
}

#[test]
fn hvp_of_smooth_loss_is_symmetric() {
    let x = Tensor::from_rows(&[
        vec![0.5, -0.3, 0.9],
        vec![0.2, 0.7, -0.4],
        vec![-0.6, 0.1, 0.3],
    ])
    .unwrap();
    let target = Tensor::from_rows(&[
        vec![0.5, 0.5, 0.5, 0.5],
        vec![0.0, 0.6, 0.8, 0.0],
        vec![0.8, 0.0, 0.0, 0.6],
    ])
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let w = random_vec(&mut rng, 12);
        let g = |v: &[f32]| smooth_grad(&x, &target, v);
        let (u, v) = (random_vec(&mut rng, 12), random_vec(&mut rng, 12));
        let eps = 1e-2;
        let uhv = dot(&u, &hvp_fd(g, &w, &v, eps).unwrap());
        let vhu = dot(&v, &hvp_fd(g, &w, &u, eps).unwrap());
        let scale = uhv.abs().max(vhu.abs()).max(1e-2);
        assert!((uhv - vhu).abs() / scale < 1e-2, "{uhv} vs {vhu}");
    }
}

#[test]
fn hutchinson_on_diagonal_hessians_within_ten_percent() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = 50;
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        let exact = d.iter().sum::<f64>() / n as f64;
        let g = |w: &[f32]| {
            Ok(w.iter()
                .zip(&d)
                .map(|(&x, &h)| (x as f64 * h) as f32)
                .collect())
        };
        let w = random_vec(&mut rng, n);
        let est = hutchinson_trace(g, &w, 1000, &mut rng).unwrap();
        assert!(
            (est - exact).abs() <= 0.1 * exact,
            "seed {seed}: {est} vs {exact}"
        );
    }
}

#[test]
fn hutchinson_on_dense_hessian_converges() {
    for seed in 0..20u64 {
        let a = spd(30, 200 + seed);
        let exact = (0..30).map(|i| a[i][i]).sum::<f64>() / 30.0;
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let w = random_vec(&mut rng, 30);
        let est = hutchinson_trace(quadratic_grad(&a), &w, 1000, &mut rng).unwrap();
        assert!(
            (est - exact).abs() <= 0.1 * exact,
            "seed {seed}: {est} vs {exact}"
        );
    }
}

#[test]
fn negative_curvature_is_clamped() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = |w: &[f32]| Ok(w.iter().map(|&x| -2.0 * x).collect());
    let w = random_vec(&mut rng, 10);
    assert_eq!(hutchinson_trace(g, &w, 10, &mut rng).unwrap(), 0.0);
}

#[test]
fn sensitivities_are_reproducible_and_nonnegative() {
    let arch = ArchConfig {
        backbone: vec![8],
        aggregator: vec![4],
        head: vec![6],
    };
    let model = build_model(&arch, &cube_vertices(), 2).unwrap();
    let data = generate_dataset(7, 16, 1.0).unwrap();
    let a = model_sensitivities(&model, &data, 4, 11).unwrap();
    let b = model_sensitivities(&model, &data, 4, 11).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), model.layers().len());
    assert!(a.values().all(|&v| v >= 0.0 && v.is_finite()));
}
