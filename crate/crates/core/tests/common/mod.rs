//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seagull::datagen::Point9;
use seagull::Tensor;

pub fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Half the length of `(v − u) × (w − u)`.
pub fn area_cross_product(p: &Point9) -> f64 {
    0.5 * norm(cross(sub(p.v, p.u), sub(p.w, p.u)))
}

/// Great-circle distance between unit vectors, stable for small angles.
fn arc(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm(cross(a, b)).atan2(dot(a, b))
}

/// Spherical excess by L'Huilier's theorem:
/// `tan(E/4) = sqrt(tan(s/2) tan((s−a)/2) tan((s−b)/2) tan((s−c)/2))`.
pub fn solid_angle_lhuilier(p: &Point9) -> f64 {
    let a = arc(p.v, p.w);
    let b = arc(p.w, p.u);
    let c = arc(p.u, p.v);
    let s = 0.5 * (a + b + c);
    let t = (0.5 * s).tan() * (0.5 * (s - a)).tan() * (0.5 * (s - b)).tan() * (0.5 * (s - c)).tan();
    4.0 * t.max(0.0).sqrt().atan()
}

pub fn uniform_points(n: usize, seed: u64, half_width: f64) -> Vec<Point9> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..9).map(|_| rng.random_range(-half_width..half_width)).collect();
            Point9::from_slice(&x)
        })
        .collect()
}

pub fn uniform_tensor(rows: usize, cols: usize, seed: u64, half_width: f64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| rng.random_range(-half_width..half_width)).collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}
