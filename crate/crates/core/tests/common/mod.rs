#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random SPD matrix AᵀA/n + 0.1·I and right-hand side with mixed signs.
pub fn spd_fixture(seed: u64, n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut k = a.transpose() * &a / n as f64 + DMatrix::identity(n, n) * 0.1;
    // exact symmetry
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    (k, b)
}

/// Exact NNQP minimizer by trying every active set.
pub fn enumerate_nnqp(k: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let mut w = vec![0.0; n];
        if !idx.is_empty() {
            let m = idx.len();
            let sub = DMatrix::from_fn(m, m, |a, c| k[(idx[a], idx[c])]);
            let rhs = DVector::from_fn(m, |a, _| b[idx[a]]);
            let Some(z) = sub.lu().solve(&rhs) else { continue };
            if z.iter().any(|x| *x < 0.0) {
                continue;
            }
            for (a, &i) in idx.iter().enumerate() {
                w[i] = z[a];
            }
        }
        let wv = DVector::from_column_slice(&w);
        let g = k * &wv - DVector::from_column_slice(b);
        if (0..n).any(|i| w[i] == 0.0 && g[i] < -1e-12) {
            continue;
        }
        let f = 0.5 * wv.dot(&(k * &wv)) - wv.dot(&DVector::from_column_slice(b));
        if best.as_ref().is_none_or(|(fb, _)| f < *fb) {
            best = Some((f, w));
        }
    }
    best.expect("a KKT point exists for SPD matrices").1
}
