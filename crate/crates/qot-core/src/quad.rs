//! Gauss–Legendre and Gauss–Hermite nodes and weights.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::fmath;

/// Gauss–Legendre nodes and weights on [-1, 1].
///
/// Newton iteration on the Legendre recurrence; standard cosine initial
/// guesses. Deterministic for a given `n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = fmath::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut pp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n, p0 = P_{n-1}
            pp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n == 1 {
        nodes[0] = 0.0;
        weights[0] = 2.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre nodes and weights mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|&t| mid + half * t).collect(),
        w.iter().map(|&wi| wi * half).collect(),
    )
}

/// Gauss–Hermite nodes and weights for ∫ e^{-t²} f(t) dt.
///
/// Orthonormal physicists' Hermite recurrence with the usual asymptotic
/// initial guesses, refined by Newton.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    let nf = n as f64;
    let mut x = 0.0_f64;
    for i in 0..m {
        x = match i {
            0 => fmath::sqrt(2.0 * nf + 1.0) - 1.85575 * fmath::powf(2.0 * nf + 1.0, -1.0 / 6.0),
            1 => x - 1.14 * fmath::powf(nf, 0.426) / x,
            2 => 1.86 * x - 0.86 * nodes[0],
            3 => 1.91 * x - 0.91 * nodes[1],
            _ => 2.0 * x - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            // Orthonormal Hermite: h_0 = π^{-1/4},
            // h_{k+1} = x √(2/(k+1)) h_k − √(k/(k+1)) h_{k-1}.
            let mut p1 = fmath::powf(PI, -0.25);
            let mut p2 = 0.0;
            for k in 0..n {
                let kf = k as f64;
                let p3 = p2;
                p2 = p1;
                p1 = x * fmath::sqrt(2.0 / (kf + 1.0)) * p2 - fmath::sqrt(kf / (kf + 1.0)) * p3;
            }
            // p1 = h_n, p2 = h_{n-1}
            pp = fmath::sqrt(2.0 * nf) * p2;
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-14 {
                break;
            }
        }
        // Largest root first; store symmetric pair.
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        let w = 2.0 / (pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
