#![allow(dead_code)]

use std::f64::consts::PI;

use flatqed::C64;
use nalgebra::{DMatrix, DVector};

/// `J_n(x) = (1/2π) ∫_0^{2π} cos(nτ − x sin τ) dτ`; the trapezoid rule is
/// spectrally accurate for this periodic integrand.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let m = 4096;
    let h = 2.0 * PI / m as f64;
    (0..m).map(|i| {
        let t = i as f64 * h;
        (n as f64 * t - x * t.sin()).cos()
    })
    .sum::<f64>()
        / m as f64
}

/// Classic RK4 for `dc/dt = −i H c`.
pub fn rk4_schrodinger(h: &DMatrix<C64>, c0: &DVector<C64>, t: f64, steps: usize) -> DVector<C64> {
    let mi = C64::new(0.0, -1.0);
    let f = |c: &DVector<C64>| (h * c) * mi;
    let dt = t / steps as f64;
    let mut c = c0.clone();
    for _ in 0..steps {
        let k1 = f(&c);
        let k2 = f(&(&c + &k1 * C64::new(dt / 2.0, 0.0)));
        let k3 = f(&(&c + &k2 * C64::new(dt / 2.0, 0.0)));
        let k4 = f(&(&c + &k3 * C64::new(dt, 0.0)));
        c += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0);
    }
    c
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
