//! Bessel function of the first kind, order one.
//!
//! Ascending series for |x| <= 12, Hankel asymptotic expansion beyond.

use std::f64::consts::PI;

const SPLIT: f64 = 12.0;

/// J_1(x).
pub fn j1(x: f64) -> f64 {
    let a = x.abs();
    let v = if a <= SPLIT { series(a) } else { asymptotic(a) };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// `2 J_1(x) / x`, equal to 1 at x = 0.
pub fn jinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        // 1 - x^2/8 + x^4/192
        let x2 = x * x;
        1.0 - x2 / 8.0 + x2 * x2 / 192.0
    } else {
        2.0 * j1(x) / x
    }
}

fn series(x: f64) -> f64 {
    let h = 0.5 * x;
    let h2 = h * h;
    let mut term = h;
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= -h2 / (k * (k + 1.0));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) || k > 80.0 {
            break;
        }
    }
    sum
}

fn asymptotic(x: f64) -> f64 {
    // a_k = prod_{j=1..k} (mu - (2j-1)^2) / (k! 8^k), mu = 4
    let mu = 4.0;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for k in 0..60 {
        let term = a / x.powi(k);
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        // P collects even k, Q odd k, with alternating signs in pairs
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if term.abs() < 1e-17 {
            break;
        }
        let j = (k + 1) as f64;
        a *= (mu - (2.0 * j - 1.0).powi(2)) / (j * 8.0);
    }
    let chi = x - 0.75 * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}
