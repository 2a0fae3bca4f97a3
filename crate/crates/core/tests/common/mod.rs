//! Special functions shared by the closed-form oracles.

#![allow(dead_code)]

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Composite Simpson on `[0, x]` for a smooth integrand.
pub fn simpson(f: impl Fn(f64) -> f64, x: f64, n: usize) -> f64 {
    let h = x / n as f64;
    let mut s = f(0.0) + f(x);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

/// Sine integral.
pub fn si(x: f64) -> f64 {
    simpson(|t| if t == 0.0 { 1.0 } else { t.sin() / t }, x, 20_000)
}

/// Cosine integral, x > 0.
pub fn ci(x: f64) -> f64 {
    EULER_GAMMA + x.ln() + simpson(|t| if t == 0.0 { 0.0 } else { (t.cos() - 1.0) / t }, x, 20_000)
}
