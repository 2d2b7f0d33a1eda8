//! Shared helpers for the integration and acceptance tests.
#![allow(dead_code)]

use rand::Rng;

const UNARY: [&str; 6] = ["sin", "cos", "exp", "log", "sqrt", "abs"];
const EXPONENTS: [&str; 5] = ["2", "3", "-1", "0.5", "1.5"];

/// Random expression text of depth at most `depth` over `t, x1..xm, v1..vm`.
pub fn random_expression<R: Rng>(rng: &mut R, dim: usize, depth: usize) -> String {
    if depth == 0 || rng.random_bool(0.2) {
        return match rng.random_range(0..4) {
            0 => "t".to_string(),
            1 => format!("x{}", rng.random_range(1..=dim)),
            2 => format!("v{}", rng.random_range(1..=dim)),
            _ => format!("{:.3}", rng.random_range(-2.0..2.0)),
        };
    }
    let sub = |rng: &mut R| random_expression(rng, dim, depth - 1);
    match rng.random_range(0..9) {
        0 => format!("({} + {})", sub(rng), sub(rng)),
        1 => format!("({} - {})", sub(rng), sub(rng)),
        2 | 3 => format!("({} * {})", sub(rng), sub(rng)),
        4 => format!("({} / {})", sub(rng), sub(rng)),
        5 => format!("({})^{}", sub(rng), EXPONENTS[rng.random_range(0..EXPONENTS.len())]),
        6 => format!("-({})", sub(rng)),
        _ => format!("{}({})", UNARY[rng.random_range(0..UNARY.len())], sub(rng)),
    }
}

/// Uniform point in `[-1.5, 1.5]^(1 + 2m)`.
pub fn random_point<R: Rng>(rng: &mut R, dim: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let mut c = || rng.random_range(-1.5..1.5);
    let t = c();
    let x = (0..dim).map(|_| c()).collect();
    let v = (0..dim).map(|_| c()).collect();
    (t, x, v)
}

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
