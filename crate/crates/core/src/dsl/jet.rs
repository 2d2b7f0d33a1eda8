//! Second-order forward-mode arithmetic on the expression tree. A jet carries
//! the value, gradient and (optionally) Hessian over the packed point
//! `(t, x, v)`; each operation applies the first- and second-order chain rule,
//! which is forward-over-forward dual arithmetic written out.

use super::{print, BinOp, Node, UnOp, Var, ABS_KINK, ABS_KINK_MESSAGE};
use crate::error::{Error, Result};
use crate::lcs_model::Vector;

fn domain(node: &Node, value: f64, message: &str) -> Error {
    Error::Domain {
        node: print::to_string(node),
        value,
        message: message.to_string(),
    }
}

pub(super) fn pow_scalar(a: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
        a.powi(p as i32)
    } else {
        a.powf(p)
    }
}

/// `f(a), f'(a), f''(a)` for a unary node, with domain checks.
fn unary_derivs(node: &Node, op: UnOp, a: f64, order: u8) -> Result<[f64; 3]> {
    let d = match op {
        UnOp::Neg => [-a, -1.0, 0.0],
        UnOp::Sin => [a.sin(), a.cos(), -a.sin()],
        UnOp::Cos => [a.cos(), -a.sin(), -a.cos()],
        UnOp::Exp => {
            let e = a.exp();
            [e, e, e]
        }
        UnOp::Log => {
            if a <= 0.0 {
                return Err(domain(node, a, "logarithm of a non-positive argument"));
            }
            [a.ln(), 1.0 / a, -1.0 / (a * a)]
        }
        UnOp::Sqrt => {
            if a < 0.0 {
                return Err(domain(node, a, "square root of a negative argument"));
            }
            let s = a.sqrt();
            [s, 0.5 / s, -0.25 / (s * a)]
        }
        UnOp::Abs => {
            if order > 0 && a.abs() < ABS_KINK {
                return Err(domain(node, a, ABS_KINK_MESSAGE));
            }
            [a.abs(), a.signum(), 0.0]
        }
    };
    check(node, d, order)
}

fn pow_derivs(node: &Node, a: f64, p: f64, order: u8) -> Result<[f64; 3]> {
    let integer = p.fract() == 0.0;
    if a < 0.0 && !integer {
        return Err(domain(node, a, "non-integer power of a negative base"));
    }
    if a == 0.0 && p < 0.0 {
        return Err(domain(node, a, "negative power of zero"));
    }
    let d = [
        pow_scalar(a, p),
        if p == 0.0 { 0.0 } else { p * pow_scalar(a, p - 1.0) },
        if p == 0.0 || p == 1.0 {
            0.0
        } else {
            p * (p - 1.0) * pow_scalar(a, p - 2.0)
        },
    ];
    check(node, d, order)
}

fn check(node: &Node, d: [f64; 3], order: u8) -> Result<[f64; 3]> {
    for (k, x) in d.iter().enumerate().take(order as usize + 1) {
        if !x.is_finite() {
            let what = ["value", "first derivative", "second derivative"][k];
            return Err(domain(node, *x, &format!("{what} is not finite")));
        }
    }
    Ok(d)
}

fn var_value(var: Var, t: f64, x: &Vector, v: &Vector) -> f64 {
    match var {
        Var::T => t,
        Var::X(i) => x[i - 1],
        Var::V(i) => v[i - 1],
    }
}

pub(super) fn eval_value(node: &Node, t: f64, x: &Vector, v: &Vector) -> Result<f64> {
    match node {
        Node::Const(c) => Ok(*c),
        Node::Var(var) => Ok(var_value(*var, t, x, v)),
        Node::Unary(op, a) => {
            let a = eval_value(a, t, x, v)?;
            Ok(unary_derivs(node, *op, a, 0)?[0])
        }
        Node::Pow(a, p) => {
            let a = eval_value(a, t, x, v)?;
            Ok(pow_derivs(node, a, *p, 0)?[0])
        }
        Node::Binary(op, a, b) => {
            let (a, b) = (eval_value(a, t, x, v)?, eval_value(b, t, x, v)?);
            let y = match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(domain(node, b, "division by zero"));
                    }
                    a / b
                }
            };
            if !y.is_finite() {
                return Err(domain(node, y, "value is not finite"));
            }
            Ok(y)
        }
    }
}

/// Value, gradient and optional Hessian (column-major `n x n`).
#[derive(Debug, Clone)]
pub(super) struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Option<Vec<f64>>,
}

impl Jet {
    fn constant(c: f64, n: usize, second: bool) -> Jet {
        Jet {
            value: c,
            grad: vec![0.0; n],
            hess: second.then(|| vec![0.0; n * n]),
        }
    }

    /// `f(self)` given `f, f', f''` at the current value.
    fn chain(mut self, d: [f64; 3]) -> Jet {
        let [f, f1, f2] = d;
        if let Some(h) = self.hess.as_mut() {
            let n = self.grad.len();
            for j in 0..n {
                for i in 0..n {
                    h[j * n + i] = f1 * h[j * n + i] + f2 * self.grad[i] * self.grad[j];
                }
            }
        }
        for g in &mut self.grad {
            *g *= f1;
        }
        self.value = f;
        self
    }

    fn add(mut self, other: &Jet, sign: f64) -> Jet {
        self.value += sign * other.value;
        for (g, o) in self.grad.iter_mut().zip(&other.grad) {
            *g += sign * o;
        }
        if let (Some(h), Some(o)) = (self.hess.as_mut(), other.hess.as_ref()) {
            for (a, b) in h.iter_mut().zip(o) {
                *a += sign * b;
            }
        }
        self
    }

    fn mul(self, other: &Jet) -> Jet {
        let n = self.grad.len();
        let (a, b) = (self.value, other.value);
        let grad = (0..n).map(|i| a * other.grad[i] + b * self.grad[i]).collect();
        let hess = match (&self.hess, &other.hess) {
            (Some(ha), Some(hb)) => Some(
                (0..n * n)
                    .map(|k| {
                        let (i, j) = (k % n, k / n);
                        a * hb[k] + b * ha[k] + self.grad[i] * other.grad[j] + other.grad[i] * self.grad[j]
                    })
                    .collect(),
            ),
            _ => None,
        };
        Jet {
            value: a * b,
            grad,
            hess,
        }
    }
}

pub(super) fn eval_jet(root: &Node, z: &Vector, dim: usize, second: bool) -> Result<Jet> {
    let n = z.len();
    let order = if second { 2 } else { 1 };
    let rec = |node: &Node| eval_jet(node, z, dim, second);
    Ok(match root {
        Node::Const(c) => Jet::constant(*c, n, second),
        Node::Var(var) => {
            let k = match var {
                Var::T => 0,
                Var::X(i) => *i,
                Var::V(i) => dim + *i,
            };
            let mut j = Jet::constant(z[k], n, second);
            j.grad[k] = 1.0;
            j
        }
        Node::Unary(op, a) => {
            let a = rec(a)?;
            let d = unary_derivs(root, *op, a.value, order)?;
            a.chain(d)
        }
        Node::Pow(a, p) => {
            let a = rec(a)?;
            let d = pow_derivs(root, a.value, *p, order)?;
            a.chain(d)
        }
        Node::Binary(op, a, b) => {
            let (a, b) = (rec(a)?, rec(b)?);
            let out = match op {
                BinOp::Add => a.add(&b, 1.0),
                BinOp::Sub => a.add(&b, -1.0),
                BinOp::Mul => a.mul(&b),
                BinOp::Div => {
                    if b.value == 0.0 {
                        return Err(domain(root, 0.0, "division by zero"));
                    }
                    let r = 1.0 / b.value;
                    let inv = check(root, [r, -r * r, 2.0 * r * r * r], order)?;
                    a.mul(&b.chain(inv))
                }
            };
            if !out.value.is_finite() {
                return Err(domain(root, out.value, "value is not finite"));
            }
            out
        }
    })
}
