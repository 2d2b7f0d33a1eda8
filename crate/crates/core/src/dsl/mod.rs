//! A small expression language over `t, x1..xm, v1..vm` with exact first and
//! second partials.

mod field;
mod jet;
mod parse;
mod print;

use std::fmt;

use crate::differentiation::{Arity, FirstPartials, Layout, SecondPartials};
use crate::error::{Error, Result};
use crate::lcs_model::Vector;

pub use field::ExprField;
pub use parse::parse;

/// Offending position reported by the parser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    /// Byte offset into the source text.
    pub offset: usize,
    /// The token at the offset (`<end>` at end of input).
    pub token: String,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at byte {} (`{}`)", self.message, self.offset, self.token)
    }
}

impl std::error::Error for ParseDiagnostic {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    /// 1-based position coordinate.
    X(usize),
    /// 1-based velocity coordinate.
    V(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl UnOp {
    pub fn name(self) -> &'static str {
        match self {
            UnOp::Neg => "-",
            UnOp::Sin => "sin",
            UnOp::Cos => "cos",
            UnOp::Exp => "exp",
            UnOp::Log => "log",
            UnOp::Sqrt => "sqrt",
            UnOp::Abs => "abs",
        }
    }

    pub(crate) fn function(name: &str) -> Option<UnOp> {
        Some(match name {
            "sin" => UnOp::Sin,
            "cos" => UnOp::Cos,
            "exp" => UnOp::Exp,
            "log" => UnOp::Log,
            "sqrt" => UnOp::Sqrt,
            "abs" => UnOp::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Unary(UnOp, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    /// Power with a constant exponent.
    Pow(Box<Node>, f64),
}

impl Node {
    fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        match self {
            Node::Const(_) => {}
            Node::Var(v) => f(*v),
            Node::Unary(_, a) | Node::Pow(a, _) => a.visit_vars(f),
            Node::Binary(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    /// Value of a variable-free subtree.
    pub(crate) fn constant_value(&self) -> Option<f64> {
        match self {
            Node::Const(c) => Some(*c),
            Node::Var(_) => None,
            Node::Unary(op, a) => {
                let a = a.constant_value()?;
                Some(match op {
                    UnOp::Neg => -a,
                    UnOp::Sin => a.sin(),
                    UnOp::Cos => a.cos(),
                    UnOp::Exp => a.exp(),
                    UnOp::Log => a.ln(),
                    UnOp::Sqrt => a.sqrt(),
                    UnOp::Abs => a.abs(),
                })
            }
            Node::Binary(op, a, b) => {
                let (a, b) = (a.constant_value()?, b.constant_value()?);
                Some(match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                })
            }
            Node::Pow(a, p) => Some(jet::pow_scalar(a.constant_value()?, *p)),
        }
    }
}

/// A parsed expression bound to a dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    dim: usize,
}

/// Value and the partials requested from [`Expression::evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub first: Option<FirstPartials>,
    pub second: Option<SecondPartials>,
}

/// Raised when an `abs` argument is too close to its kink for exact partials.
pub(crate) const ABS_KINK: f64 = 1e-12;
pub(crate) const ABS_KINK_MESSAGE: &str = "abs is not differentiable at 0";

impl Expression {
    pub fn new(root: Node, dim: usize) -> Result<Self> {
        let mut bad = None;
        root.visit_vars(&mut |v| match v {
            Var::X(i) | Var::V(i) if i == 0 || i > dim => bad = Some(i),
            _ => {}
        });
        if let Some(i) = bad {
            return Err(Error::validation(format!("index {i} exceeds dimension {dim}")));
        }
        Ok(Expression { root, dim })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Which of `t`, `x`, `v` occur.
    pub fn arity(&self) -> Arity {
        let mut a = Arity {
            t: false,
            x: false,
            v: false,
        };
        self.root.visit_vars(&mut |v| match v {
            Var::T => a.t = true,
            Var::X(_) => a.x = true,
            Var::V(_) => a.v = true,
        });
        a
    }

    fn check_point(&self, x: &Vector, v: &Vector) -> Result<()> {
        if x.len() != self.dim || v.len() != self.dim {
            return Err(Error::validation(format!(
                "expression over dimension {} evaluated at vectors of length {} and {}",
                self.dim,
                x.len(),
                v.len()
            )));
        }
        Ok(())
    }

    pub fn value(&self, t: f64, x: &Vector, v: &Vector) -> Result<f64> {
        self.check_point(x, v)?;
        jet::eval_value(&self.root, t, x, v)
    }

    /// Evaluates the value and, for `order` 1 or 2, the exact partials.
    ///
    /// Fails with a domain error if an `abs` argument lies within `1e-12` of
    /// zero and partials were requested.
    pub fn evaluate(&self, t: f64, x: &Vector, v: &Vector, order: u8) -> Result<Evaluation> {
        self.check_point(x, v)?;
        if order > 2 {
            return Err(Error::validation(format!("order {order} is not one of 0, 1, 2")));
        }
        if order == 0 {
            return Ok(Evaluation {
                value: self.value(t, x, v)?,
                first: None,
                second: None,
            });
        }
        let layout = Layout { dim: self.dim };
        let z = layout.pack(t, x, v);
        let j = jet::eval_jet(&self.root, &z, self.dim, order == 2)?;
        let first = FirstPartials {
            value: j.value,
            gradient: Vector::from_vec(j.grad),
            dim: self.dim,
        };
        let second = j.hess.map(|h| {
            let n = layout.len();
            SecondPartials {
                first: first.clone(),
                hessian: nalgebra::DMatrix::from_vec(n, n, h),
            }
        });
        Ok(Evaluation {
            value: j.value,
            first: Some(first),
            second,
        })
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print::to_string(&self.root))
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print::to_string(self))
    }
}
