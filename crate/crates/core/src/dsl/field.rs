use std::sync::atomic::{AtomicBool, Ordering};

use super::{parse, Expression, ABS_KINK_MESSAGE};
use crate::differentiation::{Arity, FdConfig, FirstPartials, ScalarField, SecondPartials};
use crate::error::{Error, Result};
use crate::lcs_model::Vector;

/// A parsed expression used as a [`ScalarField`] with exact partials.
///
/// Near an `abs` kink exact partials are withheld and callers fall back to
/// finite differences; a warning is logged once per field.
#[derive(Debug)]
pub struct ExprField {
    expr: Expression,
    fd: FdConfig,
    warned: AtomicBool,
}

impl Clone for ExprField {
    fn clone(&self) -> Self {
        ExprField {
            expr: self.expr.clone(),
            fd: self.fd,
            warned: AtomicBool::new(self.warned.load(Ordering::Relaxed)),
        }
    }
}

impl ExprField {
    pub fn new(expr: Expression) -> Self {
        ExprField {
            expr,
            fd: FdConfig::default(),
            warned: AtomicBool::new(false),
        }
    }

    pub fn parse(source: &str, dim: usize) -> Result<Self> {
        Ok(ExprField::new(parse(source, dim)?))
    }

    pub fn with_fd(mut self, fd: FdConfig) -> Self {
        self.fd = fd;
        self
    }

    pub fn expression(&self) -> &Expression {
        &self.expr
    }

    fn withhold<T>(&self, r: Result<T>, t: f64) -> Option<Result<T>> {
        match r {
            Err(Error::Domain { ref message, .. }) if message == ABS_KINK_MESSAGE => {
                if !self.warned.swap(true, Ordering::Relaxed) {
                    log::warn!(
                        "`{}` hits an abs kink near t={t}; using finite differences there",
                        self.expr
                    );
                }
                None
            }
            other => Some(other),
        }
    }
}

impl ScalarField for ExprField {
    fn dim(&self) -> usize {
        self.expr.dim()
    }

    fn arity(&self) -> Arity {
        self.expr.arity()
    }

    fn value(&self, t: f64, x: &Vector, v: &Vector) -> Result<f64> {
        self.expr.value(t, x, v)
    }

    fn analytic_first(&self, t: f64, x: &Vector, v: &Vector) -> Option<Result<FirstPartials>> {
        let r = self
            .expr
            .evaluate(t, x, v, 1)
            .map(|e| e.first.expect("order 1 returns first partials"));
        self.withhold(r, t)
    }

    fn analytic_second(&self, t: f64, x: &Vector, v: &Vector) -> Option<Result<SecondPartials>> {
        let r = self
            .expr
            .evaluate(t, x, v, 2)
            .map(|e| e.second.expect("order 2 returns second partials"));
        self.withhold(r, t)
    }

    fn fd_config(&self) -> FdConfig {
        self.fd
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}
