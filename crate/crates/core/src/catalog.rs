//! Named test Lagrangians with known extremals.

use crate::differentiation::SharedField;
use crate::dsl::ExprField;
use crate::error::{Error, Result};
use crate::lcs_model::Vector;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub dim: usize,
    pub source: &'static str,
    /// `d2L/dv dv` is positive semidefinite everywhere.
    pub convex: bool,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "free-particle",
        dim: 1,
        source: "v1^2/2",
        convex: true,
    },
    CatalogEntry {
        name: "free-particle-3d",
        dim: 3,
        source: "(v1^2 + v2^2 + v3^2)/2",
        convex: true,
    },
    CatalogEntry {
        name: "harmonic-oscillator",
        dim: 1,
        source: "(v1^2 - x1^2)/2",
        convex: true,
    },
    // x1'' = -x1, x2'' = 0, x3'' = x3
    CatalogEntry {
        name: "decoupled-3d",
        dim: 3,
        source: "(v1^2 + 2*v2^2 + 3*v3^2)/2 - x1^2/2 + 3*x3^2/2",
        convex: true,
    },
    CatalogEntry {
        name: "quartic",
        dim: 1,
        source: "v1^4/4",
        convex: true,
    },
    CatalogEntry {
        name: "position-dependent-mass",
        dim: 1,
        source: "(1 + x1^2)*v1^2/2",
        convex: true,
    },
    CatalogEntry {
        name: "growing-kinetic",
        dim: 1,
        source: "exp(t)*v1^2",
        convex: true,
    },
    CatalogEntry {
        name: "negative-kinetic",
        dim: 1,
        source: "-v1^2/2",
        convex: false,
    },
];

pub fn entry(name: &str) -> Result<&'static CatalogEntry> {
    CATALOG
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::validation(format!("unknown catalog Lagrangian `{name}`")))
}

pub fn lagrangian(name: &str) -> Result<SharedField> {
    let e = entry(name)?;
    Ok(Arc::new(ExprField::parse(e.source, e.dim)?))
}

fn line(a: f64, b: f64, xa: f64, xb: f64, t: f64) -> f64 {
    xa + (xb - xa) * (t - a) / (b - a)
}

// solution of x'' = -x (f = sin) or x'' = x (f = sinh) through the end values
fn trig(a: f64, b: f64, xa: f64, xb: f64, f: fn(f64) -> f64, t: f64) -> f64 {
    (xb * f(t - a) + xa * f(b - t)) / f(b - a)
}

/// Closed-form extremal through `x(a) = xa`, `x(b) = xb`, where one is known.
pub fn exact_extremal(name: &str, a: f64, b: f64, xa: &Vector, xb: &Vector) -> Option<Box<dyn Fn(f64) -> Vector>> {
    let (xa, xb) = (xa.clone(), xb.clone());
    match name {
        "free-particle" | "free-particle-3d" | "quartic" => Some(Box::new(move |t| {
            Vector::from_fn(xa.len(), |i, _| line(a, b, xa[i], xb[i], t))
        })),
        "harmonic-oscillator" => Some(Box::new(move |t| {
            Vector::from_element(1, trig(a, b, xa[0], xb[0], f64::sin, t))
        })),
        "decoupled-3d" => Some(Box::new(move |t| {
            Vector::from_row_slice(&[
                trig(a, b, xa[0], xb[0], f64::sin, t),
                line(a, b, xa[1], xb[1], t),
                trig(a, b, xa[2], xb[2], f64::sinh, t),
            ])
        })),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_parses() {
        for e in CATALOG {
            let l = lagrangian(e.name).unwrap();
            assert_eq!(l.dim(), e.dim);
        }
        assert!(lagrangian("pendulum").is_err());
    }

    #[test]
    fn closed_forms_meet_boundary_values() {
        let xa = Vector::from_row_slice(&[0.5, -1.0, 2.0]);
        let xb = Vector::from_row_slice(&[1.5, 3.0, -0.5]);
        let x = exact_extremal("decoupled-3d", 0.0, 1.3, &xa, &xb).unwrap();
        assert!((x(0.0) - &xa).amax() < 1e-15);
        assert!((x(1.3) - &xb).amax() < 1e-14);
    }
}
