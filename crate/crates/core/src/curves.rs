//! Discretised curves `x : [a,b] -> E` on uniform grids.
//!
//! Values are stored at the nodes; derivatives are reconstructed by finite
//! difference stencils. Two reconstructions exist: second-order stencils for
//! pointwise quantities (residuals, seminorms, first integrals) and
//! fourth-order stencils for everything that is integrated with Simpson's rule,
//! so that the discrete action converges at order four.

use std::io::{Read, Write};
use std::ops::{AddAssign, Mul};

use serde::Serialize;

use crate::differentiation::ScalarField;
use crate::error::{Error, Result};
use crate::lcs_model::{Space, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    a: f64,
    b: f64,
    n: usize,
}

impl Grid {
    pub const MIN_INTERVALS: usize = 4;

    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::validation(format!("interval [{a}, {b}] is empty or not finite")));
        }
        if n < Self::MIN_INTERVALS {
            return Err(Error::validation(format!(
                "grid needs at least {} intervals, got {n}",
                Self::MIN_INTERVALS
            )));
        }
        Ok(Grid { a, b, n })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of intervals `N`; there are `N + 1` nodes.
    pub fn intervals(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.b
        } else {
            self.a + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    /// Same interval with a different number of intervals.
    pub fn refined(&self, n: usize) -> Result<Self> {
        Grid::new(self.a, self.b, n)
    }

    pub fn require_even(&self) -> Result<()> {
        if self.n % 2 != 0 {
            return Err(Error::validation(format!(
                "Simpson quadrature needs an even number of intervals, got {}",
                self.n
            )));
        }
        Ok(())
    }

    /// Composite Simpson weights.
    pub fn simpson_weights(&self) -> Result<Vec<f64>> {
        self.require_even()?;
        let h3 = self.step() / 3.0;
        Ok((0..=self.n)
            .map(|i| {
                if i == 0 || i == self.n {
                    h3
                } else if i % 2 == 1 {
                    4.0 * h3
                } else {
                    2.0 * h3
                }
            })
            .collect())
    }

    pub fn simpson(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::validation("quadrature values do not match the grid"));
        }
        Ok(self
            .simpson_weights()?
            .iter()
            .zip(values)
            .map(|(w, f)| w * f)
            .sum())
    }
}

/// Finite-difference stencils on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// Second-order first derivative.
    First2,
    /// Second-order second derivative.
    Second2,
    /// Fourth-order first derivative.
    First4,
}

impl Stencil {
    /// `(node, coefficient)` pairs at node `i` of a grid with `n` intervals and
    /// spacing `h`. Needs `n >= 2` (first order), `3` (second) or `4` (fourth).
    pub fn weights(self, i: usize, n: usize, h: f64) -> Vec<(usize, f64)> {
        let min = match self {
            Stencil::First2 => 2,
            Stencil::Second2 => 3,
            Stencil::First4 => 4,
        };
        assert!(n >= min && i <= n, "stencil {self:?} at node {i} of {n} intervals");
        let (offsets, coeffs, scale): (isize, &[f64], f64) = match self {
            Stencil::First2 => {
                let s = 1.0 / (2.0 * h);
                match i {
                    0 => (0, &[-3.0, 4.0, -1.0], s),
                    _ if i == n => (n as isize - 2, &[1.0, -4.0, 3.0], s),
                    _ => (i as isize - 1, &[-1.0, 0.0, 1.0], s),
                }
            }
            Stencil::Second2 => {
                let s = 1.0 / (h * h);
                match i {
                    0 => (0, &[2.0, -5.0, 4.0, -1.0], s),
                    _ if i == n => (n as isize - 3, &[-1.0, 4.0, -5.0, 2.0], s),
                    _ => (i as isize - 1, &[1.0, -2.0, 1.0], s),
                }
            }
            Stencil::First4 => {
                let s = 1.0 / (12.0 * h);
                match i {
                    0 => (0, &[-25.0, 48.0, -36.0, 16.0, -3.0], s),
                    1 => (0, &[-3.0, -10.0, 18.0, -6.0, 1.0], s),
                    _ if i == n => (n as isize - 4, &[3.0, -16.0, 36.0, -48.0, 25.0], s),
                    _ if i == n - 1 => (n as isize - 4, &[-1.0, 6.0, -18.0, 10.0, 3.0], s),
                    _ => (i as isize - 2, &[1.0, -8.0, 0.0, 8.0, -1.0], s),
                }
            }
        };
        coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(k, c)| ((offsets + k as isize) as usize, c * scale))
            .collect()
    }

    /// Applies the stencil at node `i` to a node sequence of vectors or matrices.
    pub fn apply<T>(self, values: &[T], i: usize, h: f64) -> T
    where
        T: Clone + AddAssign,
        for<'a> &'a T: Mul<f64, Output = T>,
    {
        let n = values.len() - 1;
        let mut it = self.weights(i, n, h).into_iter();
        let (k0, c0) = it.next().expect("nonempty stencil");
        let mut acc = &values[k0] * c0;
        for (k, c) in it {
            acc += &values[k] * c;
        }
        acc
    }

    /// The stencil applied at every node.
    pub fn apply_all<T>(self, values: &[T], h: f64) -> Vec<T>
    where
        T: Clone + AddAssign,
        for<'a> &'a T: Mul<f64, Output = T>,
    {
        (0..values.len()).map(|i| self.apply(values, i, h)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    space: Space,
    grid: Grid,
    values: Vec<Vector>,
}

impl Curve {
    pub fn new(space: Space, grid: Grid, values: Vec<Vector>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::validation(format!(
                "curve has {} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        for (i, y) in values.iter().enumerate() {
            space.check_vector(y)?;
            if let Some(bad) = y.iter().find(|c| !c.is_finite()) {
                return Err(Error::NonFinite {
                    what: "curve value".into(),
                    at: format!("node {i}"),
                    value: *bad,
                });
            }
        }
        Ok(Curve { space, grid, values })
    }

    pub fn from_fn<F>(space: Space, grid: Grid, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Vector,
    {
        let values = grid.nodes().into_iter().map(f).collect();
        Curve::new(space, grid, values)
    }

    pub fn zeros(space: Space, grid: Grid) -> Self {
        let values = vec![space.zeros(); grid.len()];
        Curve { space, grid, values }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &Vector {
        &self.values[i]
    }

    pub fn into_values(self) -> Vec<Vector> {
        self.values
    }

    pub fn same_discretisation(&self, other: &Curve) -> Result<()> {
        if self.grid != other.grid || self.space.dim() != other.space.dim() {
            return Err(Error::validation("curves live on different grids or spaces"));
        }
        Ok(())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Curve) -> Result<Curve> {
        self.same_discretisation(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b * s)
            .collect();
        Curve::new(self.space.clone(), self.grid, values)
    }

    /// Derivative of order 1 or 2 at node `i` with second-order stencils.
    pub fn derivative(&self, i: usize, order: u8) -> Result<Vector> {
        if i > self.grid.intervals() {
            return Err(Error::IndexOutOfRange {
                what: "node",
                index: i,
                max: self.grid.intervals(),
            });
        }
        let stencil = match order {
            1 => Stencil::First2,
            2 => Stencil::Second2,
            _ => return Err(Error::validation(format!("derivative order {order} is not 1 or 2"))),
        };
        Ok(stencil.apply(&self.values, i, self.grid.step()))
    }

    /// Second-order velocity reconstruction at every node.
    pub fn velocities(&self) -> Vec<Vector> {
        Stencil::First2.apply_all(&self.values, self.grid.step())
    }

    pub fn accelerations(&self) -> Vec<Vector> {
        Stencil::Second2.apply_all(&self.values, self.grid.step())
    }

    /// Fourth-order velocity reconstruction used under quadratures.
    pub fn velocities_fourth_order(&self) -> Vec<Vector> {
        Stencil::First4.apply_all(&self.values, self.grid.step())
    }

    fn sup_seminorm(&self, p: usize, seq: &[Vector]) -> Result<f64> {
        self.space.check_index(p)?;
        Ok(seq
            .iter()
            .map(|y| self.space.seminorm_unchecked(p, y.as_slice()))
            .fold(0.0, f64::max))
    }

    /// `||x||_1^p = sup ||x(t)||_p + sup ||x'(t)||_p` over the grid nodes.
    pub fn seminorm_c1(&self, p: usize) -> Result<f64> {
        Ok(self.sup_seminorm(p, &self.values)? + self.sup_seminorm(p, &self.velocities())?)
    }

    /// `||x||_2^p`: the C1 seminorm plus `sup ||x''(t)||_p`.
    pub fn seminorm_c2(&self, p: usize) -> Result<f64> {
        Ok(self.seminorm_c1(p)? + self.sup_seminorm(p, &self.accelerations())?)
    }

    /// CSV with header `t,x1..xm` and optionally `v1..vm`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W, emit_velocity: bool) -> Result<()> {
        let m = self.space.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=m).map(|i| format!("x{i}")));
        if emit_velocity {
            header.extend((1..=m).map(|i| format!("v{i}")));
        }
        w.write_record(&header)?;
        let vel = emit_velocity.then(|| self.velocities());
        for (i, y) in self.values.iter().enumerate() {
            let mut row = vec![format_float(self.grid.node(i))];
            row.extend(y.iter().map(|c| format_float(*c)));
            if let Some(vel) = &vel {
                row.extend(vel[i].iter().map(|c| format_float(*c)));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a curve written by [`Curve::write_csv`]; velocity columns are ignored.
    /// The node times must match the supplied grid.
    pub fn read_csv<R: Read>(input: R, space: Space, grid: Grid) -> Result<Curve> {
        let m = space.dim();
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        let expect: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=m).map(|i| format!("x{i}")))
            .collect();
        if header.len() < expect.len() || header.iter().zip(&expect).any(|(h, e)| h.trim() != e) {
            return Err(Error::validation(format!(
                "curve CSV header {:?} does not start with {:?}",
                header.iter().collect::<Vec<_>>(),
                expect
            )));
        }
        let mut values = Vec::with_capacity(grid.len());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                let s = rec.get(k).unwrap_or("").trim();
                s.parse::<f64>()
                    .map_err(|_| Error::validation(format!("row {}: `{s}` is not a number", i + 1)))
            };
            let t = parse(0)?;
            if i < grid.len() {
                let tol = 1e-9 * (1.0 + grid.node(i).abs());
                if (t - grid.node(i)).abs() > tol {
                    return Err(Error::validation(format!(
                        "row {}: time {t} does not match grid node {}",
                        i + 1,
                        grid.node(i)
                    )));
                }
            }
            let y = (1..=m).map(parse).collect::<Result<Vec<_>>>()?;
            values.push(Vector::from_vec(y));
        }
        Curve::new(space, grid, values)
    }
}

/// Floats at 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionReport {
    pub value: f64,
    pub quadrature: &'static str,
    pub nodes: usize,
}

pub(crate) const QUADRATURE_RULE: &str = "composite-simpson/fourth-order-velocity";

/// `J[x] = int_a^b L(t, x(t), x'(t)) dt` by composite Simpson.
pub fn action(lagrangian: &dyn ScalarField, curve: &Curve) -> Result<ActionReport> {
    let grid = curve.grid();
    grid.require_even()?;
    let vel = curve.velocities_fourth_order();
    let mut integrand = Vec::with_capacity(grid.len());
    for (i, (x, v)) in curve.values().iter().zip(&vel).enumerate() {
        let t = grid.node(i);
        let l = lagrangian.value(t, x, v).map_err(|e| at_node(e, i, t))?;
        if !l.is_finite() {
            return Err(Error::NonFinite {
                what: "Lagrangian".into(),
                at: format!("node {i} (t = {t})"),
                value: l,
            });
        }
        integrand.push(l);
    }
    Ok(ActionReport {
        value: grid.simpson(&integrand)?,
        quadrature: QUADRATURE_RULE,
        nodes: grid.len(),
    })
}

/// Attaches a node location to evaluation errors that lack one.
pub(crate) fn at_node(e: Error, i: usize, t: f64) -> Error {
    match e {
        Error::NonFinite { what, at, value } => Error::NonFinite {
            what,
            at: format!("node {i} (t = {t}): {at}"),
            value,
        },
        Error::Domain { node, value, message } => Error::Domain {
            node,
            value,
            message: format!("{message} at grid node {i} (t = {t})"),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::differentiation::FnField;

    fn line_space() -> Space {
        Space::sup_norm(1).unwrap()
    }

    fn scalar_curve(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Curve {
        Curve::from_fn(line_space(), Grid::new(a, b, n).unwrap(), |t| Vector::from_element(1, f(t))).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1.0, 1.0, 10).is_err());
        assert!(Grid::new(0.0, 1.0, 3).is_err());
        assert!(Grid::new(0.0, f64::INFINITY, 10).is_err());
        let g = Grid::new(0.0, 1.0, 5).unwrap();
        assert!(g.simpson_weights().is_err());
        assert_eq!(g.node(5), 1.0);
    }

    #[test]
    fn derivative_examples() {
        let c = scalar_curve(0.0, 2.0, 8, |t| 3.0 * t);
        for i in 0..=8 {
            assert!((c.derivative(i, 1).unwrap()[0] - 3.0).abs() < 1e-12);
        }
        let k = scalar_curve(0.0, 1.0, 6, |_| 4.0);
        for i in 0..=6 {
            assert_eq!(k.derivative(i, 2).unwrap()[0], 0.0);
        }
        let q = scalar_curve(0.0, 1.0, 10, |t| t * t);
        assert!((q.derivative(5, 1).unwrap()[0] - 1.0).abs() < 1e-12);
        assert!(q.derivative(11, 1).is_err());
        assert!(q.derivative(3, 3).is_err());
    }

    #[test]
    fn stencils_exact_on_low_degree_polynomials() {
        let q = scalar_curve(-1.0, 2.0, 12, |t| 1.0 - 2.0 * t + 0.75 * t * t);
        for i in 0..=12 {
            let t = q.grid().node(i);
            assert!((q.derivative(i, 1).unwrap()[0] - (-2.0 + 1.5 * t)).abs() < 1e-11);
            assert!((q.derivative(i, 2).unwrap()[0] - 1.5).abs() < 1e-9);
        }
        let quartic = scalar_curve(0.0, 1.0, 8, |t| t.powi(4) - t.powi(3));
        let v4 = quartic.velocities_fourth_order();
        for (i, v) in v4.iter().enumerate() {
            let t = quartic.grid().node(i);
            assert!((v[0] - (4.0 * t.powi(3) - 3.0 * t * t)).abs() < 1e-11, "node {i}");
        }
    }

    #[test]
    fn seminorm_examples() {
        let z = Curve::zeros(line_space(), Grid::new(0.0, 1.0, 4).unwrap());
        assert_eq!(z.seminorm_c1(1).unwrap(), 0.0);
        assert_eq!(z.seminorm_c2(1).unwrap(), 0.0);

        let lin = scalar_curve(0.0, 1.0, 10, |t| t);
        assert!((lin.seminorm_c1(1).unwrap() - 2.0).abs() < 1e-12);
        assert!((lin.seminorm_c2(1).unwrap() - 2.0).abs() < 1e-9);

        let k = scalar_curve(0.0, 1.0, 10, |_| -3.0);
        assert_eq!(k.seminorm_c1(1).unwrap(), 3.0);

        let half_sq = scalar_curve(0.0, 1.0, 10, |t| 0.5 * t * t);
        assert!((half_sq.seminorm_c2(1).unwrap() - 2.5).abs() < 1e-9);
        assert!(half_sq.seminorm_c1(2).is_err());
    }

    #[test]
    fn action_examples() {
        let one = FnField::new(1, |_, _, _| 1.0);
        let kin = FnField::new(1, |_, _, v| 0.5 * v[0] * v[0]);
        let c = scalar_curve(0.0, 1.0, 10, |t| t);
        assert!((action(&one, &c).unwrap().value - 1.0).abs() < 1e-14);
        assert!((action(&kin, &c).unwrap().value - 0.5).abs() < 1e-13);

        let s = scalar_curve(0.0, std::f64::consts::PI, 200, f64::sin);
        let j = action(&kin, &s).unwrap();
        assert!((j.value - std::f64::consts::FRAC_PI_4).abs() < 1e-6, "{}", j.value);
        assert_eq!(j.nodes, 201);

        let odd = scalar_curve(0.0, 1.0, 9, |t| t);
        assert!(action(&kin, &odd).is_err());
    }

    #[test]
    fn action_reports_failing_node() {
        let bad = FnField::new(1, |t, _, _| if t > 0.5 { f64::NAN } else { 0.0 });
        let c = scalar_curve(0.0, 1.0, 10, |t| t);
        let err = action(&bad, &c).unwrap_err().to_string();
        assert!(err.contains("node 6"), "{err}");
    }

    #[test]
    fn csv_round_trip() {
        let c = Curve::from_fn(Space::sup_norm(2).unwrap(), Grid::new(0.0, 1.0, 4).unwrap(), |t| {
            Vector::from_row_slice(&[t, t.sin() / 3.0])
        })
        .unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x1,x2,v1,v2\n"));
        let back = Curve::read_csv(&buf[..], c.space().clone(), *c.grid()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn csv_rejects_grid_mismatch() {
        let c = scalar_curve(0.0, 1.0, 4, |t| t);
        let mut buf = Vec::new();
        c.write_csv(&mut buf, false).unwrap();
        assert!(Curve::read_csv(&buf[..], line_space(), Grid::new(0.0, 2.0, 4).unwrap()).is_err());
        assert!(Curve::read_csv(&buf[..], line_space(), Grid::new(0.0, 1.0, 6).unwrap()).is_err());
    }
}
