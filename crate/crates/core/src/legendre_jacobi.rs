//! Second variation, the Legendre condition, the Jacobi operators `R`, `P`
//! and the Dirichlet Jacobi eigenproblem `-(R h')' + P h = lambda h`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::banded::BandMatrix;
use crate::curves::{at_node, Curve, Grid, Stencil};
use crate::differentiation::{second_partials, Pair, ScalarField};
use crate::error::{Error, Result};
use crate::lcs_model::{Space, Vector};

/// Relative asymmetry accepted in `R` and `P` before assembly.
pub const SYMMETRY_TOLERANCE: f64 = 1e-6;

/// Per-node Jacobi coefficients along a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiOperators {
    space: Space,
    grid: Grid,
    /// `d2L/dv dv` per node.
    pub r: Vec<DMatrix<f64>>,
    /// `d2L/dx dx - d/dt sym(d2L/dv dx)` per node.
    pub p: Vec<DMatrix<f64>>,
    /// Antisymmetric part of `d2L/dx dv` per node. It contributes
    /// `2 h . G h'` to the second variation and vanishes in dimension one.
    pub gyroscopic: Vec<DMatrix<f64>>,
}

fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn antisym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a - a.transpose()) * 0.5
}

impl JacobiOperators {
    /// Coefficients given directly per node.
    pub fn new(space: Space, grid: Grid, r: Vec<DMatrix<f64>>, p: Vec<DMatrix<f64>>) -> Result<Self> {
        let m = space.dim();
        let ok = |v: &[DMatrix<f64>]| v.len() == grid.len() && v.iter().all(|a| a.shape() == (m, m));
        if !ok(&r) || !ok(&p) {
            return Err(Error::validation(format!(
                "R and P need {} blocks of size {m}x{m}",
                grid.len()
            )));
        }
        if r.iter().chain(&p).any(|a| a.iter().any(|x| !x.is_finite())) {
            return Err(Error::validation("R and P must be finite"));
        }
        let gyroscopic = vec![DMatrix::zeros(m, m); grid.len()];
        Ok(JacobiOperators {
            space,
            grid,
            r,
            p,
            gyroscopic,
        })
    }

    /// Node-independent coefficients.
    pub fn constant(space: Space, grid: Grid, r: DMatrix<f64>, p: DMatrix<f64>) -> Result<Self> {
        let n = grid.len();
        JacobiOperators::new(space, grid, vec![r; n], vec![p; n])
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `P + c I` at every node.
    pub fn shifted(&self, c: f64) -> Self {
        let m = self.space.dim();
        let mut out = self.clone();
        for p in &mut out.p {
            *p += DMatrix::identity(m, m) * c;
        }
        out
    }
}

/// `R` and `P` along `x`. Velocities and the time derivative of the mixed
/// block use the fourth-order stencil.
pub fn jacobi_operators(lagrangian: &dyn ScalarField, x: &Curve) -> Result<JacobiOperators> {
    let grid = *x.grid();
    let vel = x.velocities_fourth_order();
    let parts = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let t = grid.node(i);
            second_partials(lagrangian, t, x.value(i), &vel[i]).map_err(|e| at_node(e, i, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let r: Vec<_> = parts.iter().map(|s| s.block(Pair::VV)).collect();
    let mixed: Vec<_> = parts.iter().map(|s| s.block(Pair::XV)).collect();
    let sym_mixed: Vec<_> = mixed.iter().map(sym).collect();
    let rate = Stencil::First4.apply_all(&sym_mixed, grid.step());
    let p = parts
        .iter()
        .zip(&rate)
        .map(|(s, d)| s.block(Pair::XX) - d)
        .collect();
    Ok(JacobiOperators {
        space: x.space().clone(),
        grid,
        r,
        p,
        gyroscopic: mixed.iter().map(antisym).collect(),
    })
}

/// `J''[x] h = int [ R h'.h' + P h.h + 2 h.G h' ] dt` by composite Simpson.
/// `h` must vanish at both endpoints.
pub fn second_variation(lagrangian: &dyn ScalarField, x: &Curve, h: &Curve) -> Result<f64> {
    x.same_discretisation(h)?;
    x.grid().require_even()?;
    let ops = jacobi_operators(lagrangian, x)?;
    second_variation_with(&ops, h)
}

/// Second variation from precomputed operators.
pub fn second_variation_with(ops: &JacobiOperators, h: &Curve) -> Result<f64> {
    let grid = ops.grid;
    if *h.grid() != grid || h.space().dim() != ops.space.dim() {
        return Err(Error::validation("variation does not match the operator grid"));
    }
    grid.require_even()?;
    let n = grid.intervals();
    let scale = h.values().iter().map(|y| y.amax()).fold(0.0, f64::max);
    let end = h.value(0).amax().max(h.value(n).amax());
    if end > 1e-12 * scale.max(f64::MIN_POSITIVE) && end > 0.0 {
        return Err(Error::validation(format!(
            "variation must vanish at both endpoints (found {end:e})"
        )));
    }
    let hv = h.velocities_fourth_order();
    let integrand: Vec<f64> = (0..grid.len())
        .map(|i| {
            let (y, d) = (h.value(i), &hv[i]);
            d.dot(&(&ops.r[i] * d)) + y.dot(&(&ops.p[i] * y)) + 2.0 * y.dot(&(&ops.gyroscopic[i] * d))
        })
        .collect();
    grid.simpson(&integrand)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegendreReport {
    /// Smallest eigenvalue of the symmetrised `R` at each node.
    pub min_eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub tolerance: f64,
    /// Nodes with minimum eigenvalue below `-tolerance`.
    pub violating_nodes: Vec<usize>,
    pub pass: bool,
}

fn min_eigenpair(r: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(sym(r));
    let (k, lambda) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty matrix");
    (lambda, eig.eigenvectors.column(k).into_owned())
}

/// Positive semidefiniteness of the symmetrised `d2L/dv dv` at every node.
pub fn legendre_check(lagrangian: &dyn ScalarField, x: &Curve, tol: f64) -> Result<LegendreReport> {
    if !(tol >= 0.0) {
        return Err(Error::validation("Legendre tolerance must be nonnegative"));
    }
    let grid = x.grid();
    let vel = x.velocities();
    let min_eigenvalues = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let t = grid.node(i);
            let s = second_partials(lagrangian, t, x.value(i), &vel[i]).map_err(|e| at_node(e, i, t))?;
            Ok(min_eigenpair(&s.block(Pair::VV)).0)
        })
        .collect::<Result<Vec<f64>>>()?;
    let min_eigenvalue = min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let violating_nodes: Vec<usize> = min_eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, l)| **l < -tol)
        .map(|(i, _)| i)
        .collect();
    Ok(LegendreReport {
        pass: violating_nodes.is_empty(),
        min_eigenvalues,
        min_eigenvalue,
        tolerance: tol,
        violating_nodes,
    })
}

/// Hat variation of width four cells centred at `node` (moved into
/// `2..=N-2`), along `direction`, with `sup |h| = h_grid`.
pub fn spike_variation(x: &Curve, node: usize, direction: &Vector) -> Result<Curve> {
    let grid = *x.grid();
    let n = grid.intervals();
    x.space().check_vector(direction)?;
    let norm = direction.amax();
    if !(norm > 0.0) {
        return Err(Error::validation("spike direction must be nonzero"));
    }
    let c = node.clamp(2, n - 2);
    let amp = grid.step();
    let values = (0..=n)
        .map(|i| {
            let d = (i as f64 - c as f64).abs();
            let hat = (1.0 - d / 2.0).max(0.0);
            direction * (amp * hat / norm)
        })
        .collect();
    Curve::new(x.space().clone(), grid, values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegendreWitness {
    pub node: usize,
    pub variation: Curve,
    pub second_variation: f64,
}

/// For a strict failure (some minimum eigenvalue `<= -10 tol`), the spike
/// variation at the worst node along its most negative direction, with its
/// second variation. `None` when the failure is not strict.
pub fn legendre_witness(
    lagrangian: &dyn ScalarField,
    x: &Curve,
    report: &LegendreReport,
) -> Result<Option<LegendreWitness>> {
    let strict = -10.0 * report.tolerance;
    let worst = report
        .min_eigenvalues
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, l)| *l <= strict && *l < 0.0)
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let Some((node, _)) = worst else {
        return Ok(None);
    };
    let n = x.grid().intervals();
    let centre = node.clamp(2, n - 2);
    let t = x.grid().node(centre);
    let v = x.derivative(centre, 1)?;
    let s = second_partials(lagrangian, t, x.value(centre), &v).map_err(|e| at_node(e, centre, t))?;
    let (_, dir) = min_eigenpair(&s.block(Pair::VV));
    let variation = spike_variation(x, centre, &dir)?;
    let value = second_variation(lagrangian, x, &variation)?;
    Ok(Some(LegendreWitness {
        node: centre,
        variation,
        second_variation: value,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobiMode {
    pub eigenvalue: f64,
    /// Normalised so that `h * sum |h_i|^2 = 1`, vanishing at both endpoints.
    pub eigenfunction: Curve,
}

fn check_symmetric(ops: &JacobiOperators) -> Result<()> {
    for (i, (r, p)) in ops.r.iter().zip(&ops.p).enumerate() {
        for a in [r, p] {
            let asym = (a - a.transpose()).amax();
            if asym > SYMMETRY_TOLERANCE * (1.0 + a.amax()) {
                return Err(Error::NonSymmetric { node: i, asymmetry: asym });
            }
        }
    }
    Ok(())
}

/// Conservative three-point discretisation on the interior nodes with
/// `R_{i+1/2} = (R_i + R_{i+1}) / 2`.
pub fn assemble_jacobi_matrix(ops: &JacobiOperators) -> Result<BandMatrix> {
    check_symmetric(ops)?;
    let m = ops.space.dim();
    let n = ops.grid.intervals();
    let h2 = ops.grid.step().powi(2);
    let r: Vec<DMatrix<f64>> = ops.r.iter().map(sym).collect();
    let half: Vec<DMatrix<f64>> = (0..n).map(|i| (&r[i] + &r[i + 1]) * 0.5).collect();
    let band = 2 * m - 1;
    let mut a = BandMatrix::zeros((n - 1) * m, band, band);
    for i in 1..n {
        let diag = (&half[i - 1] + &half[i]) / h2 + sym(&ops.p[i]);
        let row = (i - 1) * m;
        for p in 0..m {
            for q in 0..m {
                a.add(row + p, row + q, diag[(p, q)]);
                if i + 1 < n {
                    let off = -half[i][(p, q)] / h2;
                    a.add(row + p, row + m + q, off);
                    a.add(row + m + q, row + p, off);
                }
            }
        }
    }
    Ok(a)
}

/// The `k`-th smallest eigenvalue (0-based) by inertia bisection.
fn bisect(a: &BandMatrix, k: usize, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if a.count_below(mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn gershgorin(a: &BandMatrix) -> (f64, f64) {
    let n = a.n();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let d = a.get(i, i);
        let (kl, ku) = a.bandwidths();
        let off: f64 = (i.saturating_sub(kl)..=(i + ku).min(n - 1))
            .filter(|&j| j != i)
            .map(|j| a.get(i, j).abs())
            .sum();
        lo = lo.min(d - off);
        hi = hi.max(d + off);
    }
    let pad = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    (lo - pad, hi + pad)
}

fn inverse_iteration(a: &BandMatrix, lambda: f64, previous: &[DVector<f64>], seed: usize) -> DVector<f64> {
    let n = a.n();
    let scale = a.norm_inf().max(f64::MIN_POSITIVE);
    let mut shifted = a.clone();
    let sigma = lambda + 8.0 * f64::EPSILON * scale;
    for i in 0..n {
        shifted.add(i, i, -sigma);
    }
    let lu = match shifted.clone().lu(0.0) {
        Ok(lu) => lu,
        Err(_) => {
            let mut s = shifted;
            for i in 0..n {
                s.add(i, i, -1e3 * f64::EPSILON * scale);
            }
            s.lu(0.0).expect("perturbed shift is regular")
        }
    };
    let mut y = DVector::from_fn(n, |i, _| 1.0 + 0.5 * crate::symmetry_noether::halton(i + 1, seed % 8));
    for _ in 0..4 {
        for q in previous {
            let c = q.dot(&y);
            y.axpy(-c, q, 1.0);
        }
        let norm = y.norm();
        y /= norm;
        y = lu.solve(&y);
    }
    for q in previous {
        let c = q.dot(&y);
        y.axpy(-c, q, 1.0);
    }
    let norm = y.norm();
    y / norm
}

/// The `k` smallest eigenpairs of `-(R h')' + P h = lambda h` with
/// `h(a) = h(b) = 0`, eigenvalues ascending.
pub fn jacobi_eigen(ops: &JacobiOperators, k: usize) -> Result<Vec<JacobiMode>> {
    let m = ops.space.dim();
    let n = ops.grid.intervals();
    let unknowns = m * (n - 1);
    if k == 0 || k > unknowns {
        return Err(Error::validation(format!(
            "requested {k} eigenpairs; between 1 and {unknowns} are available"
        )));
    }
    let a = assemble_jacobi_matrix(ops)?;
    let (lo, hi) = gershgorin(&a);
    let eigenvalues: Vec<f64> = (0..k).into_par_iter().map(|j| bisect(&a, j, lo, hi)).collect();

    let cluster = 1e-8 * a.norm_inf().max(1.0);
    let h = ops.grid.step();
    let mut vectors: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut modes = Vec::with_capacity(k);
    for (j, &lambda) in eigenvalues.iter().enumerate() {
        let start = (0..j)
            .rev()
            .take_while(|&i| (eigenvalues[i] - lambda).abs() <= cluster * (j - i) as f64)
            .last()
            .unwrap_or(j);
        let y = inverse_iteration(&a, lambda, &vectors[start..j], j);
        vectors.push(y.clone());

        let big = y.amax();
        let lead = y.iter().copied().find(|c| c.abs() > 1e-3 * big).unwrap_or(1.0);
        let y = y * (lead.signum() / h.sqrt());
        let values = (0..=n)
            .map(|i| {
                if i == 0 || i == n {
                    Vector::zeros(m)
                } else {
                    y.rows((i - 1) * m, m).into_owned()
                }
            })
            .collect();
        modes.push(JacobiMode {
            eigenvalue: lambda,
            eigenfunction: Curve::new(ops.space.clone(), ops.grid, values)?,
        });
    }
    Ok(modes)
}
