//! First variation, Euler-Lagrange residual and a Newton collocation solver
//! for fixed-endpoint extremals.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::banded::BandMatrix;
use crate::curves::{at_node, Curve, Grid};
use crate::differentiation::{first_partials, second_partials, Pair, ScalarField};
use crate::error::{Error, Result};
use crate::lcs_model::{Extended, Space, Vector};

/// `J'_K[x] h = int [ dL/dx . h + dL/dv . h' ] dt` along `x`.
pub fn first_variation(lagrangian: &dyn ScalarField, x: &Curve, h: &Curve) -> Result<f64> {
    x.same_discretisation(h)?;
    let grid = x.grid();
    grid.require_even()?;
    let xv = x.velocities_fourth_order();
    let hv = h.velocities_fourth_order();
    let integrand = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let t = grid.node(i);
            let fp = first_partials(lagrangian, t, x.value(i), &xv[i]).map_err(|e| at_node(e, i, t))?;
            Ok(fp.dx().dot(h.value(i)) + fp.dv().dot(&hv[i]))
        })
        .collect::<Result<Vec<f64>>>()?;
    grid.simpson(&integrand)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElResidual {
    /// Residual covectors at the interior nodes `1..N-1`, in order.
    pub covectors: Vec<Vector>,
    /// Largest absolute residual component.
    pub max_abs: f64,
    /// Seminorm index of the dual seminorm used for `dual_max`.
    pub norm_index: usize,
    /// Largest dual seminorm of a residual covector (`inf` if unbounded).
    pub dual_max: f64,
}

impl ElResidual {
    pub fn at_node(&self, i: usize) -> Option<&Vector> {
        self.covectors.get(i.checked_sub(1)?)
    }
}

/// States `(t, x, v)` at the cell midpoints `t_{k+1/2}`, `k = 0..N-1`, with the
/// position averaged and the velocity a central difference over the cell.
fn midpoint_states(x: &Curve) -> Vec<(f64, Vector, Vector)> {
    let grid = x.grid();
    let h = grid.step();
    (0..grid.intervals())
        .map(|k| {
            let (lo, hi) = (x.value(k), x.value(k + 1));
            (grid.node(k) + 0.5 * h, (lo + hi) * 0.5, (hi - lo) / h)
        })
        .collect()
}

/// `dL/dv` at the cell midpoints.
fn midpoint_momenta(lagrangian: &dyn ScalarField, x: &Curve) -> Result<Vec<Vector>> {
    midpoint_states(x)
        .into_par_iter()
        .enumerate()
        .map(|(k, (t, y, v))| {
            first_partials(lagrangian, t, &y, &v)
                .map(|p| p.dv())
                .map_err(|e| at_node(e, k, t))
        })
        .collect()
}

/// `dL/dx` at the interior nodes, velocities from the curve stencils.
fn interior_forces(lagrangian: &dyn ScalarField, x: &Curve, vel: &[Vector]) -> Result<Vec<Vector>> {
    let grid = x.grid();
    (1..grid.intervals())
        .into_par_iter()
        .map(|i| {
            let t = grid.node(i);
            first_partials(lagrangian, t, x.value(i), &vel[i])
                .map(|p| p.dx())
                .map_err(|e| at_node(e, i, t))
        })
        .collect()
}

/// Interior residuals `dL/dx(t_i) - (p_{i+1/2} - p_{i-1/2}) / h`.
///
/// The momentum rate is a central difference over half steps. The full-step
/// central stencil on node momenta would need one-sided velocities at the
/// endpoints, which drops the residual to first order at the neighbouring
/// nodes.
fn discrete_residual(lagrangian: &dyn ScalarField, x: &Curve) -> Result<Vec<Vector>> {
    let h = x.grid().step();
    let momenta = midpoint_momenta(lagrangian, x)?;
    let forces = interior_forces(lagrangian, x, &x.velocities())?;
    Ok(forces
        .into_iter()
        .enumerate()
        .map(|(k, f)| f - (&momenta[k + 1] - &momenta[k]) / h)
        .collect())
}

fn max_abs(res: &[Vector]) -> f64 {
    res.iter().fold(0.0, |m, r| m.max(r.amax()))
}

/// `dL/dx(mu_x) - d/dt dL/dv(mu_x)` at every interior node. The time derivative
/// of the momentum covector is a central difference over half steps.
///
/// `norm_index` selects the dual seminorm of the summary; `None` uses the
/// strongest seminorm of the space.
pub fn el_residual(lagrangian: &dyn ScalarField, x: &Curve, norm_index: Option<usize>) -> Result<ElResidual> {
    let space = x.space();
    let p = norm_index.unwrap_or(space.num_seminorms());
    space.check_index(p)?;
    let covectors = discrete_residual(lagrangian, x)?;
    let mut dual_max = 0.0_f64;
    for c in &covectors {
        dual_max = dual_max.max(space.dual_seminorm(p, c)?.to_f64());
    }
    Ok(ElResidual {
        max_abs: max_abs(&covectors),
        covectors,
        norm_index: p,
        dual_max,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    pub xa: Vector,
    pub xb: Vector,
}

impl BoundaryConditions {
    pub fn new(xa: Vector, xb: Vector) -> Self {
        BoundaryConditions { xa, xb }
    }

    fn check(&self, space: &Space) -> Result<()> {
        space.check_vector(&self.xa)?;
        space.check_vector(&self.xb)?;
        if self.xa.iter().chain(self.xb.iter()).any(|c| !c.is_finite()) {
            return Err(Error::validation("boundary values must be finite"));
        }
        Ok(())
    }

    /// Straight line between the endpoints.
    pub fn linear_interpolant(&self, space: &Space, grid: Grid) -> Result<Curve> {
        let (a, b) = (grid.a(), grid.b());
        Curve::from_fn(space.clone(), grid, |t| {
            let s = (t - a) / (b - a);
            &self.xa * (1.0 - s) + &self.xb * s
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    Linear,
    Seed(Curve),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Convergence threshold on the largest absolute residual component.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Initial Newton step fraction in `(0, 1]`; halved on failed line searches.
    pub damping: f64,
    pub initial_guess: InitialGuess,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-10,
            max_iterations: 50,
            damping: 1.0,
            initial_guess: InitialGuess::Linear,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::validation("solver tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("solver needs at least one iteration"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::validation("damping must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extremal {
    pub curve: Curve,
    pub iterations: usize,
    /// Largest absolute residual before each Newton step, then at exit.
    pub residual_history: Vec<f64>,
}

impl Extremal {
    pub fn residual_max(&self) -> f64 {
        *self.residual_history.last().expect("history is never empty")
    }
}

/// Jacobian of the stacked interior residual with respect to the interior
/// node values (node-major), assembled from the second partials of `L` at the
/// nodes and cell midpoints. Block tridiagonal.
fn assemble_jacobian(lagrangian: &dyn ScalarField, x: &Curve) -> Result<BandMatrix> {
    let grid = x.grid();
    let n = grid.intervals();
    let h = grid.step();
    let m = x.space().dim();
    let vel = x.velocities();
    let nodes = (1..n)
        .into_par_iter()
        .map(|i| {
            let t = grid.node(i);
            second_partials(lagrangian, t, x.value(i), &vel[i]).map_err(|e| at_node(e, i, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let mids = midpoint_states(x)
        .into_par_iter()
        .enumerate()
        .map(|(k, (t, y, v))| second_partials(lagrangian, t, &y, &v).map_err(|e| at_node(e, k, t)))
        .collect::<Result<Vec<_>>>()?;

    let band = 2 * m - 1;
    let mut jac = BandMatrix::zeros((n - 1) * m, band, band);
    let mut add_block = |i: usize, k: usize, block: &DMatrix<f64>, scale: f64| {
        if k == 0 || k == n {
            return;
        }
        for a in 0..m {
            for b in 0..m {
                let v = block[(a, b)] * scale;
                if v != 0.0 {
                    jac.add((i - 1) * m + a, (k - 1) * m + b, v);
                }
            }
        }
    };

    for i in 1..n {
        let node = &nodes[i - 1];
        add_block(i, i, &node.block(Pair::XX), 1.0);
        let xv = node.block(Pair::XV);
        add_block(i, i - 1, &xv, -0.5 / h);
        add_block(i, i + 1, &xv, 0.5 / h);
        // -(p_{i+1/2} - p_{i-1/2}) / h, with p_{k+1/2} depending on nodes k, k+1
        for (k, sign) in [(i, -1.0 / h), (i - 1, 1.0 / h)] {
            let vx = mids[k].block(Pair::VX);
            let vv = mids[k].block(Pair::VV);
            add_block(i, k, &vx, 0.5 * sign);
            add_block(i, k + 1, &vx, 0.5 * sign);
            add_block(i, k, &vv, -sign / h);
            add_block(i, k + 1, &vv, sign / h);
        }
    }
    Ok(jac)
}

fn with_interior(base: &Curve, delta: &DVector<f64>, alpha: f64) -> Result<Curve> {
    let m = base.space().dim();
    let n = base.grid().intervals();
    let mut values = base.values().to_vec();
    for (i, val) in values.iter_mut().enumerate().take(n).skip(1) {
        for a in 0..m {
            val[a] += alpha * delta[(i - 1) * m + a];
        }
    }
    Curve::new(base.space().clone(), *base.grid(), values)
}

fn stack(res: &[Vector]) -> DVector<f64> {
    let m = res.first().map_or(0, |r| r.len());
    DVector::from_iterator(res.len() * m, res.iter().flat_map(|r| r.iter().copied()))
}

/// Damped Newton iteration on the discretised Euler-Lagrange system with the
/// endpoints held fixed.
pub fn solve_extremal(
    lagrangian: &dyn ScalarField,
    space: &Space,
    bc: &BoundaryConditions,
    grid: Grid,
    cfg: &SolverConfig,
) -> Result<Extremal> {
    cfg.validate()?;
    bc.check(space)?;
    grid.require_even()?;
    if lagrangian.dim() != space.dim() {
        return Err(Error::validation(format!(
            "Lagrangian acts on dimension {} but the space has dimension {}",
            lagrangian.dim(),
            space.dim()
        )));
    }
    let m = space.dim();
    let mut x = match &cfg.initial_guess {
        InitialGuess::Linear => bc.linear_interpolant(space, grid)?,
        InitialGuess::Seed(seed) => {
            if *seed.grid() != grid || seed.space().dim() != m {
                return Err(Error::validation("seed curve does not match the problem grid"));
            }
            let mut values = seed.values().to_vec();
            values[0] = bc.xa.clone();
            values[grid.intervals()] = bc.xb.clone();
            Curve::new(space.clone(), grid, values)?
        }
    };

    let residual_of = |c: &Curve| discrete_residual(lagrangian, c);

    let mut res = residual_of(&x)?;
    let mut norm = max_abs(&res);
    let mut history = vec![norm];
    for iteration in 0..cfg.max_iterations {
        if norm <= cfg.tolerance {
            return Ok(Extremal {
                curve: x,
                iterations: iteration,
                residual_history: history,
            });
        }
        let jac = assemble_jacobian(lagrangian, &x)?;
        let floor = 64.0 * f64::EPSILON * jac.max_abs();
        let lu = jac.lu(floor).map_err(|s| Error::SingularJacobian {
            node: s.row / m + 1,
            pivot: s.pivot,
        })?;
        let delta = -lu.solve(&stack(&res));

        let mut alpha = cfg.damping;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = with_interior(&x, &delta, alpha)?;
            match residual_of(&trial) {
                Ok(r) => {
                    let nn = max_abs(&r);
                    if nn.is_finite() && nn < norm {
                        accepted = Some((trial, r, nn));
                        break;
                    }
                }
                Err(Error::Domain { .. }) | Err(Error::NonFinite { .. }) => {}
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, r, nn)) => {
                x = trial;
                res = r;
                norm = nn;
                history.push(norm);
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations: iteration + 1,
                    history,
                })
            }
        }
    }
    if norm <= cfg.tolerance {
        return Ok(Extremal {
            curve: x,
            iterations: cfg.max_iterations,
            residual_history: history,
        });
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iterations,
        history,
    })
}

/// Residual summary under a dual seminorm as an [`Extended`] value.
pub fn residual_dual_norm(res: &ElResidual) -> Extended {
    if res.dual_max.is_finite() {
        Extended::Finite(res.dual_max)
    } else {
        Extended::Infinite
    }
}
