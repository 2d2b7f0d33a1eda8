//! TOML problem files.
//!
//! ```toml
//! lagrangian = "(v1^2 - x1^2)/2"
//!
//! [space]
//! dim = 1
//!
//! [interval]
//! a = 0.0
//! b = 1.5707963267948966
//! N = 200
//!
//! [boundary]
//! xa = [0.0]
//! xb = [1.0]
//!
//! [[generators]]
//! name = "time"
//! catalog = "time-translation"
//! ```

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::curves::Grid;
use crate::differentiation::{FdConfig, SharedField};
use crate::dsl::ExprField;
use crate::error::{Error, Result};
use crate::euler_lagrange::{BoundaryConditions, SolverConfig};
use crate::lcs_model::{Space, Vector};
use crate::symmetry_noether::{AffineCoefficients, FirstIntegral, SamplingConfig, SymmetryGenerator};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub lagrangian: Option<String>,
    pub space: SpaceSpec,
    pub interval: IntervalSpec,
    pub boundary: Option<BoundarySpec>,
    #[serde(default)]
    pub generators: Vec<GeneratorSpec>,
    #[serde(default)]
    pub integrals: Vec<IntegralSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub sampling: SamplingSpec,
    pub jacobi: Option<JacobiSpec>,
    pub audit: Option<AuditSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub dim: usize,
    pub weights: Option<Vec<f64>>,
    pub seminorms: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSpec {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub xa: Vec<f64>,
    pub xb: Vec<f64>,
}

/// One of `catalog`, `T` with `X`, or `affine` (parameters in the order
/// `a0, a1, b1..bm, then c_j0, c_j1, d_j1..d_jm per component j`). A bare
/// catalog name is accepted as `name`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub name: String,
    pub catalog: Option<String>,
    #[serde(rename = "T")]
    pub t: Option<String>,
    #[serde(rename = "X")]
    pub x: Option<Vec<String>>,
    pub affine: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralSpec {
    pub name: String,
    pub expression: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub damping: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub legendre: Option<f64>,
    pub invariance: Option<f64>,
    pub conservation: Option<f64>,
    pub audit: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub t: Option<[f64; 2]>,
    pub x: Option<[f64; 2]>,
    pub v: Option<[f64; 2]>,
    pub count: Option<usize>,
    pub offset: Option<usize>,
}

/// Explicit Jacobi operators: row-major `dim x dim` expression texts in `t`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JacobiSpec {
    pub k: Option<usize>,
    #[serde(rename = "R")]
    pub r: Option<Vec<String>>,
    #[serde(rename = "P")]
    pub p: Option<Vec<String>>,
}

/// A map `x -> (f_1(x), ..., f_k(x))` audited at the listed points.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSpec {
    pub map: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub directions: Option<usize>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub grid_n: Option<usize>,
    pub fd: FdConfig,
}

pub const DEFAULT_LEGENDRE_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_AUDIT_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_JACOBI_MODES: usize = 3;

/// A problem file with every expression parsed and every dimension checked.
pub struct Problem {
    pub file: ProblemFile,
    pub space: Space,
    pub grid: Grid,
    pub lagrangian: Option<SharedField>,
    pub boundary: Option<BoundaryConditions>,
    pub generators: Vec<SymmetryGenerator>,
    pub integrals: Vec<FirstIntegral>,
    pub solver: SolverConfig,
    pub sampling: SamplingConfig,
    pub fd: FdConfig,
}

fn field(src: &str, dim: usize, fd: FdConfig, what: &str) -> Result<SharedField> {
    let f = ExprField::parse(src, dim)
        .map_err(|e| Error::validation(format!("{what}: {e}")))?
        .with_fd(fd);
    Ok(Arc::new(f))
}

fn vector(values: &[f64], dim: usize, what: &str) -> Result<Vector> {
    if values.len() != dim {
        return Err(Error::validation(format!(
            "{what} has {} components but the space has dimension {dim}",
            values.len()
        )));
    }
    Ok(Vector::from_row_slice(values))
}

fn range(r: Option<[f64; 2]>, default: (f64, f64)) -> (f64, f64) {
    r.map_or(default, |[lo, hi]| (lo, hi))
}

impl Problem {
    pub fn parse(text: &str, ov: &Overrides) -> Result<Problem> {
        let file: ProblemFile = toml::from_str(text)?;
        Problem::resolve(file, ov)
    }

    pub fn resolve(file: ProblemFile, ov: &Overrides) -> Result<Problem> {
        let dim = file.space.dim;
        let weights = file.space.weights.clone().unwrap_or_else(|| vec![1.0; dim]);
        if weights.len() != dim {
            return Err(Error::validation(format!(
                "space has dimension {dim} but {} weights",
                weights.len()
            )));
        }
        let space = Space::new(dim, &weights, file.space.seminorms.unwrap_or(dim))?;
        let n = ov.grid_n.unwrap_or(file.interval.n);
        let grid = Grid::new(file.interval.a, file.interval.b, n)?;
        grid.require_even()?;
        let fd = ov.fd;

        let lagrangian = file
            .lagrangian
            .as_deref()
            .map(|s| field(s, dim, fd, "lagrangian"))
            .transpose()?;
        let boundary = file
            .boundary
            .as_ref()
            .map(|b| -> Result<_> {
                Ok(BoundaryConditions::new(
                    vector(&b.xa, dim, "boundary.xa")?,
                    vector(&b.xb, dim, "boundary.xb")?,
                ))
            })
            .transpose()?;

        let mut names = BTreeSet::new();
        let mut generators = Vec::with_capacity(file.generators.len());
        for g in &file.generators {
            if !names.insert(g.name.clone()) {
                return Err(Error::validation(format!("duplicate generator name `{}`", g.name)));
            }
            generators.push(generator(g, dim, fd)?);
        }
        let mut names = BTreeSet::new();
        let mut integrals = Vec::with_capacity(file.integrals.len());
        for c in &file.integrals {
            if !names.insert(c.name.clone()) {
                return Err(Error::validation(format!("duplicate integral name `{}`", c.name)));
            }
            let f = field(&c.expression, dim, fd, &format!("integral `{}`", c.name))?;
            integrals.push(FirstIntegral::user(c.name.clone(), f));
        }

        let d = SolverConfig::default();
        let solver = SolverConfig {
            tolerance: file.solver.tolerance.unwrap_or(d.tolerance),
            max_iterations: file.solver.max_iterations.unwrap_or(d.max_iterations),
            damping: file.solver.damping.unwrap_or(d.damping),
            initial_guess: d.initial_guess,
        };

        let s = &file.sampling;
        let base = SamplingConfig::new(grid.a(), grid.b());
        let sampling = SamplingConfig {
            t_range: range(s.t, base.t_range),
            x_range: range(s.x, base.x_range),
            v_range: range(s.v, base.v_range),
            count: s.count.unwrap_or(base.count),
            offset: s.offset.unwrap_or(base.offset),
            tolerance: file.tolerances.invariance,
        };

        if let Some(a) = &file.audit {
            for (k, p) in a.points.iter().enumerate() {
                vector(p, dim, &format!("audit point {}", k + 1))?;
            }
        }

        Ok(Problem {
            file,
            space,
            grid,
            lagrangian,
            boundary,
            generators,
            integrals,
            solver,
            sampling,
            fd,
        })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn lagrangian(&self) -> Result<&SharedField> {
        self.lagrangian
            .as_ref()
            .ok_or_else(|| Error::validation("problem file has no `lagrangian`"))
    }

    /// A generator listed in the file, else a catalog name.
    pub fn generator(&self, name: &str) -> Result<SymmetryGenerator> {
        if let Some(g) = self.generators.iter().find(|g| g.name() == name) {
            return Ok(g.clone());
        }
        SymmetryGenerator::catalog(name, self.dim()).map_err(|_| {
            let known: Vec<&str> = self.generators.iter().map(|g| g.name()).collect();
            Error::validation(format!(
                "unknown generator `{name}` (file lists {known:?}; catalog names are time-translation, \
                 space-translation[-i], rotation-ij, dilation, galilean-boost[-i])"
            ))
        })
    }

    pub fn integral(&self, name: &str) -> Result<&FirstIntegral> {
        self.integrals.iter().find(|c| c.name == name).ok_or_else(|| {
            let known: Vec<&str> = self.integrals.iter().map(|c| c.name.as_str()).collect();
            Error::validation(format!("unknown integral `{name}` (file lists {known:?})"))
        })
    }

    /// Explicit `(R, P)` from the `[jacobi]` table, evaluated at every node.
    pub fn jacobi_matrices(&self) -> Result<Option<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)>> {
        let Some(spec) = &self.file.jacobi else {
            return Ok(None);
        };
        let (r, p) = match (&spec.r, &spec.p) {
            (None, None) => return Ok(None),
            (Some(r), Some(p)) => (r, p),
            _ => return Err(Error::validation("[jacobi] needs both R and P, or neither")),
        };
        let m = self.dim();
        let parse = |srcs: &Vec<String>, what: &str| -> Result<Vec<SharedField>> {
            if srcs.len() != m * m {
                return Err(Error::validation(format!(
                    "jacobi.{what} needs {} entries (row-major {m}x{m}), got {}",
                    m * m,
                    srcs.len()
                )));
            }
            srcs.iter()
                .map(|s| {
                    let f = field(s, m, self.fd, &format!("jacobi.{what}"))?;
                    let a = f.arity();
                    if a.x || a.v {
                        return Err(Error::validation(format!("jacobi.{what} entries may depend on t only")));
                    }
                    Ok(f)
                })
                .collect()
        };
        let (rf, pf) = (parse(r, "R")?, parse(p, "P")?);
        let zero = Vector::zeros(m);
        let eval = |fs: &[SharedField], t: f64| -> Result<DMatrix<f64>> {
            let vals = fs.iter().map(|f| f.value(t, &zero, &zero)).collect::<Result<Vec<_>>>()?;
            Ok(DMatrix::from_row_slice(m, m, &vals))
        };
        let nodes = self.grid.nodes();
        let rs = nodes.iter().map(|t| eval(&rf, *t)).collect::<Result<Vec<_>>>()?;
        let ps = nodes.iter().map(|t| eval(&pf, *t)).collect::<Result<Vec<_>>>()?;
        Ok(Some((rs, ps)))
    }

    pub fn jacobi_modes(&self) -> usize {
        self.file
            .jacobi
            .as_ref()
            .and_then(|j| j.k)
            .unwrap_or(DEFAULT_JACOBI_MODES)
    }
}

fn generator(g: &GeneratorSpec, dim: usize, fd: FdConfig) -> Result<SymmetryGenerator> {
    let ctx = |e: Error| Error::validation(format!("generator `{}`: {e}", g.name));
    match (&g.catalog, &g.t, &g.x, &g.affine) {
        (Some(c), None, None, None) => Ok(SymmetryGenerator::catalog(c, dim).map_err(ctx)?.with_name(g.name.clone())),
        (None, Some(t), Some(x), None) => {
            if x.len() != dim {
                return Err(ctx(Error::validation(format!(
                    "X has {} components but the space has dimension {dim}",
                    x.len()
                ))));
            }
            let t = field(t, dim, fd, "T").map_err(ctx)?;
            let x = x
                .iter()
                .enumerate()
                .map(|(i, s)| field(s, dim, fd, &format!("X[{}]", i + 1)))
                .collect::<Result<Vec<_>>>()
                .map_err(ctx)?;
            SymmetryGenerator::new(g.name.clone(), t, x).map_err(ctx)
        }
        (None, None, None, Some(p)) => {
            let c = AffineCoefficients::from_parameters(dim, p).map_err(ctx)?;
            SymmetryGenerator::from_affine(g.name.clone(), &c).map_err(ctx)
        }
        (None, None, None, None) => SymmetryGenerator::catalog(&g.name, dim).map_err(ctx),
        _ => Err(ctx(Error::validation(
            "give exactly one of `catalog`, `T` with `X`, or `affine`",
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
lagrangian = "v1^2/2"
[space]
dim = 1
[interval]
a = 0.0
b = 1.0
N = 20
[boundary]
xa = [0.0]
xb = [1.0]
"#;

    #[test]
    fn parses_minimal_file() {
        let p = Problem::parse(BASE, &Overrides::default()).unwrap();
        assert_eq!(p.grid.intervals(), 20);
        assert!(p.boundary.is_some());
        assert_eq!(p.generator("time-translation").unwrap().name(), "time-translation");
        assert!(p.generator("shear").is_err());
    }

    #[test]
    fn rejects_odd_grid_and_bad_dimensions() {
        let odd = BASE.replace("N = 20", "N = 21");
        assert!(Problem::parse(&odd, &Overrides::default()).is_err());
        let ov = Overrides {
            grid_n: Some(7),
            ..Default::default()
        };
        assert!(Problem::parse(BASE, &ov).is_err());
        let bad = BASE.replace("xb = [1.0]", "xb = [1.0, 2.0]");
        assert!(Problem::parse(&bad, &Overrides::default()).is_err());
        let unknown = format!("{BASE}\n[extra]\nkey = 1\n");
        assert!(Problem::parse(&unknown, &Overrides::default()).is_err());
    }

    #[test]
    fn generator_forms() {
        let text = format!(
            "{BASE}\n[[generators]]\nname = \"boost\"\nT = \"0\"\nX = [\"t\"]\n\n\
             [[generators]]\nname = \"shift\"\naffine = [0, 0, 0, 1, 0, 0]\n\n\
             [[generators]]\nname = \"dilation\"\n"
        );
        let p = Problem::parse(&text, &Overrides::default()).unwrap();
        assert_eq!(p.generators.len(), 3);
        let both = format!("{BASE}\n[[generators]]\nname = \"g\"\ncatalog = \"dilation\"\naffine = [1, 0, 0, 0, 0, 0]\n");
        assert!(Problem::parse(&both, &Overrides::default()).is_err());
    }

    #[test]
    fn explicit_jacobi_operators() {
        let text = format!("{BASE}\n[jacobi]\nk = 2\nR = [\"1\"]\nP = [\"t\"]\n");
        let p = Problem::parse(&text, &Overrides::default()).unwrap();
        let (r, pm) = p.jacobi_matrices().unwrap().unwrap();
        assert_eq!(r.len(), 21);
        assert_eq!(pm[20][(0, 0)], 1.0);
        assert_eq!(p.jacobi_modes(), 2);
        let bad = format!("{BASE}\n[jacobi]\nR = [\"x1\"]\nP = [\"0\"]\n");
        let p = Problem::parse(&bad, &Overrides::default()).unwrap();
        assert!(p.jacobi_matrices().is_err());
    }
}
