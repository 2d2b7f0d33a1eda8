//! Symmetry generators, the infinitesimal invariance condition, Noether first
//! integrals and their conservation along curves, and an affine symmetry
//! search.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::curves::Curve;
use crate::differentiation::{first_partials, Arity, FirstPartials, ScalarField, SecondPartials, SharedField};
use crate::dsl::ExprField;
use crate::error::{Error, Result};
use crate::lcs_model::Vector;

fn nth_prime(k: usize) -> usize {
    let mut found = 0;
    let mut c = 1;
    loop {
        c += 1;
        if (2..).take_while(|d| d * d <= c).all(|d| c % d != 0) {
            if found == k {
                return c;
            }
            found += 1;
        }
    }
}

/// Radical inverse of `index` in the base of the `dim`-th prime (0-based).
pub fn halton(index: usize, dim: usize) -> f64 {
    let base = nth_prime(dim);
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// `c0 + ct t + cx . x`, with exact partials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineField {
    pub c0: f64,
    pub ct: f64,
    pub cx: Vec<f64>,
}

impl AffineField {
    pub fn constant(dim: usize, c0: f64) -> Self {
        AffineField {
            c0,
            ct: 0.0,
            cx: vec![0.0; dim],
        }
    }

    fn gradient(&self) -> DVector<f64> {
        let m = self.cx.len();
        let mut g = DVector::zeros(1 + 2 * m);
        g[0] = self.ct;
        for (i, c) in self.cx.iter().enumerate() {
            g[1 + i] = *c;
        }
        g
    }
}

impl ScalarField for AffineField {
    fn dim(&self) -> usize {
        self.cx.len()
    }

    fn arity(&self) -> Arity {
        Arity::TX
    }

    fn value(&self, t: f64, x: &Vector, _v: &Vector) -> Result<f64> {
        Ok(self.c0 + self.ct * t + self.cx.iter().zip(x.iter()).map(|(c, y)| c * y).sum::<f64>())
    }

    fn analytic_first(&self, t: f64, x: &Vector, v: &Vector) -> Option<Result<FirstPartials>> {
        Some(self.value(t, x, v).map(|value| FirstPartials {
            value,
            gradient: self.gradient(),
            dim: self.cx.len(),
        }))
    }

    fn analytic_second(&self, t: f64, x: &Vector, v: &Vector) -> Option<Result<SecondPartials>> {
        let n = 1 + 2 * self.cx.len();
        self.analytic_first(t, x, v).map(|r| {
            r.map(|first| SecondPartials {
                first,
                hessian: DMatrix::zeros(n, n),
            })
        })
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}

/// `c f`.
struct ScaledField {
    inner: SharedField,
    c: f64,
}

impl ScalarField for ScaledField {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn arity(&self) -> Arity {
        self.inner.arity()
    }

    fn value(&self, t: f64, x: &Vector, v: &Vector) -> Result<f64> {
        Ok(self.c * self.inner.value(t, x, v)?)
    }

    fn analytic_first(&self, t: f64, x: &Vector, v: &Vector) -> Option<Result<FirstPartials>> {
        self.inner.analytic_first(t, x, v).map(|r| {
            r.map(|f| FirstPartials {
                value: self.c * f.value,
                gradient: f.gradient * self.c,
                dim: f.dim,
            })
        })
    }

    fn analytic_second(&self, t: f64, x: &Vector, v: &Vector) -> Option<Result<SecondPartials>> {
        self.inner.analytic_second(t, x, v).map(|r| {
            r.map(|s| SecondPartials {
                first: FirstPartials {
                    value: self.c * s.first.value,
                    gradient: s.first.gradient * self.c,
                    dim: s.first.dim,
                },
                hessian: s.hessian * self.c,
            })
        })
    }

    fn fd_config(&self) -> crate::differentiation::FdConfig {
        self.inner.fd_config()
    }

    fn has_analytic_partials(&self) -> bool {
        self.inner.has_analytic_partials()
    }
}

/// Infinitesimal generators `T(t, x)` and `X(t, x)` of a one-parameter group.
#[derive(Clone)]
pub struct SymmetryGenerator {
    name: String,
    t: SharedField,
    x: Vec<SharedField>,
}

impl fmt::Debug for SymmetryGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetryGenerator")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .finish()
    }
}

fn affine(dim: usize, c0: f64, ct: f64, cx: &[(usize, f64)]) -> SharedField {
    let mut f = AffineField::constant(dim, c0);
    f.ct = ct;
    for (i, c) in cx {
        f.cx[*i] = *c;
    }
    Arc::new(f)
}

impl SymmetryGenerator {
    pub fn new(name: impl Into<String>, t: SharedField, x: Vec<SharedField>) -> Result<Self> {
        let dim = x.len();
        if dim == 0 {
            return Err(Error::validation("generator needs at least one X component"));
        }
        for f in std::iter::once(&t).chain(&x) {
            if f.dim() != dim {
                return Err(Error::validation(format!(
                    "generator component acts on dimension {} but X has {dim} components",
                    f.dim()
                )));
            }
            if f.arity().v {
                return Err(Error::validation("generator components may depend on t and x only"));
            }
        }
        Ok(SymmetryGenerator {
            name: name.into(),
            t,
            x,
        })
    }

    /// Generator from expression texts over `t, x1..xm`.
    pub fn from_expressions(name: impl Into<String>, t: &str, x: &[&str]) -> Result<Self> {
        let dim = x.len();
        let t: SharedField = Arc::new(ExprField::parse(t, dim)?);
        let x = x
            .iter()
            .map(|s| ExprField::parse(s, dim).map(|f| Arc::new(f) as SharedField))
            .collect::<Result<Vec<_>>>()?;
        SymmetryGenerator::new(name, t, x)
    }

    /// Affine ansatz from its coefficients.
    pub fn from_affine(name: impl Into<String>, c: &AffineCoefficients) -> Result<Self> {
        let t: SharedField = Arc::new(c.t.clone());
        let x = c.x.iter().map(|f| Arc::new(f.clone()) as SharedField).collect();
        SymmetryGenerator::new(name, t, x)
    }

    pub fn time_translation(dim: usize) -> Self {
        SymmetryGenerator {
            name: "time-translation".into(),
            t: affine(dim, 1.0, 0.0, &[]),
            x: (0..dim).map(|_| affine(dim, 0.0, 0.0, &[])).collect(),
        }
    }

    /// `X = e_i` (1-based `i`).
    pub fn space_translation(dim: usize, i: usize) -> Result<Self> {
        check_axis(dim, i)?;
        Ok(SymmetryGenerator {
            name: if dim == 1 {
                "space-translation".into()
            } else {
                format!("space-translation-{i}")
            },
            t: affine(dim, 0.0, 0.0, &[]),
            x: (1..=dim)
                .map(|k| affine(dim, if k == i { 1.0 } else { 0.0 }, 0.0, &[]))
                .collect(),
        })
    }

    /// Rotation in the `(i, j)` plane: `X_i = -x_j`, `X_j = x_i` (1-based).
    pub fn rotation(dim: usize, i: usize, j: usize) -> Result<Self> {
        check_axis(dim, i)?;
        check_axis(dim, j)?;
        if i == j {
            return Err(Error::validation("rotation needs two distinct axes"));
        }
        Ok(SymmetryGenerator {
            name: format!("rotation-{i}{j}"),
            t: affine(dim, 0.0, 0.0, &[]),
            x: (1..=dim)
                .map(|k| {
                    if k == i {
                        affine(dim, 0.0, 0.0, &[(j - 1, -1.0)])
                    } else if k == j {
                        affine(dim, 0.0, 0.0, &[(i - 1, 1.0)])
                    } else {
                        affine(dim, 0.0, 0.0, &[])
                    }
                })
                .collect(),
        })
    }

    /// `T = t`, `X = x / 2`: the scaling symmetry of `|v|^2 / 2`.
    pub fn dilation(dim: usize) -> Self {
        SymmetryGenerator {
            name: "dilation".into(),
            t: affine(dim, 0.0, 1.0, &[]),
            x: (0..dim).map(|k| affine(dim, 0.0, 0.0, &[(k, 0.5)])).collect(),
        }
    }

    /// `T = 0`, `X = t e_i` (1-based `i`).
    pub fn galilean_boost(dim: usize, i: usize) -> Result<Self> {
        check_axis(dim, i)?;
        Ok(SymmetryGenerator {
            name: if dim == 1 {
                "galilean-boost".into()
            } else {
                format!("galilean-boost-{i}")
            },
            t: affine(dim, 0.0, 0.0, &[]),
            x: (1..=dim)
                .map(|k| affine(dim, 0.0, if k == i { 1.0 } else { 0.0 }, &[]))
                .collect(),
        })
    }

    /// Catalog lookup: `time-translation`, `space-translation[-i]`,
    /// `rotation-ij`, `dilation`, `galilean-boost[-i]`.
    pub fn catalog(name: &str, dim: usize) -> Result<Self> {
        let axis = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::validation(format!("bad axis `{s}` in generator `{name}`")))
        };
        match name {
            "time-translation" => return Ok(SymmetryGenerator::time_translation(dim)),
            "space-translation" => return SymmetryGenerator::space_translation(dim, 1),
            "dilation" => return Ok(SymmetryGenerator::dilation(dim)),
            "galilean-boost" => return SymmetryGenerator::galilean_boost(dim, 1),
            _ => {}
        }
        if let Some(i) = name.strip_prefix("space-translation-") {
            return SymmetryGenerator::space_translation(dim, axis(i)?);
        }
        if let Some(i) = name.strip_prefix("galilean-boost-") {
            return SymmetryGenerator::galilean_boost(dim, axis(i)?);
        }
        if let Some(ij) = name.strip_prefix("rotation-") {
            let (i, j) = if let Some((i, j)) = ij.split_once('-') {
                (axis(i)?, axis(j)?)
            } else if ij.len() == 2 {
                (axis(&ij[..1])?, axis(&ij[1..])?)
            } else {
                return Err(Error::validation(format!(
                    "rotation `{name}` needs two axes, e.g. rotation-12 or rotation-10-11"
                )));
            };
            return SymmetryGenerator::rotation(dim, i, j);
        }
        Err(Error::validation(format!("unknown catalog generator `{name}`")))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn t_component(&self) -> &SharedField {
        &self.t
    }

    pub fn x_components(&self) -> &[SharedField] {
        &self.x
    }

    /// `(c T, c X)`.
    pub fn scaled(&self, c: f64) -> Self {
        let wrap = |f: &SharedField| -> SharedField { Arc::new(ScaledField { inner: f.clone(), c }) };
        SymmetryGenerator {
            name: format!("{}*{c}", self.name),
            t: wrap(&self.t),
            x: self.x.iter().map(wrap).collect(),
        }
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.t.has_analytic_partials() && self.x.iter().all(|f| f.has_analytic_partials())
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::validation(format!(
                "generator `{}` has dimension {} but the Lagrangian has dimension {dim}",
                self.name,
                self.dim()
            )));
        }
        Ok(())
    }
}

fn check_axis(dim: usize, i: usize) -> Result<()> {
    if i == 0 || i > dim {
        return Err(Error::IndexOutOfRange {
            what: "axis",
            index: i,
            max: dim,
        });
    }
    Ok(())
}

/// `f' = df/dt + df/dx . v` for a generator component.
pub fn total_time_derivative(f: &dyn ScalarField, t: f64, x: &Vector, v: &Vector) -> Result<f64> {
    let p = first_partials(f, t, x, v)?;
    Ok(p.dt() + p.dx().dot(v))
}

/// `(T, T', X, X')` at a point.
fn generator_jet(g: &SymmetryGenerator, t: f64, x: &Vector, v: &Vector) -> Result<(f64, f64, Vector, Vector)> {
    let tp = first_partials(g.t.as_ref(), t, x, v)?;
    let m = g.dim();
    let mut xs = Vector::zeros(m);
    let mut xd = Vector::zeros(m);
    for (k, f) in g.x.iter().enumerate() {
        let p = first_partials(f.as_ref(), t, x, v)?;
        xs[k] = p.value;
        xd[k] = p.dt() + p.dx().dot(v);
    }
    Ok((tp.value, tp.dt() + tp.dx().dot(v), xs, xd))
}

/// `X' - v T'`.
pub fn extended_generator(g: &SymmetryGenerator, t: f64, x: &Vector, v: &Vector) -> Result<Vector> {
    let (_, td, _, xd) = generator_jet(g, t, x, v)?;
    Ok(xd - v * td)
}

/// Left side of the invariance condition
/// `L_t T + L_x . X + L_v . (X' - v T') + L T'`.
pub fn invariance_residual(
    lagrangian: &dyn ScalarField,
    g: &SymmetryGenerator,
    t: f64,
    x: &Vector,
    v: &Vector,
) -> Result<f64> {
    g.check(lagrangian.dim())?;
    let lp = first_partials(lagrangian, t, x, v)?;
    let (tv, td, xs, xd) = generator_jet(g, t, x, v)?;
    let ext = xd - v * td;
    Ok(lp.dt() * tv + lp.dx().dot(&xs) + lp.dv().dot(&ext) + lp.value * td)
}

/// Box and count for quasi-random `(t, x, v)` samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingConfig {
    pub t_range: (f64, f64),
    pub x_range: (f64, f64),
    pub v_range: (f64, f64),
    pub count: usize,
    /// Index of the first Halton point; distinct offsets give fresh samples.
    pub offset: usize,
    /// Verdict threshold; `None` picks `1e-8` for exact partials, `1e-5` otherwise.
    pub tolerance: Option<f64>,
}

pub const ANALYTIC_INVARIANCE_TOLERANCE: f64 = 1e-8;
pub const FD_INVARIANCE_TOLERANCE: f64 = 1e-5;

impl SamplingConfig {
    /// `t` in `[a, b]`, coordinates of `x` and `v` in `[-2, 2]`, 200 samples.
    pub fn new(a: f64, b: f64) -> Self {
        SamplingConfig {
            t_range: (a, b),
            x_range: (-2.0, 2.0),
            v_range: (-2.0, 2.0),
            count: 200,
            offset: 0,
            tolerance: None,
        }
    }

    fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.t_range, self.x_range, self.v_range] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::validation(format!("sampling range [{lo}, {hi}] is not a finite interval")));
            }
        }
        if self.count == 0 {
            return Err(Error::validation("sampling needs at least one point"));
        }
        Ok(())
    }

    /// The `k`-th sample (0-based) in dimension `dim`.
    pub fn point(&self, k: usize, dim: usize) -> (f64, Vector, Vector) {
        let idx = self.offset + k + 1;
        let lerp = |(lo, hi): (f64, f64), u: f64| lo + (hi - lo) * u;
        let t = lerp(self.t_range, halton(idx, 0));
        let x = Vector::from_fn(dim, |i, _| lerp(self.x_range, halton(idx, 1 + i)));
        let v = Vector::from_fn(dim, |i, _| lerp(self.v_range, halton(idx, 1 + dim + i)));
        (t, x, v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub generator: String,
    pub samples: Vec<InvarianceSample>,
    pub max_abs_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Invariance residual over the sampling box.
pub fn check_invariance(
    lagrangian: &dyn ScalarField,
    g: &SymmetryGenerator,
    sampling: &SamplingConfig,
) -> Result<InvarianceReport> {
    sampling.validate()?;
    g.check(lagrangian.dim())?;
    let dim = lagrangian.dim();
    let tolerance = sampling.tolerance.unwrap_or(if lagrangian.has_analytic_partials() && g.has_analytic_partials() {
        ANALYTIC_INVARIANCE_TOLERANCE
    } else {
        FD_INVARIANCE_TOLERANCE
    });
    let samples = (0..sampling.count)
        .into_par_iter()
        .map(|k| {
            let (t, x, v) = sampling.point(k, dim);
            let residual = invariance_residual(lagrangian, g, t, &x, &v)?;
            Ok(InvarianceSample {
                t,
                x: x.as_slice().to_vec(),
                v: v.as_slice().to_vec(),
                residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_abs_residual = samples.iter().map(|s| s.residual.abs()).fold(0.0, f64::max);
    Ok(InvarianceReport {
        generator: g.name.clone(),
        samples,
        max_abs_residual,
        tolerance,
        pass: max_abs_residual <= tolerance,
    })
}

/// `H = -L + v . dL/dv`.
pub fn hamiltonian(lagrangian: &dyn ScalarField, t: f64, x: &Vector, v: &Vector) -> Result<f64> {
    let p = first_partials(lagrangian, t, x, v)?;
    Ok(-p.value + v.dot(&p.dv()))
}

/// `C = (L - v . dL/dv) T + dL/dv . X`.
struct NoetherField {
    lagrangian: SharedField,
    generator: SymmetryGenerator,
}

impl ScalarField for NoetherField {
    fn dim(&self) -> usize {
        self.lagrangian.dim()
    }

    fn value(&self, t: f64, x: &Vector, v: &Vector) -> Result<f64> {
        let p = first_partials(self.lagrangian.as_ref(), t, x, v)?;
        let momentum = p.dv();
        let tv = self.generator.t.value(t, x, v)?;
        let mut c = (p.value - momentum.dot(v)) * tv;
        for (k, f) in self.generator.x.iter().enumerate() {
            c += momentum[k] * f.value(t, x, v)?;
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Noether,
    User,
}

/// A candidate first integral `C(t, x, v)`.
#[derive(Clone)]
pub struct FirstIntegral {
    pub name: String,
    pub provenance: Provenance,
    field: SharedField,
}

impl fmt::Debug for FirstIntegral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FirstIntegral")
            .field("name", &self.name)
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl FirstIntegral {
    pub fn user(name: impl Into<String>, field: SharedField) -> Self {
        FirstIntegral {
            name: name.into(),
            provenance: Provenance::User,
            field,
        }
    }

    pub fn value(&self, t: f64, x: &Vector, v: &Vector) -> Result<f64> {
        self.field.value(t, x, v)
    }

    pub fn field(&self) -> &SharedField {
        &self.field
    }
}

/// The Noether integral of `g`; invariance is not checked here.
pub fn noether_first_integral(lagrangian: SharedField, g: &SymmetryGenerator) -> Result<FirstIntegral> {
    g.check(lagrangian.dim())?;
    Ok(FirstIntegral {
        name: format!("noether[{}]", g.name),
        provenance: Provenance::Noether,
        field: Arc::new(NoetherField {
            lagrangian,
            generator: g.clone(),
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationReport {
    pub integral: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// `max |C_i - mean|`.
    pub max_deviation: f64,
    /// `max_deviation / (1 + |mean|)`.
    pub relative_deviation: f64,
    /// `max C_i - min C_i`.
    pub spread: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Evaluates `C` at every node with the stencil velocity and compares the
/// relative deviation with `tol`.
pub fn verify_conservation(c: &FirstIntegral, x: &Curve, tol: f64) -> Result<ConservationReport> {
    if c.field.dim() != x.space().dim() {
        return Err(Error::validation("first integral and curve have different dimensions"));
    }
    let grid = x.grid();
    let vel = x.velocities();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let t = grid.node(i);
            c.value(t, x.value(i), &vel[i]).map_err(|e| crate::curves::at_node(e, i, t))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let max_deviation = values.iter().map(|c| (c - mean).abs()).fold(0.0, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let relative_deviation = max_deviation / (1.0 + mean.abs());
    Ok(ConservationReport {
        integral: c.name.clone(),
        values,
        mean,
        max_deviation,
        relative_deviation,
        spread: hi - lo,
        tolerance: tol,
        pass: relative_deviation <= tol,
    })
}

/// Coefficients of the affine ansatz `T = a0 + a1 t + b . x`,
/// `X_j = c_j0 + c_j1 t + d_j . x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineCoefficients {
    pub t: AffineField,
    pub x: Vec<AffineField>,
}

impl AffineCoefficients {
    pub fn parameter_count(dim: usize) -> usize {
        (dim + 1) * (dim + 2)
    }

    /// Parameters in the order `a0, a1, b.., then c_j0, c_j1, d_j.. per j`.
    pub fn from_parameters(dim: usize, p: &[f64]) -> Result<Self> {
        if p.len() != AffineCoefficients::parameter_count(dim) {
            return Err(Error::validation(format!(
                "affine generator on dimension {dim} needs {} parameters",
                AffineCoefficients::parameter_count(dim)
            )));
        }
        let block = |k: usize| {
            let s = &p[k * (dim + 2)..(k + 1) * (dim + 2)];
            AffineField {
                c0: s[0],
                ct: s[1],
                cx: s[2..].to_vec(),
            }
        };
        Ok(AffineCoefficients {
            t: block(0),
            x: (1..=dim).map(block).collect(),
        })
    }

    pub fn parameters(&self) -> Vec<f64> {
        std::iter::once(&self.t)
            .chain(&self.x)
            .flat_map(|f| [f.c0, f.ct].into_iter().chain(f.cx.iter().copied()))
            .collect()
    }
}

/// One row of the linear system: the invariance residual of each affine basis
/// generator at a sample point.
fn ansatz_row(lagrangian: &dyn ScalarField, t: f64, x: &Vector, v: &Vector) -> Result<Vec<f64>> {
    let m = x.len();
    let p = first_partials(lagrangian, t, x, v)?;
    let (l, lt, lx, lv) = (p.value, p.dt(), p.dx(), p.dv());
    let lvv = lv.dot(v);
    let mut row = Vec::with_capacity(AffineCoefficients::parameter_count(m));
    // T = 1, T = t, T = x_i
    row.push(lt);
    row.push(lt * t - lvv + l);
    for i in 0..m {
        row.push(lt * x[i] - lvv * v[i] + l * v[i]);
    }
    // X = e_j, X = t e_j, X = x_i e_j
    for j in 0..m {
        row.push(lx[j]);
        row.push(lx[j] * t + lv[j]);
        for i in 0..m {
            row.push(lx[j] * x[i] + lv[j] * v[i]);
        }
    }
    Ok(row)
}

#[derive(Debug, Clone)]
pub struct FoundSymmetry {
    pub generator: SymmetryGenerator,
    pub coefficients: AffineCoefficients,
    /// Re-check on samples disjoint from those used in the search.
    pub recheck: InvarianceReport,
}

#[derive(Debug, Clone)]
pub struct SymmetrySearch {
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    pub samples: usize,
    pub symmetries: Vec<FoundSymmetry>,
}

/// Relative singular-value cut for the numerical null space.
pub const NULL_SPACE_THRESHOLD: f64 = 1e-8;
/// Residual bound on the fresh-sample re-check.
pub const RECHECK_TOLERANCE: f64 = 1e-6;
pub const RECHECK_SAMPLES: usize = 500;

impl SymmetrySearch {
    /// Whether the affine parameter vector `p` lies in the span of the found
    /// generators (relative least-squares residual below `1e-8`).
    pub fn spans(&self, p: &[f64]) -> bool {
        let norm = p.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return true;
        }
        if self.symmetries.is_empty() {
            return false;
        }
        let cols: Vec<f64> = self.symmetries.iter().flat_map(|s| s.coefficients.parameters()).collect();
        let b = DMatrix::from_column_slice(p.len(), self.symmetries.len(), &cols);
        let c = DVector::from_column_slice(p);
        let Ok(y) = b.clone().svd(true, true).solve(&c, 1e-12) else {
            return false;
        };
        (b * y - c).norm() <= 1e-8 * norm
    }
}

/// Affine parameters of a catalog generator.
pub fn catalog_affine_parameters(name: &str, dim: usize) -> Result<Vec<f64>> {
    let g = SymmetryGenerator::catalog(name, dim)?;
    let zero = Vector::zeros(dim);
    let read = |f: &SharedField| -> Result<AffineField> {
        let p = first_partials(f.as_ref(), 0.0, &zero, &zero)?;
        Ok(AffineField {
            c0: p.value,
            ct: p.dt(),
            cx: p.dx().as_slice().to_vec(),
        })
    };
    let c = AffineCoefficients {
        t: read(&g.t)?,
        x: g.x.iter().map(read).collect::<Result<_>>()?,
    };
    Ok(c.parameters())
}

/// Catalog generator names for dimension `dim`.
pub fn catalog_names(dim: usize) -> Vec<String> {
    let mut names = vec!["time-translation".to_string()];
    if dim == 1 {
        names.push("space-translation".into());
        names.push("galilean-boost".into());
    } else {
        names.extend((1..=dim).map(|i| format!("space-translation-{i}")));
        names.extend((1..=dim).map(|i| format!("galilean-boost-{i}")));
    }
    names.push("dilation".into());
    for i in 1..=dim {
        for j in i + 1..=dim {
            names.push(if dim < 10 {
                format!("rotation-{i}{j}")
            } else {
                format!("rotation-{i}-{j}")
            });
        }
    }
    names
}

/// Reduced row echelon form of the rows of `basis`, small entries cleared.
fn echelon(mut basis: DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = basis.shape();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (piv, val) = (r..rows)
            .map(|i| (i, basis[(i, c)].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("rows remain");
        if val < 1e-9 {
            continue;
        }
        basis.swap_rows(r, piv);
        let p = basis[(r, c)];
        for k in 0..cols {
            basis[(r, k)] /= p;
        }
        for i in 0..rows {
            if i != r {
                let f = basis[(i, c)];
                if f != 0.0 {
                    for k in 0..cols {
                        let d = basis[(r, k)];
                        basis[(i, k)] -= f * d;
                    }
                }
            }
        }
        r += 1;
    }
    basis.apply(|x| {
        if x.abs() < 1e-10 {
            *x = 0.0
        }
    });
    basis
}

/// Numerical null space of the invariance condition over the affine ansatz,
/// each basis element re-checked on fresh samples. Generators failing the
/// re-check are dropped.
pub fn find_affine_symmetries(lagrangian: &dyn ScalarField, sampling: &SamplingConfig) -> Result<SymmetrySearch> {
    sampling.validate()?;
    let m = lagrangian.dim();
    let params = AffineCoefficients::parameter_count(m);
    let count = sampling.count.max(3 * params);
    let rows = (0..count)
        .into_par_iter()
        .map(|k| {
            let (t, x, v) = sampling.point(k, m);
            ansatz_row(lagrangian, t, &x, &v)
        })
        .collect::<Result<Vec<_>>>()?;
    let a = DMatrix::from_fn(count, params, |i, j| rows[i][j]);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let threshold = NULL_SPACE_THRESHOLD * smax;

    // `v_t` has min(count, params) = params rows; rows past the rank span the null space.
    let null: Vec<usize> = (0..params).filter(|&k| sigma[k] <= threshold).collect();
    let mut basis = DMatrix::zeros(null.len(), params);
    for (r, &k) in null.iter().enumerate() {
        basis.set_row(r, &v_t.row(k));
    }
    let basis = echelon(basis);

    let fresh = SamplingConfig {
        count: RECHECK_SAMPLES,
        offset: sampling.offset + count + 1,
        tolerance: Some(RECHECK_TOLERANCE),
        ..sampling.clone()
    };
    let mut symmetries = Vec::new();
    for (r, row) in basis.row_iter().enumerate() {
        if row.amax() == 0.0 {
            continue;
        }
        let coefficients = AffineCoefficients::from_parameters(m, row.transpose().as_slice())?;
        let generator = SymmetryGenerator::from_affine(format!("affine-{}", r + 1), &coefficients)?;
        let recheck = check_invariance(lagrangian, &generator, &fresh)?;
        if recheck.pass {
            symmetries.push(FoundSymmetry {
                generator,
                coefficients,
                recheck,
            });
        } else {
            log::warn!(
                "dropping null-space direction {} (fresh-sample residual {:e})",
                r + 1,
                recheck.max_abs_residual
            );
        }
    }
    Ok(SymmetrySearch {
        singular_values: sigma,
        threshold,
        samples: count,
        symmetries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::Grid;
    use crate::differentiation::FnField;
    use crate::lcs_model::Space;

    fn expr(src: &str, dim: usize) -> SharedField {
        Arc::new(ExprField::parse(src, dim).unwrap())
    }

    fn v1(a: f64) -> Vector {
        Vector::from_element(1, a)
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(halton(1, 0), 0.5);
        assert_eq!(halton(3, 0), 0.75);
        assert!((halton(1, 1) - 1.0 / 3.0).abs() < 1e-16);
        assert!((halton(2, 2) - 0.4).abs() < 1e-16);
        assert_eq!(nth_prime(40), 179);
    }

    #[test]
    fn total_derivative_examples() {
        let one = expr("1", 1);
        assert_eq!(total_time_derivative(one.as_ref(), 0.3, &v1(1.0), &v1(2.0)).unwrap(), 0.0);
        let id = expr("x1", 1);
        assert_eq!(total_time_derivative(id.as_ref(), 0.3, &v1(1.0), &v1(3.0)).unwrap(), 3.0);
        let tx = expr("t*x1", 2);
        let x = Vector::from_row_slice(&[2.0, 0.0]);
        let v = Vector::from_row_slice(&[5.0, 1.0]);
        for t in [0.0, 0.7, -1.5] {
            assert!((total_time_derivative(tx.as_ref(), t, &x, &v).unwrap() - (2.0 + 5.0 * t)).abs() < 1e-14);
        }
        let fd = FnField::new(2, |t, x, _| t * x[0]).with_arity(Arity::TX);
        assert!((total_time_derivative(&fd, 0.7, &x, &v).unwrap() - 5.5).abs() < 1e-8);
    }

    #[test]
    fn extended_generator_examples() {
        let (t, x, v) = (0.2, v1(0.4), v1(2.0));
        let g = SymmetryGenerator::time_translation(1);
        assert_eq!(extended_generator(&g, t, &x, &v).unwrap()[0], 0.0);
        let g = SymmetryGenerator::space_translation(1, 1).unwrap();
        assert_eq!(extended_generator(&g, t, &x, &v).unwrap()[0], 0.0);
        let g = SymmetryGenerator::from_expressions("dil", "t", &["0"]).unwrap();
        assert_eq!(extended_generator(&g, t, &x, &v).unwrap()[0], -2.0);
    }

    #[test]
    fn residual_examples() {
        let kin = expr("v1^2/2", 1);
        let osc = expr("(v1^2 - x1^2)/2", 1);
        let (t, x, v) = (0.9, v1(-0.4), v1(1.7));
        let time = SymmetryGenerator::time_translation(1);
        let space = SymmetryGenerator::space_translation(1, 1).unwrap();
        assert_eq!(invariance_residual(kin.as_ref(), &time, t, &x, &v).unwrap(), 0.0);
        assert_eq!(invariance_residual(kin.as_ref(), &space, t, &x, &v).unwrap(), 0.0);
        assert_eq!(invariance_residual(osc.as_ref(), &space, 0.0, &v1(2.0), &v1(0.0)).unwrap(), -2.0);
    }

    #[test]
    fn check_invariance_examples() {
        let s = SamplingConfig::new(0.0, 1.0);
        let r = check_invariance(expr("v1^2/2", 1).as_ref(), &SymmetryGenerator::time_translation(1), &s).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_abs_residual, 0.0);
        assert_eq!(r.samples.len(), 200);
        assert_eq!(r.tolerance, ANALYTIC_INVARIANCE_TOLERANCE);

        let osc = expr("(v1^2 - x1^2)/2", 1);
        let r = check_invariance(osc.as_ref(), &SymmetryGenerator::catalog("space-translation", 1).unwrap(), &s).unwrap();
        assert!(!r.pass);
        assert!(r.max_abs_residual > 1.9 && r.max_abs_residual <= 2.0);

        let fd = FnField::new(3, |_, _, v| 0.5 * v.norm_squared());
        let r = check_invariance(&fd, &SymmetryGenerator::catalog("rotation-12", 3).unwrap(), &s).unwrap();
        assert_eq!(r.tolerance, FD_INVARIANCE_TOLERANCE);
        assert!(r.pass, "{}", r.max_abs_residual);
    }

    #[test]
    fn noether_integral_examples() {
        let kin = expr("v1^2/2", 1);
        let (t, x, v) = (0.1, v1(0.3), v1(1.5));
        let c = noether_first_integral(kin.clone(), &SymmetryGenerator::time_translation(1)).unwrap();
        assert_eq!(c.value(t, &x, &v).unwrap(), -1.125);
        let c = noether_first_integral(kin, &SymmetryGenerator::space_translation(1, 1).unwrap()).unwrap();
        assert_eq!(c.value(t, &x, &v).unwrap(), 1.5);
        let osc = expr("(v1^2 - x1^2)/2", 1);
        let c = noether_first_integral(osc, &SymmetryGenerator::time_translation(1)).unwrap();
        assert!((c.value(t, &x, &v).unwrap() + (1.5f64.powi(2) + 0.09) / 2.0).abs() < 1e-15);
        assert_eq!(c.provenance, Provenance::Noether);
    }

    #[test]
    fn hamiltonian_examples() {
        assert_eq!(hamiltonian(expr("v1^2/2", 1).as_ref(), 0.0, &v1(0.0), &v1(3.0)).unwrap(), 4.5);
        assert_eq!(hamiltonian(expr("(v1^2 - x1^2)/2", 1).as_ref(), 0.0, &v1(1.0), &v1(0.0)).unwrap(), 0.5);
        let lin = expr("2.5*v1", 1);
        for v in [-3.0, 0.1, 7.0] {
            assert_eq!(hamiltonian(lin.as_ref(), 0.0, &v1(1.0), &v1(v)).unwrap(), 0.0);
        }
    }

    #[test]
    fn conservation_examples() {
        let space = Space::sup_norm(1).unwrap();
        let grid = Grid::new(0.0, 1.0, 40).unwrap();
        let line = Curve::from_fn(space.clone(), grid, |t| v1(2.0 * t - 0.5)).unwrap();
        let c = FirstIntegral::user("energy", expr("-v1^2/2", 1));
        let r = verify_conservation(&c, &line, 1e-10).unwrap();
        assert!(r.pass && r.max_deviation <= 1e-10);

        let parabola = Curve::from_fn(space, grid, |t| v1(t * t)).unwrap();
        let c = FirstIntegral::user("momentum", expr("v1", 1));
        let r = verify_conservation(&c, &parabola, 1e-3).unwrap();
        assert!(!r.pass);
        assert!((r.spread - 2.0).abs() < 1e-12);
        assert!((r.max_deviation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn catalog_lookup() {
        for (name, dim) in [
            ("time-translation", 1),
            ("space-translation", 1),
            ("space-translation-2", 3),
            ("rotation-12", 3),
            ("rotation-10-11", 11),
            ("dilation", 2),
            ("galilean-boost", 1),
            ("galilean-boost-3", 3),
        ] {
            assert_eq!(SymmetryGenerator::catalog(name, dim).unwrap().dim(), dim, "{name}");
        }
        assert!(SymmetryGenerator::catalog("rotation-13", 2).is_err());
        assert!(SymmetryGenerator::catalog("rotation-11", 2).is_err());
        assert!(SymmetryGenerator::catalog("shear", 2).is_err());
        assert!(SymmetryGenerator::from_expressions("bad", "v1", &["0"]).is_err());
    }

    #[test]
    fn free_particle_symmetry_search() {
        let search = find_affine_symmetries(expr("v1^2/2", 1).as_ref(), &SamplingConfig::new(0.0, 1.0)).unwrap();
        let params: Vec<Vec<f64>> = search.symmetries.iter().map(|s| s.coefficients.parameters()).collect();
        // a0, a1, b1, c0, c1, d1
        assert_eq!(
            params,
            vec![
                vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.5],
                vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            ]
        );
        assert!(search.symmetries.iter().all(|s| s.recheck.max_abs_residual <= 1e-6));
    }

    #[test]
    fn catalog_generators_in_found_span() {
        let search =
            find_affine_symmetries(expr("(v1^2 + v2^2)/2", 2).as_ref(), &SamplingConfig::new(0.0, 1.0)).unwrap();
        let spanned: Vec<String> = catalog_names(2)
            .into_iter()
            .filter(|n| search.spans(&catalog_affine_parameters(n, 2).unwrap()))
            .collect();
        assert_eq!(
            spanned,
            ["time-translation", "space-translation-1", "space-translation-2", "dilation", "rotation-12"]
        );
        assert_eq!(
            catalog_affine_parameters("rotation-12", 2).unwrap(),
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn oscillator_and_time_dependent_searches() {
        let s = SamplingConfig::new(0.0, 1.0);
        let osc = find_affine_symmetries(expr("(v1^2 - x1^2)/2", 1).as_ref(), &s).unwrap();
        let params: Vec<Vec<f64>> = osc.symmetries.iter().map(|s| s.coefficients.parameters()).collect();
        assert_eq!(params, vec![vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]]);

        let et = find_affine_symmetries(expr("exp(t)*v1^2", 1).as_ref(), &s).unwrap();
        for sym in &et.symmetries {
            let p = sym.coefficients.parameters();
            assert!(p[0] == 0.0 || p[1..].iter().any(|c| *c != 0.0), "{p:?}");
        }
    }

    #[test]
    fn planar_free_particle_has_rotation() {
        let search =
            find_affine_symmetries(expr("(v1^2 + v2^2)/2", 2).as_ref(), &SamplingConfig::new(0.0, 1.0)).unwrap();
        // time and space translations, dilation, rotation
        assert_eq!(search.symmetries.len(), 5);
        let rot = SymmetryGenerator::rotation(2, 1, 2).unwrap();
        let l = expr("(v1^2 + v2^2)/2", 2);
        assert!(check_invariance(l.as_ref(), &rot, &SamplingConfig::new(0.0, 1.0)).unwrap().pass);
    }
}
