//! Scalar fields on `[a,b] x E x E` and their first and second partials.
//!
//! Analytic partials are used when a field supplies them; otherwise central
//! differences with Richardson extrapolation fill in. The module also hosts the
//! numerical audit of normal differentiability on sampled compact sets.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lcs_model::{normal_index, LinearOperator, Space, Vector};

/// Which of `t`, `x`, `v` a field actually depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Arity {
    pub t: bool,
    pub x: bool,
    pub v: bool,
}

impl Arity {
    pub const ALL: Arity = Arity {
        t: true,
        x: true,
        v: true,
    };
    /// Generator components: functions of `(t, x)` only.
    pub const TX: Arity = Arity {
        t: true,
        x: true,
        v: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    T,
    X,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pair {
    VV,
    VX,
    XV,
    XX,
}

/// Layout of the packed evaluation point `z = (t, x_1..x_m, v_1..v_m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub dim: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        1 + 2 * self.dim
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_offset(&self) -> usize {
        1
    }

    pub fn v_offset(&self) -> usize {
        1 + self.dim
    }

    pub fn pack(&self, t: f64, x: &Vector, v: &Vector) -> DVector<f64> {
        let mut z = DVector::zeros(self.len());
        z[0] = t;
        z.rows_mut(1, self.dim).copy_from(x);
        z.rows_mut(1 + self.dim, self.dim).copy_from(v);
        z
    }

    pub fn unpack(&self, z: &DVector<f64>) -> (f64, Vector, Vector) {
        (
            z[0],
            z.rows(1, self.dim).into_owned(),
            z.rows(1 + self.dim, self.dim).into_owned(),
        )
    }

    fn offset(&self, w: Which) -> usize {
        match w {
            Which::T => 0,
            Which::X => self.x_offset(),
            Which::V => self.v_offset(),
        }
    }
}

/// Value and gradient with respect to the packed point.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstPartials {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub dim: usize,
}

impl FirstPartials {
    pub fn dt(&self) -> f64 {
        self.gradient[0]
    }

    pub fn dx(&self) -> Vector {
        self.gradient.rows(1, self.dim).into_owned()
    }

    pub fn dv(&self) -> Vector {
        self.gradient.rows(1 + self.dim, self.dim).into_owned()
    }
}

/// First partials plus the full Hessian over the packed point.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondPartials {
    pub first: FirstPartials,
    pub hessian: DMatrix<f64>,
}

impl SecondPartials {
    /// Block `[a][b] = d^2 L / d(first)_a d(second)_b`.
    pub fn block(&self, pair: Pair) -> DMatrix<f64> {
        let layout = Layout { dim: self.first.dim };
        let (r, c) = match pair {
            Pair::VV => (Which::V, Which::V),
            Pair::VX => (Which::V, Which::X),
            Pair::XV => (Which::X, Which::V),
            Pair::XX => (Which::X, Which::X),
        };
        let m = layout.dim;
        self.hessian
            .view((layout.offset(r), layout.offset(c)), (m, m))
            .into_owned()
    }

    pub fn tt(&self) -> f64 {
        self.hessian[(0, 0)]
    }
}

/// Finite-difference settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdConfig {
    /// Base relative step; `None` selects `eps^(1/3)` (first order) and
    /// `eps^(1/4)` (second differences).
    pub step: Option<f64>,
    /// Richardson extrapolation levels applied to central differences.
    pub richardson: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            step: None,
            richardson: 1,
        }
    }
}

impl FdConfig {
    pub fn first_step(&self) -> f64 {
        self.step.unwrap_or_else(|| f64::EPSILON.cbrt())
    }

    pub fn second_step(&self) -> f64 {
        self.step.unwrap_or_else(|| f64::EPSILON.powf(0.25))
    }
}

/// A real-valued field `f(t, x, v)` on `[a,b] x E x E`.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;

    fn arity(&self) -> Arity {
        Arity::ALL
    }

    fn value(&self, t: f64, x: &Vector, v: &Vector) -> Result<f64>;

    /// Exact first partials, if this field can provide them at the point.
    fn analytic_first(&self, _t: f64, _x: &Vector, _v: &Vector) -> Option<Result<FirstPartials>> {
        None
    }

    /// Exact second partials, if this field can provide them at the point.
    fn analytic_second(
        &self,
        _t: f64,
        _x: &Vector,
        _v: &Vector,
    ) -> Option<Result<SecondPartials>> {
        None
    }

    fn fd_config(&self) -> FdConfig {
        FdConfig::default()
    }

    /// True when partials come from exact arithmetic rather than differences.
    fn has_analytic_partials(&self) -> bool {
        false
    }
}

pub type SharedField = Arc<dyn ScalarField>;

type ValueFn = dyn Fn(f64, &Vector, &Vector) -> f64 + Send + Sync;
type FirstFn = dyn Fn(f64, &Vector, &Vector) -> FirstPartials + Send + Sync;
type SecondFn = dyn Fn(f64, &Vector, &Vector) -> SecondPartials + Send + Sync;

/// A field backed by closures, with optional analytic partials.
#[derive(Clone)]
pub struct FnField {
    dim: usize,
    arity: Arity,
    value: Arc<ValueFn>,
    first: Option<Arc<FirstFn>>,
    second: Option<Arc<SecondFn>>,
    fd: FdConfig,
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField")
            .field("dim", &self.dim)
            .field("arity", &self.arity)
            .field("first", &self.first.is_some())
            .field("second", &self.second.is_some())
            .finish()
    }
}

impl FnField {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(f64, &Vector, &Vector) -> f64 + Send + Sync + 'static,
    {
        FnField {
            dim,
            arity: Arity::ALL,
            value: Arc::new(f),
            first: None,
            second: None,
            fd: FdConfig::default(),
        }
    }

    pub fn with_arity(mut self, arity: Arity) -> Self {
        self.arity = arity;
        self
    }

    pub fn with_first<G>(mut self, g: G) -> Self
    where
        G: Fn(f64, &Vector, &Vector) -> FirstPartials + Send + Sync + 'static,
    {
        self.first = Some(Arc::new(g));
        self
    }

    pub fn with_second<H>(mut self, h: H) -> Self
    where
        H: Fn(f64, &Vector, &Vector) -> SecondPartials + Send + Sync + 'static,
    {
        self.second = Some(Arc::new(h));
        self
    }

    pub fn with_fd(mut self, fd: FdConfig) -> Self {
        self.fd = fd;
        self
    }
}

impl ScalarField for FnField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn arity(&self) -> Arity {
        self.arity
    }

    fn value(&self, t: f64, x: &Vector, v: &Vector) -> Result<f64> {
        let y = (self.value)(t, x, v);
        if !y.is_finite() {
            return Err(Error::NonFinite {
                what: "field".into(),
                at: describe_point(t, x, v),
                value: y,
            });
        }
        Ok(y)
    }

    fn analytic_first(&self, t: f64, x: &Vector, v: &Vector) -> Option<Result<FirstPartials>> {
        self.first.as_ref().map(|g| Ok(g(t, x, v)))
    }

    fn analytic_second(&self, t: f64, x: &Vector, v: &Vector) -> Option<Result<SecondPartials>> {
        self.second.as_ref().map(|h| Ok(h(t, x, v)))
    }

    fn fd_config(&self) -> FdConfig {
        self.fd
    }

    fn has_analytic_partials(&self) -> bool {
        self.first.is_some() && self.second.is_some()
    }
}

pub(crate) fn describe_point(t: f64, x: &Vector, v: &Vector) -> String {
    format!(
        "t={t}, x={:?}, v={:?}",
        x.as_slice(),
        v.as_slice()
    )
}

/// Richardson-extrapolated central difference of `f` along `dir` at `base`.
///
/// `step` is the absolute initial step along `dir`.
pub fn central_difference<F>(
    f: F,
    base: &DVector<f64>,
    dir: &DVector<f64>,
    step: f64,
    levels: usize,
) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::validation(format!("finite-difference step {step} must be positive")));
    }
    let eval = |z: DVector<f64>| -> Result<DVector<f64>> {
        let y = f(&z)?;
        if let Some(bad) = y.iter().find(|y| !y.is_finite()) {
            return Err(Error::NonFinite {
                what: "finite-difference probe".into(),
                at: format!("{:?}", z.as_slice()),
                value: *bad,
            });
        }
        Ok(y)
    };
    // Neville table: column k cancels the h^(2k) error term.
    let mut table: Vec<DVector<f64>> = Vec::with_capacity(levels + 1);
    let mut eps = step;
    for level in 0..=levels {
        let fp = eval(base + dir * eps)?;
        let fm = eval(base - dir * eps)?;
        let mut d = (fp - fm) / (2.0 * eps);
        let mut factor = 1.0;
        for prev in table.iter_mut().take(level) {
            factor *= 4.0;
            let improved = (&d * factor - &*prev) / (factor - 1.0);
            *prev = d;
            d = improved;
        }
        table.push(d);
        eps *= 0.5;
    }
    Ok(table.pop().expect("at least one level"))
}

/// Directional derivative `lim (f(base + e h) - f(base - e h)) / 2e` of a vector-valued map.
pub fn directional_derivative<F>(
    f: F,
    base: &DVector<f64>,
    dir: &DVector<f64>,
    cfg: &FdConfig,
) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    if base.len() != dir.len() {
        return Err(Error::validation("base point and direction differ in dimension"));
    }
    let dir_size = dir.amax();
    if dir_size == 0.0 {
        return Ok(f(base)?.map(|_| 0.0));
    }
    let step = cfg.first_step() * (1.0 + base.amax()) / dir_size;
    central_difference(f, base, dir, step, cfg.richardson)
}

/// Scalar convenience wrapper around [`directional_derivative`].
pub fn directional_derivative_scalar<F>(
    f: F,
    base: &DVector<f64>,
    dir: &DVector<f64>,
    cfg: &FdConfig,
) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let d = directional_derivative(|z| Ok(DVector::from_element(1, f(z)?)), base, dir, cfg)?;
    Ok(d[0])
}

fn check_point(field: &dyn ScalarField, x: &Vector, v: &Vector) -> Result<()> {
    if x.len() != field.dim() || v.len() != field.dim() {
        return Err(Error::validation(format!(
            "evaluation point has dimensions ({}, {}) but the field expects {}",
            x.len(),
            v.len(),
            field.dim()
        )));
    }
    Ok(())
}

fn masked(field: &dyn ScalarField, k: usize) -> bool {
    let layout = Layout { dim: field.dim() };
    let arity = field.arity();
    if k == 0 {
        !arity.t
    } else if k < layout.v_offset() {
        !arity.x
    } else {
        !arity.v
    }
}

/// Finite-difference gradient over the packed point, ignoring analytic partials.
pub fn fd_first_partials(
    field: &dyn ScalarField,
    t: f64,
    x: &Vector,
    v: &Vector,
    cfg: &FdConfig,
) -> Result<FirstPartials> {
    check_point(field, x, v)?;
    let layout = Layout { dim: field.dim() };
    let z = layout.pack(t, x, v);
    let value = field.value(t, x, v)?;
    let f = |z: &DVector<f64>| -> Result<DVector<f64>> {
        let (t, x, v) = layout.unpack(z);
        Ok(DVector::from_element(1, field.value(t, &x, &v)?))
    };
    let mut gradient = DVector::zeros(layout.len());
    for k in 0..layout.len() {
        if masked(field, k) {
            continue;
        }
        let mut e = DVector::zeros(layout.len());
        e[k] = 1.0;
        let step = cfg.first_step() * (1.0 + z[k].abs());
        gradient[k] = central_difference(f, &z, &e, step, cfg.richardson)?[0];
    }
    Ok(FirstPartials {
        value,
        gradient,
        dim: layout.dim,
    })
}

/// All first partials of `field` at `(t, x, v)`: analytic when available.
pub fn first_partials(field: &dyn ScalarField, t: f64, x: &Vector, v: &Vector) -> Result<FirstPartials> {
    check_point(field, x, v)?;
    match field.analytic_first(t, x, v) {
        Some(res) => res,
        None => fd_first_partials(field, t, x, v, &field.fd_config()),
    }
}

/// A partial derivative: scalar for `t`, covector for `x` and `v`.
#[derive(Debug, Clone, PartialEq)]
pub enum Partial {
    Scalar(f64),
    Covector(Vector),
}

impl Partial {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            Partial::Scalar(s) => Some(*s),
            Partial::Covector(_) => None,
        }
    }

    pub fn covector(&self) -> Option<&Vector> {
        match self {
            Partial::Scalar(_) => None,
            Partial::Covector(c) => Some(c),
        }
    }
}

/// `dL/dt`, `dL/dx` or `dL/dv` at a point.
pub fn partial_lagrangian(
    field: &dyn ScalarField,
    which: Which,
    t: f64,
    x: &Vector,
    v: &Vector,
) -> Result<Partial> {
    check_point(field, x, v)?;
    let arity = field.arity();
    let dim = field.dim();
    let consumed = match which {
        Which::T => arity.t,
        Which::X => arity.x,
        Which::V => arity.v,
    };
    if !consumed {
        return Ok(match which {
            Which::T => Partial::Scalar(0.0),
            _ => Partial::Covector(Vector::zeros(dim)),
        });
    }
    let fp = first_partials(field, t, x, v)?;
    Ok(match which {
        Which::T => Partial::Scalar(fp.dt()),
        Which::X => Partial::Covector(fp.dx()),
        Which::V => Partial::Covector(fp.dv()),
    })
}

/// Finite-difference Hessian. Differentiates the analytic gradient when the
/// field has one, otherwise takes second differences of values.
pub fn fd_second_partials(
    field: &dyn ScalarField,
    t: f64,
    x: &Vector,
    v: &Vector,
    cfg: &FdConfig,
) -> Result<SecondPartials> {
    check_point(field, x, v)?;
    let layout = Layout { dim: field.dim() };
    let n = layout.len();
    let z = layout.pack(t, x, v);

    if field.analytic_first(t, x, v).is_some() {
        let first = first_partials(field, t, x, v)?;
        let grad = |z: &DVector<f64>| -> Result<DVector<f64>> {
            let (t, x, v) = layout.unpack(z);
            Ok(first_partials(field, t, &x, &v)?.gradient)
        };
        let mut hessian = DMatrix::zeros(n, n);
        for k in 0..n {
            if masked(field, k) {
                continue;
            }
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            let step = cfg.first_step() * (1.0 + z[k].abs());
            let col = central_difference(grad, &z, &e, step, cfg.richardson)?;
            hessian.set_column(k, &col);
        }
        return Ok(SecondPartials { first, hessian });
    }

    let first = fd_first_partials(field, t, x, v, cfg)?;
    let f = |z: &DVector<f64>| -> Result<f64> {
        let (t, x, v) = layout.unpack(z);
        field.value(t, &x, &v)
    };
    let f0 = first.value;
    let stencil = |scale: f64| -> Result<DMatrix<f64>> {
        let steps: Vec<f64> = (0..n)
            .map(|k| scale * cfg.second_step() * (1.0 + z[k].abs()))
            .collect();
        let shifted = |pairs: &[(usize, f64)]| {
            let mut w = z.clone();
            for &(k, d) in pairs {
                w[k] += d;
            }
            w
        };
        let mut hessian = DMatrix::zeros(n, n);
        for a in 0..n {
            if masked(field, a) {
                continue;
            }
            let ha = steps[a];
            let fp = f(&shifted(&[(a, ha)]))?;
            let fm = f(&shifted(&[(a, -ha)]))?;
            hessian[(a, a)] = (fp - 2.0 * f0 + fm) / (ha * ha);
            for b in (a + 1)..n {
                if masked(field, b) {
                    continue;
                }
                let hb = steps[b];
                let fpp = f(&shifted(&[(a, ha), (b, hb)]))?;
                let fpm = f(&shifted(&[(a, ha), (b, -hb)]))?;
                let fmp = f(&shifted(&[(a, -ha), (b, hb)]))?;
                let fmm = f(&shifted(&[(a, -ha), (b, -hb)]))?;
                let h = (fpp - fpm - fmp + fmm) / (4.0 * ha * hb);
                hessian[(a, b)] = h;
                hessian[(b, a)] = h;
            }
        }
        Ok(hessian)
    };
    // both stencils have even error expansions, so the same Neville table applies
    let mut table: Vec<DMatrix<f64>> = Vec::with_capacity(cfg.richardson + 1);
    let mut scale = 1.0;
    for level in 0..=cfg.richardson {
        let mut d = stencil(scale)?;
        let mut factor = 1.0;
        for prev in table.iter_mut().take(level) {
            factor *= 4.0;
            let improved = (&d * factor - &*prev) / (factor - 1.0);
            *prev = d;
            d = improved;
        }
        table.push(d);
        scale *= 0.5;
    }
    let hessian = table.pop().expect("at least one level");
    Ok(SecondPartials { first, hessian })
}

/// All second partials of `field`: analytic when available.
pub fn second_partials(field: &dyn ScalarField, t: f64, x: &Vector, v: &Vector) -> Result<SecondPartials> {
    check_point(field, x, v)?;
    match field.analytic_second(t, x, v) {
        Some(res) => res,
        None => fd_second_partials(field, t, x, v, &field.fd_config()),
    }
}

/// One `dim x dim` block of the second partials.
pub fn second_partial_lagrangian(
    field: &dyn ScalarField,
    pair: Pair,
    t: f64,
    x: &Vector,
    v: &Vector,
) -> Result<DMatrix<f64>> {
    Ok(second_partials(field, t, x, v)?.block(pair))
}

// ---------------------------------------------------------------------------
// Normal differentiability audit

/// A compact set represented by sample points, probe directions and radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompactSample {
    pub points: Vec<DVector<f64>>,
    pub directions: Vec<DVector<f64>>,
    /// Strictly decreasing probe radii.
    pub radii: Vec<f64>,
}

impl CompactSample {
    /// Default probes: radii `1e-1 .. 1e-6` and `n_dirs` dense directions.
    pub fn new(points: Vec<DVector<f64>>, n_dirs: usize) -> Self {
        let dim = points.first().map_or(0, |p| p.len());
        CompactSample {
            points,
            directions: dense_directions(dim, n_dirs),
            radii: (1..=6).map(|k| 10f64.powi(-k)).collect(),
        }
    }
}

/// Deterministic directions with every coordinate nonzero, sup-normalised.
pub fn dense_directions(dim: usize, count: usize) -> Vec<DVector<f64>> {
    (0..count)
        .map(|k| {
            let d = DVector::from_fn(dim, |i, _| {
                let u = crate::symmetry_noether::halton(k + 1, i);
                let sign = if (k + i) % 2 == 0 { 1.0 } else { -1.0 };
                sign * (0.5 + 0.5 * u)
            });
            let s = d.amax();
            d / s
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditPair {
    /// Target seminorm index.
    pub s: usize,
    /// Source seminorm index from the candidate normal index.
    pub m: usize,
    /// Worst remainder ratio over the compact sample, one entry per radius.
    pub ratios: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferentiabilityAudit {
    pub sample: CompactSample,
    pub tolerance: f64,
    pub pairs: Vec<AuditPair>,
}

impl DifferentiabilityAudit {
    pub fn pass(&self) -> bool {
        !self.pairs.is_empty() && self.pairs.iter().all(|p| p.pass)
    }
}

/// Audits `||g(x+h) - g(x) - g'(x)h||^s / ||h||_m -> 0` uniformly on a sampled
/// compact set, for every `s` and every `m` in the normal index of the
/// candidate derivative (intersected over the sample points).
pub fn check_normal_differentiability<G, D>(
    src: &Space,
    dst: &Space,
    g: G,
    derivative: D,
    compact: &CompactSample,
    tol: f64,
) -> Result<DifferentiabilityAudit>
where
    G: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    D: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    if compact.points.is_empty() {
        return Err(Error::validation("compact sample has no points"));
    }
    if compact.radii.windows(2).any(|w| !(w[1] < w[0])) || compact.radii.iter().any(|r| *r <= 0.0) {
        return Err(Error::validation("probe radii must be positive and strictly decreasing"));
    }
    for p in &compact.points {
        src.check_vector(p)?;
    }

    let mut values = Vec::with_capacity(compact.points.len());
    let mut derivs = Vec::with_capacity(compact.points.len());
    let mut admissible: Vec<Vec<usize>> = vec![(1..=src.num_seminorms()).collect(); dst.num_seminorms()];
    for p in &compact.points {
        let gx = g(p)?;
        dst.check_vector(&gx)?;
        let a = LinearOperator::new(derivative(p)?)?;
        let idx = normal_index(src, dst, &a)?;
        for (s, allowed) in admissible.iter_mut().enumerate() {
            let entry = idx.at(s + 1).expect("entry per target index");
            allowed.retain(|m| entry.contains(*m));
        }
        values.push(gx);
        derivs.push(a);
    }

    // remainders[point][dir][radius]
    let mut remainders = Vec::with_capacity(compact.points.len());
    for ((p, gx), a) in compact.points.iter().zip(&values).zip(&derivs) {
        let mut per_dir = Vec::with_capacity(compact.directions.len());
        for d in &compact.directions {
            let mut per_radius = Vec::with_capacity(compact.radii.len());
            for r in &compact.radii {
                let h = d * *r;
                let gh = g(&(p + &h))?;
                let ah = a.apply(&h);
                // components indistinguishable from rounding count as zero
                let rem = DVector::from_fn(gh.len(), |i, _| {
                    let r = gh[i] - gx[i] - ah[i];
                    let floor = 16.0 * f64::EPSILON * (gh[i].abs() + gx[i].abs() + ah[i].abs());
                    if r.abs() <= floor {
                        0.0
                    } else {
                        r
                    }
                });
                per_radius.push((rem, h));
            }
            per_dir.push(per_radius);
        }
        remainders.push(per_dir);
    }

    let mut pairs = Vec::new();
    for (s_idx, allowed) in admissible.iter().enumerate() {
        let s = s_idx + 1;
        for &m in allowed {
            let mut ratios = vec![0.0_f64; compact.radii.len()];
            for per_dir in &remainders {
                for per_radius in per_dir {
                    for (k, (rem, h)) in per_radius.iter().enumerate() {
                        let denom = src.seminorm_unchecked(m, h.as_slice());
                        let num = dst.seminorm_unchecked(s, rem.as_slice());
                        let ratio = if denom > 0.0 {
                            num / denom
                        } else if num == 0.0 {
                            0.0
                        } else {
                            f64::INFINITY
                        };
                        ratios[k] = ratios[k].max(ratio);
                    }
                }
            }
            let first = ratios[0];
            let last = *ratios.last().expect("nonempty radii");
            let pass = last <= tol && last <= first;
            pairs.push(AuditPair { s, m, ratios, pass });
        }
    }

    Ok(DifferentiabilityAudit {
        sample: compact.clone(),
        tolerance: tol,
        pairs,
    })
}
