//! Closed sets with exact (possibly multi-valued) projectors.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{RegError, Result};
use crate::linalg;
use crate::rng;

pub type Point = DVector<f64>;

/// Absolute tolerance for set membership.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Relative tolerance for deciding that two candidate distances tie.
pub const TIE_TOL: f64 = 1e-9;

const GN_MAX_ITER: usize = 100;
const GN_STEP_TOL: f64 = 1e-12;

/// Smooth equation system F: R^n -> R^m describing a manifold F(x) = 0.
pub trait Residual: Send + Sync + fmt::Debug {
    fn ambient(&self) -> usize;
    fn codim(&self) -> usize;
    fn eval(&self, x: &Point) -> DVector<f64>;
    fn jacobian(&self, x: &Point) -> DMatrix<f64>;
}

/// Scalar quadric x'Qx + b'x + c.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadric {
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
}

impl Quadric {
    pub fn linear(b: DVector<f64>, c: f64) -> Self {
        let n = b.len();
        Quadric {
            q: DMatrix::zeros(n, n),
            b,
            c,
        }
    }

    /// ||x - center||^2 - radius^2.
    pub fn sphere(center: &Point, radius: f64) -> Self {
        let n = center.len();
        Quadric {
            q: DMatrix::identity(n, n),
            b: center * -2.0,
            c: center.norm_squared() - radius * radius,
        }
    }

    fn value(&self, x: &Point) -> f64 {
        x.dot(&(&self.q * x)) + self.b.dot(x) + self.c
    }

    fn gradient(&self, x: &Point) -> DVector<f64> {
        (&self.q + self.q.transpose()) * x + &self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadricSystem {
    pub dim: usize,
    pub equations: Vec<Quadric>,
}

impl Residual for QuadricSystem {
    fn ambient(&self) -> usize {
        self.dim
    }
    fn codim(&self) -> usize {
        self.equations.len()
    }
    fn eval(&self, x: &Point) -> DVector<f64> {
        DVector::from_iterator(self.equations.len(), self.equations.iter().map(|e| e.value(x)))
    }
    fn jacobian(&self, x: &Point) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.equations.len(), self.dim);
        for (i, e) in self.equations.iter().enumerate() {
            j.set_row(i, &e.gradient(x).transpose());
        }
        j
    }
}

/// Residual of a translated manifold: x -> F(x - shift).
#[derive(Debug)]
struct Shifted {
    inner: Arc<dyn Residual>,
    shift: Point,
}

impl Residual for Shifted {
    fn ambient(&self) -> usize {
        self.inner.ambient()
    }
    fn codim(&self) -> usize {
        self.inner.codim()
    }
    fn eval(&self, x: &Point) -> DVector<f64> {
        self.inner.eval(&(x - &self.shift))
    }
    fn jacobian(&self, x: &Point) -> DMatrix<f64> {
        self.inner.jacobian(&(x - &self.shift))
    }
}

/// Several residual maps stacked into one system.
#[derive(Debug)]
pub struct Stacked(pub Vec<Arc<dyn Residual>>);

impl Residual for Stacked {
    fn ambient(&self) -> usize {
        self.0.first().map(|r| r.ambient()).unwrap_or(0)
    }
    fn codim(&self) -> usize {
        self.0.iter().map(|r| r.codim()).sum()
    }
    fn eval(&self, x: &Point) -> DVector<f64> {
        let parts: Vec<f64> = self.0.iter().flat_map(|r| r.eval(x).iter().copied().collect::<Vec<_>>()).collect();
        DVector::from_vec(parts)
    }
    fn jacobian(&self, x: &Point) -> DMatrix<f64> {
        let n = self.ambient();
        let mut j = DMatrix::zeros(self.codim(), n);
        let mut row = 0;
        for r in &self.0 {
            let jr = r.jacobian(x);
            for i in 0..jr.nrows() {
                j.set_row(row, &jr.row(i));
                row += 1;
            }
        }
        j
    }
}

/// Implicit manifold {x : F(x) = 0} with a reference point where the
/// Jacobian has full row rank.
#[derive(Debug, Clone)]
pub struct Manifold {
    residual: Arc<dyn Residual>,
    reference: Point,
}

impl Manifold {
    pub fn new(residual: Arc<dyn Residual>, reference: Point) -> Result<Self> {
        if reference.len() != residual.ambient() {
            return Err(RegError::DimensionMismatch {
                expected: residual.ambient(),
                got: reference.len(),
            });
        }
        let m = residual.codim();
        if m == 0 || m > residual.ambient() {
            return Err(RegError::InvalidSet(format!(
                "manifold needs between 1 and {} equations, got {m}",
                residual.ambient()
            )));
        }
        let r = linalg::rank(&residual.jacobian(&reference).transpose());
        if r < m {
            return Err(RegError::RankDeficient { rank: r, expected: m });
        }
        Ok(Manifold {
            residual,
            reference,
        })
    }

    pub fn reference(&self) -> &Point {
        &self.reference
    }

    pub fn residual(&self) -> &Arc<dyn Residual> {
        &self.residual
    }

    pub fn codim(&self) -> usize {
        self.residual.codim()
    }

    /// Orthonormal basis of range of the Jacobian transpose at x.
    pub fn normal_basis(&self, x: &Point) -> Result<DMatrix<f64>> {
        let j = self.residual.jacobian(x);
        let q = linalg::orthonormal_basis(&j.transpose());
        if q.ncols() < self.codim() {
            return Err(RegError::RankDeficient {
                rank: q.ncols(),
                expected: self.codim(),
            });
        }
        Ok(q)
    }

    /// Orthonormal basis of the kernel of the Jacobian at x.
    pub fn tangent_basis(&self, x: &Point) -> Result<DMatrix<f64>> {
        let q = self.normal_basis(x)?;
        Ok(linalg::complement(&q, x.len()))
    }

    pub fn project_local(&self, x: &Point) -> Result<Point> {
        gauss_newton(self.residual.as_ref(), x)
    }
}

/// Nearest point of {F = 0} found by repeatedly projecting x onto the
/// linearisation of F at the current iterate.
pub fn gauss_newton(res: &dyn Residual, x: &Point) -> Result<Point> {
    let mut p = x.clone();
    for it in 0..GN_MAX_ITER {
        let f = res.eval(&p);
        let j = res.jacobian(&p);
        let rhs = &f + &j * (x - &p);
        let jjt = &j * j.transpose();
        let lambda = match jjt.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                return Err(RegError::ProjectionNotFound {
                    iterations: it,
                    last: p.iter().copied().collect(),
                })
            }
        };
        let next = x - j.transpose() * lambda;
        let step = (&next - &p).norm();
        p = next;
        if !p.iter().all(|v| v.is_finite()) {
            break;
        }
        if step <= GN_STEP_TOL * (1.0 + p.norm()) {
            if res.eval(&p).norm() <= MEMBERSHIP_TOL {
                return Ok(p);
            }
            break;
        }
    }
    Err(RegError::ProjectionNotFound {
        iterations: GN_MAX_ITER,
        last: p.iter().copied().collect(),
    })
}

/// Structured description of a nonempty closed set in R^n.
#[derive(Debug, Clone)]
pub enum SetSpec {
    /// offset + span(basis); basis has orthonormal columns (possibly none).
    Affine { basis: DMatrix<f64>, offset: Point },
    /// {x : <normal, x> <= offset}, unit normal.
    HalfSpace { normal: Point, offset: f64 },
    Ball { center: Point, radius: f64 },
    Sphere { center: Point, radius: f64 },
    /// {x : normals * x <= offsets}, unit rows.
    Polyhedron { normals: DMatrix<f64>, offsets: DVector<f64> },
    /// Ball intersected with a polyhedral cone whose apex is the centre:
    /// {x : ||x - c|| <= r, <f_i, x - c> <= 0}.
    Sector {
        center: Point,
        radius: f64,
        facets: Vec<Point>,
    },
    Manifold(Manifold),
    Union(Vec<SetSpec>),
}

/// Output of a projection.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub points: Vec<Point>,
    pub distance: f64,
    /// True when the projector is an infinite set and `points` only holds
    /// representatives.
    pub degenerate: bool,
    /// True when the answer is only a local nearest point.
    pub local: bool,
}

impl ProjectionResult {
    fn single(x: &Point, p: Point) -> Self {
        let distance = (x - &p).norm();
        ProjectionResult {
            points: vec![p],
            distance,
            degenerate: false,
            local: false,
        }
    }

    /// The lexicographically smallest nearest point.
    pub fn first(&self) -> &Point {
        &self.points[0]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProjectOptions {
    /// Number of representatives returned for degenerate projections.
    pub representatives: usize,
    pub seed: u64,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        ProjectOptions {
            representatives: 8,
            seed: 0,
        }
    }
}

fn unit(v: &Point) -> Result<Point> {
    let n = v.norm();
    if !(n > 1e-14) || !n.is_finite() {
        return Err(RegError::InvalidSet("zero or non-finite direction".into()));
    }
    Ok(v / n)
}

fn check_finite(p: &Point, what: &str) -> Result<()> {
    if p.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(RegError::InvalidSet(format!("{what} has non-finite entries")))
    }
}

pub fn lex_cmp(a: &Point, b: &Point) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn sort_dedup(points: &mut Vec<Point>) {
    points.sort_by(lex_cmp);
    points.dedup_by(|a, b| (&*a - &*b).norm() <= 1e-12);
}

impl SetSpec {
    /// Affine subspace through `offset` spanned by `directions`.
    pub fn affine(offset: Point, directions: &[Point]) -> Result<Self> {
        check_finite(&offset, "offset")?;
        let n = offset.len();
        for d in directions {
            if d.len() != n {
                return Err(RegError::DimensionMismatch { expected: n, got: d.len() });
            }
            check_finite(d, "direction")?;
        }
        let basis = linalg::orthonormal_basis(&linalg::columns(n, directions));
        Ok(SetSpec::Affine { basis, offset })
    }

    pub fn line(point: Point, direction: Point) -> Result<Self> {
        Self::affine(point, &[direction])
    }

    pub fn point(p: Point) -> Result<Self> {
        Self::affine(p, &[])
    }

    pub fn whole(n: usize) -> Self {
        SetSpec::Affine {
            basis: DMatrix::identity(n, n),
            offset: DVector::zeros(n),
        }
    }

    pub fn half_space(normal: Point, offset: f64) -> Result<Self> {
        check_finite(&normal, "normal")?;
        if !offset.is_finite() {
            return Err(RegError::InvalidSet("non-finite offset".into()));
        }
        let norm = normal.norm();
        let normal = unit(&normal)?;
        Ok(SetSpec::HalfSpace {
            normal,
            offset: offset / norm,
        })
    }

    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        check_finite(&center, "center")?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(RegError::InvalidSet("radius must be positive".into()));
        }
        Ok(SetSpec::Ball { center, radius })
    }

    pub fn sphere(center: Point, radius: f64) -> Result<Self> {
        check_finite(&center, "center")?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(RegError::InvalidSet("radius must be positive".into()));
        }
        Ok(SetSpec::Sphere { center, radius })
    }

    /// Polyhedron {x : <n_i, x> <= b_i}; rejected when empty.
    pub fn polyhedron(constraints: &[(Point, f64)]) -> Result<Self> {
        if constraints.is_empty() {
            return Err(RegError::InvalidSet("polyhedron needs at least one constraint".into()));
        }
        let n = constraints[0].0.len();
        let mut normals = DMatrix::zeros(constraints.len(), n);
        let mut offsets = DVector::zeros(constraints.len());
        for (i, (nv, b)) in constraints.iter().enumerate() {
            if nv.len() != n {
                return Err(RegError::DimensionMismatch { expected: n, got: nv.len() });
            }
            check_finite(nv, "normal")?;
            if !b.is_finite() {
                return Err(RegError::InvalidSet("non-finite offset".into()));
            }
            let norm = nv.norm();
            let u = unit(nv)?;
            normals.set_row(i, &u.transpose());
            offsets[i] = b / norm;
        }
        if linalg::project_polyhedron(&normals, &offsets, &DVector::zeros(n)).is_none() {
            return Err(RegError::InvalidSet("polyhedron is empty".into()));
        }
        Ok(SetSpec::Polyhedron { normals, offsets })
    }

    pub fn sector(center: Point, radius: f64, facets: &[Point]) -> Result<Self> {
        check_finite(&center, "center")?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(RegError::InvalidSet("radius must be positive".into()));
        }
        let mut fs = Vec::with_capacity(facets.len());
        for f in facets {
            if f.len() != center.len() {
                return Err(RegError::DimensionMismatch { expected: center.len(), got: f.len() });
            }
            check_finite(f, "facet")?;
            fs.push(unit(f)?);
        }
        Ok(SetSpec::Sector {
            center,
            radius,
            facets: fs,
        })
    }

    pub fn manifold(residual: Arc<dyn Residual>, reference: Point) -> Result<Self> {
        Ok(SetSpec::Manifold(Manifold::new(residual, reference)?))
    }

    pub fn union(members: Vec<SetSpec>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(RegError::InvalidSet("union needs at least one member".into()));
        };
        let n = first.dim();
        for m in &members {
            if m.dim() != n {
                return Err(RegError::DimensionMismatch { expected: n, got: m.dim() });
            }
        }
        Ok(SetSpec::Union(members))
    }

    pub fn dim(&self) -> usize {
        match self {
            SetSpec::Affine { offset, .. } => offset.len(),
            SetSpec::HalfSpace { normal, .. } => normal.len(),
            SetSpec::Ball { center, .. } | SetSpec::Sphere { center, .. } => center.len(),
            SetSpec::Polyhedron { normals, .. } => normals.ncols(),
            SetSpec::Sector { center, .. } => center.len(),
            SetSpec::Manifold(m) => m.reference.len(),
            SetSpec::Union(ms) => ms[0].dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SetSpec::Affine { .. } => "affine",
            SetSpec::HalfSpace { .. } => "halfspace",
            SetSpec::Ball { .. } => "ball",
            SetSpec::Sphere { .. } => "sphere",
            SetSpec::Polyhedron { .. } => "polyhedron",
            SetSpec::Sector { .. } => "sector",
            SetSpec::Manifold(_) => "manifold",
            SetSpec::Union(_) => "union",
        }
    }

    /// Structural convexity (a union is only treated as convex when it has
    /// a single convex member).
    pub fn is_convex(&self) -> bool {
        match self {
            SetSpec::Sphere { .. } | SetSpec::Manifold(_) => false,
            SetSpec::Union(ms) => ms.len() == 1 && ms[0].is_convex(),
            _ => true,
        }
    }

    /// Members of a union (flattened), or the set itself.
    pub fn members(&self) -> Vec<&SetSpec> {
        match self {
            SetSpec::Union(ms) => ms.iter().flat_map(|m| m.members()).collect(),
            other => vec![other],
        }
    }

    /// Polyhedral description {x : n x <= b} when one exists.
    pub fn constraints(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        match self {
            SetSpec::Affine { basis, offset } => {
                let comp = linalg::complement(basis, offset.len());
                let k = comp.ncols();
                let mut normals = DMatrix::zeros(2 * k, offset.len());
                let mut offsets = DVector::zeros(2 * k);
                for j in 0..k {
                    let c = comp.column(j);
                    let b = c.dot(offset);
                    normals.set_row(2 * j, &c.transpose());
                    normals.set_row(2 * j + 1, &(-c).transpose());
                    offsets[2 * j] = b;
                    offsets[2 * j + 1] = -b;
                }
                Some((normals, offsets))
            }
            SetSpec::HalfSpace { normal, offset } => Some((
                DMatrix::from_row_slice(1, normal.len(), normal.as_slice()),
                DVector::from_element(1, *offset),
            )),
            SetSpec::Polyhedron { normals, offsets } => Some((normals.clone(), offsets.clone())),
            _ => None,
        }
    }

    /// Equation system for smooth variants.
    pub fn equations(&self) -> Option<Arc<dyn Residual>> {
        match self {
            SetSpec::Affine { basis, offset } => {
                let comp = linalg::complement(basis, offset.len());
                if comp.ncols() == 0 {
                    return None;
                }
                let eqs = (0..comp.ncols())
                    .map(|j| {
                        let c: DVector<f64> = comp.column(j).into_owned();
                        let b = -c.dot(offset);
                        Quadric::linear(c, b)
                    })
                    .collect();
                Some(Arc::new(QuadricSystem {
                    dim: offset.len(),
                    equations: eqs,
                }))
            }
            SetSpec::Sphere { center, radius } => Some(Arc::new(QuadricSystem {
                dim: center.len(),
                equations: vec![Quadric::sphere(center, *radius)],
            })),
            SetSpec::Manifold(m) => Some(m.residual.clone()),
            _ => None,
        }
    }

    /// The set shifted by `t`, i.e. S + t.
    pub fn translated(&self, t: &Point) -> SetSpec {
        match self {
            SetSpec::Affine { basis, offset } => SetSpec::Affine {
                basis: basis.clone(),
                offset: offset + t,
            },
            SetSpec::HalfSpace { normal, offset } => SetSpec::HalfSpace {
                normal: normal.clone(),
                offset: offset + normal.dot(t),
            },
            SetSpec::Ball { center, radius } => SetSpec::Ball {
                center: center + t,
                radius: *radius,
            },
            SetSpec::Sphere { center, radius } => SetSpec::Sphere {
                center: center + t,
                radius: *radius,
            },
            SetSpec::Polyhedron { normals, offsets } => SetSpec::Polyhedron {
                normals: normals.clone(),
                offsets: offsets + normals * t,
            },
            SetSpec::Sector {
                center,
                radius,
                facets,
            } => SetSpec::Sector {
                center: center + t,
                radius: *radius,
                facets: facets.clone(),
            },
            SetSpec::Manifold(m) => SetSpec::Manifold(Manifold {
                residual: Arc::new(Shifted {
                    inner: m.residual.clone(),
                    shift: t.clone(),
                }),
                reference: &m.reference + t,
            }),
            SetSpec::Union(ms) => SetSpec::Union(ms.iter().map(|m| m.translated(t)).collect()),
        }
    }

    fn check_dim(&self, x: &Point) -> Result<()> {
        if x.len() != self.dim() {
            return Err(RegError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn project(&self, x: &Point) -> Result<ProjectionResult> {
        self.project_with(x, &ProjectOptions::default())
    }

    /// All nearest points of the set to `x` (representatives when the
    /// projector is an infinite set; a local nearest point for manifolds).
    pub fn project_with(&self, x: &Point, opts: &ProjectOptions) -> Result<ProjectionResult> {
        self.check_dim(x)?;
        match self {
            SetSpec::Affine { basis, offset } => {
                let p = offset + basis * (basis.transpose() * (x - offset));
                Ok(ProjectionResult::single(x, p))
            }
            SetSpec::HalfSpace { normal, offset } => {
                let s = normal.dot(x) - offset;
                let p = if s <= 0.0 { x.clone() } else { x - normal * s };
                Ok(ProjectionResult::single(x, p))
            }
            SetSpec::Ball { center, radius } => {
                let d = x - center;
                let r = d.norm();
                let p = if r <= *radius { x.clone() } else { center + d * (*radius / r) };
                Ok(ProjectionResult::single(x, p))
            }
            SetSpec::Sphere { center, radius } => {
                let d = x - center;
                let r = d.norm();
                if r <= 1e-14 {
                    let mut points: Vec<Point> = (0..opts.representatives.max(1))
                        .map(|i| {
                            let mut g = rng::stream(opts.seed, i as u64);
                            center + rng::unit_vector(&mut g, center.len()) * *radius
                        })
                        .collect();
                    sort_dedup(&mut points);
                    return Ok(ProjectionResult {
                        points,
                        distance: *radius,
                        degenerate: true,
                        local: false,
                    });
                }
                Ok(ProjectionResult::single(x, center + d * (*radius / r)))
            }
            SetSpec::Polyhedron { normals, offsets } => {
                let p = linalg::project_polyhedron(normals, offsets, x).ok_or_else(|| {
                    RegError::ProjectionNotFound {
                        iterations: 0,
                        last: x.iter().copied().collect(),
                    }
                })?;
                Ok(ProjectionResult::single(x, p))
            }
            SetSpec::Sector {
                center,
                radius,
                facets,
            } => {
                let y = x - center;
                let q = if facets.is_empty() {
                    y
                } else {
                    let f = linalg::columns(center.len(), facets).transpose();
                    linalg::project_polyhedron(&f, &DVector::zeros(facets.len()), &y)
                        .expect("a cone always contains its apex")
                };
                let r = q.norm();
                let q = if r <= *radius { q } else { q * (*radius / r) };
                Ok(ProjectionResult::single(x, center + q))
            }
            SetSpec::Manifold(m) => {
                let p = m.project_local(x)?;
                let mut out = ProjectionResult::single(x, p);
                out.local = true;
                Ok(out)
            }
            SetSpec::Union(ms) => {
                let results: Vec<ProjectionResult> = ms
                    .iter()
                    .map(|m| m.project_with(x, opts))
                    .collect::<Result<_>>()?;
                let d = results
                    .iter()
                    .map(|r| r.distance)
                    .fold(f64::INFINITY, f64::min);
                let cutoff = d + TIE_TOL * d;
                let mut points = Vec::new();
                let mut degenerate = false;
                let mut local = false;
                for r in results.into_iter().filter(|r| r.distance <= cutoff) {
                    degenerate |= r.degenerate;
                    local |= r.local;
                    points.extend(r.points);
                }
                sort_dedup(&mut points);
                Ok(ProjectionResult {
                    points,
                    distance: d,
                    degenerate,
                    local,
                })
            }
        }
    }

    pub fn distance(&self, x: &Point) -> Result<f64> {
        Ok(self.project(x)?.distance)
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.distance(x).map(|d| d <= MEMBERSHIP_TOL).unwrap_or(false)
    }

    /// Whether `a` is one of the nearest points of the set to `x`.
    pub fn inverse_projector_contains(&self, a: &Point, x: &Point) -> Result<bool> {
        self.check_dim(a)?;
        self.check_dim(x)?;
        let da = self.distance(a)?;
        if da > MEMBERSHIP_TOL {
            return Err(RegError::NotInSet { distance: da });
        }
        let d = self.distance(x)?;
        let gap = (x - a).norm();
        Ok(gap <= d + TIE_TOL * d.max(1.0) + MEMBERSHIP_TOL)
    }

    /// Seeded points of S within distance `delta` of `xbar`.
    ///
    /// Points come from projecting uniform samples of the ball onto S (per
    /// member for unions); affine sets are sampled in basis coordinates. The
    /// list may be shorter than `count`, or empty when the slice is empty.
    pub fn sample_near(&self, xbar: &Point, delta: f64, count: usize, seed: u64) -> Vec<Point> {
        if self.check_dim(xbar).is_err() || !(delta > 0.0) || count == 0 {
            return Vec::new();
        }
        let n = self.dim();
        if let SetSpec::Affine { basis, offset } = self {
            let foot = offset + basis * (basis.transpose() * (xbar - offset));
            let h = (xbar - &foot).norm();
            if h >= delta {
                return Vec::new();
            }
            let rho = (delta * delta - h * h).sqrt();
            let k = basis.ncols();
            return (0..count)
                .map(|i| {
                    if k == 0 {
                        return foot.clone();
                    }
                    let mut g = rng::stream(seed, i as u64);
                    let w = rng::in_ball(&mut g, k, rho);
                    &foot + basis * w
                })
                .collect();
        }
        let members = self.members();
        let mut out = Vec::with_capacity(count);
        let cap = 16 * count + 16;
        for i in 0..cap {
            if out.len() >= count {
                break;
            }
            let mut g = rng::stream(seed, i as u64);
            let y = xbar + rng::in_ball(&mut g, n, delta);
            let target = members[i % members.len()];
            let Ok(res) = target.project(&y) else { continue };
            let p = res.first().clone();
            if (&p - xbar).norm() < delta && p.iter().all(|v| v.is_finite()) {
                out.push(p);
            }
        }
        out
    }

    /// Samples spread over geometrically shrinking balls around `xbar`
    /// (radii delta, delta/4, delta/16, ...), so local behaviour at small
    /// scales is represented.
    pub fn sample_multiscale(&self, xbar: &Point, delta: f64, count: usize, seed: u64) -> Vec<Point> {
        const LEVELS: usize = 5;
        let per = count.div_ceil(LEVELS);
        let mut out = Vec::with_capacity(count);
        for k in 0..LEVELS {
            let r = delta * 0.25f64.powi(k as i32);
            out.extend(self.sample_near(xbar, r, per, rng::derive(seed, k as u64 + 1)));
        }
        out.truncate(count);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p2(a: f64, b: f64) -> Point {
        DVector::from_vec(vec![a, b])
    }

    fn cross() -> SetSpec {
        SetSpec::union(vec![
            SetSpec::line(p2(0.0, 0.0), p2(1.0, 0.0)).unwrap(),
            SetSpec::line(p2(0.0, 0.0), p2(0.0, 1.0)).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn x_axis_projection() {
        let a = SetSpec::line(p2(0.0, 0.0), p2(1.0, 0.0)).unwrap();
        let r = a.project(&p2(1.0, 1.0)).unwrap();
        assert_eq!(r.points.len(), 1);
        assert_abs_diff_eq!(r.points[0][0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.points[0][1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.distance, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cross_projection_is_two_valued() {
        let r = cross().project(&p2(1.0, 1.0)).unwrap();
        assert_eq!(r.points.len(), 2);
        assert_abs_diff_eq!((&r.points[0] - p2(0.0, 1.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((&r.points[1] - p2(1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.distance, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn circle_centre_is_degenerate() {
        let c = SetSpec::sphere(p2(0.0, 0.0), 1.0).unwrap();
        let r = c.project(&p2(0.0, 0.0)).unwrap();
        assert!(r.degenerate);
        assert_abs_diff_eq!(r.distance, 1.0);
        assert!(r.points.iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn distances_from_the_examples() {
        let ball = SetSpec::ball(p2(0.0, 0.0), 1.0).unwrap();
        assert_abs_diff_eq!(ball.distance(&p2(2.0, 0.0)).unwrap(), 1.0, epsilon = 1e-15);
        let diag = SetSpec::line(p2(0.0, 0.0), p2(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(
            diag.distance(&p2(1.0, 0.0)).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(cross().distance(&p2(3.0, 1.0)).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn inverse_projector_examples() {
        let c = SetSpec::sphere(p2(0.0, 0.0), 1.0).unwrap();
        assert!(c.inverse_projector_contains(&p2(1.0, 0.0), &p2(3.0, 0.0)).unwrap());
        assert!(!c.inverse_projector_contains(&p2(1.0, 0.0), &p2(0.0, 2.0)).unwrap());
        assert!(matches!(
            c.inverse_projector_contains(&p2(0.5, 0.0), &p2(0.0, 2.0)),
            Err(RegError::NotInSet { .. })
        ));
    }

    #[test]
    fn sampling_examples() {
        let a = SetSpec::line(p2(0.0, 0.0), p2(1.0, 0.0)).unwrap();
        let s = a.sample_near(&p2(0.0, 0.0), 1.0, 5, 7);
        assert_eq!(s.len(), 5);
        assert!(s.iter().all(|p| p[1] == 0.0 && p[0].abs() < 1.0));
        assert_eq!(s, a.sample_near(&p2(0.0, 0.0), 1.0, 5, 7));

        let c = SetSpec::sphere(p2(0.0, 0.0), 1.0).unwrap();
        let arc = c.sample_near(&p2(1.0, 0.0), 0.1, 20, 3);
        assert!(!arc.is_empty());
        assert!(arc
            .iter()
            .all(|p| (p.norm() - 1.0).abs() < 1e-12 && (p - p2(1.0, 0.0)).norm() < 0.1));

        let far = SetSpec::ball(p2(3.0, 0.0), 1.0).unwrap();
        assert!(far.sample_near(&p2(0.0, 0.0), 1.0, 10, 1).is_empty());
    }

    #[test]
    fn sector_projection_composes_cone_then_ball() {
        // Quarter disk in the first quadrant.
        let s = SetSpec::sector(p2(0.0, 0.0), 1.0, &[p2(-1.0, 0.0), p2(0.0, -1.0)]).unwrap();
        let r = s.project(&p2(3.0, -1.0)).unwrap();
        assert_abs_diff_eq!((r.first() - p2(1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        let r = s.project(&p2(-1.0, -1.0)).unwrap();
        assert_abs_diff_eq!(r.first().norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn manifold_circle_projection_matches_sphere() {
        let sys = QuadricSystem {
            dim: 2,
            equations: vec![Quadric::sphere(&p2(0.0, 0.0), 1.0)],
        };
        let m = SetSpec::manifold(Arc::new(sys), p2(1.0, 0.0)).unwrap();
        let x = p2(0.9, 0.7);
        let r = m.project(&x).unwrap();
        assert!(r.local);
        let expect = &x / x.norm();
        assert_abs_diff_eq!((r.first() - expect).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn manifold_rejects_rank_deficient_reference() {
        let sys = QuadricSystem {
            dim: 2,
            equations: vec![Quadric::sphere(&p2(0.0, 0.0), 1.0)],
        };
        assert!(matches!(
            SetSpec::manifold(Arc::new(sys), p2(0.0, 0.0)),
            Err(RegError::RankDeficient { .. })
        ));
    }

    #[test]
    fn manifold_projection_failure_reports_last_iterate() {
        let sys = QuadricSystem {
            dim: 2,
            equations: vec![Quadric::sphere(&p2(0.0, 0.0), 1.0)],
        };
        let m = SetSpec::manifold(Arc::new(sys), p2(1.0, 0.0)).unwrap();
        assert!(matches!(
            m.project(&p2(0.0, 0.0)),
            Err(RegError::ProjectionNotFound { .. })
        ));
    }

    #[test]
    fn translated_halfspace_and_polyhedron() {
        let h = SetSpec::half_space(p2(2.0, 0.0), 2.0).unwrap();
        assert!(h.contains(&p2(1.0, 5.0)));
        let t = h.translated(&p2(1.0, 0.0));
        assert!(t.contains(&p2(2.0, 0.0)));
        assert!(!t.contains(&p2(2.1, 0.0)));
    }

    #[test]
    fn empty_polyhedron_rejected() {
        let e = SetSpec::polyhedron(&[(p2(1.0, 0.0), -1.0), (p2(-1.0, 0.0), -1.0)]);
        assert!(matches!(e, Err(RegError::InvalidSet(_))));
    }
}
