//! Normal cones, tangent and normal spaces, polyhedral cone arithmetic and
//! the Friedrichs angle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{RegError, Result};
use crate::linalg;
use crate::rng;
use crate::sets::{Point, SetSpec, MEMBERSHIP_TOL};

/// Tolerance for cone membership and active constraints.
pub const CONE_TOL: f64 = 1e-9;

/// A closed cone in R^n.
///
/// Exact variants describe the cone completely. `Sampled` only lists
/// directions known to lie in the cone, so it is an inner approximation and
/// any distance computed against it is an upper bound.
#[derive(Debug, Clone, PartialEq)]
pub enum ConeSpec {
    /// Linear subspace with orthonormal basis columns (no columns: {0}).
    Subspace { basis: DMatrix<f64> },
    /// Convex cone generated by unit vectors (no generators: {0}).
    ConvexCone { dim: usize, generators: Vec<Point> },
    /// Finite union of rays with the given unit directions.
    RayUnion { dim: usize, rays: Vec<Point> },
    /// Finite union of convex cones (subspaces or convex cones).
    Union { dim: usize, pieces: Vec<ConeSpec> },
    /// Unit directions found by sampling.
    Sampled { dim: usize, directions: Vec<Point> },
}

/// Which normal cone to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalKind {
    Proximal,
    Frechet,
    Limiting,
}

fn normalize_dirs(dirs: impl IntoIterator<Item = Point>) -> Vec<Point> {
    let mut out: Vec<Point> = dirs
        .into_iter()
        .filter_map(|d| {
            let n = d.norm();
            (n > 1e-12 && n.is_finite()).then(|| d / n)
        })
        .collect();
    out.sort_by(crate::sets::lex_cmp);
    out.dedup_by(|a, b| (&*a - &*b).norm() <= 1e-7);
    out
}

impl ConeSpec {
    pub fn zero(n: usize) -> Self {
        ConeSpec::Subspace {
            basis: DMatrix::zeros(n, 0),
        }
    }

    pub fn full(n: usize) -> Self {
        ConeSpec::Subspace {
            basis: DMatrix::identity(n, n),
        }
    }

    /// Subspace spanned by arbitrary vectors.
    pub fn span(n: usize, vectors: &[Point]) -> Self {
        ConeSpec::Subspace {
            basis: linalg::orthonormal_basis(&linalg::columns(n, vectors)),
        }
    }

    pub fn convex(n: usize, generators: impl IntoIterator<Item = Point>) -> Self {
        ConeSpec::ConvexCone {
            dim: n,
            generators: normalize_dirs(generators),
        }
    }

    pub fn rays(n: usize, rays: impl IntoIterator<Item = Point>) -> Self {
        ConeSpec::RayUnion {
            dim: n,
            rays: normalize_dirs(rays),
        }
    }

    pub fn sampled(n: usize, directions: impl IntoIterator<Item = Point>) -> Self {
        ConeSpec::Sampled {
            dim: n,
            directions: normalize_dirs(directions),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConeSpec::Subspace { basis } => basis.nrows(),
            ConeSpec::ConvexCone { dim, .. }
            | ConeSpec::RayUnion { dim, .. }
            | ConeSpec::Union { dim, .. }
            | ConeSpec::Sampled { dim, .. } => *dim,
        }
    }

    pub fn is_exact(&self) -> bool {
        match self {
            ConeSpec::Sampled { .. } => false,
            ConeSpec::Union { pieces, .. } => pieces.iter().all(|p| p.is_exact()),
            _ => true,
        }
    }

    /// True when the cone is {0}.
    pub fn is_trivial(&self) -> bool {
        match self {
            ConeSpec::Subspace { basis } => basis.ncols() == 0,
            ConeSpec::ConvexCone { generators, .. } => generators.is_empty(),
            ConeSpec::RayUnion { rays, .. } => rays.is_empty(),
            ConeSpec::Union { pieces, .. } => pieces.iter().all(|p| p.is_trivial()),
            ConeSpec::Sampled { directions, .. } => directions.is_empty(),
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            ConeSpec::Subspace { .. } | ConeSpec::ConvexCone { .. } => true,
            ConeSpec::RayUnion { rays, .. } => rays.len() <= 1,
            ConeSpec::Union { pieces, .. } => pieces.iter().filter(|p| !p.is_trivial()).count() <= 1,
            ConeSpec::Sampled { .. } => false,
        }
    }

    /// Generator matrices (columns) of convex pieces whose union is the cone.
    pub fn pieces(&self) -> Vec<DMatrix<f64>> {
        let n = self.dim();
        match self {
            ConeSpec::Subspace { basis } => {
                let k = basis.ncols();
                let mut g = DMatrix::zeros(n, 2 * k);
                for j in 0..k {
                    g.set_column(2 * j, &basis.column(j));
                    g.set_column(2 * j + 1, &(-basis.column(j)));
                }
                vec![g]
            }
            ConeSpec::ConvexCone { generators, .. } => vec![linalg::columns(n, generators)],
            ConeSpec::RayUnion { rays, .. } => {
                if rays.is_empty() {
                    vec![DMatrix::zeros(n, 0)]
                } else {
                    rays.iter().map(|r| linalg::columns(n, std::slice::from_ref(r))).collect()
                }
            }
            ConeSpec::Union { pieces, .. } => {
                let out: Vec<_> = pieces.iter().flat_map(|p| p.pieces()).collect();
                if out.is_empty() {
                    vec![DMatrix::zeros(n, 0)]
                } else {
                    out
                }
            }
            ConeSpec::Sampled { directions, .. } => {
                if directions.is_empty() {
                    vec![DMatrix::zeros(n, 0)]
                } else {
                    directions
                        .iter()
                        .map(|r| linalg::columns(n, std::slice::from_ref(r)))
                        .collect()
                }
            }
        }
    }

    /// Nearest point of the cone to `v`.
    pub fn project(&self, v: &Point) -> Point {
        if let ConeSpec::Subspace { basis } = self {
            return basis * (basis.transpose() * v);
        }
        let mut best = DVector::zeros(v.len());
        let mut best_d = v.norm();
        for g in self.pieces() {
            let (p, d) = linalg::project_cone(&g, v);
            if d < best_d {
                best_d = d;
                best = p;
            }
        }
        best
    }

    pub fn distance(&self, v: &Point) -> f64 {
        if let ConeSpec::Subspace { basis } = self {
            return (v - basis * (basis.transpose() * v)).norm();
        }
        (v - self.project(v)).norm()
    }

    pub fn contains(&self, v: &Point) -> bool {
        self.distance(v) <= CONE_TOL * v.norm().max(1.0)
    }

    pub fn negate(&self) -> ConeSpec {
        let neg = |v: &Vec<Point>| v.iter().map(|g| -g).collect::<Vec<_>>();
        match self {
            ConeSpec::Subspace { .. } => self.clone(),
            ConeSpec::ConvexCone { dim, generators } => ConeSpec::convex(*dim, neg(generators)),
            ConeSpec::RayUnion { dim, rays } => ConeSpec::rays(*dim, neg(rays)),
            ConeSpec::Union { dim, pieces } => ConeSpec::Union {
                dim: *dim,
                pieces: pieces.iter().map(|p| p.negate()).collect(),
            },
            ConeSpec::Sampled { dim, directions } => ConeSpec::sampled(*dim, neg(directions)),
        }
    }

    /// Unit vectors of the cone. The flag is true when the returned list is
    /// every unit vector of the cone (finitely many rays or a line).
    pub fn unit_vectors(&self, budget: usize, seed: u64) -> (Vec<Point>, bool) {
        let n = self.dim();
        match self {
            ConeSpec::Subspace { basis } => {
                let k = basis.ncols();
                match k {
                    0 => (Vec::new(), true),
                    1 => {
                        let b: Point = basis.column(0).into_owned();
                        (vec![b.clone(), -b], true)
                    }
                    _ => {
                        let mut out: Vec<Point> = Vec::with_capacity(budget + 2 * k);
                        for j in 0..k {
                            out.push(basis.column(j).into_owned());
                            out.push(-basis.column(j).into_owned());
                        }
                        for i in 0..budget {
                            let w = rng::unit_vector(&mut rng::stream(seed, i as u64), k);
                            out.push(basis * w);
                        }
                        (out, false)
                    }
                }
            }
            ConeSpec::ConvexCone { generators, .. } => {
                if generators.len() <= 1 {
                    return (generators.clone(), true);
                }
                let g = linalg::columns(n, generators);
                let mut out = generators.clone();
                for i in 0..budget {
                    let mut s = rng::stream(seed, i as u64);
                    let w = rng::gaussian(&mut s, generators.len()).map(|x| x.abs());
                    let v = &g * w;
                    let nv = v.norm();
                    if nv > 1e-12 {
                        out.push(v / nv);
                    }
                }
                (out, false)
            }
            ConeSpec::RayUnion { rays, .. } => (rays.clone(), true),
            ConeSpec::Union { pieces, .. } => {
                let mut out = Vec::new();
                let mut exact = true;
                for (i, p) in pieces.iter().enumerate() {
                    let (u, e) = p.unit_vectors(budget / pieces.len().max(1) + 1, rng::derive(seed, i as u64));
                    exact &= e;
                    out.extend(u);
                }
                (out, exact)
            }
            ConeSpec::Sampled { directions, .. } => (directions.clone(), false),
        }
    }

    /// Canonical form: unions of one-dimensional pieces become ray unions
    /// and trivial pieces are dropped.
    pub fn simplify(self) -> ConeSpec {
        let n = self.dim();
        match self {
            ConeSpec::Union { pieces, .. } => {
                let mut flat: Vec<ConeSpec> = Vec::new();
                for p in pieces {
                    match p.simplify() {
                        ConeSpec::Union { pieces, .. } => flat.extend(pieces),
                        ConeSpec::RayUnion { rays, .. } => {
                            flat.extend(rays.into_iter().map(|r| ConeSpec::convex(n, [r])))
                        }
                        q if q.is_trivial() => {}
                        q => flat.push(q),
                    }
                }
                let mut rays = Vec::new();
                let mut all_rays = true;
                for p in &flat {
                    match p {
                        ConeSpec::Subspace { basis } if basis.ncols() == 1 => {
                            let b: Point = basis.column(0).into_owned();
                            rays.push(b.clone());
                            rays.push(-b);
                        }
                        ConeSpec::ConvexCone { generators, .. } if generators.len() == 1 => {
                            rays.push(generators[0].clone())
                        }
                        _ => all_rays = false,
                    }
                }
                if flat.is_empty() {
                    ConeSpec::zero(n)
                } else if flat.len() == 1 {
                    flat.pop().expect("one piece")
                } else if all_rays {
                    ConeSpec::rays(n, rays)
                } else {
                    ConeSpec::Union { dim: n, pieces: flat }
                }
            }
            other => other,
        }
    }
}

/// Generators of the polyhedral cone {x : h x <= 0}: plus/minus a basis of
/// its lineality space followed by its extreme rays. Rays are found by brute
/// force over subsets of constraints, which is fine for the small dimensions
/// handled here.
pub fn hcone_generators(h: &DMatrix<f64>) -> Result<Vec<Point>> {
    let n = h.ncols();
    let lin = linalg::nullspace(h);
    let l = lin.ncols();
    let mut gens: Vec<Point> = Vec::new();
    for j in 0..l {
        gens.push(lin.column(j).into_owned());
        gens.push(-lin.column(j).into_owned());
    }
    if l == n {
        return Ok(gens);
    }
    let rows: Vec<DVector<f64>> = (0..h.nrows())
        .map(|i| h.row(i).transpose())
        .filter(|r| r.norm() > 1e-14)
        .map(|r| {
            let nr = r.norm();
            r / nr
        })
        .collect();
    let k = n - l;
    let pick = k - 1;
    let total = binomial(rows.len(), pick);
    if total > 2_000_000 {
        return Err(RegError::Unsupported(format!(
            "ray enumeration over {} constraints in dimension {n}",
            rows.len()
        )));
    }
    let feasible = |d: &Point| rows.iter().all(|r| r.dot(d) <= 1e-10);
    let mut rays: Vec<Point> = Vec::new();
    let mut subset: Vec<usize> = (0..pick).collect();
    loop {
        let mut m = DMatrix::zeros(pick + l, n);
        for (i, &s) in subset.iter().enumerate() {
            m.set_row(i, &rows[s].transpose());
        }
        for j in 0..l {
            m.set_row(pick + j, &lin.column(j).transpose());
        }
        let ns = linalg::nullspace(&m);
        if ns.ncols() == 1 {
            let d: Point = ns.column(0).into_owned();
            for cand in [d.clone(), -d] {
                if feasible(&cand) && !rays.iter().any(|r| (r - &cand).norm() < 1e-9) {
                    rays.push(cand);
                }
            }
        }
        if !next_subset(&mut subset, rows.len()) {
            break;
        }
    }
    rays.sort_by(crate::sets::lex_cmp);
    gens.extend(rays);
    Ok(gens)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

fn next_subset(s: &mut [usize], n: usize) -> bool {
    let k = s.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if s[i] < n - k + i {
            s[i] += 1;
            for j in i + 1..k {
                s[j] = s[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Facet normals (rows) of the cone generated by the columns of `g`, i.e. a
/// matrix h with cone(g) = {x : h x <= 0}.
pub fn facets(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    let polar = hcone_generators(&g.transpose())?;
    Ok(linalg::columns(n, &polar).transpose())
}

/// Generators of cone(g1) intersected with cone(g2).
pub fn intersect_generated(g1: &DMatrix<f64>, g2: &DMatrix<f64>) -> Result<Vec<Point>> {
    let h1 = facets(g1)?;
    let h2 = facets(g2)?;
    let mut h = DMatrix::zeros(h1.nrows() + h2.nrows(), g1.nrows());
    for i in 0..h1.nrows() {
        h.set_row(i, &h1.row(i));
    }
    for i in 0..h2.nrows() {
        h.set_row(h1.nrows() + i, &h2.row(i));
    }
    hcone_generators(&h)
}

/// Intersection of two cones. Exact when both are exact; with a sampled
/// operand only the sampled directions lying in the other cone are kept.
pub fn intersect(c1: &ConeSpec, c2: &ConeSpec) -> Result<ConeSpec> {
    let n = c1.dim();
    if !c1.is_exact() || !c2.is_exact() {
        let (s, other) = if !c1.is_exact() { (c1, c2) } else { (c2, c1) };
        let (dirs, _) = s.unit_vectors(0, 0);
        return Ok(ConeSpec::sampled(n, dirs.into_iter().filter(|d| other.contains(d))));
    }
    if let (ConeSpec::Subspace { basis: b1 }, ConeSpec::Subspace { basis: b2 }) = (c1, c2) {
        return Ok(ConeSpec::Subspace {
            basis: subspace_intersection(b1, b2),
        });
    }
    let mut pieces = Vec::new();
    for g1 in c1.pieces() {
        for g2 in c2.pieces() {
            let gens = intersect_generated(&g1, &g2)?;
            if !gens.is_empty() {
                pieces.push(convex_from_generators(n, gens));
            }
        }
    }
    Ok(ConeSpec::Union { dim: n, pieces }.simplify())
}

fn convex_from_generators(n: usize, gens: Vec<Point>) -> ConeSpec {
    let c = ConeSpec::convex(n, gens);
    if let ConeSpec::ConvexCone { generators, .. } = &c {
        // A generator set closed under negation spans a subspace.
        if generators
            .iter()
            .all(|g| generators.iter().any(|h| (g + h).norm() < 1e-9))
        {
            return ConeSpec::span(n, generators);
        }
    }
    c
}

/// Whether the two cones share a nonzero vector. None when only sampled
/// information is available and no shared direction was found.
pub fn meets_nontrivially(c1: &ConeSpec, c2: &ConeSpec) -> Result<Option<bool>> {
    if c1.is_exact() && c2.is_exact() {
        return Ok(Some(!intersect(c1, c2)?.is_trivial()));
    }
    let hit = !intersect(c1, c2)?.is_trivial();
    Ok(if hit { Some(true) } else { None })
}

/// Whether v lies in the Minkowski sum c1 + c2 (exact for exact cones).
pub fn minkowski_contains(c1: &ConeSpec, c2: &ConeSpec, v: &Point) -> bool {
    let n = v.len();
    for g1 in c1.pieces() {
        for g2 in c2.pieces() {
            let mut g = DMatrix::zeros(n, g1.ncols() + g2.ncols());
            for j in 0..g1.ncols() {
                g.set_column(j, &g1.column(j));
            }
            for j in 0..g2.ncols() {
                g.set_column(g1.ncols() + j, &g2.column(j));
            }
            let (_, d) = linalg::project_cone(&g, v);
            if d <= CONE_TOL * v.norm().max(1.0) {
                return true;
            }
        }
    }
    false
}

/// Orthonormal basis of span(b1) intersected with span(b2).
pub fn subspace_intersection(b1: &DMatrix<f64>, b2: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b1.nrows();
    if b1.ncols() == 0 || b2.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    // Directions of V2 whose component off V1 vanishes: right singular
    // vectors of (I - P1) Q2 with singular value (sine) below the cutoff.
    let off = b2 - b1 * (b1.transpose() * b2);
    let svd = off.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut cols = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s < linalg::RANK_CUTOFF {
            cols.push(b2 * vt.row(i).transpose());
        }
    }
    linalg::orthonormal_basis(&linalg::columns(n, &cols))
}

/// Cosine of the Friedrichs angle between two subspaces (any spanning
/// columns accepted). Zero when a deflated subspace is trivial.
pub fn friedrichs_cosine(v1: &DMatrix<f64>, v2: &DMatrix<f64>) -> f64 {
    let q1 = linalg::orthonormal_basis(v1);
    let q2 = linalg::orthonormal_basis(v2);
    // The leading principal angles are zero exactly along V1 ∩ V2; skipping
    // them keeps the value symmetric in its arguments.
    let m = subspace_intersection(&q1, &q2).ncols();
    linalg::principal_cosines(&q1, &q2).get(m).copied().unwrap_or(0.0)
}

/// Distance from v to the cone (an upper bound for sampled cones).
pub fn distance_to_cone(c: &ConeSpec, v: &Point) -> f64 {
    c.distance(v)
}

fn ensure_member(s: &SetSpec, a: &Point) -> Result<()> {
    let d = s.distance(a)?;
    if d > MEMBERSHIP_TOL {
        return Err(RegError::NotInSet { distance: d });
    }
    Ok(())
}

/// Proximal normal cone of S at a.
pub fn proximal_normal_cone(s: &SetSpec, a: &Point) -> Result<ConeSpec> {
    ensure_member(s, a)?;
    base_cone(s, a)
}

fn base_cone(s: &SetSpec, a: &Point) -> Result<ConeSpec> {
    let n = s.dim();
    Ok(match s {
        SetSpec::Affine { basis, .. } => ConeSpec::Subspace {
            basis: linalg::complement(basis, n),
        },
        SetSpec::HalfSpace { normal, offset } => {
            if normal.dot(a) - offset >= -CONE_TOL {
                ConeSpec::convex(n, [normal.clone()])
            } else {
                ConeSpec::zero(n)
            }
        }
        SetSpec::Ball { center, radius } => {
            let d = a - center;
            if d.norm() >= radius - CONE_TOL {
                ConeSpec::convex(n, [d])
            } else {
                ConeSpec::zero(n)
            }
        }
        SetSpec::Sphere { center, .. } => ConeSpec::span(n, &[a - center]),
        SetSpec::Polyhedron { normals, offsets } => {
            let active = (0..normals.nrows())
                .filter(|&i| normals.row(i).transpose().dot(a) - offsets[i] >= -CONE_TOL)
                .map(|i| normals.row(i).transpose());
            convex_from_generators(n, active.collect())
        }
        SetSpec::Sector {
            center,
            radius,
            facets,
        } => {
            let d = a - center;
            let mut gens: Vec<Point> = facets
                .iter()
                .filter(|f| f.dot(&d) >= -CONE_TOL)
                .cloned()
                .collect();
            if d.norm() >= radius - CONE_TOL {
                gens.push(d);
            }
            convex_from_generators(n, gens)
        }
        SetSpec::Manifold(m) => ConeSpec::Subspace {
            basis: m.normal_basis(a)?,
        },
        SetSpec::Union(ms) => {
            let mut acc: Option<ConeSpec> = None;
            for m in ms.iter().filter(|m| m.contains(a)) {
                let c = base_cone(m, a)?;
                acc = Some(match acc {
                    None => c,
                    Some(prev) => intersect(&prev, &c)?,
                });
            }
            acc.unwrap_or_else(|| ConeSpec::zero(n))
        }
    })
}

/// Fréchet normal cone of S at a. For every supported variant it coincides
/// with the proximal cone (convex sets, C2 manifolds, finite unions of them).
pub fn frechet_normal_cone(s: &SetSpec, a: &Point) -> Result<ConeSpec> {
    proximal_normal_cone(s, a)
}

/// Limiting normal cone of S at a, in closed form for every supported
/// variant. Unions take the union of the member cones at a, except that a
/// point interior to some member has the trivial cone.
pub fn limiting_normal_cone(
    s: &SetSpec,
    a: &Point,
    delta_sample: f64,
    budget: usize,
    seed: u64,
) -> Result<ConeSpec> {
    ensure_member(s, a)?;
    match closed_form_limiting(s, a)? {
        Some(c) => Ok(c),
        None => sampled_limiting_cone(s, a, delta_sample, budget, seed),
    }
}

fn closed_form_limiting(s: &SetSpec, a: &Point) -> Result<Option<ConeSpec>> {
    let n = s.dim();
    match s {
        SetSpec::Union(ms) => {
            let mut pieces = Vec::new();
            for m in ms.iter().filter(|m| m.contains(a)) {
                let Some(c) = closed_form_limiting(m, a)? else {
                    return Ok(None);
                };
                if c.is_trivial() {
                    return Ok(Some(ConeSpec::zero(n)));
                }
                pieces.push(c);
            }
            Ok(Some(ConeSpec::Union { dim: n, pieces }.simplify()))
        }
        other => Ok(Some(base_cone(other, a)?)),
    }
}

/// Inner approximation of the limiting cone: proximal directions collected
/// at sampled base points near a (and at a itself).
pub fn sampled_limiting_cone(
    s: &SetSpec,
    a: &Point,
    delta: f64,
    budget: usize,
    seed: u64,
) -> Result<ConeSpec> {
    ensure_member(s, a)?;
    let n = s.dim();
    let mut bases = vec![a.clone()];
    bases.extend(s.sample_multiscale(a, delta, budget, seed));
    let mut dirs = Vec::new();
    for b in &bases {
        let c = base_cone(s, b)?;
        let (u, _) = c.unit_vectors(4, rng::derive(seed, 17));
        dirs.extend(u);
    }
    Ok(ConeSpec::sampled(n, dirs))
}

/// Points x of R near a (within `radius`) with a in P_S(x).
///
/// Candidates come from alternating projections between R and a + K for
/// each convex piece K of the proximal cone of S at a, started from seeded
/// points; each candidate is then confirmed with the inverse projector.
pub fn preimage_points(
    s: &SetSpec,
    a: &Point,
    r: &SetSpec,
    radius: f64,
    budget: usize,
    seed: u64,
) -> Result<Vec<Point>> {
    ensure_member(s, a)?;
    let cone = base_cone(s, a)?;
    let mut out = Vec::new();
    if r.contains(a) {
        out.push(a.clone());
    }
    if cone.is_trivial() {
        return Ok(out);
    }
    let pieces = cone.pieces();
    for i in 0..budget {
        let g = &pieces[i % pieces.len()];
        let mut st = rng::stream(seed, i as u64);
        let mut x = a + rng::in_ball(&mut st, a.len(), radius);
        let mut y = x.clone();
        let mut ok = false;
        for _ in 0..300 {
            y = match r.project(&x) {
                Ok(p) => p.first().clone(),
                Err(_) => break,
            };
            let (proj, _) = linalg::project_cone(g, &(&y - a));
            let z = a + proj;
            let gap = (&z - &y).norm();
            x = z;
            if gap <= 1e-11 {
                ok = true;
                break;
            }
        }
        if !ok || (&y - a).norm() >= radius {
            continue;
        }
        if s.inverse_projector_contains(a, &y).unwrap_or(false) {
            out.push(y);
        }
    }
    Ok(out)
}

/// Points of R near a reachable from a along directions of the cone C.
fn points_along_cone(c: &ConeSpec, a: &Point, r: &SetSpec, radius: f64, budget: usize, seed: u64) -> Vec<Point> {
    let mut out = Vec::new();
    if c.is_trivial() {
        return out;
    }
    let pieces = c.pieces();
    for i in 0..budget {
        let g = &pieces[i % pieces.len()];
        let mut st = rng::stream(seed, i as u64);
        let mut x = a + rng::in_ball(&mut st, a.len(), radius);
        for _ in 0..300 {
            let Ok(p) = r.project(&x) else { break };
            let y = p.first().clone();
            let (proj, _) = linalg::project_cone(g, &(&y - a));
            let z = a + proj;
            let gap = (&z - &y).norm();
            x = z;
            if gap <= 1e-11 {
                if (&y - a).norm() < radius {
                    out.push(y);
                }
                break;
            }
        }
    }
    out
}

/// Offset x - a, dropped when it is at the resolution of the iterative
/// solvers (such points coincide with a).
fn direction(x: &Point, a: &Point) -> Option<Point> {
    let d = x - a;
    (d.norm() > 1e-8 * a.norm().max(1.0)).then_some(d)
}

fn is_whole_space(r: &SetSpec) -> bool {
    matches!(r, SetSpec::Affine { basis, offset } if basis.ncols() == offset.len())
}

/// Normal cone of S at a restricted to directions that meet R.
///
/// Proximal: cone over x - a for x in R with a in P_S(x). Fréchet: the
/// Fréchet cone intersected with directions from a into R. Limiting: union
/// of restricted proximal cones at base points near a. Results are sampled
/// (inner approximations) unless R is the whole space; {0} is a legitimate
/// answer.
pub fn restricted_normal_cone(
    s: &SetSpec,
    r: &SetSpec,
    a: &Point,
    kind: NormalKind,
    delta: f64,
    budget: usize,
    seed: u64,
) -> Result<ConeSpec> {
    ensure_member(s, a)?;
    let n = s.dim();
    if r.dim() != n {
        return Err(RegError::DimensionMismatch { expected: n, got: r.dim() });
    }
    if is_whole_space(r) {
        return match kind {
            NormalKind::Proximal => proximal_normal_cone(s, a),
            NormalKind::Frechet => frechet_normal_cone(s, a),
            NormalKind::Limiting => limiting_normal_cone(s, a, delta, budget, seed),
        };
    }
    let dirs_from = |pts: Vec<Point>| pts.into_iter().filter_map(|x| direction(&x, a)).collect::<Vec<_>>();
    match kind {
        NormalKind::Proximal => {
            let pts = preimage_points(s, a, r, delta, budget, seed)?;
            Ok(ConeSpec::sampled(n, dirs_from(pts)))
        }
        NormalKind::Frechet => {
            let fc = frechet_normal_cone(s, a)?;
            let mut dirs = dirs_from(points_along_cone(&fc, a, r, delta, budget, seed));
            dirs.extend(dirs_from(preimage_points(s, a, r, delta, budget / 4 + 1, rng::derive(seed, 3))?));
            Ok(ConeSpec::sampled(n, dirs))
        }
        NormalKind::Limiting => {
            let outer = ((budget as f64).sqrt().ceil() as usize).max(8);
            let inner = (budget / outer).max(4);
            let mut bases = vec![a.clone()];
            bases.extend(s.sample_multiscale(a, delta, outer, rng::derive(seed, 5)));
            let mut dirs = Vec::new();
            for (i, b) in bases.iter().enumerate() {
                let pts = preimage_points(s, b, r, delta, inner, rng::derive(seed, 100 + i as u64))?;
                dirs.extend(pts.into_iter().filter_map(|x| direction(&x, b)));
            }
            Ok(ConeSpec::sampled(n, dirs))
        }
    }
}

/// Orthonormal basis of the tangent space of a smooth set at x.
pub fn tangent_space(s: &SetSpec, x: &Point) -> Result<DMatrix<f64>> {
    ensure_member(s, x)?;
    match s {
        SetSpec::Affine { basis, .. } => Ok(basis.clone()),
        SetSpec::Sphere { .. } | SetSpec::Manifold(_) => {
            let nb = normal_space(s, x)?;
            Ok(linalg::complement(&nb, x.len()))
        }
        other => Err(RegError::Unsupported(format!(
            "tangent space of a {} set",
            other.kind()
        ))),
    }
}

/// Orthonormal basis of the normal space of a smooth set at x.
pub fn normal_space(s: &SetSpec, x: &Point) -> Result<DMatrix<f64>> {
    ensure_member(s, x)?;
    match s {
        SetSpec::Affine { basis, .. } => Ok(linalg::complement(basis, x.len())),
        SetSpec::Sphere { center, .. } => {
            Ok(linalg::orthonormal_basis(&linalg::columns(x.len(), &[x - center])))
        }
        SetSpec::Manifold(m) => m.normal_basis(x),
        other => Err(RegError::Unsupported(format!(
            "normal space of a {} set",
            other.kind()
        ))),
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
    fn hcone_of_quadrant() {
        let h = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let g = hcone_generators(&h).unwrap();
        assert_eq!(g.len(), 2);
        assert!(g.iter().any(|v| (v - p2(1.0, 0.0)).norm() < 1e-12));
        assert!(g.iter().any(|v| (v - p2(0.0, 1.0)).norm() < 1e-12));
    }

    #[test]
    fn hcone_of_halfplane_has_lineality() {
        let h = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let g = hcone_generators(&h).unwrap();
        let c = ConeSpec::convex(2, g);
        assert!(c.contains(&p2(5.0, -1.0)));
        assert!(c.contains(&p2(-5.0, 0.0)));
        assert!(!c.contains(&p2(0.0, 1.0)));
    }

    #[test]
    fn convex_intersection_and_emptiness() {
        let a = ConeSpec::convex(2, [p2(1.0, 0.0), p2(0.0, 1.0)]);
        let b = ConeSpec::convex(2, [p2(1.0, 1.0), p2(-1.0, 0.0)]);
        let c = intersect(&a, &b).unwrap();
        assert!(c.contains(&p2(1.0, 1.0)));
        assert!(c.contains(&p2(0.0, 1.0)));
        assert!(!c.contains(&p2(1.0, 0.5)));
        let d = ConeSpec::convex(2, [p2(-1.0, -1.0)]);
        assert_eq!(meets_nontrivially(&a, &d).unwrap(), Some(false));
    }

    #[test]
    fn cross_cones_at_origin() {
        let o = p2(0.0, 0.0);
        assert!(proximal_normal_cone(&cross(), &o).unwrap().is_trivial());
        assert!(frechet_normal_cone(&cross(), &o).unwrap().is_trivial());
        let lim = limiting_normal_cone(&cross(), &o, 0.1, 0, 0).unwrap();
        match &lim {
            ConeSpec::RayUnion { rays, .. } => assert_eq!(rays.len(), 4),
            other => panic!("expected rays, got {other:?}"),
        }
        assert!(lim.contains(&p2(0.0, -2.0)));
        assert!(!lim.contains(&p2(1.0, 1.0)));
    }

    #[test]
    fn circle_and_halfspace_cones() {
        let c = SetSpec::sphere(p2(0.0, 0.0), 1.0).unwrap();
        let n = proximal_normal_cone(&c, &p2(1.0, 0.0)).unwrap();
        assert!(n.contains(&p2(-3.0, 0.0)));
        assert!(!n.contains(&p2(0.0, 1.0)));
        let h = SetSpec::half_space(p2(1.0, 0.0), 0.0).unwrap();
        let k = proximal_normal_cone(&h, &p2(0.0, 0.3)).unwrap();
        assert_eq!(
            k,
            ConeSpec::ConvexCone {
                dim: 2,
                generators: vec![p2(1.0, 0.0)]
            }
        );
    }

    #[test]
    fn quadrant_vertex_cone() {
        let q = SetSpec::polyhedron(&[(p2(-1.0, 0.0), 0.0), (p2(0.0, -1.0), 0.0)]).unwrap();
        let c = frechet_normal_cone(&q, &p2(0.0, 0.0)).unwrap();
        assert!(c.contains(&p2(-1.0, -2.0)));
        assert!(!c.contains(&p2(1.0, -2.0)));
        let l = limiting_normal_cone(&q, &p2(0.0, 0.0), 0.1, 0, 0).unwrap();
        assert_eq!(c, l);
    }

    #[test]
    fn distances_to_cones() {
        let s = ConeSpec::span(2, &[p2(0.0, 1.0)]);
        assert_abs_diff_eq!(distance_to_cone(&s, &p2(1.0, 0.0)), 1.0, epsilon = 1e-15);
        let r = ConeSpec::convex(2, [p2(1.0, 0.0)]);
        assert_abs_diff_eq!(distance_to_cone(&r, &p2(-1.0, 0.0)), 1.0, epsilon = 1e-12);
        let x = ConeSpec::rays(2, [p2(1.0, 0.0), p2(-1.0, 0.0), p2(0.0, 1.0), p2(0.0, -1.0)]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(distance_to_cone(&x, &p2(h, h)), h, epsilon = 1e-12);
    }

    #[test]
    fn friedrichs_examples() {
        let x = linalg::columns(2, &[p2(1.0, 0.0)]);
        let d = linalg::columns(2, &[p2(1.0, 1.0)]);
        let y = linalg::columns(2, &[p2(0.0, 1.0)]);
        assert_abs_diff_eq!(friedrichs_cosine(&x, &d), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_eq!(friedrichs_cosine(&x, &x), 0.0);
        assert_abs_diff_eq!(friedrichs_cosine(&x, &y), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn tangent_and_normal_spaces() {
        let c = SetSpec::sphere(p2(0.0, 0.0), 1.0).unwrap();
        let t = tangent_space(&c, &p2(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(t[(0, 0)].abs(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t[(1, 0)].abs(), 1.0, epsilon = 1e-12);
        let s3 = SetSpec::sphere(DVector::zeros(3), 1.0).unwrap();
        let north = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let t3 = tangent_space(&s3, &north).unwrap();
        assert_eq!(t3.ncols(), 2);
        assert_abs_diff_eq!(t3.row(2).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn restricted_proximal_line_relative_to_diagonal() {
        let a = SetSpec::line(p2(0.0, 0.0), p2(1.0, 0.0)).unwrap();
        let r = SetSpec::line(p2(0.0, 0.0), p2(1.0, 1.0)).unwrap();
        let at0 = restricted_normal_cone(&a, &r, &p2(0.0, 0.0), NormalKind::Proximal, 1.0, 64, 1).unwrap();
        assert!(at0.is_trivial());
        let off = restricted_normal_cone(&a, &r, &p2(0.5, 0.0), NormalKind::Proximal, 1.0, 64, 1).unwrap();
        match off {
            ConeSpec::Sampled { directions, .. } => {
                assert_eq!(directions.len(), 1);
                assert_abs_diff_eq!((&directions[0] - p2(0.0, 1.0)).norm(), 0.0, epsilon = 1e-8);
            }
            other => panic!("unexpected {other:?}"),
        }
        let lim = restricted_normal_cone(&a, &r, &p2(0.0, 0.0), NormalKind::Limiting, 0.5, 256, 1).unwrap();
        assert!(lim.contains(&p2(0.0, 1.0)));
        assert!(lim.contains(&p2(0.0, -1.0)));
    }

    #[test]
    fn restricted_to_whole_space_is_unrestricted() {
        let c = cross();
        let w = SetSpec::whole(2);
        let o = p2(0.0, 0.0);
        let r = restricted_normal_cone(&c, &w, &o, NormalKind::Limiting, 0.1, 16, 0).unwrap();
        assert_eq!(r, limiting_normal_cone(&c, &o, 0.1, 16, 0).unwrap());
    }

    #[test]
    fn minkowski_sum_of_two_lines_is_plane() {
        let a = ConeSpec::span(2, &[p2(0.0, 1.0)]);
        let b = ConeSpec::span(2, &[p2(1.0, -1.0)]);
        assert!(minkowski_contains(&a, &b, &p2(3.0, 7.0)));
        let c = ConeSpec::span(2, &[p2(0.0, 1.0)]);
        assert!(!minkowski_contains(&a, &c, &p2(1.0, 0.0)));
    }
}
