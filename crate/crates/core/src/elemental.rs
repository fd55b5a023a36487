//! Elemental (sub)regularity moduli and the classical regularity ladder.
//!
//! Every modulus here is an empirical supremum and therefore a lower bound
//! of the true constant. Checkers certify failure with a witness and report
//! success together with the number of samples that backed it.

use serde::{Deserialize, Serialize};

use crate::cones::{self, ConeSpec, NormalKind};
use crate::error::{RegError, Result};
use crate::estimate::{Basis, Bound, Estimate, Value, Verdict};
use crate::rng;
use crate::sets::{Point, SetSpec};

/// Slack added to thresholds so that exact ties are not reported as
/// violations.
const SLACK: f64 = 1e-9;

/// The set B of the elemental inequality.
#[derive(Debug, Clone)]
pub enum Relative {
    /// B = {x̄}.
    Point,
    /// B = the whole space, sampled in a ball around x̄.
    Whole,
    Set(SetSpec),
}

impl Relative {
    /// Points of B within `radius` of x̄ (x̄ first when it belongs to B).
    pub fn samples(&self, xbar: &Point, radius: f64, count: usize, seed: u64) -> Vec<Point> {
        match self {
            Relative::Point => vec![xbar.clone()],
            Relative::Whole => {
                let mut out = vec![xbar.clone()];
                out.extend(ball_multiscale(xbar, radius, count, seed));
                out
            }
            Relative::Set(b) => {
                let mut out = Vec::new();
                if b.contains(xbar) {
                    out.push(xbar.clone());
                }
                out.extend(b.sample_multiscale(xbar, radius, count, seed));
                out
            }
        }
    }

}

/// Uniform samples from balls of radius `radius * 4^-k` around `center`.
pub fn ball_multiscale(center: &Point, radius: f64, count: usize, seed: u64) -> Vec<Point> {
    (0..count)
        .map(|i| {
            let level = (i % 5) as i32;
            let mut s = rng::stream(seed, i as u64);
            center + rng::in_ball(&mut s, center.len(), radius * 0.25f64.powi(level))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalSample {
    pub a: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ElementalQuery {
    pub set: SetSpec,
    pub relative: Relative,
    pub xbar: Point,
    pub a: Point,
    pub v: Point,
    pub sigma: f64,
    /// Radius of the neighborhood U around x̄.
    pub radius: f64,
    pub budget: usize,
    pub seed: u64,
}

/// Supremum of the elemental ratio over the given b samples.
/// Returns (sup, terms used, maximizing (b, b_A)).
fn elemental_sup(
    set: &SetSpec,
    a: &Point,
    v: &Point,
    sigma: f64,
    bs: &[Point],
) -> Result<(f64, usize, Option<(Point, Point)>)> {
    let mut sup = 0.0f64;
    let mut used = 0;
    let mut arg = None;
    for b in bs {
        for ba in set.project(b)?.points {
            let w = v - (b - &ba);
            let d = &ba - a;
            let den = w.norm().powf(1.0 + sigma) * d.norm();
            if den <= 1e-300 || d.norm() <= 1e-14 || w.norm() <= 1e-14 {
                continue;
            }
            used += 1;
            let ratio = (w.dot(&d) / den).max(0.0);
            if ratio > sup || arg.is_none() {
                sup = sup.max(ratio);
                arg = Some((b.clone(), ba.clone()));
            }
        }
    }
    Ok((sup, used, arg))
}

fn check_normal(set: &SetSpec, a: &Point, v: &Point) -> Result<()> {
    let cone = cones::limiting_normal_cone(set, a, 0.1, 64, 0)?;
    if cone.is_exact() && !cone.contains(v) {
        return Err(RegError::InvalidArgument(
            "v is not a limiting normal of the set at a".into(),
        ));
    }
    Ok(())
}

/// Empirical modulus of elemental subregularity of order σ relative to B
/// at x̄ for (a, v). A lower bound of the true modulus.
pub fn elemental_subregularity_modulus(q: &ElementalQuery) -> Result<Estimate> {
    check_normal(&q.set, &q.a, &q.v)?;
    let bs = q.relative.samples(&q.xbar, q.radius, q.budget, q.seed);
    if bs.is_empty() {
        return Err(RegError::InsufficientSamples { count: 0 });
    }
    let (sup, used, arg) = elemental_sup(&q.set, &q.a, &q.v, q.sigma, &bs)?;
    Ok(Estimate {
        value: Value::Finite(sup),
        bound: Bound::Lower,
        budget: q.budget,
        used,
        witness: arg.map(|(b, _)| b.as_slice().to_vec()),
    })
}

/// Unit-free perturbations of v inside the limiting cone at a, within
/// `radius_v` of v (v itself first).
fn normals_near(cone: &ConeSpec, v: &Point, radius_v: f64, count: usize, seed: u64) -> Vec<Point> {
    let mut out = vec![v.clone()];
    for i in 0..count {
        let mut s = rng::stream(seed, i as u64);
        let u = cone.project(&(v + rng::in_ball(&mut s, v.len(), radius_v)));
        if (&u - v).norm() <= radius_v && u.norm() > 1e-12 {
            out.push(u);
        }
    }
    out
}

/// Elemental regularity of order σ at x̄ for (a, v) with constant ε:
/// the subregularity inequality relative to B := A for every u in the
/// limiting cone at a near v.
#[allow(clippy::too_many_arguments)]
pub fn elemental_regularity_check(
    set: &SetSpec,
    xbar: &Point,
    a: &Point,
    v: &Point,
    sigma: f64,
    eps: f64,
    radius_u: f64,
    radius_v: f64,
    budget: usize,
    seed: u64,
) -> Result<Verdict> {
    let cone = cones::limiting_normal_cone(set, a, radius_u, budget, seed)?;
    if cone.is_exact() && !cone.contains(v) {
        return Err(RegError::InvalidArgument(
            "v is not a limiting normal of the set at a".into(),
        ));
    }
    let us = normals_near(&cone, v, radius_v, 16, rng::derive(seed, 1));
    let mut bs = Vec::new();
    if set.contains(xbar) {
        bs.push(xbar.clone());
    }
    bs.extend(set.sample_multiscale(xbar, radius_u, budget, rng::derive(seed, 2)));
    if bs.is_empty() {
        return Err(RegError::InsufficientSamples { count: 0 });
    }
    let mut used = 0;
    for u in &us {
        let (sup, n, arg) = elemental_sup(set, a, u, sigma, &bs)?;
        used += n;
        if sup > eps + SLACK {
            let (b, ba) = arg.expect("positive supremum has a maximizer");
            return Ok(Verdict::sampled(false, used).with_witness(vec![
                u.as_slice().to_vec(),
                b.as_slice().to_vec(),
                ba.as_slice().to_vec(),
            ]));
        }
    }
    Ok(Verdict::sampled(true, used))
}

/// σ-Hölder regularity of A relative to B at x̄ with constant c on the
/// neighborhood W = B(x̄, w_radius). Offending points are searched in
/// A ∩ P_B⁻¹(b) directly, since that set has measure zero in general.
#[allow(clippy::too_many_arguments)]
pub fn holder_regularity_check(
    a_set: &SetSpec,
    b_set: &SetSpec,
    xbar: &Point,
    sigma: f64,
    c: f64,
    w_radius: f64,
    budget: usize,
    seed: u64,
) -> Result<Verdict> {
    if c <= 0.0 {
        return Err(RegError::InvalidArgument("Hölder constant must be positive".into()));
    }
    let pairs = projection_pairs(a_set, b_set, xbar, w_radius, budget, seed)?;
    if pairs.is_empty() {
        return Ok(Verdict::vacuous());
    }
    let inner = (budget / pairs.len().max(1)).clamp(4, 32);
    let mut checked = 0;
    for (i, (b, ba)) in pairs.iter().enumerate() {
        let v = b - ba;
        let nv = v.norm();
        let radius = (1.0 + c) * nv;
        let xs = cones::preimage_points(b_set, b, a_set, radius, inner, rng::derive(seed, 1000 + i as u64))?;
        for x in xs {
            checked += 1;
            let d = &x - ba;
            if v.dot(&d) > c.sqrt() * nv.powf(sigma + 1.0) * d.norm() + SLACK * nv {
                return Ok(Verdict::sampled(false, checked).with_witness(vec![
                    b.as_slice().to_vec(),
                    ba.as_slice().to_vec(),
                    x.as_slice().to_vec(),
                ]));
            }
        }
    }
    Ok(Verdict::sampled(true, pairs.len()))
}

/// Pairs (b, b_A) with b ∈ B ∩ W, b_A ∈ P_A(b) ∩ W and b ≠ b_A.
fn projection_pairs(
    a_set: &SetSpec,
    b_set: &SetSpec,
    xbar: &Point,
    w_radius: f64,
    budget: usize,
    seed: u64,
) -> Result<Vec<(Point, Point)>> {
    let mut bs = Vec::new();
    if b_set.contains(xbar) {
        bs.push(xbar.clone());
    }
    bs.extend(b_set.sample_multiscale(xbar, w_radius, budget, seed));
    let mut out = Vec::new();
    for b in bs {
        for ba in a_set.project(&b)?.points {
            if (&ba - xbar).norm() < w_radius && (&b - &ba).norm() > 1e-12 {
                out.push((b.clone(), ba));
            }
        }
    }
    Ok(out)
}

/// Whether x̄ lies in the interior of U(a, v) = B(a + v, (1 + ε²)‖v‖) for
/// every sampled projection pair (a, v) = (b_A, b − b_A).
pub fn xbar_neighborhood_check(
    a_set: &SetSpec,
    b_set: &SetSpec,
    xbar: &Point,
    eps: f64,
    w_radius: f64,
    budget: usize,
    seed: u64,
) -> Result<Verdict> {
    let pairs = projection_pairs(a_set, b_set, xbar, w_radius, budget, seed)?;
    if pairs.is_empty() {
        return Ok(Verdict::vacuous());
    }
    for (b, ba) in &pairs {
        let v = b - ba;
        if (xbar - b).norm() >= (1.0 + eps * eps) * v.norm() {
            return Ok(Verdict::sampled(false, pairs.len())
                .with_witness(vec![b.as_slice().to_vec(), ba.as_slice().to_vec()]));
        }
    }
    Ok(Verdict::sampled(true, pairs.len()))
}

/// Hölder regularity evaluated through its elemental characterization:
/// for each projection pair (a, v), A must be elementally subregular of
/// order σ relative to A ∩ P_B⁻¹(a + v) with constant √c on U(a, v).
#[allow(clippy::too_many_arguments)]
pub fn holder_via_elemental(
    a_set: &SetSpec,
    b_set: &SetSpec,
    xbar: &Point,
    sigma: f64,
    c: f64,
    w_radius: f64,
    budget: usize,
    seed: u64,
) -> Result<Verdict> {
    let pairs = projection_pairs(a_set, b_set, xbar, w_radius, budget, seed)?;
    if pairs.is_empty() {
        return Ok(Verdict::vacuous());
    }
    let inner = (budget / pairs.len().max(1)).clamp(4, 32);
    let eps = c.sqrt();
    for (i, (b, ba)) in pairs.iter().enumerate() {
        let v = b - ba;
        let radius = (1.0 + eps * eps) * v.norm();
        let rel = cones::preimage_points(b_set, b, a_set, radius, inner, rng::derive(seed, 1000 + i as u64))?;
        let (sup, _, arg) = elemental_sup(a_set, ba, &v, sigma, &rel)?;
        if sup > eps + SLACK * v.norm().max(1.0) {
            let (x, _) = arg.expect("positive supremum has a maximizer");
            return Ok(Verdict::sampled(false, pairs.len()).with_witness(vec![
                b.as_slice().to_vec(),
                ba.as_slice().to_vec(),
                x.as_slice().to_vec(),
            ]));
        }
    }
    Ok(Verdict::sampled(true, pairs.len()))
}

/// Unit normals at a: from the limiting cone, or the proximal cone
/// restricted to `restrict` when given.
fn unit_normals(
    set: &SetSpec,
    a: &Point,
    kind: NormalKind,
    restrict: Option<&SetSpec>,
    delta: f64,
    seed: u64,
) -> Result<Vec<Point>> {
    let cone = match (restrict, kind) {
        (Some(r), k) => cones::restricted_normal_cone(set, r, a, k, delta, 32, seed)?,
        (None, NormalKind::Limiting) => cones::limiting_normal_cone(set, a, delta, 32, seed)?,
        (None, _) => cones::proximal_normal_cone(set, a)?,
    };
    Ok(cone.unit_vectors(8, seed).0)
}

/// Samples of A ∩ B(x̄, δ), x̄ first when it belongs to A.
fn local_points(set: &SetSpec, xbar: &Point, delta: f64, count: usize, seed: u64) -> Vec<Point> {
    let mut out = Vec::new();
    if set.contains(xbar) {
        out.push(xbar.clone());
    }
    out.extend(set.sample_multiscale(xbar, delta, count, seed));
    // Projections of points on the sphere of radius δ around x̄ reach the
    // far ends of curved pieces, which decide the long chords.
    for i in 0..count / 2 + 1 {
        let u = rng::unit_vector(&mut rng::stream(rng::derive(seed, 99), i as u64), xbar.len());
        if let Ok(res) = set.project(&(xbar + u * delta)) {
            let p = res.first();
            if (p - xbar).norm() < delta {
                out.push(p.clone());
            }
        }
    }
    out
}

/// Empirical sup of ⟨v, b − a⟩ / (‖v‖‖b − a‖) over a ∈ A ∩ B_δ(x̄),
/// b ∈ B ∩ B_δ(x̄) and v in the proximal normal cone of A at a restricted
/// to A′ (`restrict`; None means the whole space). B = A gives
/// (A′, ε, δ)-regularity. A lower bound of the true modulus.
pub fn eps_delta_subregularity_modulus(
    a_set: &SetSpec,
    restrict: Option<&SetSpec>,
    b: &Relative,
    xbar: &Point,
    delta: f64,
    budget: usize,
    seed: u64,
) -> Result<Estimate> {
    eps_delta_sup(a_set, restrict, Some(b), xbar, delta, budget, seed, NormalKind::Proximal)
}

/// Empirical (A′, ε, δ)-regularity modulus: the sup above with B = A and
/// limiting normals.
pub fn eps_delta_regularity_modulus(
    a_set: &SetSpec,
    restrict: Option<&SetSpec>,
    xbar: &Point,
    delta: f64,
    budget: usize,
    seed: u64,
) -> Result<Estimate> {
    eps_delta_sup(a_set, restrict, None, xbar, delta, budget, seed, NormalKind::Limiting)
}

#[allow(clippy::too_many_arguments)]
fn eps_delta_sup(
    a_set: &SetSpec,
    restrict: Option<&SetSpec>,
    b: Option<&Relative>,
    xbar: &Point,
    delta: f64,
    budget: usize,
    seed: u64,
    kind: NormalKind,
) -> Result<Estimate> {
    let side = ((budget as f64).sqrt().ceil() as usize).max(8);
    let points_a = local_points(a_set, xbar, delta, side, rng::derive(seed, 1));
    // None means B = A, evaluated on the same samples.
    let points_b: Vec<Point> = match b {
        None => points_a.clone(),
        Some(other) => other
            .samples(xbar, delta, side, rng::derive(seed, 2))
            .into_iter()
            .filter(|p| (p - xbar).norm() < delta || p == xbar)
            .collect(),
    };
    if points_a.is_empty() || points_b.is_empty() {
        return Err(RegError::InsufficientSamples { count: 0 });
    }
    let mut sup = 0.0f64;
    let mut used = 0;
    let mut witness = None;
    for (i, a) in points_a.iter().enumerate() {
        let normals = unit_normals(a_set, a, kind, restrict, delta, rng::derive(seed, 10 + i as u64))?;
        for v in &normals {
            for bp in &points_b {
                let d = bp - a;
                let nd = d.norm();
                if nd <= 1e-14 {
                    continue;
                }
                used += 1;
                let r = (v.dot(&d) / nd).max(0.0);
                if r > sup {
                    sup = r;
                    witness = Some([a.as_slice(), v.as_slice(), bp.as_slice()].concat());
                }
            }
        }
    }
    Ok(Estimate {
        value: Value::Finite(sup),
        bound: Bound::Lower,
        budget,
        used,
        witness,
    })
}

/// Clarke regularity: the limiting and Fréchet cones coincide.
pub fn clarke_regularity_check(set: &SetSpec, xbar: &Point) -> Result<Verdict> {
    let fre = cones::frechet_normal_cone(set, xbar)?;
    let lim = cones::limiting_normal_cone(set, xbar, 0.1, 256, 0)?;
    let (dirs, complete) = lim.unit_vectors(0, 0);
    let mut gens: Vec<Point> = dirs;
    if !complete {
        for g in lim.pieces() {
            gens.extend(g.column_iter().map(|c| c.into_owned()));
        }
    }
    for g in &gens {
        if !fre.contains(g) {
            return Ok(Verdict::exact(false).with_witness(vec![g.as_slice().to_vec()]));
        }
    }
    if lim.is_exact() {
        Ok(Verdict::exact(true))
    } else {
        Ok(Verdict::sampled(true, gens.len()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperRegularity {
    /// Largest schedule radius that passed, if any.
    pub delta: Option<f64>,
    pub samples: usize,
    /// (a, v, x) violating the bound at the smallest radius tried.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<Vec<f64>>>,
}

/// Sup of ⟨v, x − a⟩ / (‖v‖‖x − a‖) over a, x ∈ A ∩ B_δ(x̄) and limiting
/// normals v at a, with its maximizer.
fn angle_sup(
    set: &SetSpec,
    xbar: &Point,
    delta: f64,
    count: usize,
    seed: u64,
) -> Result<(f64, usize, Option<Vec<Vec<f64>>>)> {
    let pts = local_points(set, xbar, delta, count, seed);
    let mut sup = 0.0f64;
    let mut used = 0;
    let mut arg = None;
    for (i, a) in pts.iter().enumerate() {
        let normals = unit_normals(set, a, NormalKind::Limiting, None, delta, rng::derive(seed, 10 + i as u64))?;
        for v in &normals {
            for x in &pts {
                let d = x - a;
                let nd = d.norm();
                if nd <= 1e-14 {
                    continue;
                }
                used += 1;
                let r = v.dot(&d) / nd;
                if r > sup {
                    sup = r;
                    arg = Some(vec![a.as_slice().to_vec(), v.as_slice().to_vec(), x.as_slice().to_vec()]);
                }
            }
        }
    }
    Ok((sup, used, arg))
}

/// Radius schedule 2^-k, k = 0..=20, searched from the largest radius down.
pub fn super_regularity_delta(
    set: &SetSpec,
    xbar: &Point,
    eps: f64,
    budget: usize,
    seed: u64,
) -> Result<SuperRegularity> {
    if eps <= 0.0 {
        return Err(RegError::InvalidArgument("ε must be positive".into()));
    }
    let count = ((budget as f64).sqrt().ceil() as usize).max(8);
    let mut samples = 0;
    let mut witness = None;
    for k in 0..=20 {
        let delta = 0.5f64.powi(k);
        let (sup, used, arg) = angle_sup(set, xbar, delta, count, seed)?;
        samples += used;
        if sup <= eps + SLACK {
            return Ok(SuperRegularity {
                delta: Some(delta),
                samples,
                witness: None,
            });
        }
        witness = arg;
    }
    Ok(SuperRegularity {
        delta: None,
        samples,
        witness,
    })
}

/// Sampled prox-regularity: ⟨v, x − a⟩ ≤ (ε̄/2)‖x − a‖² for x, a near x̄
/// and limiting normals with ‖v‖ ≤ δ̄. Also returns the empirical sup of
/// 2⟨v, x − a⟩ / ‖x − a‖² at ‖v‖ = δ̄ (the smallest admissible ε̄ seen).
pub fn prox_regularity_check(
    set: &SetSpec,
    xbar: &Point,
    eps_bar: f64,
    delta_bar: f64,
    budget: usize,
    seed: u64,
) -> Result<(Verdict, Estimate)> {
    if eps_bar <= 0.0 || delta_bar <= 0.0 {
        return Err(RegError::InvalidArgument("ε̄ and δ̄ must be positive".into()));
    }
    let count = ((budget as f64).sqrt().ceil() as usize).max(8);
    let pts = local_points(set, xbar, delta_bar, count, seed);
    let mut sup = 0.0f64;
    let mut used = 0;
    let mut witness = None;
    for (i, a) in pts.iter().enumerate() {
        let normals = unit_normals(set, a, NormalKind::Limiting, None, delta_bar, rng::derive(seed, 10 + i as u64))?;
        for u in &normals {
            for x in &pts {
                let d = x - a;
                let n2 = d.norm_squared();
                // The quotient loses ~1e-16/‖d‖² to rounding; chords shorter
                // than 1e-4·δ̄ carry no usable curvature information.
                if n2 <= (1e-4 * delta_bar).powi(2) {
                    continue;
                }
                used += 1;
                let r = 2.0 * delta_bar * u.dot(&d) / n2;
                if r > sup {
                    sup = r;
                    witness = Some(vec![a.as_slice().to_vec(), (u * delta_bar).as_slice().to_vec(), x.as_slice().to_vec()]);
                }
            }
        }
    }
    let modulus = Estimate {
        value: Value::Finite(sup),
        bound: Bound::Lower,
        budget,
        used,
        witness: None,
    };
    let verdict = if sup <= eps_bar * (1.0 + 1e-9) {
        Verdict::sampled(true, used)
    } else {
        Verdict::sampled(false, used).with_witness(witness.unwrap_or_default())
    };
    Ok((verdict, modulus))
}

/// Convexity of A near x̄: structural when possible, otherwise a search
/// for a chord whose midpoint leaves A.
pub fn local_convexity_check(set: &SetSpec, xbar: &Point, delta: f64, budget: usize, seed: u64) -> Result<Verdict> {
    if set.is_convex() {
        return Ok(Verdict::exact(true));
    }
    if let SetSpec::Union(members) = set {
        let near: Vec<&SetSpec> = members
            .iter()
            .filter(|m| m.distance(xbar).map(|d| d < delta).unwrap_or(true))
            .collect();
        if near.len() == 1 && near[0].is_convex() {
            return Ok(Verdict::exact(true));
        }
    }
    let count = ((budget as f64).sqrt().ceil() as usize).max(8);
    let pts = local_points(set, xbar, delta, count, seed);
    let mut pairs = 0;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            pairs += 1;
            let m = (p + q) * 0.5;
            let d = set.distance(&m)?;
            if d > 1e-7 * (p - q).norm().max(1e-3) {
                return Ok(Verdict::exact(false).with_witness(vec![p.as_slice().to_vec(), q.as_slice().to_vec()]));
            }
        }
    }
    Ok(Verdict::sampled(true, pairs))
}

#[derive(Debug, Clone)]
pub struct LadderConfig {
    pub delta: f64,
    pub budget: usize,
    pub seed: u64,
    /// Threshold ε for the (ε, δ) notions, super-regularity and elemental moduli.
    pub eps: f64,
    /// ε̄ of the prox-regularity check (δ̄ is `delta`).
    pub prox_eps: f64,
    /// Order σ of the Hölder and elemental checks.
    pub sigma: f64,
    /// B of the relative notions; None means B = {x̄}.
    pub relative: Option<SetSpec>,
    /// A′ restricting the normal cones; None means the whole space.
    pub restrict: Option<SetSpec>,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            delta: 0.5,
            budget: 400,
            seed: 0,
            eps: 0.5,
            prox_eps: 2.0,
            sigma: 0.0,
            relative: None,
            restrict: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<Estimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl Rung {
    fn of(verdict: Verdict) -> Self {
        Rung {
            verdict,
            modulus: None,
            radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub convex: Rung,
    pub prox_regular: Rung,
    pub super_regular: Rung,
    pub clarke: Rung,
    pub eps_delta_regular: Rung,
    pub eps_delta_subregular: Rung,
    pub holder: Rung,
    pub elemental_subregular: Rung,
    pub elemental_regular: Rung,
    /// Ladder implications contradicted by the verdicts above.
    pub violations: Vec<String>,
}

impl LadderReport {
    /// The chain convex ⇒ prox ⇒ super ⇒ Clarke ⇒ (ε,δ)-regular ⇒
    /// (ε,δ)-subregular ⇒ 0-Hölder, in order.
    pub fn chain(&self) -> [(&'static str, &Rung); 7] {
        [
            ("convex", &self.convex),
            ("prox_regular", &self.prox_regular),
            ("super_regular", &self.super_regular),
            ("clarke", &self.clarke),
            ("eps_delta_regular", &self.eps_delta_regular),
            ("eps_delta_subregular", &self.eps_delta_subregular),
            ("holder", &self.holder),
        ]
    }
}

fn threshold_verdict(e: &Estimate, eps: f64) -> Verdict {
    let v = e.get().unwrap_or(0.0);
    let mut out = Verdict::sampled(v <= eps + SLACK, e.used);
    if e.used == 0 {
        out.basis = Basis::Vacuous;
    }
    out
}

/// Run every checker of the ladder on A at x̄ and audit the implications.
pub fn classify(set: &SetSpec, xbar: &Point, cfg: &LadderConfig) -> Result<LadderReport> {
    let d = set.distance(xbar)?;
    if d > crate::sets::MEMBERSHIP_TOL {
        return Err(RegError::NotInSet { distance: d });
    }
    let seed = cfg.seed;
    let convex = Rung::of(local_convexity_check(set, xbar, cfg.delta, cfg.budget, rng::derive(seed, 1))?);
    let (pv, pm) = prox_regularity_check(set, xbar, cfg.prox_eps, cfg.delta, cfg.budget, rng::derive(seed, 2))?;
    let prox_regular = Rung {
        verdict: pv,
        modulus: Some(pm),
        radius: Some(cfg.delta),
    };
    let sr = super_regularity_delta(set, xbar, cfg.eps, cfg.budget, rng::derive(seed, 3))?;
    let super_regular = Rung {
        verdict: match &sr.delta {
            Some(_) => Verdict::sampled(true, sr.samples),
            None => Verdict::sampled(false, sr.samples).with_witness(sr.witness.clone().unwrap_or_default()),
        },
        modulus: None,
        radius: sr.delta,
    };
    let clarke = Rung::of(clarke_regularity_check(set, xbar)?);

    // The (ε, δ)-regular rung uses the radius certified by the super-regular
    // rung so that the two statements refer to the same neighborhood.
    let reg_delta = sr.delta.unwrap_or(cfg.delta);
    let reg = eps_delta_sup(
        set,
        cfg.restrict.as_ref(),
        None,
        xbar,
        reg_delta,
        cfg.budget,
        rng::derive(seed, 3),
        NormalKind::Limiting,
    )?;
    let eps_delta_regular = Rung {
        verdict: threshold_verdict(&reg, cfg.eps),
        modulus: Some(reg),
        radius: Some(reg_delta),
    };

    let relative = match &cfg.relative {
        Some(b) => Relative::Set(b.clone()),
        None => Relative::Point,
    };
    let sub = eps_delta_subregularity_modulus(set, cfg.restrict.as_ref(), &relative, xbar, cfg.delta, cfg.budget, rng::derive(seed, 4))?;
    let eps_delta_subregular = Rung {
        verdict: threshold_verdict(&sub, cfg.eps),
        modulus: Some(sub),
        radius: Some(cfg.delta),
    };

    let holder = Rung {
        verdict: match &cfg.relative {
            Some(b) => holder_regularity_check(set, b, xbar, cfg.sigma, cfg.eps * cfg.eps, cfg.delta, cfg.budget, rng::derive(seed, 5))?,
            None => Verdict::vacuous(),
        },
        modulus: None,
        radius: Some(cfg.delta),
    };

    let elem = elemental_modulus_over_graph(set, xbar, cfg, &relative)?;
    let elemental_subregular = Rung {
        verdict: threshold_verdict(&elem, cfg.eps),
        modulus: Some(elem),
        radius: Some(cfg.delta),
    };

    let elemental_regular = Rung {
        verdict: elemental_regular_at(set, xbar, cfg.eps, reg_delta, cfg.budget, rng::derive(seed, 7))?,
        modulus: None,
        radius: Some(reg_delta),
    };

    let mut report = LadderReport {
        convex,
        prox_regular,
        super_regular,
        clarke,
        eps_delta_regular,
        eps_delta_subregular,
        holder,
        elemental_subregular,
        elemental_regular,
        violations: Vec::new(),
    };
    report.violations = audit(&report);
    Ok(report)
}

/// Largest elemental modulus over sampled (a, v) from the graph of the
/// (restricted) normal cone near x̄, relative to B.
fn elemental_modulus_over_graph(set: &SetSpec, xbar: &Point, cfg: &LadderConfig, relative: &Relative) -> Result<Estimate> {
    let seed = rng::derive(cfg.seed, 6);
    let side = ((cfg.budget as f64).sqrt().ceil() as usize).max(8);
    let bases = local_points(set, xbar, cfg.delta, side, seed);
    let bs = relative.samples(xbar, cfg.delta, side, rng::derive(seed, 1));
    let kind = if cfg.restrict.is_some() {
        NormalKind::Proximal
    } else {
        NormalKind::Limiting
    };
    let mut sup = 0.0f64;
    let mut used = 0;
    let mut witness = None;
    for (i, a) in bases.iter().enumerate() {
        for v in unit_normals(set, a, kind, cfg.restrict.as_ref(), cfg.delta, rng::derive(seed, 10 + i as u64))? {
            let (s, n, arg) = elemental_sup(set, a, &v, cfg.sigma, &bs)?;
            used += n;
            if s > sup {
                sup = s;
                witness = arg.map(|(b, _)| [a.as_slice(), v.as_slice(), b.as_slice()].concat());
            }
        }
    }
    Ok(Estimate {
        value: Value::Finite(sup),
        bound: Bound::Lower,
        budget: cfg.budget,
        used,
        witness,
    })
}

/// Elemental regularity at x̄ for (x̄, v) over the unit limiting normals v
/// at x̄.
fn elemental_regular_at(set: &SetSpec, xbar: &Point, eps: f64, delta: f64, budget: usize, seed: u64) -> Result<Verdict> {
    let normals = unit_normals(set, xbar, NormalKind::Limiting, None, delta, seed)?;
    if normals.is_empty() {
        return Ok(Verdict::vacuous());
    }
    let mut samples = 0;
    for (i, v) in normals.iter().enumerate() {
        let r = elemental_regularity_check(set, xbar, xbar, v, 0.0, eps, delta, 0.1, budget / normals.len().max(1) + 8, rng::derive(seed, i as u64))?;
        samples += r.samples;
        if r.is_false() {
            return Ok(r);
        }
    }
    Ok(Verdict::sampled(true, samples))
}

/// Implications of the ladder contradicted by the report.
fn audit(r: &LadderReport) -> Vec<String> {
    let chain = r.chain();
    let mut out = Vec::new();
    for i in 0..chain.len() {
        if !chain[i].1.verdict.is_true() || chain[i].1.verdict.basis == Basis::Vacuous {
            continue;
        }
        for later in chain.iter().skip(i + 1) {
            if later.1.verdict.is_false() {
                out.push(format!("{} holds but {} fails", chain[i].0, later.0));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

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
    fn cross_subregular_relative_to_point() {
        for (a, v) in [(p2(0.0, 0.0), p2(1.0, 0.0)), (p2(0.3, 0.0), p2(0.0, -2.0)), (p2(0.0, -0.7), p2(1.0, 0.0))] {
            let q = ElementalQuery {
                set: cross(),
                relative: Relative::Point,
                xbar: p2(0.0, 0.0),
                a,
                v,
                sigma: 0.0,
                radius: 1.0,
                budget: 10,
                seed: 0,
            };
            assert_eq!(elemental_subregularity_modulus(&q).unwrap().get(), Some(0.0));
        }
    }

    #[test]
    fn non_normal_is_rejected() {
        let q = ElementalQuery {
            set: cross(),
            relative: Relative::Point,
            xbar: p2(0.0, 0.0),
            a: p2(0.5, 0.0),
            v: p2(1.0, 0.0),
            sigma: 0.0,
            radius: 1.0,
            budget: 10,
            seed: 0,
        };
        assert!(matches!(elemental_subregularity_modulus(&q), Err(RegError::InvalidArgument(_))));
    }

    #[test]
    fn cross_not_regular_at_origin() {
        let r = elemental_regularity_check(&cross(), &p2(0.0, 0.0), &p2(0.0, 0.0), &p2(1.0, 0.0), 0.0, 0.9, 0.5, 0.1, 64, 1).unwrap();
        assert!(r.is_false());
        let w = r.witness.unwrap();
        // b lies on the ray through v.
        assert!(w[1][1].abs() < 1e-12 && w[1][0] > 0.0);
    }

    #[test]
    fn circle_regular_with_radius_eps() {
        let c = SetSpec::sphere(p2(0.0, 0.0), 1.0).unwrap();
        let x = p2(1.0, 0.0);
        for eps in [0.1, 0.3] {
            for v in [p2(1.0, 0.0), p2(-1.0, 0.0)] {
                let r = elemental_regularity_check(&c, &x, &x, &v, 0.0, eps, eps, 0.1, 128, 3).unwrap();
                assert!(r.is_true(), "eps {eps}, v {v}");
            }
        }
    }

    #[test]
    fn clarke_examples() {
        assert!(clarke_regularity_check(&cross(), &p2(0.0, 0.0)).unwrap().is_false());
        assert!(clarke_regularity_check(&cross(), &p2(2.0, 0.0)).unwrap().is_true());
        let c = SetSpec::sphere(p2(0.0, 0.0), 1.0).unwrap();
        assert!(clarke_regularity_check(&c, &p2(0.6, 0.8)).unwrap().is_true());
    }

    #[test]
    fn super_regularity_schedule() {
        let h = SetSpec::half_space(p2(0.0, 1.0), 0.0).unwrap();
        assert_eq!(super_regularity_delta(&h, &p2(0.0, 0.0), 0.1, 100, 0).unwrap().delta, Some(1.0));
        let x = super_regularity_delta(&cross(), &p2(0.0, 0.0), 0.5, 100, 0).unwrap();
        assert!(x.delta.is_none());
        assert!(x.witness.is_some());
    }

    #[test]
    fn prox_regularity_examples() {
        let c = SetSpec::sphere(p2(0.0, 0.0), 1.0).unwrap();
        let (v, m) = prox_regularity_check(&c, &p2(1.0, 0.0), 2.0, 0.5, 400, 0).unwrap();
        assert!(v.is_true());
        let got = m.get().unwrap();
        assert!((got - 0.5).abs() < 1e-6, "{got}");
        let (v, _) = prox_regularity_check(&cross(), &p2(0.0, 0.0), 2.0, 0.5, 400, 0).unwrap();
        assert!(v.is_false());
    }

    #[test]
    fn hoelder_convex_is_true() {
        let ball = SetSpec::ball(p2(0.0, 0.0), 1.0).unwrap();
        let line = SetSpec::line(p2(1.0, 0.0), p2(0.0, 1.0)).unwrap();
        let v = holder_regularity_check(&ball, &line, &p2(1.0, 0.0), 0.0, 0.1, 0.5, 64, 0).unwrap();
        assert!(v.holds == Some(true));
    }

    #[test]
    fn empty_relative_set_is_insufficient() {
        let far = SetSpec::point(p2(5.0, 5.0)).unwrap();
        let h = SetSpec::half_space(p2(0.0, 1.0), 0.0).unwrap();
        let q = ElementalQuery {
            set: h,
            relative: Relative::Set(far),
            xbar: p2(0.0, 0.0),
            a: p2(0.0, 0.0),
            v: p2(0.0, 1.0),
            sigma: 0.0,
            radius: 0.5,
            budget: 10,
            seed: 0,
        };
        assert_eq!(elemental_subregularity_modulus(&q), Err(RegError::InsufficientSamples { count: 0 }));
    }
}
