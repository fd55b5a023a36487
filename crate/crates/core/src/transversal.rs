//! Subtransversality and transversality of a pair of sets.
//!
//! Metric constants are empirical infima over sampled points (upper bounds),
//! angle suprema are lower bounds, and dual constants come in closed form on
//! subspace pairs. `analyze` runs everything on one scenario and audits the
//! implications between the resulting numbers.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{self, ConeSpec, NormalKind};
use crate::elemental::{self, ball_multiscale};
use crate::error::{RegError, Result};
use crate::estimate::{Basis, Bound, Estimate, Value, Verdict};
use crate::linalg;
use crate::meet;
use crate::rng;
use crate::sets::{Point, SetSpec, MEMBERSHIP_TOL};

/// An angle supremum counts as "below 1" (an intrinsic infimum as "above
/// 0") only with this much room.
pub const FLAG_MARGIN: f64 = 1e-3;
/// Tolerance for orderings and sandwiches between sampled estimates.
pub const SAMPLING_TOL: f64 = 2e-2;
/// Residual bound for the dual identities on the closed-form path.
pub const EXACT_IDENTITY_TOL: f64 = 1e-9;
/// Residual bound for the dual identities on the sampled path.
pub const SAMPLED_IDENTITY_TOL: f64 = 1e-3;
/// Distances to an intersection at or below this are treated as membership.
const ZERO_DIST: f64 = 1e-12;
/// Translated samples may be empty for at most this fraction before the
/// estimate is flagged.
const EMPTY_LIMIT: f64 = 0.5;

const TAG_SR: u64 = 11;
const TAG_SRR: u64 = 12;
const TAG_R: u64 = 13;
const TAG_RGG: u64 = 14;
const TAG_DUAL: u64 = 15;
const TAG_ITRANS: u64 = 16;
const TAG_SEP: u64 = 17;
const TAG_INH: u64 = 18;
const TAG_CQ: u64 = 19;
const TAG_SUFF: u64 = 20;
const TAG_G: u64 = 21;
const TAG_CHIP: u64 = 22;
const TAG_PAIR: u64 = 23;
const TAG_CHECK: u64 = 24;

/// Two closed sets meeting at x̄, with an exact description of A ∩ B.
#[derive(Debug, Clone)]
pub struct PairScenario {
    pub a: SetSpec,
    pub b: SetSpec,
    pub xbar: Point,
    pub intersection: SetSpec,
    pub delta: f64,
    pub budget: usize,
    pub seed: u64,
}

impl PairScenario {
    /// Validates dimensions, x̄ ∈ A ∩ B and that the intersection
    /// description lies in both sets on a sample.
    pub fn new(
        a: SetSpec,
        b: SetSpec,
        xbar: Point,
        intersection: SetSpec,
        delta: f64,
        budget: usize,
        seed: u64,
    ) -> Result<Self> {
        let n = xbar.len();
        for s in [&a, &b, &intersection] {
            if s.dim() != n {
                return Err(RegError::DimensionMismatch { expected: n, got: s.dim() });
            }
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(RegError::InvalidArgument(format!("delta must be positive, got {delta}")));
        }
        if budget == 0 {
            return Err(RegError::InvalidArgument("budget must be positive".into()));
        }
        for s in [&a, &b, &intersection] {
            let d = s.distance(&xbar)?;
            if d > MEMBERSHIP_TOL {
                return Err(RegError::NotInSet { distance: d });
            }
        }
        for p in intersection.sample_near(&xbar, delta, 32, rng::derive(seed, TAG_CHECK)) {
            let da = a.distance(&p)?;
            let db = b.distance(&p)?;
            if da.max(db) > 1e-7 {
                return Err(RegError::InvalidSet(format!(
                    "intersection point {:?} lies off A or B (distances {da:.3e}, {db:.3e})",
                    p.as_slice()
                )));
            }
        }
        Ok(PairScenario {
            a,
            b,
            xbar,
            intersection,
            delta,
            budget,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.xbar.len()
    }

    fn seed(&self, tag: u64) -> u64 {
        rng::derive(self.seed, tag)
    }

    /// All three sets are cones with apex x̄, so every ratio is invariant
    /// under scaling about x̄ and one sphere of directions suffices.
    pub fn is_conic(&self) -> bool {
        [&self.a, &self.b, &self.intersection]
            .iter()
            .all(|s| is_cone_at(s, &self.xbar))
    }

    /// Sample points for the metric estimates: half from balls around x̄,
    /// a quarter pushed off A, a quarter pushed off B. On conic scenarios
    /// every point is rescaled onto the sphere of radius δ/2.
    fn metric_points(&self, tag: u64) -> Vec<Point> {
        let seed = self.seed(tag);
        let m = self.budget;
        let conic = self.is_conic();
        let r = if conic { self.delta / 2.0 } else { self.delta };
        let n = self.dim();
        (0..m)
            .into_par_iter()
            .filter_map(|i| {
                let p = match i % 4 {
                    0 | 1 => {
                        let mut g = rng::stream(seed, i as u64);
                        if conic {
                            Some(&self.xbar + rng::unit_vector(&mut g, n) * r)
                        } else {
                            let level = g.random_range(0..5);
                            Some(&self.xbar + rng::in_ball(&mut g, n, r * 0.25f64.powi(level)))
                        }
                    }
                    2 => near_set(&self.a, &self.xbar, r, seed, i as u64),
                    _ => near_set(&self.b, &self.xbar, r, seed, i as u64),
                }?;
                if conic {
                    let d = &p - &self.xbar;
                    let nd = d.norm();
                    (nd > 0.0).then(|| &self.xbar + d * (r / nd))
                } else {
                    Some(p)
                }
            })
            .collect()
    }

    /// Points of S near x̄ for one-sided estimates.
    fn set_points(&self, s: &SetSpec, count: usize, tag: u64) -> Vec<Point> {
        let mut out = Vec::with_capacity(count + 1);
        out.push(self.xbar.clone());
        out.extend(s.sample_multiscale(&self.xbar, self.delta, count, self.seed(tag)));
        out
    }

    /// Translation pairs (x₁, x₂) ∈ δB × δB at three scales.
    fn translation(&self, seed: u64, i: u64) -> (Point, Point) {
        let mut g = rng::stream(seed, i);
        let level = (i % 3) as i32;
        let r = self.delta * 0.25f64.powi(level);
        let n = self.dim();
        (rng::in_ball(&mut g, n, r), rng::in_ball(&mut g, n, r))
    }
}

/// Whether S near x is a cone with apex x (and globally so).
fn is_cone_at(s: &SetSpec, x: &Point) -> bool {
    match s {
        SetSpec::Affine { .. } => s.contains(x),
        SetSpec::HalfSpace { normal, offset } => (normal.dot(x) - offset).abs() <= MEMBERSHIP_TOL,
        SetSpec::Polyhedron { normals, offsets } => {
            (0..normals.nrows()).all(|i| (normals.row(i).transpose().dot(x) - offsets[i]).abs() <= MEMBERSHIP_TOL)
        }
        SetSpec::Union(ms) => ms.iter().all(|m| is_cone_at(m, x)),
        _ => false,
    }
}

/// A point near S: a multiscale ball sample projected onto S and pushed off
/// by a log-uniform offset. None when it falls outside the ball.
fn near_set(s: &SetSpec, xbar: &Point, delta: f64, seed: u64, i: u64) -> Option<Point> {
    let mut g = rng::stream(rng::derive(seed, 0xA5), i);
    let n = xbar.len();
    let level = g.random_range(0..5);
    let y = xbar + rng::in_ball(&mut g, n, delta * 0.25f64.powi(level));
    let p = s.project(&y).ok()?.first().clone();
    let h = (&p - xbar).norm();
    if h >= delta {
        return None;
    }
    let e: f64 = g.random();
    let off = h.max(delta * 1e-3) * 10f64.powf(-3.0 * e);
    let x = p + rng::unit_vector(&mut g, n) * off;
    ((&x - xbar).norm() < delta).then_some(x)
}

/// One evaluated sample and the points behind it.
struct Sample {
    value: f64,
    points: Vec<Point>,
}

impl Sample {
    fn new(value: f64, points: Vec<Point>) -> Self {
        Sample { value, points }
    }
}

/// Maps `f` over the items in parallel and concatenates the results in
/// item order, so extrema resolve ties identically on any thread count.
fn evaluate<T: Sync>(items: &[T], f: impl Fn(&T) -> Result<Vec<Sample>> + Sync) -> Result<Vec<Sample>> {
    let parts: Vec<Result<Vec<Sample>>> = items.par_iter().map(&f).collect();
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn flatten(points: &[Point]) -> Vec<f64> {
    points.iter().flat_map(|p| p.iter().copied()).collect()
}

fn extremum(samples: &[Sample], budget: usize, min: bool) -> Estimate {
    let bound = if min { Bound::Upper } else { Bound::Lower };
    let mut best: Option<&Sample> = None;
    for s in samples {
        let better = match best {
            None => true,
            Some(b) if min => s.value < b.value,
            Some(b) => s.value > b.value,
        };
        if better {
            best = Some(s);
        }
    }
    match best {
        None => Estimate::vacuous(bound, budget),
        Some(b) => Estimate {
            value: Value::Finite(b.value),
            bound,
            budget,
            used: samples.len(),
            witness: Some(flatten(&b.points)),
        },
    }
}

fn infimum(samples: &[Sample], budget: usize) -> Estimate {
    extremum(samples, budget, true)
}

fn supremum(samples: &[Sample], budget: usize) -> Estimate {
    extremum(samples, budget, false)
}

/// Verdict for "every sample value < alpha" (or "> alpha" when `above`).
fn strict_verdict(samples: &[Sample], alpha: f64, above: bool) -> Verdict {
    if samples.is_empty() {
        return Verdict::vacuous();
    }
    let bad = samples
        .iter()
        .filter(|s| if above { s.value <= alpha } else { s.value >= alpha })
        .min_by(|x, y| {
            let (a, b) = if above { (x.value, y.value) } else { (y.value, x.value) };
            a.total_cmp(&b)
        });
    match bad {
        Some(s) => Verdict::sampled(false, samples.len())
            .with_witness(s.points.iter().map(|p| p.as_slice().to_vec()).collect()),
        None => Verdict::sampled(true, samples.len()),
    }
}

/// Whether an angle supremum witnesses some α < 1 (vacuous counts).
fn below_one(e: &Estimate) -> bool {
    match e.value {
        Value::Finite(v) => v < 1.0 - FLAG_MARGIN,
        Value::Vacuous => true,
        Value::Saturated => false,
    }
}

fn unit(v: &Point) -> Option<Point> {
    let n = v.norm();
    (n > 1e-12 && n.is_finite()).then(|| v / n)
}

// ---------------------------------------------------------------------------
// Metric estimates

/// Empirical subtransversality constant: the infimum over sampled x near x̄
/// outside A ∩ B of max{d(x,A), d(x,B)} / d(x, A∩B). Saturated when x̄ is
/// interior so that no sample leaves the intersection.
pub fn sr_metric_estimate(s: &PairScenario) -> Result<Estimate> {
    let xs = s.metric_points(TAG_SR);
    let samples = evaluate(&xs, |x| {
        let dc = s.intersection.distance(x)?;
        if dc <= ZERO_DIST {
            return Ok(vec![]);
        }
        let num = s.a.distance(x)?.max(s.b.distance(x)?);
        Ok(vec![Sample::new(num / dc, vec![x.clone()])])
    })?;
    if samples.is_empty() {
        return Ok(Estimate::saturated(Bound::Upper, s.budget));
    }
    Ok(infimum(&samples, s.budget))
}

/// Checks α·d(x, A∩B) ≤ max{d(x,A), d(x,B)} on the metric samples, the
/// primal form of subtransversality with constant α.
pub fn primal_subtransversality_check(s: &PairScenario, alpha: f64) -> Result<Verdict> {
    if !(alpha > 0.0) {
        return Err(RegError::InvalidArgument("alpha must be positive".into()));
    }
    let xs = s.metric_points(TAG_SR);
    let samples = evaluate(&xs, |x| {
        let dc = s.intersection.distance(x)?;
        if dc <= ZERO_DIST {
            return Ok(vec![]);
        }
        let num = s.a.distance(x)?.max(s.b.distance(x)?);
        // Positive values are violations, scaled by the distance.
        Ok(vec![Sample::new((alpha * dc - num) / dc, vec![x.clone()])])
    })?;
    Ok(strict_verdict(&samples, 1e-12, false))
}

/// One-sided constant: infimum over sampled x ∈ A near x̄ of
/// d(x,B) / d(x, A∩B). Vacuous when every sample of A lies in B.
pub fn srr_estimate(s: &PairScenario) -> Result<Estimate> {
    let xs = s.set_points(&s.a, s.budget, TAG_SRR);
    let samples = evaluate(&xs, |x| {
        let dc = s.intersection.distance(x)?;
        if dc <= ZERO_DIST {
            return Ok(vec![]);
        }
        Ok(vec![Sample::new(s.b.distance(x)? / dc, vec![x.clone()])])
    })?;
    Ok(infimum(&samples, s.budget))
}

/// An estimate over translated copies of the sets, with the share of
/// translations whose intersection was empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslatedEstimate {
    pub estimate: Estimate,
    pub empty_fraction: f64,
    /// Set when empty translations make up at least half of the samples.
    pub flagged: bool,
}

impl TranslatedEstimate {
    fn from(samples: Vec<Sample>, empty: usize, total: usize, budget: usize) -> Self {
        let frac = if total == 0 { 0.0 } else { empty as f64 / total as f64 };
        let estimate = if samples.is_empty() {
            Estimate::saturated(Bound::Upper, budget)
        } else {
            infimum(&samples, budget)
        };
        TranslatedEstimate {
            estimate,
            empty_fraction: frac,
            flagged: frac >= EMPTY_LIMIT,
        }
    }
}

/// Empirical transversality constant: infimum over x near x̄ and small
/// translations x₁, x₂ of max{d(x,A−x₁), d(x,B−x₂)} / d(x,(A−x₁)∩(B−x₂)).
/// A translation with empty intersection contributes the ratio 0 (the
/// distance to the empty set is infinite).
pub fn r_metric_estimate(s: &PairScenario) -> Result<TranslatedEstimate> {
    let seed = s.seed(TAG_R);
    let idx: Vec<u64> = (0..s.budget as u64).collect();
    let parts: Vec<Result<Option<(bool, Option<Sample>)>>> = idx
        .par_iter()
        .map(|&i| {
            let (x1, x2) = s.translation(seed, i);
            let a = s.a.translated(&-&x1);
            let b = s.b.translated(&-&x2);
            let x = match i % 4 {
                0 | 1 => {
                    let mut g = rng::stream(rng::derive(seed, 1), i);
                    let level = g.random_range(0..5);
                    Some(&s.xbar + rng::in_ball(&mut g, s.dim(), s.delta * 0.25f64.powi(level)))
                }
                2 => near_set(&a, &s.xbar, s.delta, seed, i),
                _ => near_set(&b, &s.xbar, s.delta, seed, i),
            };
            let Some(x) = x else { return Ok(None) };
            let dc = meet::distance_to_intersection(&a, &b, &x)?;
            if dc.is_infinite() {
                return Ok(Some((true, Some(Sample::new(0.0, vec![x, x1, x2])))));
            }
            if dc <= ZERO_DIST {
                return Ok(Some((false, None)));
            }
            let num = a.distance(&x)?.max(b.distance(&x)?);
            Ok(Some((false, Some(Sample::new(num / dc, vec![x, x1, x2])))))
        })
        .collect();
    let mut samples = Vec::new();
    let (mut empty, mut total) = (0, 0);
    for p in parts {
        if let Some((was_empty, sample)) = p? {
            total += 1;
            empty += was_empty as usize;
            samples.extend(sample);
        }
    }
    Ok(TranslatedEstimate::from(samples, empty, total, s.budget))
}

/// One-sided translated constant: infimum over x ∈ A−x₁ near x̄ of
/// d(x, B−x₂) / d(x, (A−x₁)∩(B−x₂)).
pub fn rgg_estimate(s: &PairScenario) -> Result<TranslatedEstimate> {
    const PER: usize = 4;
    let seed = s.seed(TAG_RGG);
    let shifts = (s.budget / PER).max(1) as u64;
    let idx: Vec<u64> = (0..shifts).collect();
    let parts: Vec<Result<(usize, usize, Vec<Sample>)>> = idx
        .par_iter()
        .map(|&i| {
            let (x1, x2) = s.translation(seed, i);
            let a = s.a.translated(&-&x1);
            let b = s.b.translated(&-&x2);
            let mut out = Vec::new();
            let (mut empty, mut total) = (0, 0);
            for x in a.sample_multiscale(&s.xbar, s.delta, PER, rng::derive(seed, 1000 + i)) {
                total += 1;
                let dc = meet::distance_to_intersection(&a, &b, &x)?;
                if dc.is_infinite() {
                    empty += 1;
                    out.push(Sample::new(0.0, vec![x, x1.clone(), x2.clone()]));
                } else if dc > ZERO_DIST {
                    let v = b.distance(&x)? / dc;
                    out.push(Sample::new(v, vec![x, x1.clone(), x2.clone()]));
                }
            }
            Ok((empty, total, out))
        })
        .collect();
    let mut samples = Vec::new();
    let (mut empty, mut total) = (0, 0);
    for p in parts {
        let (e, t, v) = p?;
        empty += e;
        total += t;
        samples.extend(v);
    }
    Ok(TranslatedEstimate::from(samples, empty, total, s.budget))
}

// ---------------------------------------------------------------------------
// Dual constants

/// How the dual constants were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DualPath {
    /// Both limiting cones are subspaces; principal angles give exact values.
    Closed,
    /// Unit normals enumerated or sampled, refined by local ascent.
    Sampled,
    /// At least one limiting cone is trivial.
    Trivial,
}

/// Absolute residuals of the identities linking the dual constants; None
/// where a constant is not finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identities {
    /// |r² + rgd² − 1|
    pub r2_rgd2: Option<f64>,
    /// |rgdd − √2·r|
    pub rgdd_sqrt2_r: Option<f64>,
    /// |rga + 2r² − 1|
    pub rga_2r2: Option<f64>,
    /// |rga + rgdd² − 1|
    pub rga_rgdd2: Option<f64>,
}

impl Identities {
    fn of(r: &Estimate, rgd: &Estimate, rgdd: &Estimate, rga: &Estimate) -> Self {
        let (r, rgd, rgdd, rga) = (r.get(), rgd.get(), rgdd.get(), rga.get());
        Identities {
            r2_rgd2: r.zip(rgd).map(|(r, d)| (r * r + d * d - 1.0).abs()),
            rgdd_sqrt2_r: r.zip(rgdd).map(|(r, dd)| (dd - 2f64.sqrt() * r).abs()),
            rga_2r2: r.zip(rga).map(|(r, a)| (a + 2.0 * r * r - 1.0).abs()),
            rga_rgdd2: rgdd.zip(rga).map(|(dd, a)| (a + dd * dd - 1.0).abs()),
        }
    }

    /// Largest available residual.
    pub fn max(&self) -> Option<f64> {
        [self.r2_rgd2, self.rgdd_sqrt2_r, self.rga_2r2, self.rga_rgdd2]
            .into_iter()
            .flatten()
            .reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualConstants {
    /// min ‖v₁+v₂‖ over limiting normals with ‖v₁‖+‖v₂‖ = 1.
    pub r_dual: Estimate,
    /// Half the largest distance between unit normals v₁ and −v₂.
    pub rgd: Estimate,
    /// min over unit v of √(d²(v,N_A) + d²(v,−N_B)).
    pub rgdd: Estimate,
    /// Largest −⟨v₁,v₂⟩ over unit normals.
    pub rga: Estimate,
    pub path: DualPath,
    pub identities: Identities,
}

/// The dual constants of the pair at x̄ from its limiting normal cones.
pub fn dual_constants(s: &PairScenario) -> Result<DualConstants> {
    dual_constants_with(s, true)
}

/// As `dual_constants`; with `closed_form` false subspace pairs go through
/// the sampled path too, which serves as a cross-check.
pub fn dual_constants_with(s: &PairScenario, closed_form: bool) -> Result<DualConstants> {
    let seed = s.seed(TAG_DUAL);
    let na = cones::limiting_normal_cone(&s.a, &s.xbar, s.delta, s.budget, seed)?;
    let nb = cones::limiting_normal_cone(&s.b, &s.xbar, s.delta, s.budget, rng::derive(seed, 1))?;
    Ok(dual_from_cones(&na, &nb, closed_form, s.budget, seed))
}

/// Dual constants of a pair of cones.
pub fn dual_from_cones(na: &ConeSpec, nb: &ConeSpec, closed_form: bool, budget: usize, seed: u64) -> DualConstants {
    let finish = |r_dual: Estimate, rgd: Estimate, rgdd: Estimate, rga: Estimate, path| {
        let identities = Identities::of(&r_dual, &rgd, &rgdd, &rga);
        DualConstants {
            r_dual,
            rgd,
            rgdd,
            rga,
            path,
            identities,
        }
    };
    match (na.is_trivial(), nb.is_trivial()) {
        (true, true) => {
            return finish(
                Estimate::saturated(Bound::Exact, 0),
                Estimate::vacuous(Bound::Exact, 0),
                Estimate::saturated(Bound::Exact, 0),
                Estimate::vacuous(Bound::Exact, 0),
                DualPath::Trivial,
            )
        }
        (true, false) | (false, true) => {
            // One normal vector must vanish, so ‖v₁+v₂‖ = ‖v₁‖+‖v₂‖ = 1;
            // likewise the nearest point of the trivial cone is 0.
            return finish(
                Estimate::exact(1.0),
                Estimate::vacuous(Bound::Exact, 0),
                Estimate::exact(1.0),
                Estimate::vacuous(Bound::Exact, 0),
                DualPath::Trivial,
            );
        }
        _ => {}
    }
    if closed_form {
        if let (ConeSpec::Subspace { basis: q1 }, ConeSpec::Subspace { basis: q2 }) = (na, nb) {
            let sigma = linalg::principal_cosines(q1, q2)
                .first()
                .copied()
                .unwrap_or(0.0)
                .clamp(0.0, 1.0);
            let p1 = q1 * q1.transpose();
            let p2 = q2 * q2.transpose();
            let lmax = (p1 + p2).symmetric_eigen().eigenvalues.max();
            // A shared normal direction makes σ = 1 and λmax = 2 exactly;
            // rounding there would surface as √ε after the square roots.
            let (sigma, lmax) = if cones::subspace_intersection(q1, q2).ncols() > 0 {
                (1.0, 2.0)
            } else {
                (sigma, lmax)
            };
            return finish(
                Estimate::exact(((1.0 - sigma) / 2.0).sqrt()),
                Estimate::exact(((1.0 + sigma) / 2.0).sqrt()),
                Estimate::exact((2.0 - lmax).max(0.0).sqrt()),
                Estimate::exact(sigma),
                DualPath::Closed,
            );
        }
    }
    sampled_dual(na, nb, budget, seed, finish)
}

fn sampled_dual(
    na: &ConeSpec,
    nb: &ConeSpec,
    budget: usize,
    seed: u64,
    finish: impl Fn(Estimate, Estimate, Estimate, Estimate, DualPath) -> DualConstants,
) -> DualConstants {
    const STARTS: usize = 128;
    let (u1, c1) = na.unit_vectors(budget, seed);
    let (u2, c2) = nb.unit_vectors(budget, rng::derive(seed, 2));
    let complete = c1 && c2;
    let mut pairs: Vec<(Point, Point)> = Vec::new();
    if complete && u1.len() * u2.len() <= 4 * budget.max(64) {
        for a in &u1 {
            for b in &u2 {
                pairs.push((a.clone(), b.clone()));
            }
        }
    }
    // Alternating best responses increase −⟨u₁,u₂⟩ monotonically.
    let ascend = |mut a: Point| -> Option<(Point, Point)> {
        let mut b = best_unit(nb, &-&a)?;
        for _ in 0..60 {
            let a2 = best_unit(na, &-&b)?;
            let b2 = best_unit(nb, &-&a2)?;
            let done = (&a2 - &a).norm() + (&b2 - &b).norm() < 1e-14;
            a = a2;
            b = b2;
            if done {
                break;
            }
        }
        Some((a, b))
    };
    pairs.extend(u1.iter().take(STARTS).filter_map(|a| ascend(a.clone())));
    pairs.extend(u2.iter().take(STARTS).filter_map(|b| best_unit(na, &-b).and_then(ascend)));
    let used = pairs.len();
    let bound = |b: Bound| if complete { Bound::Exact } else { b };
    let mut rga = f64::NEG_INFINITY;
    let mut rgd = 0.0f64;
    let mut r = f64::INFINITY;
    let (mut w_a, mut w_d, mut w_r) = (None, None, None);
    for (a, b) in &pairs {
        let c = -a.dot(b);
        if c > rga {
            rga = c;
            w_a = Some(flatten(&[a.clone(), b.clone()]));
        }
        let d = (a - b).norm() / 2.0;
        if d > rgd {
            rgd = d;
            w_d = Some(flatten(&[a.clone(), b.clone()]));
        }
        for k in 1..100 {
            let t = k as f64 / 100.0;
            let v = (a * t + b * (1.0 - t)).norm();
            if v < r {
                r = v;
                w_r = Some(flatten(&[a * t, b * (1.0 - t)]));
            }
        }
    }
    let est = |v: f64, b: Bound, w: Option<Vec<f64>>| Estimate {
        value: Value::Finite(v),
        bound: bound(b),
        budget,
        used,
        witness: w,
    };
    let (rgdd, w_dd) = rgdd_descent(na, nb, &u1, &u2, seed);
    finish(
        est(r, Bound::Upper, w_r),
        est(rgd, Bound::Lower, w_d),
        Estimate {
            value: Value::Finite(rgdd),
            bound: Bound::Upper,
            budget,
            used: u1.len() + u2.len(),
            witness: Some(w_dd.as_slice().to_vec()),
        },
        est(rga, Bound::Lower, w_a),
        DualPath::Sampled,
    )
}

/// Unit vector of the cone maximizing ⟨target, u⟩.
fn best_unit(c: &ConeSpec, target: &Point) -> Option<Point> {
    let mut best: Option<(f64, Point)> = None;
    let mut offer = |score: f64, u: Point| {
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, u));
        }
    };
    for g in c.pieces() {
        if g.ncols() == 0 {
            continue;
        }
        let (p, _) = linalg::project_cone(&g, target);
        match unit(&p) {
            Some(u) => offer(target.dot(&u), u),
            None => {
                // The target lies in the polar cone; the maximum is at a
                // generator.
                for j in 0..g.ncols() {
                    if let Some(u) = unit(&g.column(j).into_owned()) {
                        offer(target.dot(&u), u);
                    }
                }
            }
        }
    }
    best.map(|(_, u)| u)
}

/// min over unit v of d²(v,N_A) + d²(v,−N_B), by the majorize-minimize
/// step v ← (P₁v + P₂v)/‖P₁v + P₂v‖ from many starts.
fn rgdd_descent(na: &ConeSpec, nb: &ConeSpec, u1: &[Point], u2: &[Point], seed: u64) -> (f64, Point) {
    let nbn = nb.negate();
    let n = na.dim();
    let f = |v: &Point| {
        let a = na.distance(v);
        let b = nbn.distance(v);
        (a * a + b * b).sqrt()
    };
    let mut starts: Vec<Point> = u1.iter().take(64).cloned().collect();
    starts.extend(u2.iter().take(64).map(|u| -u));
    for i in 0..32 {
        starts.push(rng::unit_vector(&mut rng::stream(rng::derive(seed, 9), i), n));
    }
    let mut best = (f64::INFINITY, starts[0].clone());
    for v0 in starts {
        let mut v = v0;
        for _ in 0..200 {
            let w = na.project(&v) + nbn.project(&v);
            let Some(next) = unit(&w) else { break };
            let step = (&next - &v).norm();
            v = next;
            if step < 1e-13 {
                break;
            }
        }
        let val = f(&v);
        if val < best.0 {
            best = (val, v);
        }
    }
    best
}

/// Whether N_A(x̄) ∩ (−N_B(x̄)) = {0}. Exact for structured cones; with
/// sampled cones only a shared direction (failure) can be certified.
pub fn transversality_condition_check(s: &PairScenario) -> Result<Verdict> {
    let seed = s.seed(TAG_DUAL);
    let na = cones::limiting_normal_cone(&s.a, &s.xbar, s.delta, s.budget, seed)?;
    let nb = cones::limiting_normal_cone(&s.b, &s.xbar, s.delta, s.budget, rng::derive(seed, 1))?;
    let common = cones::intersect(&na, &nb.negate())?;
    Ok(match cones::meets_nontrivially(&na, &nb.negate())? {
        Some(true) => {
            let (dirs, _) = common.unit_vectors(1, seed);
            let v = Verdict {
                holds: Some(false),
                basis: if na.is_exact() && nb.is_exact() { Basis::Exact } else { Basis::Sampled },
                samples: 0,
                witness: None,
            };
            match dirs.first() {
                Some(d) => v.with_witness(vec![d.as_slice().to_vec()]),
                None => v,
            }
        }
        Some(false) => Verdict::exact(true),
        None => Verdict::unknown(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldTransversality {
    /// T_A(x̄) + T_B(x̄) is the whole space.
    pub transversal: bool,
    /// Friedrichs cosine of the tangent spaces.
    pub c_tangent: f64,
    /// Friedrichs cosine of the normal spaces.
    pub c_normal: f64,
}

/// Tangent-sum test for two smooth sets at x̄, with the Friedrichs cosine
/// computed from both the tangent and the normal spaces.
pub fn manifold_transversality_check(a: &SetSpec, b: &SetSpec, xbar: &Point) -> Result<ManifoldTransversality> {
    let ta = cones::tangent_space(a, xbar)?;
    let tb = cones::tangent_space(b, xbar)?;
    let n = xbar.len();
    let mut both = DMatrix::zeros(n, ta.ncols() + tb.ncols());
    for j in 0..ta.ncols() {
        both.set_column(j, &ta.column(j));
    }
    for j in 0..tb.ncols() {
        both.set_column(ta.ncols() + j, &tb.column(j));
    }
    let na = cones::normal_space(a, xbar)?;
    let nb = cones::normal_space(b, xbar)?;
    Ok(ManifoldTransversality {
        transversal: linalg::rank(&both) == n,
        c_tangent: cones::friedrichs_cosine(&ta, &tb),
        c_normal: cones::friedrichs_cosine(&na, &nb),
    })
}

/// Friedrichs cosine of the normal spaces when both sets are smooth at x̄.
pub fn friedrichs_c(s: &PairScenario) -> Option<f64> {
    let na = cones::normal_space(&s.a, &s.xbar).ok()?;
    let nb = cones::normal_space(&s.b, &s.xbar).ok()?;
    Some(cones::friedrichs_cosine(&na, &nb))
}

// ---------------------------------------------------------------------------
// Angle conditions

/// Points of S near x̄ that are not in T.
fn points_outside(s: &SetSpec, t: &SetSpec, xbar: &Point, delta: f64, count: usize, seed: u64) -> Vec<Point> {
    s.sample_multiscale(xbar, delta, count, seed)
        .into_iter()
        .filter(|p| t.distance(p).is_ok_and(|d| d > 1e-10))
        .collect()
}

fn side(budget: usize) -> usize {
    ((budget as f64).sqrt().ceil() as usize).clamp(8, 400)
}

/// Intrinsic transversality: infimum over a ∈ A∖B, b ∈ B∖A near x̄ of
/// max{d((b−a)/‖b−a‖, N_A(a)), d((a−b)/‖a−b‖, N_B(b))}, with limiting or
/// proximal normal cones. Vacuous when either difference is empty.
pub fn intrinsic_transversality_estimate(s: &PairScenario, kind: NormalKind) -> Result<Estimate> {
    let k = side(s.budget);
    let seed = s.seed(TAG_ITRANS);
    let cone = |set: &SetSpec, p: &Point| match kind {
        NormalKind::Limiting => cones::limiting_normal_cone(set, p, s.delta, 64, seed),
        _ => cones::proximal_normal_cone(set, p),
    };
    let with_cones = |set: &SetSpec, pts: Vec<Point>| -> Result<Vec<(Point, ConeSpec)>> {
        pts.into_par_iter()
            .map(|p| cone(set, &p).map(|c| (p, c)))
            .collect()
    };
    let aa = with_cones(&s.a, points_outside(&s.a, &s.b, &s.xbar, s.delta, k, seed))?;
    let bb = with_cones(&s.b, points_outside(&s.b, &s.a, &s.xbar, s.delta, k, rng::derive(seed, 1)))?;
    let samples = evaluate(&aa, |(a, ca)| {
        let mut out = Vec::with_capacity(bb.len());
        for (b, cb) in &bb {
            let Some(u) = unit(&(b - a)) else { continue };
            let v = ca.distance(&u).max(cb.distance(&-&u));
            out.push(Sample::new(v, vec![a.clone(), b.clone()]));
        }
        Ok(out)
    })?;
    // Independent pairs rarely line up with the worst direction near
    // tangencies; projection pairs (a, P_B a) and (P_A b, b) do.
    let paired = |from: &[(Point, ConeSpec)], onto: &SetSpec, other: &SetSpec, flip: bool| -> Result<Vec<Sample>> {
        evaluate(from, |(p, cp)| {
            let mut out = Vec::new();
            for q in onto.project(p)?.points {
                if other.distance(&q)? <= 1e-10 || (&q - &s.xbar).norm() > s.delta {
                    continue;
                }
                let cq = cone(onto, &q)?;
                let Some(u) = unit(&(&q - p)) else { continue };
                let v = cp.distance(&u).max(cq.distance(&-&u));
                let w = if flip { vec![q.clone(), p.clone()] } else { vec![p.clone(), q] };
                out.push(Sample::new(v, w));
            }
            Ok(out)
        })
    };
    let mut samples = samples;
    samples.extend(paired(&aa, &s.b, &s.a, false)?);
    samples.extend(paired(&bb, &s.a, &s.b, true)?);
    Ok(infimum(&samples, s.budget))
}

fn separable_samples(s: &PairScenario) -> Result<Vec<Sample>> {
    let seed = s.seed(TAG_SEP);
    let a1s = points_outside(&s.a, &s.b, &s.xbar, s.delta, s.budget, seed);
    evaluate(&a1s, |a1| {
        let mut out = Vec::new();
        for b in s.b.project(a1)?.points {
            if s.a.distance(&b)? <= 1e-10 {
                continue;
            }
            for a2 in s.a.project(&b)?.points {
                let (p, q) = (a1 - &b, &a2 - &b);
                let den = p.norm() * q.norm();
                if den > 1e-300 {
                    out.push(Sample::new(p.dot(&q) / den, vec![a1.clone(), b.clone(), a2]));
                }
            }
        }
        Ok(out)
    })
}

/// Largest sampled cosine ⟨a₁−b, a₂−b⟩/(‖a₁−b‖‖a₂−b‖) with a₁ ∈ A∖B,
/// b ∈ P_B(a₁)∖A, a₂ ∈ P_A(b).
pub fn separable_sup(s: &PairScenario) -> Result<Estimate> {
    Ok(supremum(&separable_samples(s)?, s.budget))
}

/// Whether B intersects A separably with constant α on the samples.
pub fn separable_intersection_check(s: &PairScenario, alpha: f64) -> Result<Verdict> {
    Ok(strict_verdict(&separable_samples(s)?, alpha, false))
}

fn inherent_samples(s: &PairScenario) -> Result<Vec<Sample>> {
    let k = side(s.budget);
    let seed = s.seed(TAG_INH);
    let with_proj = |pts: Vec<Point>, onto: &SetSpec| -> Result<Vec<(Point, Vec<Point>)>> {
        pts.into_par_iter()
            .map(|p| onto.project(&p).map(|r| (p, r.points)))
            .collect()
    };
    let a1s = with_proj(points_outside(&s.a, &s.b, &s.xbar, s.delta, k, seed), &s.b)?;
    let b1s = with_proj(points_outside(&s.b, &s.a, &s.xbar, s.delta, k, rng::derive(seed, 1)), &s.a)?;
    evaluate(&a1s, |(a1, b2s)| {
        let mut out = Vec::new();
        for b2 in b2s {
            let p = a1 - b2;
            for (b1, a2s) in &b1s {
                for a2 in a2s {
                    let q = a2 - b1;
                    let den = p.norm() * q.norm();
                    if den > 1e-300 {
                        out.push(Sample::new(
                            p.dot(&q) / den,
                            vec![a1.clone(), b2.clone(), b1.clone(), a2.clone()],
                        ));
                    }
                }
            }
        }
        Ok(out)
    })
}

/// Largest sampled cosine ⟨a₁−b₂, a₂−b₁⟩/(‖·‖‖·‖) with a₁ ∈ A∖B,
/// b₁ ∈ B∖A, b₂ ∈ P_B(a₁), a₂ ∈ P_A(b₁).
pub fn inherent_sup(s: &PairScenario) -> Result<Estimate> {
    Ok(supremum(&inherent_samples(s)?, s.budget))
}

pub fn inherent_transversality_check(s: &PairScenario, alpha: f64) -> Result<Verdict> {
    Ok(strict_verdict(&inherent_samples(s)?, alpha, false))
}

fn qualification_samples(s: &PairScenario) -> Result<Vec<Sample>> {
    let seed = s.seed(TAG_CQ);
    let ca = cones::restricted_normal_cone(&s.a, &s.b, &s.xbar, NormalKind::Limiting, s.delta, s.budget, seed)?;
    let cb = cones::restricted_normal_cone(
        &s.b,
        &s.a,
        &s.xbar,
        NormalKind::Limiting,
        s.delta,
        s.budget,
        rng::derive(seed, 1),
    )?;
    let thin = |c: &ConeSpec, sd: u64| -> Vec<Point> {
        let (u, _) = c.unit_vectors(side(s.budget), sd);
        let mut u: Vec<Point> = u.iter().filter_map(unit).collect();
        // Keep the pair count bounded; the lists are already deduplicated.
        let cap = 4 * side(s.budget);
        if u.len() > cap {
            let step = u.len() as f64 / cap as f64;
            u = (0..cap).map(|i| u[(i as f64 * step) as usize].clone()).collect();
        }
        u
    };
    let ua = thin(&ca, seed);
    let ub = thin(&cb, rng::derive(seed, 2));
    evaluate(&ua, |v1| {
        Ok(ub
            .iter()
            .map(|v2| Sample::new(-v1.dot(v2), vec![v1.clone(), v2.clone()]))
            .collect())
    })
}

/// Largest sampled −⟨v₁,v₂⟩ over unit restricted limiting normals
/// v₁ ∈ N_A^B(x̄), v₂ ∈ N_B^A(x̄).
pub fn qualification_sup(s: &PairScenario) -> Result<Estimate> {
    Ok(supremum(&qualification_samples(s)?, s.budget))
}

pub fn ab_qualification_check(s: &PairScenario, alpha: f64) -> Result<Verdict> {
    Ok(strict_verdict(&qualification_samples(s)?, alpha, false))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub separable: Verdict,
    /// B is 0-Hölder regular relative to A with the given constant.
    pub holder: Verdict,
    /// α + 2c < 1.
    pub gate: bool,
    pub gamma: Option<f64>,
    /// (1−γ)/(1+γ), the implied lower bound of the one-sided constant.
    pub bound: Option<f64>,
    /// The implied inequality checked on samples of A.
    pub inequality: Verdict,
}

/// Separability with constant α combined with 0-Hölder regularity of B
/// relative to A with constant c. When both hold and α + 2c < 1, every
/// sampled a ∈ A near x̄ must satisfy (1−γ)/(1+γ)·d(a, A∩B) ≤ d(a, B) for
/// γ halfway between max{α+2c, 1/(1+c²)} and 1.
pub fn holder_pairing_check(s: &PairScenario, alpha: f64, c: f64) -> Result<PairingReport> {
    let seed = s.seed(TAG_PAIR);
    let separable = separable_intersection_check(s, alpha)?;
    let holder = elemental::holder_regularity_check(&s.b, &s.a, &s.xbar, 0.0, c, s.delta, s.budget, seed)?;
    let gate = alpha + 2.0 * c < 1.0;
    if !(gate && separable.holds == Some(true) && holder.holds == Some(true)) {
        return Ok(PairingReport {
            separable,
            holder,
            gate,
            gamma: None,
            bound: None,
            inequality: Verdict::unknown(),
        });
    }
    let lo = (alpha + 2.0 * c).max(1.0 / (1.0 + c * c));
    let gamma = (lo + 1.0) / 2.0;
    let k = (1.0 - gamma) / (1.0 + gamma);
    let xs = s.set_points(&s.a, s.budget, TAG_PAIR);
    let samples = evaluate(&xs, |x| {
        let dc = s.intersection.distance(x)?;
        let db = s.b.distance(x)?;
        Ok(vec![Sample::new(db - k * dc, vec![x.clone()])])
    })?;
    Ok(PairingReport {
        separable,
        holder,
        gate,
        gamma: Some(gamma),
        bound: Some(k),
        inequality: strict_verdict(&samples, -1e-12, true),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSufficient {
    pub verdict: Verdict,
    /// Smallest sampled ‖t·u₁ + (1−t)·u₂‖ over filtered normals.
    pub min_norm: Estimate,
    /// sr ≥ α when the verdict holds.
    pub implied_lower: Option<f64>,
}

/// Dual sufficient condition for subtransversality: ‖v₁+v₂‖ > α for
/// Fréchet normals v₁ ∈ N_A(a), v₂ ∈ N_B(b) with ‖v₁‖+‖v₂‖ = 1 whose
/// directions are within the angular filter 1−δ of x−a and x−b, over
/// sampled x near x̄ and a, b within δ of x.
pub fn dual_subtransversality_sufficient_check(s: &PairScenario, alpha: f64) -> Result<DualSufficient> {
    let seed = s.seed(TAG_SUFF);
    let delta = s.delta;
    let xs = ball_multiscale(&s.xbar, delta, (s.budget / 8).max(16), seed);
    let filtered = |set: &SetSpec, x: &Point, sd: u64| -> Result<Vec<(Point, Point)>> {
        let mut cands = set.project(x)?.points;
        cands.extend(set.sample_near(x, delta, 3, sd));
        let mut out = Vec::new();
        for a in cands {
            let d = x - &a;
            let nd = d.norm();
            if !(nd > 0.0 && nd < delta) {
                continue;
            }
            let cone = cones::frechet_normal_cone(set, &a)?;
            let mut us = cone.unit_vectors(4, sd).0;
            us.extend(unit(&cone.project(&d)));
            for u in us {
                if u.dot(&d) / nd > 1.0 - delta {
                    out.push((a.clone(), u));
                }
            }
        }
        Ok(out)
    };
    let idx: Vec<usize> = (0..xs.len()).collect();
    let samples = evaluate(&idx, |&i| {
        let x = &xs[i];
        let sd = rng::derive(seed, i as u64 + 1);
        let va = filtered(&s.a, x, sd)?;
        let vb = filtered(&s.b, x, rng::derive(sd, 1))?;
        let mut out = Vec::new();
        for (a, u1) in &va {
            for (b, u2) in &vb {
                let mut best = f64::INFINITY;
                let mut bt = 0.5;
                for k in 1..100 {
                    let t = k as f64 / 100.0;
                    let v = (u1 * t + u2 * (1.0 - t)).norm();
                    if v < best {
                        best = v;
                        bt = t;
                    }
                }
                out.push(Sample::new(
                    best,
                    vec![x.clone(), a.clone(), b.clone(), u1 * bt, u2 * (1.0 - bt)],
                ));
            }
        }
        Ok(out)
    })?;
    let verdict = strict_verdict(&samples, alpha, true);
    let implied_lower = (verdict.is_true() && !samples.is_empty()).then_some(alpha);
    Ok(DualSufficient {
        verdict,
        min_norm: infimum(&samples, s.budget),
        implied_lower,
    })
}

// ---------------------------------------------------------------------------
// Set-valued mappings

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmReport {
    /// Subregularity modulus of F(x) = (A−x)×(B−x), max norm.
    pub sr_f: Estimate,
    /// Regularity modulus of F.
    pub r_f: TranslatedEstimate,
    /// Subregularity modulus of G(x₁,x₂) = x₁−x₂ on A×B, Euclidean norm.
    pub sr_g: Estimate,
    /// Regularity modulus of G.
    pub r_g: TranslatedEstimate,
    /// √(2/(1+sr⁻²)) ≤ sr[G] ≤ 2/[sr⁻¹−1]₊ within the sampling tolerance.
    pub f3mod: Option<bool>,
    /// The same sandwich for r and r[G].
    pub f3mod2: Option<bool>,
    /// x̄ is isolated in A ∩ B, so the subregularity is strong.
    pub strong: bool,
}

/// Lower and upper sandwich bounds for the G modulus given the set
/// constant (upper bound infinite when the constant is at least 1).
pub fn f3mod_bounds(c: Value) -> Option<(f64, f64)> {
    let c = c.as_f64()?;
    if !(c > 0.0) {
        return Some((0.0, f64::INFINITY));
    }
    let lower = (2.0 / (1.0 + c.powi(-2))).sqrt();
    let gap = 1.0 / c - 1.0;
    let upper = if gap > 0.0 { 2.0 / gap } else { f64::INFINITY };
    Some((lower, upper))
}

fn sandwich_holds(c: &Estimate, g: &Estimate) -> Option<bool> {
    // Both sides are sampled infima; near c = 0 the upper bound 2c/(1−c)
    // is smaller than the grid error of g, so nothing can be asserted.
    if c.value.as_f64()? <= SAMPLING_TOL {
        return None;
    }
    let (lo, hi) = f3mod_bounds(c.value)?;
    let v = g.value.as_f64()?;
    let tol = SAMPLING_TOL * v.abs().max(1.0);
    Some(lo - tol <= v && v <= hi + tol)
}

/// sr[F] with d((0,0), F(x)) evaluated on translated sets, i.e. as
/// max{d(0, A−x), d(0, B−x)}.
pub fn sr_mapping_f(s: &PairScenario) -> Result<Estimate> {
    let xs = s.metric_points(TAG_SR);
    let zero = Point::zeros(s.dim());
    let samples = evaluate(&xs, |x| {
        let dc = s.intersection.distance(x)?;
        if dc <= ZERO_DIST {
            return Ok(vec![]);
        }
        let neg = -x;
        let fa = s.a.translated(&neg).distance(&zero)?;
        let fb = s.b.translated(&neg).distance(&zero)?;
        Ok(vec![Sample::new(fa.max(fb) / dc, vec![x.clone()])])
    })?;
    if samples.is_empty() {
        return Ok(Estimate::saturated(Bound::Upper, s.budget));
    }
    Ok(infimum(&samples, s.budget))
}

/// r[F]: for y = (y₁,y₂) near 0, F⁻¹(y) = (A−y₁)∩(B−y₂) and
/// d(y, F(x)) = max{d(y₁, A−x), d(y₂, B−x)}.
pub fn r_mapping_f(s: &PairScenario) -> Result<TranslatedEstimate> {
    let seed = s.seed(TAG_R);
    let idx: Vec<u64> = (0..s.budget as u64).collect();
    let parts: Vec<Result<Option<(bool, Option<Sample>)>>> = idx
        .par_iter()
        .map(|&i| {
            let (y1, y2) = s.translation(seed, i);
            let a = s.a.translated(&-&y1);
            let b = s.b.translated(&-&y2);
            let x = match i % 4 {
                0 | 1 => {
                    let mut g = rng::stream(rng::derive(seed, 1), i);
                    let level = g.random_range(0..5);
                    Some(&s.xbar + rng::in_ball(&mut g, s.dim(), s.delta * 0.25f64.powi(level)))
                }
                2 => near_set(&a, &s.xbar, s.delta, seed, i),
                _ => near_set(&b, &s.xbar, s.delta, seed, i),
            };
            let Some(x) = x else { return Ok(None) };
            let dc = meet::distance_to_intersection(&a, &b, &x)?;
            if dc.is_infinite() {
                return Ok(Some((true, Some(Sample::new(0.0, vec![x, y1, y2])))));
            }
            if dc <= ZERO_DIST {
                return Ok(Some((false, None)));
            }
            let neg = -&x;
            let fa = s.a.translated(&neg).distance(&y1)?;
            let fb = s.b.translated(&neg).distance(&y2)?;
            Ok(Some((false, Some(Sample::new(fa.max(fb) / dc, vec![x, y1, y2])))))
        })
        .collect();
    let mut samples = Vec::new();
    let (mut empty, mut total) = (0, 0);
    for p in parts {
        if let Some((was_empty, sample)) = p? {
            total += 1;
            empty += was_empty as usize;
            samples.extend(sample);
        }
    }
    Ok(TranslatedEstimate::from(samples, empty, total, s.budget))
}

/// Pairs (x₁, x₂) ∈ A × B near (x̄, x̄).
fn product_pairs(s: &PairScenario, seed: u64) -> Vec<(Point, Point)> {
    let k = side(s.budget);
    let mut xa = vec![s.xbar.clone()];
    xa.extend(s.a.sample_multiscale(&s.xbar, s.delta, k, seed));
    let mut xb = vec![s.xbar.clone()];
    xb.extend(s.b.sample_multiscale(&s.xbar, s.delta, k, rng::derive(seed, 1)));
    let mut out = Vec::with_capacity(xa.len() * xb.len());
    for p in &xa {
        for q in &xb {
            out.push((p.clone(), q.clone()));
        }
    }
    out
}

/// sr[G]: ‖x₁−x₂‖ over the distance from (x₁,x₂) to G⁻¹(0) = {(z,z) : z ∈
/// A∩B}, which is √(½‖x₁−x₂‖² + 2d²((x₁+x₂)/2, A∩B)).
pub fn sr_mapping_g(s: &PairScenario) -> Result<Estimate> {
    let pairs = product_pairs(s, s.seed(TAG_G));
    let samples = evaluate(&pairs, |(x1, x2)| {
        let g = (x1 - x2).norm();
        let mid = (x1 + x2) / 2.0;
        let dm = s.intersection.distance(&mid)?;
        let den = (0.5 * g * g + 2.0 * dm * dm).sqrt();
        if den <= ZERO_DIST {
            return Ok(vec![]);
        }
        Ok(vec![Sample::new(g / den, vec![x1.clone(), x2.clone()])])
    })?;
    if samples.is_empty() {
        return Ok(Estimate::saturated(Bound::Upper, s.budget));
    }
    Ok(infimum(&samples, s.budget))
}

/// r[G]: for y near 0, G⁻¹(y) = {(z+y, z) : z ∈ (A−y)∩B} and the distance
/// from (x₁,x₂) is √(½‖x₁−y−x₂‖² + 2d²((x₁−y+x₂)/2, (A−y)∩B)).
pub fn r_mapping_g(s: &PairScenario) -> Result<TranslatedEstimate> {
    let seed = s.seed(TAG_G);
    let pairs = product_pairs(s, seed);
    let idx: Vec<usize> = (0..pairs.len()).collect();
    let parts: Vec<Result<Option<(bool, Option<Sample>)>>> = idx
        .par_iter()
        .map(|&i| {
            let (x1, x2) = &pairs[i];
            let (y, _) = s.translation(rng::derive(seed, 2), i as u64);
            let ay = s.a.translated(&-&y);
            let mid = (x1 - &y + x2) / 2.0;
            let dm = meet::distance_to_intersection(&ay, &s.b, &mid)?;
            let pts = vec![x1.clone(), x2.clone(), y.clone()];
            if dm.is_infinite() {
                return Ok(Some((true, Some(Sample::new(0.0, pts)))));
            }
            let g = (x1 - &y - x2).norm();
            let den = (0.5 * g * g + 2.0 * dm * dm).sqrt();
            if den <= ZERO_DIST {
                return Ok(Some((false, None)));
            }
            Ok(Some((false, Some(Sample::new(g / den, pts)))))
        })
        .collect();
    let mut samples = Vec::new();
    let (mut empty, mut total) = (0, 0);
    for p in parts {
        if let Some((was_empty, sample)) = p? {
            total += 1;
            empty += was_empty as usize;
            samples.extend(sample);
        }
    }
    Ok(TranslatedEstimate::from(samples, empty, total, s.budget))
}

/// Whether x̄ is an isolated point of A ∩ B (judged on samples of the
/// intersection description near x̄).
pub fn isolated_intersection(s: &PairScenario) -> bool {
    s.intersection
        .sample_near(&s.xbar, s.delta, 32, s.seed(TAG_CHECK))
        .iter()
        .all(|p| (p - &s.xbar).norm() <= 1e-9)
}

/// The set-valued-mapping view, checked against the set constants.
pub fn svm_view(s: &PairScenario, sr: &Estimate, r: &Estimate) -> Result<SvmReport> {
    let sr_g = sr_mapping_g(s)?;
    let r_g = r_mapping_g(s)?;
    Ok(SvmReport {
        sr_f: sr_mapping_f(s)?,
        r_f: r_mapping_f(s)?,
        f3mod: sandwich_holds(sr, &sr_g),
        f3mod2: sandwich_holds(r, &r_g.estimate),
        sr_g,
        r_g,
        strong: isolated_intersection(s),
    })
}

// ---------------------------------------------------------------------------
// CHIP

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipReport {
    pub verdict: Verdict,
    /// False when the normal cone of the intersection is only sampled.
    pub checkable: bool,
}

/// N_{A∩B}(x̄) ⊆ N_A(x̄) + N_B(x̄), piece by piece: a convex piece inside
/// one pairwise sum passes exactly; a generator outside every sum fails
/// exactly; otherwise interior combinations are sampled.
pub fn chip_inclusion_check(s: &PairScenario) -> Result<ChipReport> {
    let seed = s.seed(TAG_CHIP);
    let nc = cones::limiting_normal_cone(&s.intersection, &s.xbar, s.delta, s.budget, seed)?;
    if !nc.is_exact() {
        return Ok(ChipReport {
            verdict: Verdict::unknown(),
            checkable: false,
        });
    }
    let na = cones::limiting_normal_cone(&s.a, &s.xbar, s.delta, s.budget, rng::derive(seed, 1))?;
    let nb = cones::limiting_normal_cone(&s.b, &s.xbar, s.delta, s.budget, rng::derive(seed, 2))?;
    let sums: Vec<DMatrix<f64>> = na
        .pieces()
        .iter()
        .flat_map(|g1| nb.pieces().into_iter().map(move |g2| concat(g1, &g2)))
        .collect();
    let in_sum = |g: &DMatrix<f64>, v: &Point| {
        let (_, d) = linalg::project_cone(g, v);
        d <= cones::CONE_TOL * v.norm().max(1.0)
    };
    let mut sampled = false;
    let mut checked = 0;
    for (pi, piece) in nc.pieces().iter().enumerate() {
        let gens: Vec<Point> = (0..piece.ncols()).map(|j| piece.column(j).into_owned()).collect();
        if gens.is_empty() {
            continue;
        }
        checked += gens.len();
        if sums.iter().any(|g| gens.iter().all(|v| in_sum(g, v))) {
            continue;
        }
        if let Some(v) = gens.iter().find(|v| !sums.iter().any(|g| in_sum(g, v))) {
            return Ok(ChipReport {
                verdict: Verdict::exact(false).with_witness(vec![v.as_slice().to_vec()]),
                checkable: true,
            });
        }
        sampled = true;
        for i in 0..s.budget {
            let mut g = rng::stream(rng::derive(seed, 100 + pi as u64), i as u64);
            let w = rng::gaussian(&mut g, gens.len()).map(f64::abs);
            let v = piece * w;
            checked += 1;
            if !sums.iter().any(|g| in_sum(g, &v)) {
                return Ok(ChipReport {
                    verdict: Verdict::sampled(false, checked).with_witness(vec![v.as_slice().to_vec()]),
                    checkable: true,
                });
            }
        }
    }
    Ok(ChipReport {
        verdict: if sampled { Verdict::sampled(true, checked) } else { Verdict::exact(true) },
        checkable: true,
    })
}

fn concat(g1: &DMatrix<f64>, g2: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(g1.nrows(), g1.ncols() + g2.ncols());
    for j in 0..g1.ncols() {
        g.set_column(j, &g1.column(j));
    }
    for j in 0..g2.ncols() {
        g.set_column(g1.ncols() + j, &g2.column(j));
    }
    g
}

// ---------------------------------------------------------------------------
// Report and audit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flags {
    /// N_A(x̄) ∩ (−N_B(x̄)) = {0}; None when undecided.
    pub transversal_condition: Option<bool>,
    pub ab_qualification: bool,
    pub inherent: bool,
    pub separable: bool,
    pub intrinsic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicationCheck {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub sr: Estimate,
    pub srr: Estimate,
    /// The one-sided estimate had no usable sample and repeats `sr`.
    pub srr_fallback: bool,
    pub r: TranslatedEstimate,
    pub rgg: TranslatedEstimate,
    pub r_dual: Estimate,
    pub rgd: Estimate,
    pub rgdd: Estimate,
    pub rga: Estimate,
    pub dual_path: DualPath,
    pub identities: Identities,
    pub friedrichs_c: Option<f64>,
    pub itrans: Estimate,
    pub itrans_proximal: Estimate,
    pub qualification_sup: Estimate,
    pub inherent_sup: Estimate,
    pub separable_sup: Estimate,
    pub flags: Flags,
    /// x̄ is interior to A ∩ B: sr and r are infinite.
    pub saturated: bool,
    pub svm: SvmReport,
    pub chip: ChipReport,
    pub audit: Vec<ImplicationCheck>,
}

impl ConstantsReport {
    pub fn audit_ok(&self) -> bool {
        self.audit.iter().all(|c| c.holds)
    }
}

/// Every estimate and check on one scenario, plus the implication audit.
pub fn analyze(s: &PairScenario) -> Result<ConstantsReport> {
    let sr = sr_metric_estimate(s)?;
    let srr_raw = srr_estimate(s)?;
    let srr_fallback = srr_raw.value == Value::Vacuous;
    let srr = if srr_fallback { sr.clone() } else { srr_raw };
    let r = r_metric_estimate(s)?;
    let rgg = rgg_estimate(s)?;
    let dual = dual_constants(s)?;
    let itrans = intrinsic_transversality_estimate(s, NormalKind::Limiting)?;
    let itrans_proximal = intrinsic_transversality_estimate(s, NormalKind::Proximal)?;
    let qualification_sup = qualification_sup(s)?;
    let inherent_sup = inherent_sup(s)?;
    let separable_sup = separable_sup(s)?;
    let flags = Flags {
        transversal_condition: transversality_condition_check(s)?.holds,
        ab_qualification: below_one(&qualification_sup),
        inherent: below_one(&inherent_sup),
        separable: below_one(&separable_sup),
        intrinsic: match itrans.value {
            Value::Finite(v) => v > FLAG_MARGIN,
            _ => true,
        },
    };
    let svm = svm_view(s, &sr, &r.estimate)?;
    let chip = chip_inclusion_check(s)?;
    let mut report = ConstantsReport {
        saturated: sr.value == Value::Saturated,
        sr,
        srr,
        srr_fallback,
        r,
        rgg,
        r_dual: dual.r_dual,
        rgd: dual.rgd,
        rgdd: dual.rgdd,
        rga: dual.rga,
        dual_path: dual.path,
        identities: dual.identities,
        friedrichs_c: friedrichs_c(s),
        itrans,
        itrans_proximal,
        qualification_sup,
        inherent_sup,
        separable_sup,
        flags,
        svm,
        chip,
        audit: Vec::new(),
    };
    report.audit = audit(&report);
    Ok(report)
}

/// Runs `analyze` and returns only the implication checks.
pub fn implication_audit(s: &PairScenario) -> Result<Vec<ImplicationCheck>> {
    Ok(analyze(s)?.audit)
}

/// (value, finite) view with saturation as +inf.
fn num(e: &Estimate) -> Option<f64> {
    e.value.as_f64()
}

/// The implications between the constants, as one-sided constraints on the
/// estimates.
pub fn audit(rep: &ConstantsReport) -> Vec<ImplicationCheck> {
    let mut out = Vec::new();
    let mut push = |name: &str, holds: bool, detail: String| {
        out.push(ImplicationCheck {
            name: name.to_string(),
            holds,
            detail,
        })
    };
    let tol = SAMPLING_TOL;
    let sr = num(&rep.sr);
    let r = num(&rep.r.estimate);

    if let (Some(r), Some(sr)) = (r, sr) {
        push("r <= sr", r <= sr + tol || sr.is_infinite(), format!("r = {r:.6}, sr = {sr:.6}"));
    }
    if let (Some(srr), Some(sr), false) = (num(&rep.srr), sr, rep.srr_fallback) {
        let holds = if sr.is_infinite() {
            srr.is_infinite()
        } else {
            srr / (srr + 2.0) <= sr + tol && sr <= srr + tol
        };
        push("srr sandwich", holds, format!("srr = {srr:.6}, sr = {sr:.6}"));
    }
    if let (Some(rgg), Some(r)) = (num(&rep.rgg.estimate), r) {
        let holds = if r.is_infinite() || rgg.is_infinite() {
            true
        } else {
            rgg / (rgg + 2.0) <= r + tol && r <= rgg + tol
        };
        push("rgg sandwich", holds, format!("rgg = {rgg:.6}, r = {r:.6}"));
    }

    // Dual identities: every one on the closed-form path; on the sampled
    // path the two that hold for any cone pair, and the rgdd ones only when
    // some pair of unit normals makes an angle of at least 90 degrees.
    let ids = &rep.identities;
    match rep.dual_path {
        DualPath::Closed => {
            let m = ids.max().unwrap_or(0.0);
            push("dual identities (closed form)", m < EXACT_IDENTITY_TOL, format!("max residual {m:.3e}"));
        }
        DualPath::Sampled => {
            let mut m = ids.r2_rgd2.unwrap_or(0.0).max(ids.rga_2r2.unwrap_or(0.0));
            if rep.rga.get().is_some_and(|a| a >= 0.0) {
                m = m.max(ids.rgdd_sqrt2_r.unwrap_or(0.0)).max(ids.rga_rgdd2.unwrap_or(0.0));
            }
            push("dual identities (sampled)", m < SAMPLED_IDENTITY_TOL, format!("max residual {m:.3e}"));
        }
        DualPath::Trivial => {}
    }
    if let Some(tc) = rep.flags.transversal_condition {
        if let Some(rd) = num(&rep.r_dual) {
            push(
                "transversality condition <=> r_dual > 0",
                tc == (rd > 1e-12),
                format!("condition {tc}, r_dual = {rd:.6}"),
            );
        }
        if tc {
            push(
                "transversality => (A,B)-qualification",
                rep.flags.ab_qualification,
                format!("qualification sup {:?}", rep.qualification_sup.value),
            );
        }
    }
    let f = &rep.flags;
    push(
        "qualification => inherent",
        !f.ab_qualification || f.inherent,
        format!("{} / {}", f.ab_qualification, f.inherent),
    );
    push(
        "inherent => separable",
        !f.inherent || f.separable,
        format!("{} / {}", f.inherent, f.separable),
    );
    push(
        "intrinsic => separable",
        !f.intrinsic || f.separable,
        format!("{} / {}", f.intrinsic, f.separable),
    );
    if let Some(sr) = sr {
        push(
            "intrinsic => subtransversal",
            !f.intrinsic || sr > 0.0,
            format!("intrinsic {}, sr = {sr:.6}", f.intrinsic),
        );
        if rep.chip.checkable && sr > tol {
            push(
                "subtransversal => CHIP",
                rep.chip.verdict.is_true(),
                format!("sr = {sr:.6}, inclusion {:?}", rep.chip.verdict.holds),
            );
        }
        if let Some(sf) = num(&rep.svm.sr_f) {
            let holds = if sr.is_infinite() { sf.is_infinite() } else { (sf - sr).abs() < tol };
            push("sr[F] = sr", holds, format!("sr[F] = {sf:.6}, sr = {sr:.6}"));
        }
    }
    if let Some(h) = rep.svm.f3mod {
        push("F3Mod sandwich", h, format!("sr[G] = {:?}", rep.svm.sr_g.value));
    }
    if let Some(h) = rep.svm.f3mod2 {
        push("F3Mod2 sandwich", h, format!("r[G] = {:?}", rep.svm.r_g.estimate.value));
    }
    out
}
