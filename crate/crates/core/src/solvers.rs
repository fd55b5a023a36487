//! Alternating projections and Douglas–Rachford on a pair scenario, with
//! traces, linear-rate fits and a hypothesis-versus-rate experiment.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elemental::{self, Relative};
use crate::error::{RegError, Result};
use crate::estimate::Value;
use crate::rng;
use crate::sets::{Point, ProjectOptions, SetSpec};
use crate::transversal::{self, PairScenario, SAMPLING_TOL};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Fraction of the trace dropped before the rate fit.
pub const DEFAULT_WINDOW_DROP: f64 = 0.2;
/// Fitted rates at or above this are reported as non-contractive.
pub const NON_CONTRACTIVE: f64 = 0.999;
const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ap,
    Dr,
}

/// How a point is picked from a multi-valued projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum Selection {
    Lexicographic,
    Random { seed: u64 },
    NearestToPrevious,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason", content = "detail")]
pub enum Termination {
    /// Step gap (AP) or shadow distance to A ∩ B (DR) below tolerance.
    Converged,
    MaxIter,
    /// A projection failed; the trace holds the iterates before it.
    Failed(String),
}

/// Iterates with per-iterate diagnostics. For AP the monitored point is the
/// iterate itself (a point of A after the first cycle); for DR it is the
/// shadow P_A(x_k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub selection: Selection,
    pub iterates: Vec<Vec<f64>>,
    pub shadows: Vec<Vec<f64>>,
    pub d_a: Vec<f64>,
    pub d_b: Vec<f64>,
    /// Distance of the monitored point to A ∩ B.
    pub d_int: Vec<f64>,
    /// ‖x_{k+1} − x_k‖, zero for the last iterate.
    pub gaps: Vec<f64>,
    pub termination: Termination,
}

impl Trace {
    fn new(algorithm: Algorithm, selection: Selection) -> Self {
        Trace {
            algorithm,
            selection,
            iterates: Vec::new(),
            shadows: Vec::new(),
            d_a: Vec::new(),
            d_b: Vec::new(),
            d_int: Vec::new(),
            gaps: Vec::new(),
            termination: Termination::MaxIter,
        }
    }

    fn record(&mut self, s: &PairScenario, x: &Point, shadow: &Point) -> Result<()> {
        if let Some(prev) = self.iterates.last() {
            let gap = (x - Point::from_column_slice(prev)).norm();
            if let Some(g) = self.gaps.last_mut() {
                *g = gap;
            }
        }
        self.d_a.push(s.a.distance(shadow)?);
        self.d_b.push(s.b.distance(shadow)?);
        self.d_int.push(s.intersection.distance(shadow)?);
        self.iterates.push(x.as_slice().to_vec());
        self.shadows.push(shadow.as_slice().to_vec());
        self.gaps.push(0.0);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }
}

/// A nearest point of S to x under the selection rule.
pub fn select(s: &SetSpec, x: &Point, prev: &Point, rule: Selection, k: usize) -> Result<Point> {
    match rule {
        Selection::Lexicographic => Ok(s.project(x)?.first().clone()),
        Selection::Random { seed } => {
            let opts = ProjectOptions {
                representatives: 8,
                seed: rng::derive(seed, k as u64),
            };
            let res = s.project_with(x, &opts)?;
            let i = rng::stream(seed, k as u64).random_range(0..res.points.len());
            Ok(res.points[i].clone())
        }
        Selection::NearestToPrevious => {
            let res = s.project(x)?;
            let best = res
                .points
                .iter()
                .min_by(|p, q| (*p - prev).norm().total_cmp(&(*q - prev).norm()))
                .expect("projection returns at least one point");
            Ok(best.clone())
        }
    }
}

/// x_{k+1} ∈ P_A(P_B(x_k)); stops when the step gap drops below `tol`.
pub fn alternating_projections(
    s: &PairScenario,
    x0: &Point,
    max_iter: usize,
    tol: f64,
    selection: Selection,
) -> Result<Trace> {
    check_start(s, x0)?;
    let mut t = Trace::new(Algorithm::Ap, selection);
    let mut x = x0.clone();
    t.record(s, &x, &x)?;
    for k in 0..max_iter {
        let step = select(&s.b, &x, &x, selection, 2 * k)
            .and_then(|y| select(&s.a, &y, &x, selection, 2 * k + 1));
        let next = match step {
            Ok(p) => p,
            Err(e) => {
                t.termination = Termination::Failed(e.to_string());
                return Ok(t);
            }
        };
        let gap = (&next - &x).norm();
        x = next;
        t.record(s, &x, &x)?;
        if gap < tol {
            t.termination = Termination::Converged;
            return Ok(t);
        }
    }
    Ok(t)
}

/// x_{k+1} = ½(x_k + R_B(R_A(x_k))) with R_C = 2P_C − I; the shadow
/// P_A(x_k) is monitored and the run stops once it is within `tol` of A ∩ B
/// or the governing sequence stalls.
pub fn douglas_rachford(
    s: &PairScenario,
    x0: &Point,
    max_iter: usize,
    tol: f64,
    selection: Selection,
) -> Result<Trace> {
    check_start(s, x0)?;
    let mut t = Trace::new(Algorithm::Dr, selection);
    let mut x = x0.clone();
    let mut prev_shadow = x0.clone();
    for k in 0..=max_iter {
        let pa = match select(&s.a, &x, &prev_shadow, selection, 2 * k) {
            Ok(p) => p,
            Err(e) => {
                t.termination = Termination::Failed(e.to_string());
                return Ok(t);
            }
        };
        t.record(s, &x, &pa)?;
        let d = *t.d_int.last().expect("recorded");
        if d < tol {
            t.termination = Termination::Converged;
            return Ok(t);
        }
        if k == max_iter {
            break;
        }
        let ra = &pa * 2.0 - &x;
        let pb = match select(&s.b, &ra, &pa, selection, 2 * k + 1) {
            Ok(p) => p,
            Err(e) => {
                t.termination = Termination::Failed(e.to_string());
                return Ok(t);
            }
        };
        let rb = &pb * 2.0 - &ra;
        let next = (&x + rb) / 2.0;
        let gap = (&next - &x).norm();
        x = next;
        prev_shadow = pa;
        if gap < tol * 1e-3 {
            // Stationary governing sequence: record the final state.
            let pa = select(&s.a, &x, &prev_shadow, selection, 2 * k + 2)?;
            t.record(s, &x, &pa)?;
            t.termination = Termination::Converged;
            return Ok(t);
        }
    }
    t.termination = Termination::MaxIter;
    Ok(t)
}

fn check_start(s: &PairScenario, x0: &Point) -> Result<()> {
    if x0.len() != s.dim() {
        return Err(RegError::DimensionMismatch {
            expected: s.dim(),
            got: x0.len(),
        });
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(RegError::InvalidArgument("start point has non-finite entries".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    /// Coefficient of determination of the log-linear fit.
    pub r_squared: f64,
    /// First and last iterate index used.
    pub window: (usize, usize),
    pub non_contractive: bool,
}

/// Least-squares fit of log d_k against k over the tail of the positive
/// prefix of `d` (the part before an exact zero), after dropping the first
/// `drop` fraction.
pub fn fit_rate(d: &[f64], drop: f64) -> Result<RateFit> {
    let prefix = d.iter().take_while(|v| **v > 0.0 && v.is_finite()).count();
    let start = (prefix as f64 * drop.clamp(0.0, 0.95)).floor() as usize;
    let usable = prefix.saturating_sub(start);
    if usable < MIN_FIT_POINTS {
        return Err(RegError::InsufficientTrace { usable });
    }
    let ks: Vec<f64> = (start..prefix).map(|k| k as f64).collect();
    let ys: Vec<f64> = d[start..prefix].iter().map(|v| v.ln()).collect();
    let m = ks.len() as f64;
    let kbar = ks.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxy: f64 = ks.iter().zip(&ys).map(|(k, y)| (k - kbar) * (y - ybar)).sum();
    let sxx: f64 = ks.iter().map(|k| (k - kbar).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * kbar;
    let ss_res: f64 = ks
        .iter()
        .zip(&ys)
        .map(|(k, y)| (y - intercept - slope * k).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ybar).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let rate = slope.exp();
    Ok(RateFit {
        rate,
        intercept,
        r_squared,
        window: (start, prefix - 1),
        non_contractive: rate >= NON_CONTRACTIVE,
    })
}

/// Rate fit of a trace on its distances to A ∩ B.
pub fn fit_linear_rate(t: &Trace, window_drop: f64) -> Result<RateFit> {
    fit_rate(&t.d_int, window_drop)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub algorithm: Algorithm,
    pub holds: bool,
    pub detail: String,
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub start: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub final_distance: f64,
    /// Reached A ∩ B (to tolerance) before a rate could be fitted.
    pub finite: bool,
    pub fit: Option<RateFit>,
}

impl RunSummary {
    /// Linear convergence with rate below 1 (finite convergence included).
    pub fn contractive(&self) -> bool {
        self.finite || self.fit.as_ref().is_some_and(|f| !f.non_contractive)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub starts: usize,
    /// Starts are drawn from the ball of radius `start_radius · δ` around x̄.
    pub start_radius: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub selection: Selection,
    /// ε threshold for the regularity hypotheses.
    pub eps: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            starts: 4,
            start_radius: 0.5,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            selection: Selection::Lexicographic,
            eps: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub hypotheses: Vec<Hypothesis>,
    pub runs: Vec<RunSummary>,
    /// Every run of an algorithm with a satisfied hypothesis contracts.
    pub consistent: bool,
    pub inconsistencies: Vec<String>,
}

/// Summarize a finished trace.
pub fn summarize(t: &Trace, start: &Point, tol: f64) -> RunSummary {
    let final_distance = t.d_int.last().copied().unwrap_or(f64::INFINITY);
    let fit = fit_linear_rate(t, DEFAULT_WINDOW_DROP).ok();
    // A run that lands on A ∩ B within a handful of steps has nothing to fit.
    let finite = final_distance <= tol.max(1e-10) && fit.is_none();
    RunSummary {
        algorithm: t.algorithm,
        start: start.as_slice().to_vec(),
        iterations: t.len().saturating_sub(1),
        termination: t.termination.clone(),
        final_distance,
        finite,
        fit,
    }
}

/// Seeded starting points in the ball of radius `radius` around x̄.
pub fn starts(s: &PairScenario, count: usize, radius: f64, seed: u64) -> Vec<Point> {
    (0..count)
        .map(|i| &s.xbar + rng::in_ball(&mut rng::stream(seed, i as u64), s.dim(), radius))
        .collect()
}

fn smooth(s: &SetSpec) -> bool {
    matches!(s, SetSpec::Affine { .. } | SetSpec::Sphere { .. } | SetSpec::Manifold(_))
}

fn below(e: &crate::estimate::Estimate, eps: f64) -> bool {
    e.get().is_some_and(|v| v <= eps + 1e-9)
}

/// Which hypotheses of the AP and DR convergence results hold on the
/// scenario, evaluated with the estimators of the other modules.
pub fn hypotheses(s: &PairScenario, eps: f64) -> Result<Vec<Hypothesis>> {
    let seed = rng::derive(s.seed, 40);
    let budget = s.budget.min(400);
    let d = s.delta;
    let tc = transversal::transversality_condition_check(s)?.is_true();
    let sr = transversal::sr_metric_estimate(s)?;
    let subtransversal = match sr.value {
        Value::Finite(v) => v > SAMPLING_TOL,
        Value::Saturated => true,
        Value::Vacuous => false,
    };
    let cq = transversal::qualification_sup(s)?;
    let separable = transversal::separable_sup(s)?;
    let intrinsic = transversal::intrinsic_transversality_estimate(s, crate::cones::NormalKind::Limiting)?;
    let below_one = |e: &crate::estimate::Estimate| match e.value {
        Value::Finite(v) => v < 1.0 - transversal::FLAG_MARGIN,
        Value::Vacuous => true,
        Value::Saturated => false,
    };

    let a_super = elemental::super_regularity_delta(&s.a, &s.xbar, eps, budget, rng::derive(seed, 1))?
        .delta
        .is_some();
    let a_breg = elemental::eps_delta_regularity_modulus(&s.a, Some(&s.b), &s.xbar, d, budget, rng::derive(seed, 2))?;
    let rel_c = Relative::Set(s.intersection.clone());
    let sub_rel = |set: &SetSpec, sd: u64| {
        elemental::eps_delta_subregularity_modulus(set, None, &rel_c, &s.xbar, d, budget, sd)
    };
    let a_sub_c = sub_rel(&s.a, rng::derive(seed, 3))?;
    let b_sub_c = sub_rel(&s.b, rng::derive(seed, 4))?;
    let sub_pt = |set: &SetSpec, sd: u64| {
        elemental::eps_delta_subregularity_modulus(set, None, &Relative::Point, &s.xbar, d, budget, sd)
    };
    let a_sub = sub_pt(&s.a, rng::derive(seed, 5))?;
    let b_sub = sub_pt(&s.b, rng::derive(seed, 6))?;
    let holder = elemental::holder_regularity_check(&s.a, &s.b, &s.xbar, 0.0, eps * eps, d, budget, rng::derive(seed, 7))?;

    let intrinsic_flag = match intrinsic.value {
        Value::Finite(v) => v > transversal::FLAG_MARGIN,
        _ => true,
    };
    let h = |name: &str, algorithm, holds: bool, detail: String| Hypothesis {
        name: name.into(),
        algorithm,
        holds,
        detail,
    };
    Ok(vec![
        h(
            "AP(i) smooth manifolds, transversal",
            Algorithm::Ap,
            smooth(&s.a) && smooth(&s.b) && tc,
            format!("smooth {}/{}, transversality {tc}", smooth(&s.a), smooth(&s.b)),
        ),
        h(
            "AP(ii) A super-regular, transversality condition",
            Algorithm::Ap,
            a_super && tc,
            format!("super-regular {a_super}, transversality {tc}"),
        ),
        h(
            "AP(iii) A (B,eps,delta)-regular, (A,B)-qualification",
            Algorithm::Ap,
            below(&a_breg, eps) && below_one(&cq),
            format!("modulus {:?}, qualification sup {:?}", a_breg.value, cq.value),
        ),
        h(
            "AP(iv) A, B (eps,delta)-subregular relative to A∩B, subtransversal",
            Algorithm::Ap,
            below(&a_sub_c, eps) && below(&b_sub_c, eps) && subtransversal,
            format!("moduli {:?}/{:?}, sr {:?}", a_sub_c.value, b_sub_c.value, sr.value),
        ),
        h(
            "AP(v) intrinsically transversal",
            Algorithm::Ap,
            intrinsic_flag,
            format!("intrinsic inf {:?}", intrinsic.value),
        ),
        h(
            "AP(vi) A 0-Hölder regular relative to B, separable",
            Algorithm::Ap,
            holder.is_true() && below_one(&separable),
            format!("hölder {:?}, separable sup {:?}", holder.holds, separable.value),
        ),
        h(
            "DR(i) transversality condition, B affine, A (eps,delta)-subregular relative to A∩B",
            Algorithm::Dr,
            tc && matches!(s.b, SetSpec::Affine { .. }) && below(&a_sub_c, eps),
            format!("transversality {tc}, modulus {:?}", a_sub_c.value),
        ),
        h(
            "DR(ii) transversality condition, A and B (eps,delta)-subregular",
            Algorithm::Dr,
            tc && below(&a_sub, eps) && below(&b_sub, eps),
            format!("transversality {tc}, moduli {:?}/{:?}", a_sub.value, b_sub.value),
        ),
    ])
}

/// Evaluate the hypotheses, run both solvers from a fan of starts and check
/// that a satisfied hypothesis comes with contracting runs.
pub fn convergence_experiment(s: &PairScenario, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let hyps = hypotheses(s, cfg.eps)?;
    let xs = starts(s, cfg.starts, cfg.start_radius * s.delta, rng::derive(cfg.seed, 41));
    let jobs: Vec<(Algorithm, Point)> = [Algorithm::Ap, Algorithm::Dr]
        .into_iter()
        .flat_map(|a| xs.iter().map(move |x| (a, x.clone())))
        .collect();
    let runs: Vec<Result<RunSummary>> = jobs
        .par_iter()
        .map(|(alg, x0)| {
            let t = match alg {
                Algorithm::Ap => alternating_projections(s, x0, cfg.max_iter, cfg.tol, cfg.selection)?,
                Algorithm::Dr => douglas_rachford(s, x0, cfg.max_iter, cfg.tol, cfg.selection)?,
            };
            Ok(summarize(&t, x0, cfg.tol))
        })
        .collect();
    let runs: Vec<RunSummary> = runs.into_iter().collect::<Result<_>>()?;
    let mut inconsistencies = Vec::new();
    for alg in [Algorithm::Ap, Algorithm::Dr] {
        let Some(h) = hyps.iter().find(|h| h.algorithm == alg && h.holds) else {
            continue;
        };
        for r in runs.iter().filter(|r| r.algorithm == alg && !r.contractive()) {
            inconsistencies.push(format!(
                "{} holds but {:?} from {:?} has rate {:?} ({:?})",
                h.name,
                alg,
                r.start,
                r.fit.as_ref().map(|f| f.rate),
                r.termination
            ));
        }
    }
    Ok(ExperimentReport {
        hypotheses: hyps,
        consistent: inconsistencies.is_empty(),
        inconsistencies,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_sequence_fits_exactly() {
        let d: Vec<f64> = (0..40).map(|k| 0.5f64.powi(k)).collect();
        let f = fit_rate(&d, 0.2).unwrap();
        assert!((f.rate - 0.5).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(!f.non_contractive);
    }

    #[test]
    fn plateau_is_non_contractive() {
        let d: Vec<f64> = (0..50).map(|k| 1.0 + 0.01 * ((k * 7919) % 13) as f64 / 13.0).collect();
        assert!(fit_rate(&d, 0.2).unwrap().non_contractive);
    }

    #[test]
    fn extinction_fits_prefix_or_reports_short_trace() {
        let mut d: Vec<f64> = (0..30).map(|k| 0.25f64.powi(k)).collect();
        d.extend([0.0, 0.0]);
        assert!((fit_rate(&d, 0.2).unwrap().rate - 0.25).abs() < 1e-12);
        assert!(matches!(
            fit_rate(&[1.0, 0.5, 0.0], 0.2),
            Err(RegError::InsufficientTrace { usable: 2 })
        ));
    }
}
