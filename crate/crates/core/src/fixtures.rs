//! Reference scenarios with known answers, shared by the test suites and
//! the `verify` command.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use nalgebra::DVector;

use crate::elemental::LadderConfig;
use crate::error::Result;
use crate::sets::{Point, Quadric, QuadricSystem, SetSpec};
use crate::transversal::PairScenario;

pub const DEFAULT_BUDGET: usize = 2000;

pub fn pt(v: &[f64]) -> Point {
    DVector::from_column_slice(v)
}

fn line(p: &[f64], d: &[f64]) -> SetSpec {
    SetSpec::line(pt(p), pt(d)).expect("valid line")
}

fn origin(n: usize) -> SetSpec {
    SetSpec::point(DVector::zeros(n)).expect("valid point")
}

/// Union of the two coordinate axes through `c`.
pub fn cross_at(c: &[f64]) -> SetSpec {
    SetSpec::union(vec![line(c, &[1.0, 0.0]), line(c, &[0.0, 1.0])]).expect("valid union")
}

/// Unit circle as an implicit manifold.
pub fn circle_manifold(reference: &[f64]) -> SetSpec {
    let sys = QuadricSystem {
        dim: 2,
        equations: vec![Quadric::sphere(&pt(&[0.0, 0.0]), 1.0)],
    };
    SetSpec::manifold(Arc::new(sys), pt(reference)).expect("valid manifold")
}

/// The double quarter-disk A and the thin wedge B of the half-disk example.
pub fn half_disk_pair() -> (SetSpec, SetSpec) {
    let o = pt(&[0.0, 0.0]);
    let s = FRAC_1_SQRT_2;
    let a = SetSpec::union(vec![
        SetSpec::sector(o.clone(), 1.0, &[pt(&[s, -s])]).expect("sector"),
        SetSpec::sector(o.clone(), 1.0, &[pt(&[s, s])]).expect("sector"),
    ])
    .expect("union");
    let b = SetSpec::sector(o, 1.0, &[pt(&[-1.0, 1.0]), pt(&[1.0, -2.0])]).expect("sector");
    (a, b)
}

#[derive(Debug, Clone)]
pub struct PairFixture {
    pub name: &'static str,
    /// Both sets are linear subspaces through x̄.
    pub subspaces: bool,
    pub scenario: PairScenario,
}

#[allow(clippy::too_many_arguments)]
fn pair(
    name: &'static str,
    subspaces: bool,
    a: SetSpec,
    b: SetSpec,
    xbar: &[f64],
    intersection: SetSpec,
    delta: f64,
    budget: usize,
    seed: u64,
) -> Result<PairFixture> {
    Ok(PairFixture {
        name,
        subspaces,
        scenario: PairScenario::new(a, b, pt(xbar), intersection, delta, budget, seed)?,
    })
}

/// E5: the x-axis and the 45° line through the origin.
pub fn e5(budget: usize, seed: u64) -> PairScenario {
    PairScenario::new(line(&[0.0, 0.0], &[1.0, 0.0]), line(&[0.0, 0.0], &[1.0, 1.0]), pt(&[0.0, 0.0]), origin(2), 1.0, budget, seed)
        .expect("valid scenario")
}

/// E3/E4: A = B = the x-axis.
pub fn e3(budget: usize, seed: u64) -> PairScenario {
    let l = line(&[0.0, 0.0], &[1.0, 0.0]);
    PairScenario::new(l.clone(), l.clone(), pt(&[0.0, 0.0]), l, 1.0, budget, seed).expect("valid scenario")
}

/// The twenty-scenario pair battery.
pub fn pair_battery(budget: usize, seed: u64) -> Result<Vec<PairFixture>> {
    let o2 = [0.0, 0.0];
    let o3 = [0.0, 0.0, 0.0];
    let xaxis = || line(&o2, &[1.0, 0.0]);
    let diag = || line(&o2, &[1.0, 1.0]);
    let lower = || SetSpec::half_space(pt(&[0.0, 1.0]), 0.0).expect("half-space");
    let left = || SetSpec::half_space(pt(&[1.0, 0.0]), 0.0).expect("half-space");
    let quadrant = || SetSpec::polyhedron(&[(pt(&[0.0, 1.0]), 0.0), (pt(&[1.0, 0.0]), 0.0)]).expect("polyhedron");
    let unit_sphere2 = || SetSpec::sphere(pt(&o2), 1.0).expect("sphere");
    let at10 = || SetSpec::point(pt(&[1.0, 0.0])).expect("point");
    let plane = |d1: &[f64], d2: &[f64]| SetSpec::affine(pt(&o3), &[pt(d1), pt(d2)]).expect("plane");
    let x1axis3 = || line(&o3, &[1.0, 0.0, 0.0]);
    let (hd_a, hd_b) = half_disk_pair();
    let half_disk_meet = SetSpec::sector(pt(&o2), 1.0, &[pt(&[1.0, -1.0]), pt(&[-1.0, 1.0]), pt(&[-1.0, -1.0])])?;
    let ray = SetSpec::polyhedron(&[
        (pt(&[1.0, -1.0]), 0.0),
        (pt(&[-1.0, 1.0]), 0.0),
        (pt(&[0.0, 1.0]), 0.0),
    ])?;
    let segment = SetSpec::polyhedron(&[
        (pt(&[0.0, 1.0]), 0.0),
        (pt(&[0.0, -1.0]), 0.0),
        (pt(&[1.0, 0.0]), 1.0),
        (pt(&[-1.0, 0.0]), 1.0),
    ])?;
    let sphere3 = SetSpec::sphere(pt(&o3), 1.0)?;
    let equator = SetSpec::manifold(
        Arc::new(QuadricSystem {
            dim: 3,
            equations: vec![Quadric::sphere(&pt(&o3), 1.0), Quadric::linear(pt(&[0.0, 0.0, 1.0]), 0.0)],
        }),
        pt(&[1.0, 0.0, 0.0]),
    )?;
    let h = 3f64.sqrt() / 2.0;
    let d = 0.5;
    Ok(vec![
        PairFixture { name: "e5", subspaces: true, scenario: e5(budget, seed) },
        PairFixture { name: "e3", subspaces: true, scenario: e3(budget, seed) },
        pair("orthogonal-lines", true, xaxis(), line(&o2, &[0.0, 1.0]), &o2, origin(2), 1.0, budget, seed)?,
        pair(
            "e2-interior",
            false,
            SetSpec::ball(pt(&o2), 1.0)?,
            SetSpec::ball(pt(&o2), 2.0)?,
            &o2,
            SetSpec::ball(pt(&o2), 1.0)?,
            d,
            budget,
            seed,
        )?,
        pair("half-planes-corner", false, lower(), left(), &o2, quadrant(), d, budget, seed)?,
        pair("half-planes-interior", false, lower(), left(), &[-1.0, -1.0], quadrant(), d, budget, seed)?,
        pair("cross-diagonal", false, cross_at(&o2), diag(), &o2, origin(2), d, budget, seed)?,
        pair("cross-xaxis", false, cross_at(&o2), xaxis(), &o2, xaxis(), d, budget, seed)?,
        pair("circle-tangent", false, unit_sphere2(), line(&[1.0, 0.0], &[0.0, 1.0]), &[1.0, 0.0], at10(), d, budget, seed)?,
        pair("circle-secant", false, unit_sphere2(), xaxis(), &[1.0, 0.0], at10(), d, budget, seed)?,
        pair(
            "orthogonal-planes",
            true,
            plane(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]),
            plane(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]),
            &o3,
            x1axis3(),
            1.0,
            budget,
            seed,
        )?,
        pair(
            "oblique-planes",
            true,
            plane(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]),
            plane(&[1.0, 0.0, 0.0], &[0.0, 1.0, 1.0]),
            &o3,
            x1axis3(),
            1.0,
            budget,
            seed,
        )?,
        pair(
            "line-plane",
            true,
            line(&o3, &[1.0, 1.0, 1.0]),
            plane(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]),
            &o3,
            origin(3),
            1.0,
            budget,
            seed,
        )?,
        pair("halfplane-diagonal", false, lower(), diag(), &o2, ray, d, budget, seed)?,
        pair(
            "ball-tangent-halfplane",
            false,
            SetSpec::ball(pt(&[0.0, 1.0]), 1.0)?,
            lower(),
            &o2,
            origin(2),
            d,
            budget,
            seed,
        )?,
        pair("ball-xaxis", false, SetSpec::ball(pt(&o2), 1.0)?, xaxis(), &[1.0, 0.0], segment, d, budget, seed)?,
        pair(
            "sphere-plane",
            false,
            sphere3,
            plane(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]),
            &[1.0, 0.0, 0.0],
            equator,
            d,
            budget,
            seed,
        )?,
        pair(
            "circle-manifold-line",
            false,
            circle_manifold(&[h, 0.5]),
            line(&[0.0, 0.5], &[1.0, 0.0]),
            &[h, 0.5],
            SetSpec::point(pt(&[h, 0.5]))?,
            0.2,
            budget,
            seed,
        )?,
        pair("half-disk", false, hd_a, hd_b, &o2, half_disk_meet, d, budget, seed)?,
        pair(
            "cross-off-origin",
            false,
            cross_at(&[2.0, 0.0]),
            line(&[2.0, 0.0], &[0.0, 1.0]),
            &[2.0, 0.0],
            line(&[2.0, 0.0], &[0.0, 1.0]),
            d,
            budget,
            seed,
        )?,
    ])
}

/// A stated ladder classification: rung name and expected verdict.
pub type Expectation = (&'static str, bool);

#[derive(Debug, Clone)]
pub struct LadderFixture {
    pub name: &'static str,
    pub set: SetSpec,
    pub xbar: Point,
    pub config: LadderConfig,
    pub expected: Vec<Expectation>,
}

const ALL_TRUE: [Expectation; 9] = [
    ("convex", true),
    ("prox_regular", true),
    ("super_regular", true),
    ("clarke", true),
    ("eps_delta_regular", true),
    ("eps_delta_subregular", true),
    ("holder", true),
    ("elemental_subregular", true),
    ("elemental_regular", true),
];

/// The seven-set ladder battery.
pub fn ladder_battery(budget: usize, seed: u64) -> Result<Vec<LadderFixture>> {
    let cfg = LadderConfig {
        budget,
        seed,
        ..LadderConfig::default()
    };
    let o2 = pt(&[0.0, 0.0]);
    let (hd_a, hd_b) = half_disk_pair();
    Ok(vec![
        LadderFixture {
            name: "ball",
            set: SetSpec::ball(o2.clone(), 1.0)?,
            xbar: pt(&[1.0, 0.0]),
            config: cfg.clone(),
            expected: ALL_TRUE.to_vec(),
        },
        LadderFixture {
            name: "half-space",
            set: SetSpec::half_space(pt(&[0.0, 1.0]), 0.0)?,
            xbar: o2.clone(),
            config: cfg.clone(),
            expected: ALL_TRUE.to_vec(),
        },
        LadderFixture {
            name: "quadrant",
            set: SetSpec::polyhedron(&[(pt(&[0.0, 1.0]), 0.0), (pt(&[1.0, 0.0]), 0.0)])?,
            xbar: o2.clone(),
            config: cfg.clone(),
            expected: ALL_TRUE.to_vec(),
        },
        LadderFixture {
            name: "circle",
            set: SetSpec::sphere(o2.clone(), 1.0)?,
            xbar: pt(&[1.0, 0.0]),
            config: cfg.clone(),
            expected: vec![
                ("convex", false),
                ("prox_regular", true),
                ("super_regular", true),
                ("clarke", true),
                ("eps_delta_regular", true),
                ("eps_delta_subregular", true),
                ("holder", true),
                ("elemental_regular", true),
            ],
        },
        LadderFixture {
            name: "cross",
            set: cross_at(&[0.0, 0.0]),
            xbar: o2.clone(),
            config: cfg.clone(),
            expected: vec![
                ("convex", false),
                ("prox_regular", false),
                ("super_regular", false),
                ("clarke", false),
                ("eps_delta_subregular", true),
                ("holder", true),
                ("elemental_subregular", true),
            ],
        },
        LadderFixture {
            name: "cross-off-origin",
            set: cross_at(&[0.0, 0.0]),
            xbar: pt(&[2.0, 0.0]),
            config: cfg.clone(),
            expected: vec![
                ("clarke", true),
                ("super_regular", true),
                ("elemental_regular", true),
                ("eps_delta_subregular", true),
            ],
        },
        LadderFixture {
            name: "half-disk",
            set: hd_a,
            xbar: o2,
            config: LadderConfig {
                relative: Some(hd_b.clone()),
                restrict: Some(hd_b),
                ..cfg
            },
            expected: vec![("convex", false), ("elemental_subregular", true), ("holder", true)],
        },
    ])
}

/// Verdict of a named rung, None if the name is unknown.
pub fn rung_holds(r: &crate::elemental::LadderReport, name: &str) -> Option<Option<bool>> {
    let rung = match name {
        "convex" => &r.convex,
        "prox_regular" => &r.prox_regular,
        "super_regular" => &r.super_regular,
        "clarke" => &r.clarke,
        "eps_delta_regular" => &r.eps_delta_regular,
        "eps_delta_subregular" => &r.eps_delta_subregular,
        "holder" => &r.holder,
        "elemental_subregular" => &r.elemental_subregular,
        "elemental_regular" => &r.elemental_regular,
        _ => return None,
    };
    Some(rung.verdict.holds)
}

/// Two random linear subspaces of R^n through the origin, with their exact
/// intersection. Dimensions are drawn from 1..n so that each set is proper.
pub fn random_subspace_pair(n: usize, budget: usize, seed: u64) -> PairScenario {
    use rand::Rng;
    let mut g = crate::rng::stream(seed, 0);
    let mut pick = |k: usize| -> Vec<Point> { (0..k).map(|_| crate::rng::gaussian(&mut g, n)).collect() };
    let mut dims = crate::rng::stream(seed, 1);
    let k1 = dims.random_range(1..n);
    let k2 = dims.random_range(1..n);
    let o = DVector::zeros(n);
    let a = SetSpec::affine(o.clone(), &pick(k1)).expect("subspace");
    let b = SetSpec::affine(o.clone(), &pick(k2)).expect("subspace");
    let meet = match (&a, &b) {
        (SetSpec::Affine { basis: b1, .. }, SetSpec::Affine { basis: b2, .. }) => crate::cones::subspace_intersection(b1, b2),
        _ => unreachable!(),
    };
    let dirs: Vec<Point> = meet.column_iter().map(|c| c.into_owned()).collect();
    let c = SetSpec::affine(o.clone(), &dirs).expect("subspace");
    PairScenario::new(a, b, o, c, 1.0, budget, seed).expect("valid scenario")
}

/// Two random distinct lines through the origin of R^n.
pub fn random_line_pair(n: usize, budget: usize, seed: u64) -> PairScenario {
    let mut g = crate::rng::stream(seed, 2);
    let o: Point = DVector::zeros(n);
    let a = SetSpec::line(o.clone(), crate::rng::unit_vector(&mut g, n)).expect("line");
    let b = SetSpec::line(o.clone(), crate::rng::unit_vector(&mut g, n)).expect("line");
    PairScenario::new(a, b, o.clone(), SetSpec::point(o).expect("point"), 1.0, budget, seed).expect("valid scenario")
}
