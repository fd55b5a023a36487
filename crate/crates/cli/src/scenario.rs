//! Scenario files.
//!
//! A scenario is a plain text file with one `key value...` statement per
//! line. Blank lines and `#` comments are ignored. `dim` must come before
//! any statement that carries coordinates. See the README for the full
//! grammar; [`ScenarioFile::to_text`] writes the canonical form back out.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use regkit::elemental::LadderConfig;
use regkit::sets::{Point, Quadric, QuadricSystem, SetSpec};
use regkit::transversal::PairScenario;

use crate::error::{CliError, Result};

/// Largest ambient dimension a scenario may declare.
pub const MAX_DIM: usize = 32;

pub const DEFAULT_DELTA: f64 = 0.5;
pub const DEFAULT_BUDGET: usize = 2000;

/// Names of the three sets every scenario must define.
pub const SET_A: &str = "A";
pub const SET_B: &str = "B";
pub const SET_MEET: &str = "intersection";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Analysis {
    Analyze,
    Classify,
    Solve,
}

impl Analysis {
    pub fn as_str(self) -> &'static str {
        match self {
            Analysis::Analyze => "analyze",
            Analysis::Classify => "classify",
            Analysis::Solve => "solve",
        }
    }
}

/// One scalar equation of a manifold.
#[derive(Debug, Clone, PartialEq)]
pub enum Equation {
    /// ||x - center||² - radius² = 0
    Sphere { center: Vec<f64>, radius: f64 },
    /// <b, x> + c = 0
    Linear { b: Vec<f64>, c: f64 },
    /// x'Qx + <b, x> + c = 0, Q row-major
    Quadric { q: Vec<f64>, b: Vec<f64>, c: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Whole,
    Point { at: Vec<f64> },
    Line { point: Vec<f64>, direction: Vec<f64> },
    Affine { offset: Vec<f64>, directions: Vec<Vec<f64>> },
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Sphere { center: Vec<f64>, radius: f64 },
    Polyhedron { normals: Vec<Vec<f64>>, offsets: Vec<f64> },
    Sector { center: Vec<f64>, radius: f64, facets: Vec<Vec<f64>> },
    Manifold { reference: Vec<f64>, equations: Vec<Equation> },
    Union { members: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetDef {
    pub name: String,
    pub shape: Shape,
}

/// Parsed, syntactically valid scenario. Geometry is checked by [`ScenarioFile::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub name: String,
    pub dim: usize,
    pub sets: Vec<SetDef>,
    pub xbar: Vec<f64>,
    pub delta: f64,
    pub budget: usize,
    pub seed: u64,
    /// ε for the ladder and the convergence hypotheses.
    pub eps: Option<f64>,
    /// Relative set B of the ladder notions (a set name).
    pub relative: Option<String>,
    /// Restricting set A′ of the normal cones in the ladder (a set name).
    pub restrict: Option<String>,
    pub analyses: Vec<Analysis>,
    pub output: Option<String>,
}

/// A scenario with its sets constructed and validated.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub sets: BTreeMap<String, SetSpec>,
    pub pair: PairScenario,
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.file.name
    }

    /// Ladder configuration derived from δ, budget, seed, ε and the
    /// optional relative/restricting sets.
    pub fn ladder_config(&self) -> LadderConfig {
        let d = LadderConfig::default();
        LadderConfig {
            delta: self.pair.delta,
            budget: self.pair.budget,
            seed: self.pair.seed,
            eps: self.file.eps.unwrap_or(d.eps),
            relative: self.file.relative.as_ref().map(|n| self.sets[n].clone()),
            restrict: self.file.restrict.as_ref().map(|n| self.sets[n].clone()),
            ..d
        }
    }
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(CliError::Parse {
        line,
        message: message.into(),
    })
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.len() <= 64 && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
}

fn number(line: usize, s: &str) -> Result<f64> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => err(line, format!("expected a finite number, got {s:?}")),
    }
}

fn vector(line: usize, s: &str, dim: usize) -> Result<Vec<f64>> {
    let v = numbers(line, s)?;
    if v.len() != dim {
        return err(line, format!("expected {dim} coordinates, got {}", v.len()));
    }
    Ok(v)
}

fn numbers(line: usize, s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| number(line, t)).collect()
}

fn vectors(line: usize, s: &str, dim: usize) -> Result<Vec<Vec<f64>>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(|t| vector(line, t, dim)).collect()
}

fn equation(line: usize, s: &str, dim: usize) -> Result<Equation> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["sphere", c, r] => Ok(Equation::Sphere {
            center: vector(line, c, dim)?,
            radius: number(line, r)?,
        }),
        ["linear", b, c] => Ok(Equation::Linear {
            b: vector(line, b, dim)?,
            c: number(line, c)?,
        }),
        ["quadric", q, b, c] => Ok(Equation::Quadric {
            q: vector(line, q, dim * dim)?,
            b: vector(line, b, dim)?,
            c: number(line, c)?,
        }),
        _ => err(line, format!("bad equation {s:?}; expected sphere:C:R, linear:B:C or quadric:Q:B:C")),
    }
}

/// `key=value` parameters of a set statement, each allowed at most once
/// except for the repeatable ones.
struct Params<'a> {
    line: usize,
    map: BTreeMap<&'a str, Vec<&'a str>>,
}

impl<'a> Params<'a> {
    fn new(line: usize, tokens: &[&'a str], allowed: &[&str], repeatable: &[&str]) -> Result<Self> {
        let mut map: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for t in tokens {
            let Some((k, v)) = t.split_once('=') else {
                return err(line, format!("expected key=value, got {t:?}"));
            };
            if !allowed.contains(&k) {
                return err(line, format!("unknown parameter {k:?} (allowed: {})", allowed.join(", ")));
            }
            let e = map.entry(k).or_default();
            if !e.is_empty() && !repeatable.contains(&k) {
                return err(line, format!("parameter {k:?} given twice"));
            }
            e.push(v);
        }
        Ok(Params { line, map })
    }

    fn one(&self, k: &str) -> Result<&'a str> {
        match self.map.get(k) {
            Some(v) => Ok(v[0]),
            None => err(self.line, format!("missing parameter {k:?}")),
        }
    }

    fn all(&self, k: &str) -> &[&'a str] {
        self.map.get(k).map(|v| v.as_slice()).unwrap_or(&[])
    }
}

fn shape(line: usize, variant: &str, tokens: &[&str], dim: usize, known: &[String]) -> Result<Shape> {
    let p = |allowed: &[&str]| Params::new(line, tokens, allowed, &[]);
    Ok(match variant {
        "whole" => {
            p(&[])?;
            Shape::Whole
        }
        "point" => {
            let p = p(&["at"])?;
            Shape::Point { at: vector(line, p.one("at")?, dim)? }
        }
        "line" => {
            let p = p(&["point", "direction"])?;
            Shape::Line {
                point: vector(line, p.one("point")?, dim)?,
                direction: vector(line, p.one("direction")?, dim)?,
            }
        }
        "affine" => {
            let p = p(&["offset", "directions"])?;
            Shape::Affine {
                offset: vector(line, p.one("offset")?, dim)?,
                directions: vectors(line, p.one("directions")?, dim)?,
            }
        }
        "halfspace" => {
            let p = p(&["normal", "offset"])?;
            Shape::HalfSpace {
                normal: vector(line, p.one("normal")?, dim)?,
                offset: number(line, p.one("offset")?)?,
            }
        }
        "ball" | "sphere" => {
            let p = p(&["center", "radius"])?;
            let center = vector(line, p.one("center")?, dim)?;
            let radius = number(line, p.one("radius")?)?;
            if variant == "ball" {
                Shape::Ball { center, radius }
            } else {
                Shape::Sphere { center, radius }
            }
        }
        "polyhedron" => {
            let p = p(&["normals", "offsets"])?;
            let normals = vectors(line, p.one("normals")?, dim)?;
            let offsets = numbers(line, p.one("offsets")?)?;
            if normals.len() != offsets.len() {
                return err(line, format!("{} normals but {} offsets", normals.len(), offsets.len()));
            }
            Shape::Polyhedron { normals, offsets }
        }
        "sector" => {
            let p = p(&["center", "radius", "facets"])?;
            Shape::Sector {
                center: vector(line, p.one("center")?, dim)?,
                radius: number(line, p.one("radius")?)?,
                facets: vectors(line, p.one("facets")?, dim)?,
            }
        }
        "manifold" => {
            let p = Params::new(line, tokens, &["reference", "eq"], &["eq"])?;
            let equations = p.all("eq").iter().map(|e| equation(line, e, dim)).collect::<Result<Vec<_>>>()?;
            if equations.is_empty() {
                return err(line, "manifold needs at least one eq=");
            }
            Shape::Manifold {
                reference: vector(line, p.one("reference")?, dim)?,
                equations,
            }
        }
        "union" => {
            let p = p(&["members"])?;
            let members: Vec<String> = p.one("members")?.split(',').map(str::to_string).collect();
            for m in &members {
                if !known.contains(m) {
                    return err(line, format!("union member {m:?} is not a previously defined set"));
                }
            }
            Shape::Union { members }
        }
        other => return err(line, format!("unknown set variant {other:?}")),
    })
}

/// Parse scenario text. Every key is checked; unknown keys, duplicate keys,
/// coordinate vectors of the wrong length and dangling set references are
/// errors.
pub fn parse(text: &str) -> Result<ScenarioFile> {
    let mut name = None;
    let mut dim: Option<usize> = None;
    let mut sets: Vec<SetDef> = Vec::new();
    let mut xbar = None;
    let mut delta = None;
    let mut budget = None;
    let mut seed = None;
    let mut eps = None;
    let mut relative = None;
    let mut restrict = None;
    let mut analyses = None;
    let mut output = None;
    let mut last = 0;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last = line;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some((&key, rest)) = tokens.split_first() else {
            continue;
        };
        let need_dim = || match dim {
            Some(d) => Ok(d),
            None => err(line, format!("{key} before dim")),
        };
        let single = |what: &str| -> Result<&str> {
            match rest {
                [v] => Ok(*v),
                _ => err(line, format!("{key} takes exactly one {what}")),
            }
        };
        macro_rules! once {
            ($slot:ident, $val:expr) => {{
                if $slot.is_some() {
                    return err(line, format!("{key} given twice"));
                }
                $slot = Some($val);
            }};
        }
        match key {
            "name" => {
                let v = single("identifier")?;
                if !valid_name(v) {
                    return err(line, format!("invalid name {v:?}"));
                }
                once!(name, v.to_string())
            }
            "dim" => {
                let v = single("integer")?;
                let d: usize = v.parse().or_else(|_| err(line, format!("dim must be a positive integer, got {v:?}")))?;
                if d == 0 || d > MAX_DIM {
                    return err(line, format!("dim must be between 1 and {MAX_DIM}, got {d}"));
                }
                once!(dim, d)
            }
            "xbar" => {
                let d = need_dim()?;
                once!(xbar, vector(line, single("point")?, d)?)
            }
            "delta" => {
                let v = number(line, single("number")?)?;
                if v <= 0.0 {
                    return err(line, "delta must be positive");
                }
                once!(delta, v)
            }
            "budget" => {
                let v = single("integer")?;
                let b: usize = v.parse().or_else(|_| err(line, format!("budget must be a positive integer, got {v:?}")))?;
                if b == 0 {
                    return err(line, "budget must be positive");
                }
                once!(budget, b)
            }
            "seed" => {
                let v = single("integer")?;
                once!(seed, v.parse::<u64>().or_else(|_| err(line, format!("seed must be a non-negative integer, got {v:?}")))?)
            }
            "eps" => {
                let v = number(line, single("number")?)?;
                if v < 0.0 {
                    return err(line, "eps must be non-negative");
                }
                once!(eps, v)
            }
            "relative" => once!(relative, single("set name")?.to_string()),
            "restrict" => once!(restrict, single("set name")?.to_string()),
            "output" => once!(output, single("path")?.to_string()),
            "analyses" => {
                if rest.is_empty() {
                    return err(line, "analyses needs at least one of analyze, classify, solve");
                }
                let mut v = Vec::new();
                for t in rest {
                    let a = match *t {
                        "analyze" => Analysis::Analyze,
                        "classify" => Analysis::Classify,
                        "solve" => Analysis::Solve,
                        other => return err(line, format!("unknown analysis {other:?}")),
                    };
                    if v.contains(&a) {
                        return err(line, format!("analysis {t} listed twice"));
                    }
                    v.push(a);
                }
                once!(analyses, v)
            }
            "set" => {
                let d = need_dim()?;
                let [set_name, variant, params @ ..] = rest else {
                    return err(line, "expected: set NAME VARIANT key=value...");
                };
                if !valid_name(set_name) {
                    return err(line, format!("invalid set name {set_name:?}"));
                }
                if sets.iter().any(|s| s.name == *set_name) {
                    return err(line, format!("set {set_name} defined twice"));
                }
                let known: Vec<String> = sets.iter().map(|s| s.name.clone()).collect();
                let shape = shape(line, variant, params, d, &known)?;
                sets.push(SetDef {
                    name: set_name.to_string(),
                    shape,
                });
            }
            other => return err(line, format!("unknown key {other:?}")),
        }
    }

    let end = last + 1;
    let Some(dim) = dim else {
        return err(end, "missing dim");
    };
    let Some(xbar) = xbar else {
        return err(end, "missing xbar");
    };
    for required in [SET_A, SET_B, SET_MEET] {
        if !sets.iter().any(|s| s.name == required) {
            return err(end, format!("missing set {required}"));
        }
    }
    for r in [&relative, &restrict].into_iter().flatten() {
        if !sets.iter().any(|s| &s.name == r) {
            return err(end, format!("unknown set {r:?}"));
        }
    }
    Ok(ScenarioFile {
        name: name.unwrap_or_else(|| "scenario".to_string()),
        dim,
        sets,
        xbar,
        delta: delta.unwrap_or(DEFAULT_DELTA),
        budget: budget.unwrap_or(DEFAULT_BUDGET),
        seed: seed.unwrap_or(0),
        eps,
        relative,
        restrict,
        analyses: analyses.unwrap_or_else(|| vec![Analysis::Analyze]),
        output,
    })
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

fn fmt_vecs(v: &[Vec<f64>]) -> String {
    v.iter().map(|x| fmt_vec(x)).collect::<Vec<_>>().join(";")
}

fn fmt_equation(e: &Equation) -> String {
    match e {
        Equation::Sphere { center, radius } => format!("sphere:{}:{radius}", fmt_vec(center)),
        Equation::Linear { b, c } => format!("linear:{}:{c}", fmt_vec(b)),
        Equation::Quadric { q, b, c } => format!("quadric:{}:{}:{c}", fmt_vec(q), fmt_vec(b)),
    }
}

fn to_point(v: &[f64]) -> Point {
    DVector::from_column_slice(v)
}

impl ScenarioFile {
    /// Canonical text form; `parse(to_text(f)) == f`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name {}", self.name);
        let _ = writeln!(out, "dim {}", self.dim);
        for s in &self.sets {
            let body = match &s.shape {
                Shape::Whole => "whole".to_string(),
                Shape::Point { at } => format!("point at={}", fmt_vec(at)),
                Shape::Line { point, direction } => format!("line point={} direction={}", fmt_vec(point), fmt_vec(direction)),
                Shape::Affine { offset, directions } => {
                    format!("affine offset={} directions={}", fmt_vec(offset), fmt_vecs(directions))
                }
                Shape::HalfSpace { normal, offset } => format!("halfspace normal={} offset={offset}", fmt_vec(normal)),
                Shape::Ball { center, radius } => format!("ball center={} radius={radius}", fmt_vec(center)),
                Shape::Sphere { center, radius } => format!("sphere center={} radius={radius}", fmt_vec(center)),
                Shape::Polyhedron { normals, offsets } => {
                    format!("polyhedron normals={} offsets={}", fmt_vecs(normals), fmt_vec(offsets))
                }
                Shape::Sector { center, radius, facets } => {
                    format!("sector center={} radius={radius} facets={}", fmt_vec(center), fmt_vecs(facets))
                }
                Shape::Manifold { reference, equations } => {
                    let eqs: Vec<String> = equations.iter().map(|e| format!("eq={}", fmt_equation(e))).collect();
                    format!("manifold reference={} {}", fmt_vec(reference), eqs.join(" "))
                }
                Shape::Union { members } => format!("union members={}", members.join(",")),
            };
            let _ = writeln!(out, "set {} {body}", s.name);
        }
        let _ = writeln!(out, "xbar {}", fmt_vec(&self.xbar));
        let _ = writeln!(out, "delta {}", self.delta);
        let _ = writeln!(out, "budget {}", self.budget);
        let _ = writeln!(out, "seed {}", self.seed);
        if let Some(e) = self.eps {
            let _ = writeln!(out, "eps {e}");
        }
        if let Some(r) = &self.relative {
            let _ = writeln!(out, "relative {r}");
        }
        if let Some(r) = &self.restrict {
            let _ = writeln!(out, "restrict {r}");
        }
        let a: Vec<&str> = self.analyses.iter().map(|a| a.as_str()).collect();
        let _ = writeln!(out, "analyses {}", a.join(" "));
        if let Some(o) = &self.output {
            let _ = writeln!(out, "output {o}");
        }
        out
    }

    fn build_set(&self, def: &SetDef, built: &BTreeMap<String, SetSpec>) -> Result<SetSpec> {
        let n = self.dim;
        let set = match &def.shape {
            Shape::Whole => SetSpec::whole(n),
            Shape::Point { at } => SetSpec::point(to_point(at))?,
            Shape::Line { point, direction } => SetSpec::line(to_point(point), to_point(direction))?,
            Shape::Affine { offset, directions } => {
                let dirs: Vec<Point> = directions.iter().map(|d| to_point(d)).collect();
                SetSpec::affine(to_point(offset), &dirs)?
            }
            Shape::HalfSpace { normal, offset } => SetSpec::half_space(to_point(normal), *offset)?,
            Shape::Ball { center, radius } => SetSpec::ball(to_point(center), *radius)?,
            Shape::Sphere { center, radius } => SetSpec::sphere(to_point(center), *radius)?,
            Shape::Polyhedron { normals, offsets } => {
                let rows: Vec<(Point, f64)> = normals.iter().zip(offsets).map(|(a, b)| (to_point(a), *b)).collect();
                SetSpec::polyhedron(&rows)?
            }
            Shape::Sector { center, radius, facets } => {
                let f: Vec<Point> = facets.iter().map(|d| to_point(d)).collect();
                SetSpec::sector(to_point(center), *radius, &f)?
            }
            Shape::Manifold { reference, equations } => {
                let eqs = equations
                    .iter()
                    .map(|e| match e {
                        Equation::Sphere { center, radius } => Quadric::sphere(&to_point(center), *radius),
                        Equation::Linear { b, c } => Quadric::linear(to_point(b), *c),
                        Equation::Quadric { q, b, c } => Quadric {
                            q: DMatrix::from_row_slice(n, n, q),
                            b: to_point(b),
                            c: *c,
                        },
                    })
                    .collect();
                let sys = QuadricSystem { dim: n, equations: eqs };
                SetSpec::manifold(Arc::new(sys), to_point(reference))?
            }
            Shape::Union { members } => SetSpec::union(members.iter().map(|m| built[m].clone()).collect())?,
        };
        Ok(set)
    }

    /// Construct every set and the pair scenario; checks x̄ ∈ A ∩ B and that
    /// the declared intersection lies in both sets.
    pub fn build(&self) -> Result<Scenario> {
        let mut built = BTreeMap::new();
        for def in &self.sets {
            let set = self
                .build_set(def, &built)
                .map_err(|e| CliError::Scenario(format!("set {}: {e}", def.name)))?;
            built.insert(def.name.clone(), set);
        }
        let pair = PairScenario::new(
            built[SET_A].clone(),
            built[SET_B].clone(),
            to_point(&self.xbar),
            built[SET_MEET].clone(),
            self.delta,
            self.budget,
            self.seed,
        )
        .map_err(|e| CliError::Scenario(e.to_string()))?;
        Ok(Scenario {
            file: self.clone(),
            sets: built,
            pair,
        })
    }
}

/// Parse and build in one step.
pub fn load(text: &str) -> Result<Scenario> {
    parse(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    const E5: &str = "\
name e5
dim 2
set A line point=0,0 direction=1,0
set B line point=0,0 direction=1,1
set intersection point at=0,0
xbar 0,0
delta 1
";

    #[test]
    fn parses_and_builds_e5() {
        let s = load(E5).unwrap();
        assert_eq!(s.name(), "e5");
        assert_eq!(s.pair.budget, DEFAULT_BUDGET);
        assert_eq!(s.file.analyses, vec![Analysis::Analyze]);
    }

    #[test]
    fn canonical_text_round_trips() {
        let f = parse(E5).unwrap();
        assert_eq!(parse(&f.to_text()).unwrap(), f);
    }

    #[test]
    fn rejects_unknown_key_with_line_number() {
        let e = parse(&format!("{E5}colour red\n")).unwrap_err();
        assert!(matches!(e, CliError::Parse { line: 8, .. }), "{e}");
    }

    #[test]
    fn rejects_wrong_length_vector() {
        let e = parse(&E5.replace("direction=1,1", "direction=1,1,0")).unwrap_err();
        assert!(e.to_string().contains("expected 2 coordinates"), "{e}");
    }

    #[test]
    fn rejects_xbar_outside_the_sets() {
        let e = load(&E5.replace("xbar 0,0", "xbar 1,0")).unwrap_err();
        assert!(matches!(e, CliError::Scenario(_)), "{e}");
    }

    #[test]
    fn union_members_must_exist() {
        let text = E5.replace("set A line point=0,0 direction=1,0", "set A union members=X");
        assert!(parse(&text).is_err());
    }
}
