use proptest::prelude::*;
use regkit_cli::scenario::{Analysis, Equation, ScenarioFile, SetDef, Shape};
use regkit_cli::trace::{TraceRow, TraceTable};
use regkit_cli::{parse_report, parse_scenario, parse_trace_csv, ReportRecord};

fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e6f64..1e6, n)
}

fn shape(n: usize) -> impl Strategy<Value = Shape> {
    prop_oneof![
        Just(Shape::Whole),
        coords(n).prop_map(|at| Shape::Point { at }),
        (coords(n), coords(n)).prop_map(|(point, direction)| Shape::Line { point, direction }),
        (coords(n), prop::collection::vec(coords(n), 0..3)).prop_map(|(offset, directions)| Shape::Affine { offset, directions }),
        (coords(n), -10.0f64..10.0).prop_map(|(normal, offset)| Shape::HalfSpace { normal, offset }),
        (coords(n), 0.0f64..5.0).prop_map(|(center, radius)| Shape::Ball { center, radius }),
        (prop::collection::vec(coords(n), 1..4), -1.0f64..1.0).prop_map(|(normals, o)| {
            let offsets = vec![o; normals.len()];
            Shape::Polyhedron { normals, offsets }
        }),
        (coords(n), 0.1f64..2.0, prop::collection::vec(coords(n), 1..3))
            .prop_map(|(center, radius, facets)| Shape::Sector { center, radius, facets }),
        (coords(n), coords(n), -1.0f64..1.0, coords(n * n)).prop_map(move |(reference, b, c, q)| Shape::Manifold {
            reference,
            equations: vec![
                Equation::Linear { b: b.clone(), c },
                Equation::Sphere { center: b.clone(), radius: c.abs() },
                Equation::Quadric { q, b, c },
            ],
        }),
    ]
}

fn scenario_file() -> impl Strategy<Value = ScenarioFile> {
    (1usize..4).prop_flat_map(|n| {
        (
            prop::collection::vec(shape(n), 3),
            coords(n),
            0.01f64..10.0,
            1usize..100_000,
            any::<u64>(),
            prop::option::of(0.0f64..1.0),
            prop::sample::subsequence(vec![Analysis::Analyze, Analysis::Classify, Analysis::Solve], 1..=3),
        )
            .prop_map(move |(shapes, xbar, delta, budget, seed, eps, analyses)| {
                let names = ["A", "B", "intersection"];
                let mut sets: Vec<SetDef> = shapes
                    .into_iter()
                    .zip(names)
                    .map(|(shape, name)| SetDef { name: name.to_string(), shape })
                    .collect();
                sets.insert(0, SetDef { name: "aux".into(), shape: Shape::Whole });
                sets.push(SetDef {
                    name: "both".into(),
                    shape: Shape::Union { members: vec!["A".into(), "aux".into()] },
                });
                ScenarioFile {
                    name: "generated".into(),
                    dim: n,
                    sets,
                    xbar,
                    delta,
                    budget,
                    seed,
                    eps,
                    relative: Some("B".into()),
                    restrict: None,
                    analyses,
                    output: Some("out/dir".into()),
                }
            })
    })
}

proptest! {
    #[test]
    fn scenario_text_round_trips(f in scenario_file()) {
        let text = f.to_text();
        prop_assert_eq!(parse_scenario(&text).unwrap(), f);
    }

    #[test]
    fn scenario_parser_never_panics(text in "(dim|set|xbar|delta|name|budget|[a-z=,;:. 0-9#\\-]){0,12}(\n(dim 2|set A [a-z]+ [a-z]+=[0-9,;:.\\-]*|xbar [0-9,.]*|[a-z ]*)){0,8}") {
        if let Ok(f) = parse_scenario(&text) {
            let _ = f.build();
        }
    }

    #[test]
    fn trace_csv_round_trips(rows in prop::collection::vec((coords(3), prop::array::uniform4(0.0f64..1e3)), 0..20)) {
        let t = TraceTable {
            dim: 3,
            rows: rows.into_iter().enumerate().map(|(k, (x, d))| TraceRow { k, x, d_a: d[0], d_b: d[1], d_int: d[2], gap: d[3] }).collect(),
        };
        prop_assert_eq!(parse_trace_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn report_and_trace_readers_never_panic(text in "\\PC{0,200}") {
        let _ = parse_report(&text);
        let _ = parse_trace_csv(&text);
    }
}

#[test]
fn full_report_round_trips() {
    let s = regkit::fixtures::e5(200, 1);
    let mut rec = ReportRecord::new("e5", 1, 200, 1.0);
    rec.constants = Some(regkit::transversal::analyze(&s).unwrap());
    let text = rec.to_json();
    let back = parse_report(&text).unwrap();
    assert_eq!(back.to_json(), text);
}
