use proptest::prelude::*;
use qgdiff_core::diagnostics::{
    comparison_trial, mass_balance_trial, random_graph, random_load, resolvent_trial, RandomGraphOptions,
};
use qgdiff_core::grid_functions::{greens_residual, integrate, kirchhoff_flux, PBar};
use qgdiff_core::io::{format_number, WireRecord};
use qgdiff_core::scenario::{EdgeDoc, GammaDoc, Scalar, ScenarioDoc, SolverDoc, TimeDoc};
use qgdiff_core::{solve, solve_monolithic, EllipticProblem, Method, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

fn arb_scalar() -> impl Strategy<Value = Scalar> {
    prop_oneof![
        (-10.0f64..10.0).prop_map(Scalar::Number),
        prop::sample::select(vec!["sin(pi*x)", "x^2 - t", "exp(-t)*cos(x)", "max(x, 0.5)"])
            .prop_map(|s| Scalar::Expr(s.to_string())),
    ]
}

fn arb_gamma() -> impl Strategy<Value = GammaDoc> {
    prop_oneof![
        Just(GammaDoc::Identity),
        (0.1f64..4.0).prop_map(GammaDoc::Power),
        (0.1f64..3.0, 0.1f64..3.0).prop_map(|(a, b)| GammaDoc::Table(vec![(-1.0, -a), (0.0, 0.0), (2.0, b)])),
    ]
}

prop_compose! {
    fn arb_doc()(
        n in 1usize..5,
        lengths in prop::collection::vec(0.1f64..5.0, 5),
        ps in prop::collection::vec(1.1f64..6.0, 5),
        gammas in prop::collection::vec(arb_gamma(), 5),
        cells in prop::collection::vec(prop::option::of(2usize..200), 5),
        sources in prop::collection::vec(prop::option::of(arb_scalar()), 5),
        flux in prop::option::of(arb_scalar()),
        initial in prop::option::of(arb_scalar()),
        time in prop::option::of((0.1f64..5.0, 0.001f64..0.1)),
        tol in prop::option::of(1e-14f64..1e-6),
        method in prop::option::of(prop::sample::select(vec![Method::Monolithic, Method::Gluing])),
    ) -> ScenarioDoc {
        let vertices: Vec<String> = (0..=n).map(|i| format!("v{i}")).collect();
        let edges = (0..n)
            .map(|k| EdgeDoc {
                id: format!("e{k}"),
                from: vertices[k].clone(),
                to: vertices[k + 1].clone(),
                length: lengths[k],
                p: ps[k],
                gamma: gammas[k].clone(),
                cells: cells[k],
                source: sources[k].clone(),
            })
            .collect();
        ScenarioDoc {
            flux: flux.map(|s| vec![(vertices[0].clone(), s)]).unwrap_or_default(),
            initial: initial.map(|s| vec![("e0".to_string(), s)]).unwrap_or_default(),
            vertices,
            edges,
            time: time.map(|(t_end, dt)| TimeDoc { t_end, dt }),
            solver: SolverDoc { tol, match_tol: None, method, cells_default: None },
        }
    }
}

proptest! {
    #[test]
    fn scenario_documents_round_trip(doc in arb_doc()) {
        let text = doc.to_json_pretty();
        let back = ScenarioDoc::from_json(&text).unwrap();
        prop_assert_eq!(&back, &doc);
        prop_assert!(back.build().is_ok());
    }

    #[test]
    fn wire_records_round_trip(
        t in any::<f64>().prop_filter("finite", |x| x.is_finite()),
        vals in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..20),
    ) {
        let rec = WireRecord {
            t,
            mass: vals[0],
            energy_residual: -vals[0],
            vertex_values: vec![("a".into(), vals[vals.len() - 1])],
            edges: vec![("e".into(), vals.clone())],
        };
        prop_assert_eq!(WireRecord::parse(&rec.to_line(), 1).unwrap(), rec);
    }

    #[test]
    fn formatted_numbers_parse_back_exactly(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_balance_holds_for_any_seed(seed in any::<u64>()) {
        let r = mass_balance_trial(seed, 0, &cfg()).unwrap();
        prop_assert!(r.passed, "{}", r);
    }

    #[test]
    fn comparison_holds_for_any_seed(seed in any::<u64>()) {
        let r = comparison_trial(seed, 0, &cfg()).unwrap();
        prop_assert!(r.passed, "{}", r);
    }

    #[test]
    fn resolvent_contracts_for_any_seed(seed in any::<u64>()) {
        let r = resolvent_trial(seed, 0, &cfg()).unwrap();
        prop_assert!(r.passed, "{}", r);
    }

    #[test]
    fn solutions_satisfy_kirchhoff_and_greens_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graph = random_graph(&mut rng, &RandomGraphOptions::default());
        let g = random_load(&mut rng, &graph);
        let prob = EllipticProblem::with_load(graph.clone(), g).unwrap();
        let sol = solve_monolithic(&prob, &cfg()).unwrap();
        let pbar = PBar::of(&graph);
        // The one-sided flux differs from the recovered one by the half-cell
        // mass term, which is O(h).
        let h_max = graph.edges().iter().map(|e| e.h()).fold(0.0, f64::max);
        for v in 0..graph.vertex_count() {
            let flux = kirchhoff_flux(&graph, &sol.u, &pbar, v).unwrap();
            prop_assert!(flux.abs() <= 10.0 * h_max * (1.0 + sol.v.sup_norm() + prob.g.sup_norm()));
            prop_assert!(sol.kirchhoff_gaps[v].abs() <= 1e-8 * prob.scale());
        }
        let z = sol.v.clone();
        let r = greens_residual(&graph, &z, &sol.u).unwrap();
        prop_assert!(r <= 1e-12 * (1.0 + integrate(&graph, &z.map(|x| x.abs())).unwrap()) * 10.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gluing_matches_monolithic_on_random_trees(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = RandomGraphOptions { max_edges: 4, allow_cycles: false, ..Default::default() };
        let graph = random_graph(&mut rng, &opts);
        let g = random_load(&mut rng, &graph);
        let omega = (0..graph.vertex_count()).map(|v| 0.1 * v as f64 - 0.15).collect();
        let prob = EllipticProblem::new(graph, g, omega).unwrap();
        let a = solve(&prob, &cfg(), Method::Monolithic).unwrap();
        let b = solve(&prob, &cfg(), Method::Gluing).unwrap();
        prop_assert!(a.v.max_abs_diff(&b.v) <= 1e-6);
    }
}
