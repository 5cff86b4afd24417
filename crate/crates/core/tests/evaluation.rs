mod common;

use common::*;
use costa_core::eval::{pareto_mask, AccuracyRecord, SCORE_VOCABULARY};
use costa_core::synth::{random_instance, DEFAULT_MAX_PATHS};
use costa_core::toolgraph::DEFAULT_PATH_CAP;
use costa_core::{
    brute_force_optimal, overall_accuracy, pareto_filter, sweep_alpha, task_accuracy, Alpha, ParetoPoint, SearchConfig,
    SimulatorSpec,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn alphas(vs: &[f64]) -> Vec<Alpha> {
    vs.iter().map(|&v| Alpha::new(v).unwrap()).collect()
}

#[test]
fn oracle_agrees_on_detection_fixture() {
    let (g, bt) = detection();
    let r = brute_force_optimal(&g, &bt, Alpha::new(2.0).unwrap(), 0.0, DEFAULT_PATH_CAP).unwrap();
    assert_eq!(r.gap, 0.0);
    assert_eq!(r.paths_enumerated, 2);
    assert_eq!(tools(&g, &r.best_path)[1], "YOLOv7");
}

#[test]
fn oracle_gap_zero_in_unit_corner() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for i in 0..200 {
        let inst = random_instance(&mut rng, format!("o{i}"), 2 + i % 10, true, 12);
        let r = brute_force_optimal(
            &inst.graph,
            &inst.benchmark,
            Alpha::new(1.0).unwrap(),
            0.0,
            DEFAULT_PATH_CAP,
        )
        .unwrap();
        assert!(r.paths_enumerated <= 12);
        assert_eq!(r.gap, 0.0, "instance {i}");
    }
}

#[test]
fn oracle_gap_never_negative() {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    for i in 0..150 {
        let inst = random_instance(&mut rng, format!("n{i}"), 2 + i % 15, i % 2 == 0, DEFAULT_MAX_PATHS);
        for a in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let r = brute_force_optimal(
                &inst.graph,
                &inst.benchmark,
                Alpha::new(a).unwrap(),
                0.0,
                DEFAULT_PATH_CAP,
            )
            .unwrap();
            assert!(r.gap >= 0.0);
        }
    }
}

#[test]
fn oracle_respects_path_cap() {
    let mdt = full_mdt();
    let g = expand(&tree("example1"), &mdt);
    let bt = full_benchmark(&mdt);
    let err = brute_force_optimal(&g, &bt, Alpha::new(1.0).unwrap(), 0.0, 31).unwrap_err();
    assert!(matches!(
        err,
        costa_core::EvalError::Graph(costa_core::GraphError::PathExplosion { count: 32, .. })
    ));
}

#[test]
fn sweep_on_detection_fixture() {
    let (g, bt) = detection();
    let base = SearchConfig::new(Alpha::new(1.0).unwrap());
    let spec = SimulatorSpec::deterministic();
    let pts = sweep_alpha(&g, &bt, &spec, &base, &alphas(&[0.0, 2.0])).unwrap();
    assert_eq!(pts[0].alpha, 0.0);
    assert!(pts[1].total_time <= pts[0].total_time);
    assert!(pts[1].quality_product <= pts[0].quality_product);

    let twin = sweep_alpha(&g, &bt, &spec, &base, &alphas(&[1.0, 1.0])).unwrap();
    assert_eq!(twin[0], twin[1]);
    assert!(sweep_alpha(&g, &bt, &spec, &base, &[]).unwrap().is_empty());
}

#[test]
fn accuracy_is_order_free() {
    let r1 = AccuracyRecord::new(vec![1.0, 0.9, 0.5]).unwrap();
    let r2 = AccuracyRecord::new(vec![0.5, 1.0, 0.9]).unwrap();
    assert!((task_accuracy(&r1).unwrap() - task_accuracy(&r2).unwrap()).abs() < 1e-15);
    assert_eq!(task_accuracy(&AccuracyRecord::new(vec![1.0; 3]).unwrap()).unwrap(), 1.0);
    assert_eq!(task_accuracy(&AccuracyRecord::new(vec![0.0]).unwrap()).unwrap(), 0.0);
    assert_eq!(overall_accuracy(&[0.0, 1.0]).unwrap(), 0.5);
}

fn point() -> impl Strategy<Value = ParetoPoint> {
    (0u8..6, 0u8..6).prop_map(|(t, q)| ParetoPoint {
        alpha: 1.0,
        total_time: f64::from(t),
        quality_product: f64::from(q) / 5.0,
        g_final: 0.0,
    })
}

proptest! {
    #[test]
    fn pareto_front_is_sound(points in prop::collection::vec(point(), 0..12)) {
        let front = pareto_filter(&points);
        for a in &front {
            for b in &front {
                prop_assert!(!a.dominates(b));
            }
        }
        let mask = pareto_mask(&points);
        for (p, kept) in points.iter().zip(&mask) {
            if !kept {
                prop_assert!(front.iter().any(|f| f.dominates(p)));
            }
        }
        let mut it = front.iter();
        for (p, kept) in points.iter().zip(&mask) {
            if *kept {
                prop_assert_eq!(Some(p), it.next());
            }
        }
    }

    #[test]
    fn accuracy_bounded(idx in prop::collection::vec(0..SCORE_VOCABULARY.len(), 1..20)) {
        let scores: Vec<f64> = idx.iter().map(|&i| SCORE_VOCABULARY[i]).collect();
        let mut reversed = scores.clone();
        reversed.reverse();
        let a = task_accuracy(&AccuracyRecord::new(scores).unwrap()).unwrap();
        let b = task_accuracy(&AccuracyRecord::new(reversed).unwrap()).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - b).abs() < 1e-12);
    }
}
