mod common;

use common::TABLE;
use kws_core::estimator::{classify, estimate, ConstraintClass};
use kws_core::model::{parse_model_dsl, Family, Layer};
use kws_core::search::{
    apply_scores, dominates, enumerate, ladder_dsl, pareto_front, pareto_indices, scalability_sweep, top_n, Candidate, ScoreTable,
    SearchSpace, LADDER_WIDTH_STEP,
};
use proptest::prelude::*;

fn dnn_space(depths: Vec<usize>, widths: Vec<usize>) -> SearchSpace {
    let mut s = SearchSpace::new(Family::Dnn);
    s.coeffs = vec![10];
    s.strides_ms = vec![40];
    s.grids.insert("fc.depth", depths);
    s.grids.insert("fc.width", widths);
    s
}

fn dnn_dsl(depth: usize, width: usize) -> String {
    vec![format!("FC({width})"); depth].join("-")
}

#[test]
fn small_dnn_grid_keeps_the_published_small_model() {
    let space = dnn_space(vec![3], (144..=436).step_by(4).collect());
    let found: Vec<String> = enumerate(&space, ConstraintClass::SMALL).unwrap().iter().map(|c| c.spec.to_dsl()).collect();
    assert!(found.contains(&"FC(144)-FC(144)-FC(144)".to_string()));
    assert!(!found.contains(&"FC(256)-FC(256)-FC(256)".to_string()));
    assert_eq!(found, vec!["FC(144)-FC(144)-FC(144)".to_string()]);
}

#[test]
fn zero_limits_admit_nothing() {
    let space = dnn_space(vec![1, 2], vec![8, 16]);
    let none = ConstraintClass { memory_limit_kb: 0, ops_limit: 0, ..ConstraintClass::SMALL };
    assert!(enumerate(&space, none).unwrap().is_empty());
}

#[test]
fn toy_grid_matches_brute_force() {
    let (depths, widths) = (vec![1, 2, 4], vec![64, 200, 512]);
    let space = dnn_space(depths.clone(), widths.clone());
    for class in ConstraintClass::ALL {
        let got: Vec<(String, u64, u64)> = enumerate(&space, class)
            .unwrap()
            .iter()
            .map(|c| (c.spec.to_dsl(), c.report.memory_bytes, c.report.ops))
            .collect();
        let mut want = Vec::new();
        for &d in &depths {
            for &w in &widths {
                let spec = parse_model_dsl(&dnn_dsl(d, w), Family::Dnn, 25, 10, 12).unwrap();
                let r = estimate(&spec);
                let kb_tenths = (r.memory_bytes + 50) / 100;
                if kb_tenths <= class.memory_limit_kb * 10 && r.ops <= class.ops_limit {
                    want.push((spec.to_dsl(), r.memory_bytes, r.ops));
                }
            }
        }
        assert_eq!(got, want, "{}", class.size);
    }
}

#[test]
fn filtering_is_sound_and_complete() {
    for family in [Family::Cnn, Family::Gru, Family::DsCnn] {
        let mut space = SearchSpace::new(family);
        space.coeffs = vec![10];
        space.strides_ms = vec![20];
        for g in space.grids.values_mut() {
            let keep: Vec<usize> = g.iter().step_by(g.len().div_ceil(3)).copied().collect();
            *g = keep;
        }
        let all = enumerate(&space, ConstraintClass { memory_limit_kb: u64::MAX / 100, ops_limit: u64::MAX, ..ConstraintClass::LARGE })
            .unwrap();
        let small = enumerate(&space, ConstraintClass::SMALL).unwrap();
        for c in &all {
            let admitted = small.iter().any(|s| s.spec == c.spec);
            let class = classify(c.report.memory_bytes, c.report.ops).map(|k| k.size);
            assert_eq!(admitted, class == Some(ConstraintClass::SMALL.size), "{}", c.spec.to_dsl());
        }
    }
}

#[test]
fn scores_rank_and_unscored_rows_sink() {
    let space = dnn_space(vec![1], vec![8, 16, 32]);
    let mut cands = enumerate(&space, ConstraintClass::SMALL).unwrap();
    let table = ScoreTable::parse("FC(8)\t0.5\nFC(32)\t0.9\n").unwrap();
    apply_scores(&mut cands, Some(&table));
    let order: Vec<(String, Option<f64>)> = top_n(&cands, 3).iter().map(|c| (c.spec.to_dsl(), c.score)).collect();
    assert_eq!(
        order,
        vec![("FC(32)".into(), Some(0.9)), ("FC(8)".into(), Some(0.5)), ("FC(16)".into(), None)]
    );
    let front: Vec<String> = pareto_front(&cands).iter().map(|c| c.spec.to_dsl()).collect();
    assert_eq!(front, vec!["FC(8)", "FC(32)"]);
    apply_scores(&mut cands, None);
    assert_eq!(top_n(&cands, 1)[0].spec.to_dsl(), "FC(8)");
}

fn pareto_oracle(points: &[(u64, u64, f64)]) -> Vec<usize> {
    (0..points.len()).filter(|&i| !points.iter().any(|&p| dominates(p, points[i]))).collect()
}

#[test]
fn pareto_singletons() {
    assert!(pareto_indices(&[]).is_empty());
    assert_eq!(pareto_indices(&[(5, 5, 0.5)]), vec![0]);
    assert_eq!(pareto_indices(&[(5, 5, 0.5), (5, 5, 0.5)]), vec![0, 1]);
    assert_eq!(pareto_indices(&[(5, 5, 0.5), (5, 5, 0.6)]), vec![1]);
}

proptest! {
    #[test]
    fn pareto_matches_quadratic_oracle(
        points in prop::collection::vec((0u64..20, 0u64..20, 0u8..10), 0..100)
    ) {
        let points: Vec<(u64, u64, f64)> = points.into_iter().map(|(m, o, s)| (m, o, f64::from(s) / 10.0)).collect();
        prop_assert_eq!(pareto_indices(&points), pareto_oracle(&points));
    }
}

#[test]
fn ladder_is_monotone_and_bracketed() {
    let ladder = scalability_sweep(8_000).unwrap();
    let first = &ladder.rungs[0].report;
    assert!(first.memory_bytes < 8_000 && first.ops < 500_000, "{first:?}");
    for pair in ladder.rungs.windows(2) {
        assert!(pair[1].report.memory_bytes > pair[0].report.memory_bytes);
        assert!(pair[1].report.ops > pair[0].report.ops);
    }
    let top = ladder.rungs.last().unwrap();
    assert!(ConstraintClass::LARGE.admits(top.report.memory_bytes, top.report.ops));
    let Layer::Conv2d { features: width, .. } = top.spec.layers()[0] else { panic!("ladder starts with a convolution") };
    let next = Candidate::build(Family::DsCnn, &ladder_dsl(width + LADDER_WIDTH_STEP), 10, 20, 12).unwrap();
    assert!(!ConstraintClass::LARGE.admits(next.report.memory_bytes, next.report.ops));
}

#[test]
fn ladder_top_is_the_published_large_dscnn() {
    let dscnn_l = TABLE.iter().find(|r| r.file == "dscnn_l").unwrap();
    let ladder = scalability_sweep(500_000).unwrap();
    assert_eq!(ladder.rungs.last().unwrap().spec.to_dsl(), dscnn_l.dsl);
    assert!(scalability_sweep(0).is_err());
}
