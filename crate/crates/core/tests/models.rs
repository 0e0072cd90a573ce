use std::collections::BTreeMap;

use misinfo_core::features::{BinaryLabel, FeatureMethod, FeatureSpace, FeatureVector, LabeledVector};
use misinfo_core::fixtures::separable_toy;
use misinfo_core::models::{
    self, best_split, maxent, maxent_gradient, nb_log_posterior, rf_vote, svm, svm_update, tree, ForestParams,
    Hyperparameters, MaxFeatures, MaxentParams, ModelConfig, ModelType, Parameters, SvmParams, TrainedModel,
};
use misinfo_core::Error;

fn space(method: FeatureMethod, vocab: &[&str]) -> FeatureSpace {
    FeatureSpace::from_vocabulary(method, vocab.iter().map(|s| s.to_string()).collect()).unwrap()
}

fn row(space: &FeatureSpace, id: &str, label: BinaryLabel, entries: &[(usize, f64)]) -> LabeledVector {
    LabeledVector {
        id: id.into(),
        label,
        vector: FeatureVector::new(&space.info(), entries.to_vec()).unwrap(),
    }
}

fn vec_of(space: &FeatureSpace, entries: &[(usize, f64)]) -> FeatureVector {
    FeatureVector::new(&space.info(), entries.to_vec()).unwrap()
}

/// a present only in M rows; b split evenly.
fn four_row_toy() -> (FeatureSpace, Vec<LabeledVector>) {
    let s = space(FeatureMethod::Unigram, &["a", "b"]);
    let rows = vec![
        row(&s, "r1", BinaryLabel::M, &[(0, 1.0)]),
        row(&s, "r2", BinaryLabel::M, &[(0, 1.0), (1, 1.0)]),
        row(&s, "r3", BinaryLabel::T, &[(1, 1.0)]),
        row(&s, "r4", BinaryLabel::T, &[]),
    ];
    (s, rows)
}

fn fit(model: ModelType, s: &FeatureSpace, rows: &[LabeledVector]) -> TrainedModel {
    models::train(&ModelConfig::new(model, 7), &s.info(), rows).unwrap()
}

#[test]
fn nb_priors_are_class_frequencies() {
    let (s, rows) = four_row_toy();
    let m = fit(ModelType::Nb, &s, &rows);
    let Parameters::Nb(p) = &m.parameters else { panic!("not NB") };
    assert!((p.log_prior[0].exp() - 0.5).abs() < 1e-12);
    assert!((p.log_prior[1].exp() - 0.5).abs() < 1e-12);
}

#[test]
fn nb_bernoulli_laplace_hand_values() {
    let s = space(FeatureMethod::Unigram, &["x"]);
    let rows = vec![
        row(&s, "m", BinaryLabel::M, &[(0, 1.0)]),
        row(&s, "t", BinaryLabel::T, &[]),
    ];
    let m = fit(ModelType::Nb, &s, &rows);
    let Parameters::Nb(p) = &m.parameters else { panic!("not NB") };
    assert!((p.log_prob[0][0].exp() - 2.0 / 3.0).abs() < 1e-12);
    assert!((p.log_prob[1][0].exp() - 1.0 / 3.0).abs() < 1e-12);
    let absent = p.log_absent.as_ref().unwrap();
    for (lp, la) in p.log_prob.iter().zip(absent) {
        assert!((lp[0].exp() + la[0].exp() - 1.0).abs() < 1e-12);
    }
    let post = nb_log_posterior(&m, &vec_of(&s, &[(0, 1.0)])).unwrap();
    assert!((post[&BinaryLabel::M] - (0.5f64.ln() + (2.0f64 / 3.0).ln())).abs() < 1e-12);
    assert!((post[&BinaryLabel::T] - (0.5f64.ln() + (1.0f64 / 3.0).ln())).abs() < 1e-12);
}

#[test]
fn nb_token_seen_only_in_m_predicts_m() {
    let s = space(FeatureMethod::Bow, &["bleach", "mask"]);
    let rows = vec![
        row(&s, "m", BinaryLabel::M, &[(0, 2.0), (1, 1.0)]),
        row(&s, "t", BinaryLabel::T, &[(1, 3.0)]),
    ];
    let m = fit(ModelType::Nb, &s, &rows);
    assert_eq!(m.predict(&vec_of(&s, &[(0, 1.0)])).unwrap().label, BinaryLabel::M);
}

#[test]
fn nb_symmetric_statistics_give_equal_posteriors() {
    let s = space(FeatureMethod::Bow, &["a", "b"]);
    let rows = vec![
        row(&s, "m", BinaryLabel::M, &[(0, 1.0), (1, 2.0)]),
        row(&s, "t", BinaryLabel::T, &[(0, 1.0), (1, 2.0)]),
    ];
    let m = fit(ModelType::Nb, &s, &rows);
    let post = nb_log_posterior(&m, &vec_of(&s, &[(1, 1.0)])).unwrap();
    assert_eq!(post[&BinaryLabel::M], post[&BinaryLabel::T]);
    let pred = m.predict(&vec_of(&s, &[(1, 1.0)])).unwrap();
    assert_eq!(pred.label, BinaryLabel::T);
}

#[test]
fn nb_log_posterior_rejects_other_models() {
    let (s, rows) = four_row_toy();
    let m = fit(ModelType::Dt, &s, &rows);
    assert!(matches!(nb_log_posterior(&m, &vec_of(&s, &[])), Err(Error::Contract(_))));
}

#[test]
fn dt_hand_traced_tree() {
    let (s, rows) = four_row_toy();
    let m = fit(ModelType::Dt, &s, &rows);
    let Parameters::Dt(t) = &m.parameters else { panic!("not DT") };
    // root splits on a at 0.5 with pure children; the zero vector goes left to the T leaf
    match &t.nodes[0] {
        tree::Node::Split { feature, threshold, .. } => {
            assert_eq!(*feature, 0);
            assert_eq!(*threshold, 0.5);
        }
        other => panic!("expected split, got {other:?}"),
    }
    assert_eq!(t.depth(), 1);
    assert_eq!(m.predict(&vec_of(&s, &[])).unwrap().label, BinaryLabel::T);
    assert_eq!(m.predict(&vec_of(&s, &[(0, 1.0)])).unwrap().label, BinaryLabel::M);
}

#[test]
fn best_split_pure_and_none_cases() {
    let (_, rows) = four_row_toy();
    let d = best_split(&rows, &[0, 1]).unwrap();
    assert_eq!(d.feature, 0);
    assert_eq!(d.impurity, 0.0);
    assert!((d.gain - 0.5).abs() < 1e-12);
    // restricted to b only, the split is worthless
    assert!(best_split(&rows, &[1]).is_none());
    let same: Vec<LabeledVector> = rows.iter().filter(|r| r.label == BinaryLabel::M).cloned().collect();
    assert!(best_split(&same, &[0, 1]).is_none());
}

#[test]
fn rf_with_one_full_tree_matches_dt() {
    let (s, rows) = separable_toy();
    let dt = fit(ModelType::Dt, &s, &rows);
    let cfg = ModelConfig {
        hyperparameters: Hyperparameters::Rf(ForestParams {
            num_trees: 1,
            bootstrap: false,
            max_features: MaxFeatures::All,
            ..ForestParams::default()
        }),
        seed: 7,
    };
    let rf = models::train(&cfg, &s.info(), &rows).unwrap();
    for r in &rows {
        assert_eq!(rf.predict(&r.vector).unwrap().label, dt.predict(&r.vector).unwrap().label);
    }
    let Parameters::Rf { trees } = &rf.parameters else { panic!("not RF") };
    let Parameters::Dt(t) = &dt.parameters else { panic!("not DT") };
    assert_eq!(&trees[0], t);
}

#[test]
fn rf_vote_plurality_and_tie() {
    use BinaryLabel::{M, T};
    assert_eq!(rf_vote(&[M, M, T]), M);
    assert_eq!(rf_vote(&[M, T]), T);
    assert_eq!(rf_vote(&[T]), T);
}

#[test]
fn rf_is_seed_deterministic() {
    let (s, rows) = separable_toy();
    let cfg = ModelConfig::with_overrides(ModelType::Rf, 3, [("num_trees", "15")]).unwrap();
    let a = models::train(&cfg, &s.info(), &rows).unwrap();
    let b = models::train(&cfg, &s.info(), &rows).unwrap();
    assert_eq!(a, b);
}

#[test]
fn svm_separable_fixture() {
    let (s, rows) = separable_toy();
    let m = fit(ModelType::Svm, &s, &rows);
    for r in &rows {
        assert_eq!(m.predict(&r.vector).unwrap().label, r.label, "row {}", r.id);
    }
    let trace = svm::train(&rows, s.len(), &SvmParams { lambda: 1e-3, epochs: 10 }, 7).unwrap();
    assert_eq!(trace.objectives.len(), 10);
    assert!(trace.objectives[9] < trace.objectives[0]);
}

#[test]
fn svm_update_margin_two_only_shrinks() {
    let s = space(FeatureMethod::Bow, &["a", "b"]);
    let x = vec_of(&s, &[(0, 1.0)]);
    let mut w = vec![1.5, -0.5];
    let mut b = 0.5;
    // margin = +1 * (1.5 + 0.5) = 2
    svm_update(&mut w, &mut b, &x, BinaryLabel::T, 4, 0.1);
    assert!((w[0] - 1.5 * 0.75).abs() < 1e-15);
    assert!((w[1] + 0.5 * 0.75).abs() < 1e-15);
    assert!((b - 0.5 * 0.75).abs() < 1e-15);
}

#[test]
fn svm_update_misclassified_adds_hinge_term() {
    let s = space(FeatureMethod::Bow, &["a", "b"]);
    let x = vec_of(&s, &[(1, 2.0)]);
    let mut w = vec![0.0, 1.0];
    let mut b = 0.0;
    // label M: margin = -2, rate = 1/(0.5*2) = 1
    svm_update(&mut w, &mut b, &x, BinaryLabel::M, 2, 0.5);
    assert!((w[1] - (0.5 - 2.0)).abs() < 1e-15);
    assert!((b + 1.0).abs() < 1e-15);
}

#[test]
fn svm_sign_rule() {
    let (s, rows) = separable_toy();
    let m = fit(ModelType::Svm, &s, &rows);
    let Parameters::Svm(p) = &m.parameters else { panic!("not SVM") };
    for r in &rows {
        let margin = r.vector.dot(&p.weights) + p.bias;
        let pred = m.predict(&r.vector).unwrap();
        assert_eq!(pred.score, margin);
        assert_eq!(pred.label, if margin >= 0.0 { BinaryLabel::T } else { BinaryLabel::M });
    }
}

fn finite_difference(w: &[f64], b: f64, batch: &[LabeledVector], l2: f64) -> (Vec<f64>, f64) {
    let h = 1e-6;
    let gw = (0..w.len())
        .map(|i| {
            let mut up = w.to_vec();
            let mut dn = w.to_vec();
            up[i] += h;
            dn[i] -= h;
            (maxent::objective(&up, b, batch, l2) - maxent::objective(&dn, b, batch, l2)) / (2.0 * h)
        })
        .collect();
    let gb = (maxent::objective(w, b + h, batch, l2) - maxent::objective(w, b - h, batch, l2)) / (2.0 * h);
    (gw, gb)
}

#[test]
fn maxent_gradient_matches_finite_differences() {
    let (s, rows) = separable_toy();
    let w = vec![0.3, -0.2, 0.1, 0.7];
    let g = maxent_gradient(&w, -0.4, &rows, 0.05);
    let (fw, fb) = finite_difference(&w, -0.4, &rows, 0.05);
    let num: f64 = g.weights.iter().zip(&fw).map(|(a, b)| (a - b).powi(2)).sum::<f64>() + (g.bias - fb).powi(2);
    let den = (fw.iter().map(|x| x * x).sum::<f64>() + fb * fb).sqrt();
    assert!(num.sqrt() / den < 1e-4, "{g:?} vs {fw:?} {fb}");
    assert_eq!(g.weights.len(), s.len());
}

#[test]
fn maxent_symmetric_batch_has_zero_bias_gradient() {
    let s = space(FeatureMethod::Bow, &["a"]);
    let rows = vec![
        row(&s, "m", BinaryLabel::M, &[(0, 1.0)]),
        row(&s, "t", BinaryLabel::T, &[(0, 1.0)]),
    ];
    let g = maxent_gradient(&[0.0], 0.0, &rows, 1e-3);
    assert_eq!(g.bias, 0.0);
}

#[test]
fn maxent_large_l2_dominates() {
    let (_, rows) = separable_toy();
    let w = vec![1.0, -2.0, 0.5, 3.0];
    let l2 = 1e8;
    let g = maxent_gradient(&w, 0.0, &rows, l2);
    for (gi, wi) in g.weights.iter().zip(&w) {
        assert!((gi / (l2 * wi) - 1.0).abs() < 1e-6);
    }
}

#[test]
fn maxent_objective_non_increasing_on_toy() {
    let (s, rows) = separable_toy();
    let trace = maxent::train(&rows, s.len(), &MaxentParams::default()).unwrap();
    for w in trace.objectives.windows(2) {
        assert!(w[1] <= w[0] + 1e-15, "{} then {}", w[0], w[1]);
    }
    let m = maxent::MaxentModel { ..trace.model };
    for r in &rows {
        assert_eq!(maxent::predict(&m, &r.vector).0, r.label);
    }
}

#[test]
fn maxent_divergence_is_numeric_error() {
    let (s, rows) = separable_toy();
    let cfg = ModelConfig {
        hyperparameters: Hyperparameters::Mem(MaxentParams {
            step: 1e308,
            ..MaxentParams::default()
        }),
        seed: 0,
    };
    match models::train(&cfg, &s.info(), &rows) {
        Err(Error::Numeric { epoch, .. }) => assert!(epoch >= 1),
        other => panic!("expected numeric error, got {other:?}"),
    }
}

#[test]
fn single_class_training_is_degenerate() {
    let (s, rows) = separable_toy();
    let only_m: Vec<_> = rows.into_iter().filter(|r| r.label == BinaryLabel::M).collect();
    for t in ModelType::ALL {
        let r = models::train(&ModelConfig::new(t, 1), &s.info(), &only_m);
        assert!(matches!(r, Err(Error::Degenerate(_))), "{t}");
    }
    assert!(matches!(
        models::train(&ModelConfig::new(ModelType::Nb, 1), &s.info(), &[]),
        Err(Error::Degenerate(_))
    ));
}

#[test]
fn unknown_hyperparameters_are_rejected() {
    assert!(ModelConfig::with_overrides(ModelType::Svm, 0, [("alpha", "1")]).is_err());
    assert!(ModelConfig::with_overrides(ModelType::Nb, 0, [("alpha", "-1")]).is_err());
    let cfg = ModelConfig::with_overrides(ModelType::Rf, 0, [("num_trees", "5"), ("max_depth", "3")]).unwrap();
    let Hyperparameters::Rf(p) = cfg.hyperparameters else { panic!() };
    assert_eq!((p.num_trees, p.tree.max_depth), (5, 3));
}

#[test]
fn prediction_label_is_argmax_of_per_class() {
    let (s, rows) = separable_toy();
    let probe = vec_of(&s, &[(0, 1.0), (2, 1.0)]);
    for t in ModelType::ALL {
        let m = fit(t, &s, &rows);
        let p = m.predict(&probe).unwrap();
        if let Some(pc) = &p.per_class {
            let (m_score, t_score) = (pc[&BinaryLabel::M], pc[&BinaryLabel::T]);
            let expect = if m_score > t_score { BinaryLabel::M } else { BinaryLabel::T };
            assert_eq!(p.label, expect, "{t}");
        }
    }
}

#[test]
fn predict_rejects_foreign_space() {
    let (s, rows) = separable_toy();
    let other = space(FeatureMethod::Bow, &["cure", "hoax", "vaccin", "trial", "extra"]);
    for t in ModelType::ALL {
        let m = fit(t, &s, &rows);
        assert!(matches!(m.predict(&vec_of(&other, &[])), Err(Error::SpaceMismatch { .. })));
    }
    let foreign: Vec<LabeledVector> = rows.iter().map(|r| LabeledVector { vector: vec_of(&other, &[]), ..r.clone() }).collect();
    assert!(models::train(&ModelConfig::new(ModelType::Nb, 0), &s.info(), &foreign).is_err());
}

#[test]
fn save_load_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (s, rows) = separable_toy();
    let probes: Vec<FeatureVector> = vec![
        vec_of(&s, &[]),
        vec_of(&s, &[(0, 1.0)]),
        vec_of(&s, &[(1, 2.0), (3, 1.0)]),
        vec_of(&s, &[(2, 5.0)]),
        vec_of(&s, &[(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)]),
    ];
    for t in ModelType::ALL {
        let m = fit(t, &s, &rows);
        let path = dir.path().join(format!("{t}.json"));
        m.save(&path).unwrap();
        let back = TrainedModel::load(&path).unwrap();
        assert_eq!(back, m, "{t}");
        for p in &probes {
            let (a, b) = (m.predict(p).unwrap(), back.predict(p).unwrap());
            assert_eq!(a.label, b.label);
            assert_eq!(a.score.to_bits(), b.score.to_bits());
            let bits = |x: &Option<BTreeMap<BinaryLabel, f64>>| {
                x.as_ref().map(|m| m.values().map(|v| v.to_bits()).collect::<Vec<_>>())
            };
            assert_eq!(bits(&a.per_class), bits(&b.per_class));
        }
    }
}

#[test]
fn truncated_and_wrong_version_files() {
    let dir = tempfile::tempdir().unwrap();
    let (s, rows) = separable_toy();
    let m = fit(ModelType::Rf, &s, &rows);
    let path = dir.path().join("rf.json");
    m.save(&path).unwrap();
    let full = std::fs::read_to_string(&path).unwrap();

    let cut = dir.path().join("cut.json");
    std::fs::write(&cut, &full[..full.len() / 2]).unwrap();
    assert!(matches!(TrainedModel::load(&cut), Err(Error::Format { .. })));

    let mut v: serde_json::Value = serde_json::from_str(&full).unwrap();
    v["format_version"] = 99.into();
    let old = dir.path().join("old.json");
    std::fs::write(&old, v.to_string()).unwrap();
    assert!(matches!(TrainedModel::load(&old), Err(Error::Version { found: 99, .. })));

    let mut v: serde_json::Value = serde_json::from_str(&full).unwrap();
    assert!(v.get("model_type").is_some() && v.get("space").is_some() && v.get("parameters").is_some());
    v["space"]["dim"] = 2.into();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, v.to_string()).unwrap();
    assert!(TrainedModel::load(&bad).is_err());
}
