use ndarray::{Array1, Array2};
use proptest::prelude::*;

use bellnet_learn::io::{load_mlp, save_mlp};
use bellnet_learn::metrics::Metrics;
use bellnet_learn::mlp::{Head, Mlp, MlpConfig};
use bellnet_learn::trees::{BoostInit, BoostParams, ExtraTrees, ForestParams, GradientBoosting};

fn rows(n: usize, k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, k), n)
}

fn matrix(r: &[Vec<f64>]) -> Array2<f64> {
    Array2::from_shape_fn((r.len(), r[0].len()), |(i, j)| r[i][j])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mae_ignores_row_order(pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..50), shift in 0usize..50) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
        let k = shift % p.len();
        let rot = |v: &[f64]| [&v[k..], &v[..k]].concat();
        let a = Metrics::regression(&p, &t).unwrap().mae.unwrap();
        let b = Metrics::regression(&rot(&p), &rot(&t)).unwrap().mae.unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn confusion_counts_every_row(labels in prop::collection::vec((0usize..3, 0usize..3), 1..60)) {
        let (pred, truth): (Vec<usize>, Vec<usize>) = labels.iter().cloned().unzip();
        let m = Metrics::classification(&pred, &truth).unwrap();
        let total: u64 = m.confusion.unwrap().iter().flatten().sum();
        prop_assert_eq!(total as usize, labels.len());
        let hits = labels.iter().filter(|(p, t)| p == t).count();
        prop_assert!((m.accuracy.unwrap() - hits as f64 / labels.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn softmax_outputs_are_distributions(x in rows(5, 4), seed in 0u64..1000) {
        let cfg = MlpConfig { seed, ..MlpConfig::new(2, 100).unwrap() };
        let m = Mlp::init(4, Head::Classification { classes: 3 }, cfg);
        let p = m.predict_batch(matrix(&x).view()).unwrap();
        for r in p.rows() {
            prop_assert!(r.iter().all(|v| *v >= 0.0));
            prop_assert!((r.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn regression_outputs_respect_the_clamp(x in rows(5, 4), seed in 0u64..1000) {
        let cfg = MlpConfig { seed, ..MlpConfig::new(2, 100).unwrap() };
        let m = Mlp::init(4, Head::Regression { upper: 0.5 }, cfg);
        let p = m.predict_batch(matrix(&x).view()).unwrap();
        prop_assert!(p.iter().all(|v| (0.0..=0.5).contains(v)));
    }

    #[test]
    fn forest_probabilities_sum_to_one(x in rows(40, 3), probe in rows(5, 3), seed in 0u64..100) {
        let labels: Vec<usize> = x.iter().map(|r| if r[0] > 0.3 { 2 } else if r[0] < -0.3 { 0 } else { 1 }).collect();
        let f = ExtraTrees::fit(matrix(&x).view(), &labels, 3, ForestParams { trees: 10, seed, ..ForestParams::default() }).unwrap();
        for r in matrix(&probe).rows() {
            let p = f.predict_proba_row(r);
            prop_assert_eq!(p.len(), 3);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn boosting_reproduces_a_constant_target(x in rows(30, 3), probe in rows(5, 3), c in 0.0f64..1.0) {
        let y = Array1::from_elem(30, c);
        let p = BoostParams { trees: 60, shrinkage: 0.5, ..BoostParams::default() };
        let gb = GradientBoosting::fit(matrix(&x).view(), y.view(), BoostInit::Constant(0.0), p).unwrap();
        for v in gb.predict(matrix(&probe).view()) {
            prop_assert!((v - c).abs() < 1e-9);
        }
    }
}

#[test]
fn saved_mlp_predicts_identically() {
    let cfg = MlpConfig { seed: 4, ..MlpConfig::new(3, 100).unwrap() };
    let m = Mlp::init(6, Head::Regression { upper: 1.0 }, cfg);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.model");
    save_mlp(&m, &path).unwrap();
    let back = load_mlp(&path).unwrap();
    let x = [0.1, -0.4, 0.9, 0.0, -1.0, 0.33];
    assert_eq!(m.predict_one(&x).unwrap(), back.predict_one(&x).unwrap());
}
