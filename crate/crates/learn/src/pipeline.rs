//! Split, expand, train the member grid, filter, blend, evaluate.

use bellnet_core::dataset::{expand_poly2, Dataset, FeatureSchema, TaskKind};
use bellnet_core::sampler::ScenarioTag;
use bellnet_core::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baseline::{fit_poly_baseline, DEFAULT_DEGREE};
use crate::ensemble::{
    evaluate_member, filter_members, grid_configs, train_blender, train_grid, EnsembleModel, FilterRule,
    GridOutcome, MemberScore, ACCURACY_FLOOR, MAE_RATIO,
};
use crate::metrics::Metrics;
use crate::mlp::{train_mlp, Head, Mlp, MlpConfig, Xy, MAX_LAYERS, MIN_LAYERS, WIDTHS};
use crate::trees::{BoostParams, ForestParams};

pub fn head_for(d: &Dataset) -> Head {
    match (d.meta.kind, d.meta.scenario) {
        (TaskKind::Classification, _) => Head::Classification { classes: 3 },
        (TaskKind::Regression, ScenarioTag::Bipartite { .. }) => Head::Regression { upper: 1.0 },
        (TaskKind::Regression, _) => Head::Regression { upper: 0.5 },
    }
}

/// Non-probe records as a matrix, optionally expanded to degree 2.
pub fn to_xy(d: &Dataset, poly2: bool) -> Result<Xy> {
    let clean = d.without_probes();
    let rows: Vec<Vec<f64>> = if poly2 && d.meta.schema == FeatureSchema::Raw {
        clean.records.iter().map(|r| expand_poly2(&r.features)).collect()
    } else {
        clean.features()
    };
    Xy::from_rows(&rows, &clean.targets())
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub base: MlpConfig,
    pub layers: Vec<usize>,
    pub widths: Vec<usize>,
    /// Share of the training partition held out for filtering and blending.
    pub blend_fraction: f64,
    /// Share of the remaining member data used for early stopping.
    pub val_fraction: f64,
    pub poly2: bool,
    pub baseline_degree: usize,
    pub mae_ratio: f64,
    pub accuracy_floor: f64,
    pub boost: BoostParams,
    pub forest: ForestParams,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            base: MlpConfig::default(),
            layers: (MIN_LAYERS..=MAX_LAYERS).collect(),
            widths: WIDTHS.to_vec(),
            blend_fraction: 0.2,
            val_fraction: 0.1,
            poly2: true,
            baseline_degree: DEFAULT_DEGREE,
            mae_ratio: MAE_RATIO,
            accuracy_floor: ACCURACY_FLOOR,
            boost: BoostParams::default(),
            forest: ForestParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub ensemble: EnsembleModel,
    /// Polynomial baseline MAE on the blend fold (regression only).
    pub baseline_mae: Option<f64>,
    /// Every trained member scored on the test set, in grid order.
    pub member_test: Vec<(usize, usize, Metrics)>,
    pub ensemble_test: Metrics,
    pub failures: Vec<String>,
}

impl PipelineReport {
    /// Best test MAE among surviving members.
    pub fn best_member_mae(&self) -> Option<f64> {
        self.kept_test().filter_map(|m| m.mae).reduce(f64::min)
    }

    /// Median test MAE among surviving members.
    pub fn typical_member_mae(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.kept_test().filter_map(|m| m.mae).collect();
        v.sort_by(f64::total_cmp);
        v.get(v.len() / 2).copied()
    }

    pub fn best_member_accuracy(&self) -> Option<f64> {
        self.kept_test().filter_map(|m| m.accuracy).reduce(f64::max)
    }

    fn kept_test(&self) -> impl Iterator<Item = &Metrics> {
        self.member_test
            .iter()
            .zip(&self.ensemble.ledger)
            .filter(|(_, s)| s.kept)
            .map(|((_, _, m), _)| m)
    }

    /// Per-member and ensemble rows: `model,layers,width,kept,blend_metric,test_metric`.
    pub fn table_csv(&self) -> String {
        let regression = matches!(self.ensemble.head, Head::Regression { .. });
        let metric = |m: &Metrics| if regression { m.mae } else { m.accuracy }.unwrap_or(f64::NAN);
        let name = if regression { "mae" } else { "accuracy" };
        let mut s = format!("model,layers,width,kept,blend_{name},test_{name}\n");
        if let Some(b) = self.baseline_mae {
            s += &format!("poly{}_baseline,,,,{b:.10e},\n", DEFAULT_DEGREE);
        }
        for ((l, w, t), sc) in self.member_test.iter().zip(&self.ensemble.ledger) {
            s += &format!("mlp,{l},{w},{},{:.10e},{:.10e}\n", sc.kept, metric(&sc.metrics), metric(t));
        }
        s += &format!("ensemble,,,,,{:.10e}\n", metric(&self.ensemble_test));
        s
    }
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Member-fit, early-stopping and blend folds of the training partition.
pub fn folds(data: &Xy, blend_fraction: f64, val_fraction: f64, seed: u64) -> Result<(Xy, Xy, Xy)> {
    let idx = shuffled(data.len(), seed);
    let n_blend = (blend_fraction * data.len() as f64).round() as usize;
    let rest = data.len() - n_blend;
    let n_val = ((val_fraction * rest as f64).round() as usize).max(1);
    if n_blend == 0 || rest <= n_val {
        return Err(Error::Config(format!("{} training records are too few to fold", data.len())));
    }
    let blend = data.select(&idx[..n_blend]);
    let val = data.select(&idx[n_blend..n_blend + n_val]);
    let fit = data.select(&idx[n_blend + n_val..]);
    Ok((fit, val, blend))
}

/// Folds and baseline shared by the member and blending stages.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub head: Head,
    pub fit: Xy,
    pub val: Xy,
    pub blend: Xy,
    /// Polynomial baseline MAE on the blend fold (regression only).
    pub baseline_mae: Option<f64>,
}

pub fn prepare(train: &Dataset, opts: &PipelineOptions) -> Result<Prepared> {
    let head = head_for(train);
    let all = to_xy(train, opts.poly2)?;
    let (fit, val, blend) = folds(&all, opts.blend_fraction, opts.val_fraction, opts.seed)?;
    let baseline_mae = match head {
        Head::Regression { .. } => {
            let raw = to_xy(train, false)?;
            let (rfit, _, rblend) = folds(&raw, opts.blend_fraction, opts.val_fraction, opts.seed)?;
            let (_, mae) = fit_poly_baseline(&rfit, &rblend, opts.baseline_degree)?;
            log::info!("degree-{} baseline MAE on the blend fold: {mae:.4e}", opts.baseline_degree);
            Some(mae)
        }
        Head::Classification { .. } => None,
    };
    Ok(Prepared {
        head,
        fit,
        val,
        blend,
        baseline_mae,
    })
}

/// Trains the member grid on the fit fold.
pub fn train_members(p: &Prepared, opts: &PipelineOptions) -> Result<GridOutcome> {
    let configs = grid_configs(&opts.base, &opts.layers, &opts.widths);
    train_grid(&configs, p.head, &p.fit, &p.val)
}

/// Scores members on the blend fold, filters them and trains the blender.
pub fn blend_members(p: &Prepared, models: Vec<Mlp>, opts: &PipelineOptions) -> Result<EnsembleModel> {
    let blend_scores = models
        .iter()
        .map(|m| evaluate_member(m, &p.blend))
        .collect::<Result<Vec<_>>>()?;
    let rule = match p.baseline_mae {
        Some(b) => FilterRule::MaeBelow {
            baseline: b,
            ratio: opts.mae_ratio,
        },
        None => FilterRule::AccuracyAtLeast(opts.accuracy_floor),
    };
    let kept = filter_members(&blend_scores, rule)?;
    let ledger: Vec<MemberScore> = models
        .iter()
        .zip(blend_scores)
        .enumerate()
        .map(|(i, (m, s))| MemberScore {
            layers: m.config.layers,
            width: m.config.width,
            seed: m.config.seed,
            metrics: s,
            kept: kept.contains(&i),
        })
        .collect();
    let mut slots: Vec<Option<Mlp>> = models.into_iter().map(Some).collect();
    let members = kept.iter().map(|&i| slots[i].take().unwrap()).collect();
    train_blender(members, ledger, &p.blend, p.head, opts.poly2, opts.boost, opts.forest)
}

pub fn run_pipeline(train: &Dataset, test: &Dataset, opts: &PipelineOptions) -> Result<PipelineReport> {
    if train.meta.kind != test.meta.kind || train.meta.width != test.meta.width {
        return Err(Error::Schema("training and test datasets have different schemas".into()));
    }
    let prepared = prepare(train, opts)?;
    let test_xy = to_xy(test, opts.poly2)?;
    let grid = train_members(&prepared, opts)?;
    let member_test = grid
        .models
        .iter()
        .map(|m| Ok((m.config.layers, m.config.width, evaluate_member(m, &test_xy)?)))
        .collect::<Result<Vec<_>>>()?;
    let failures = grid
        .failures
        .iter()
        .map(|(c, e)| format!("{}x{}: {e}", c.layers, c.width))
        .collect();
    let ensemble = blend_members(&prepared, grid.models, opts)?;
    let ensemble_test = ensemble.evaluate(&test_xy)?;
    Ok(PipelineReport {
        ensemble,
        baseline_mae: prepared.baseline_mae,
        member_test,
        ensemble_test,
        failures,
    })
}

/// Test MAE of one configuration trained on the first `n` records of `pool`
/// for every `n` in `sizes`.
pub fn learning_curve(pool: &Dataset, test: &Dataset, sizes: &[usize], cfg: &MlpConfig, poly2: bool) -> Result<Vec<(usize, f64)>> {
    if sizes.is_empty() || sizes[0] == 0 {
        return Err(Error::Usage("learning-curve sizes must be positive".into()));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("learning-curve sizes must be strictly ascending".into()));
    }
    let head = head_for(pool);
    let all = to_xy(pool, poly2)?;
    let test_xy = to_xy(test, poly2)?;
    if *sizes.last().unwrap() > all.len() {
        return Err(Error::Usage(format!("largest size exceeds the {} available records", all.len())));
    }
    let mut out = Vec::new();
    for &n in sizes {
        let part = all.head(n);
        let n_val = (n / 10).max(1);
        let idx: Vec<usize> = (0..n).collect();
        let (val, fit) = (part.select(&idx[..n_val]), part.select(&idx[n_val..]));
        if fit.is_empty() {
            return Err(Error::Usage(format!("size {n} leaves no training records")));
        }
        let m = train_mlp(cfg, head, &fit, &val)?;
        let mae = evaluate_member(&m, &test_xy)?
            .mae
            .ok_or_else(|| Error::Usage("learning curves need a regression dataset".into()))?;
        log::info!("learning curve: n = {n}, MAE = {mae:.4e}");
        out.push((n, mae));
    }
    Ok(out)
}

/// First index whose relative MAE improvement over its predecessor falls
/// below `min_gain`.
pub fn plateau_index(curve: &[(usize, f64)], min_gain: f64) -> Option<usize> {
    (1..curve.len()).find(|&i| {
        let (prev, cur) = (curve[i - 1].1, curve[i].1);
        prev <= 0.0 || (prev - cur) / prev < min_gain
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bellnet_core::dataset::{gen_classification, gen_regression, split, GenOptions, SplitSpec};

    fn quick() -> PipelineOptions {
        PipelineOptions {
            base: MlpConfig {
                learning_rate: 1e-3,
                max_epochs: 30,
                ..MlpConfig::default()
            },
            layers: vec![2],
            widths: vec![100, 150],
            mae_ratio: 10.0,
            ..PipelineOptions::default()
        }
    }

    #[test]
    fn regression_pipeline_runs() {
        let d = gen_regression(ScenarioTag::Bipartite { m: 2 }, 3000, 1, GenOptions::default()).unwrap();
        let (train, test) = split(&d, SplitSpec::default()).unwrap();
        let r = run_pipeline(&train, &test, &quick()).unwrap();
        assert!(r.baseline_mae.is_some());
        assert_eq!(r.member_test.len(), 2);
        assert!(r.ensemble_test.mae.unwrap() < 0.05);
        assert!(r.table_csv().lines().count() >= 4);
    }

    #[test]
    fn classification_pipeline_runs() {
        let d = gen_classification(3000, 2).unwrap();
        let (train, test) = split(&d, SplitSpec::default()).unwrap();
        let opts = PipelineOptions {
            accuracy_floor: 0.5,
            ..quick()
        };
        let r = run_pipeline(&train, &test, &opts).unwrap();
        assert!(r.baseline_mae.is_none());
        assert!(r.ensemble_test.accuracy.unwrap() > 0.8);
        let c = r.ensemble_test.confusion.unwrap();
        let test_counts = test.class_histogram();
        for k in 0..3 {
            assert_eq!(c[k].iter().sum::<u64>() as usize, test_counts[k]);
        }
    }

    #[test]
    fn curve_input_validation() {
        let d = gen_regression(ScenarioTag::Bipartite { m: 2 }, 50, 1, GenOptions::default()).unwrap();
        let cfg = quick().base;
        assert!(learning_curve(&d, &d, &[0, 10], &cfg, true).is_err());
        assert!(learning_curve(&d, &d, &[10, 10], &cfg, true).is_err());
        assert!(learning_curve(&d, &d, &[20, 10], &cfg, true).is_err());
        assert!(learning_curve(&d, &d, &[10, 500], &cfg, true).is_err());
    }

    #[test]
    fn plateau_detection() {
        let c = [(1000, 0.1), (2000, 0.05), (4000, 0.03), (8000, 0.0295)];
        assert_eq!(plateau_index(&c, 0.05), Some(3));
        assert_eq!(plateau_index(&c[..3], 0.05), None);
    }
}
