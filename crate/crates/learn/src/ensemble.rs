//! Member grid, filtering, and blended ensembles.

use bellnet_core::dataset::expand_poly2;
use bellnet_core::{Error, Result};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::metrics::Metrics;
use crate::mlp::{train_mlp, Head, Mlp, MlpConfig, Xy, MAX_LAYERS, MIN_LAYERS, WIDTHS};
use crate::trees::{argmax, BoostInit, BoostParams, ExtraTrees, ForestParams, GradientBoosting};

pub const MAE_RATIO: f64 = 0.7;
pub const ACCURACY_FLOOR: f64 = 0.985;

/// Every `(layers, width)` pair with seeds `base.seed + i`.
pub fn grid_configs(base: &MlpConfig, layers: &[usize], widths: &[usize]) -> Vec<MlpConfig> {
    let mut out = Vec::new();
    for &l in layers {
        for &w in widths {
            out.push(MlpConfig {
                layers: l,
                width: w,
                seed: base.seed + out.len() as u64,
                ..base.clone()
            });
        }
    }
    out
}

/// The full 4 x 9 grid: 2 to 5 layers, widths 100 to 500 in steps of 50.
pub fn full_grid(base: &MlpConfig) -> Vec<MlpConfig> {
    let layers: Vec<usize> = (MIN_LAYERS..=MAX_LAYERS).collect();
    grid_configs(base, &layers, &WIDTHS)
}

#[derive(Debug)]
pub struct GridOutcome {
    pub models: Vec<Mlp>,
    pub failures: Vec<(MlpConfig, String)>,
}

/// Trains every configuration independently (in parallel).
pub fn train_grid(configs: &[MlpConfig], head: Head, train: &Xy, val: &Xy) -> Result<GridOutcome> {
    let results: Vec<(MlpConfig, Result<Mlp>)> = configs
        .par_iter()
        .map(|c| (c.clone(), train_mlp(c, head, train, val)))
        .collect();
    let mut out = GridOutcome {
        models: Vec::new(),
        failures: Vec::new(),
    };
    for (c, r) in results {
        match r {
            Ok(m) => out.models.push(m),
            Err(e) => {
                log::warn!("member {}x{} (seed {}) failed: {e}", c.layers, c.width, c.seed);
                out.failures.push((c, e.to_string()));
            }
        }
    }
    if out.models.is_empty() {
        return Err(Error::Numeric("every grid member failed to train".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterRule {
    /// Keep members with MAE strictly below `ratio * baseline`.
    MaeBelow { baseline: f64, ratio: f64 },
    /// Keep members with accuracy at least `floor`.
    AccuracyAtLeast(f64),
}

impl FilterRule {
    pub fn keeps(&self, m: &Metrics) -> bool {
        match *self {
            FilterRule::MaeBelow { baseline, ratio } => m.mae.map_or(false, |v| v < ratio * baseline),
            FilterRule::AccuracyAtLeast(floor) => m.accuracy.map_or(false, |a| a >= floor),
        }
    }
}

/// Indices of the members that pass `rule`.
pub fn filter_members(scores: &[Metrics], rule: FilterRule) -> Result<Vec<usize>> {
    let kept: Vec<usize> = (0..scores.len()).filter(|&i| rule.keeps(&scores[i])).collect();
    if kept.is_empty() {
        return Err(Error::Numeric(format!(
            "no member passes {rule:?}; train on more data or for more epochs"
        )));
    }
    Ok(kept)
}

/// Scores of one member on the evaluation set, and whether it survived.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberScore {
    pub layers: usize,
    pub width: usize,
    pub seed: u64,
    pub metrics: Metrics,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Blender {
    Boosting(GradientBoosting),
    Forest(ExtraTrees),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub head: Head,
    /// Raw features are expanded to degree 2 before reaching the members.
    pub expand_poly2: bool,
    pub members: Vec<Mlp>,
    pub blender: Blender,
    pub ledger: Vec<MemberScore>,
}

pub fn member_outputs(members: &[Mlp], x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let blocks = members
        .iter()
        .map(|m| m.predict_batch(x))
        .collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    ndarray::concatenate(Axis(1), &views).map_err(|e| Error::Numeric(e.to_string()))
}

/// Fits the blender on member outputs over a held-out fold.
pub fn train_blender(
    members: Vec<Mlp>,
    ledger: Vec<MemberScore>,
    blend: &Xy,
    head: Head,
    expand_poly2: bool,
    boost: BoostParams,
    forest: ForestParams,
) -> Result<EnsembleModel> {
    if members.is_empty() {
        return Err(Error::Usage("an ensemble needs at least one member".into()));
    }
    let z = member_outputs(&members, blend.x.view())?;
    let blender = match head {
        Head::Regression { .. } => Blender::Boosting(GradientBoosting::fit(z.view(), blend.y.view(), BoostInit::RowMean, boost)?),
        Head::Classification { classes } => {
            let labels: Vec<usize> = blend.y.iter().map(|&v| v as usize).collect();
            Blender::Forest(ExtraTrees::fit(z.view(), &labels, classes, forest)?)
        }
    };
    Ok(EnsembleModel {
        head,
        expand_poly2,
        members,
        blender,
        ledger,
    })
}

impl EnsembleModel {
    pub fn input_width(&self) -> usize {
        self.members[0].inputs()
    }

    /// Width of raw feature rows accepted by [`predict_raw`](Self::predict_raw).
    pub fn raw_width(&self) -> usize {
        let w = self.input_width();
        if !self.expand_poly2 {
            return w;
        }
        (1..=w).find(|k| k + k * (k + 1) / 2 == w).unwrap_or(0)
    }

    /// Predictions for already-expanded feature rows: one clamped column for
    /// regression, class scores for classification.
    pub fn predict_features(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let z = member_outputs(&self.members, x)?;
        Ok(match (&self.blender, self.head) {
            (Blender::Boosting(gb), Head::Regression { upper }) => gb
                .predict(z.view())
                .mapv(|v| v.clamp(0.0, upper))
                .insert_axis(Axis(1)),
            (Blender::Forest(f), _) => f.predict_proba(z.view()),
            _ => return Err(Error::Usage("blender does not match the output head".into())),
        })
    }

    pub fn expand(&self, raw: &[f64]) -> Vec<f64> {
        if self.expand_poly2 {
            expand_poly2(raw)
        } else {
            raw.to_vec()
        }
    }

    pub fn predict_raw(&self, rows: &[Vec<f64>]) -> Result<Array2<f64>> {
        let expanded: Vec<Vec<f64>> = rows.iter().map(|r| self.expand(r)).collect();
        let xy = Xy::from_rows(&expanded, &vec![0.0; rows.len()])?;
        if !rows.is_empty() && xy.width() != self.input_width() {
            return Err(Error::Usage(format!(
                "ensemble expects {} raw features, got {}",
                self.raw_width(),
                rows[0].len()
            )));
        }
        self.predict_features(xy.x.view())
    }

    /// Single-row prediction without batching overhead.
    pub fn predict_one(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let x = self.expand(raw);
        let mut z = Vec::new();
        for m in &self.members {
            z.extend(m.predict_one(&x)?);
        }
        let z = Array1::from(z);
        Ok(match (&self.blender, self.head) {
            (Blender::Boosting(gb), Head::Regression { upper }) => vec![gb.predict_row(z.view()).clamp(0.0, upper)],
            (Blender::Forest(f), _) => f.predict_proba_row(z.view()),
            _ => return Err(Error::Usage("blender does not match the output head".into())),
        })
    }

    pub fn evaluate(&self, data: &Xy) -> Result<Metrics> {
        let p = self.predict_features(data.x.view())?;
        score(self.head, &p, data)
    }
}

/// Metrics of prediction matrix `p` against `data.y`.
pub fn score(head: Head, p: &Array2<f64>, data: &Xy) -> Result<Metrics> {
    match head {
        Head::Regression { .. } => Metrics::regression(&p.column(0).to_vec(), &data.y.to_vec()),
        Head::Classification { .. } => {
            let pred: Vec<usize> = p.rows().into_iter().map(|r| argmax(&r.to_vec())).collect();
            let truth: Vec<usize> = data.y.iter().map(|&v| v as usize).collect();
            Metrics::classification(&pred, &truth)
        }
    }
}

pub fn evaluate_member(m: &Mlp, data: &Xy) -> Result<Metrics> {
    score(m.head, &m.predict_batch(data.x.view())?, data)
}
