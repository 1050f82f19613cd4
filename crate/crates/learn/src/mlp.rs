//! Fully connected ReLU networks trained with mini-batch Adam.

use bellnet_core::{Error, Result};
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const MIN_LAYERS: usize = 2;
pub const MAX_LAYERS: usize = 5;
pub const WIDTHS: [usize; 9] = [100, 150, 200, 250, 300, 350, 400, 450, 500];

/// Output layer and loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Head {
    /// One linear output trained on squared error; predictions are clamped
    /// to `[0, upper]`.
    Regression { upper: f64 },
    /// Softmax scores trained on cross-entropy.
    Classification { classes: usize },
}

impl Head {
    pub fn outputs(&self) -> usize {
        match self {
            Head::Regression { .. } => 1,
            Head::Classification { classes } => *classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    /// Hidden layers.
    pub layers: usize,
    /// Neurons per hidden layer.
    pub width: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(layers: usize, width: usize) -> Result<Self> {
        let c = Self {
            layers,
            width,
            ..Self::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_LAYERS..=MAX_LAYERS).contains(&self.layers) {
            return Err(Error::Config(format!("layer count {} outside [2, 5]", self.layers)));
        }
        if !WIDTHS.contains(&self.width) {
            return Err(Error::Config(format!(
                "width {} is not a multiple of 50 in [100, 500]",
                self.width
            )));
        }
        self.validate_training()
    }

    pub(crate) fn validate_training(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch size and epoch count must be positive".into()));
        }
        Ok(())
    }
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            width: 200,
            learning_rate: 1e-5,
            batch_size: 200,
            max_epochs: 200,
            patience: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub config: MlpConfig,
    pub head: Head,
    /// `weights[l]` has shape `(fan_in, fan_out)`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    /// `(train, validation)` loss per epoch.
    pub history: Vec<(f64, f64)>,
}

fn relu_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(|v| v.max(0.0));
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

impl Mlp {
    /// He-normal weights seeded by `config.seed`, zero biases.
    pub fn init(inputs: usize, head: Head, config: MlpConfig) -> Self {
        let mut dims = vec![inputs];
        dims.extend(std::iter::repeat(config.width).take(config.layers));
        dims.push(head.outputs());
        Self::with_dims(&dims, head, config)
    }

    /// Arbitrary layer sizes `dims = [inputs, hidden.., outputs]`.
    pub fn with_dims(dims: &[usize], head: Head, config: MlpConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in dims.windows(2) {
            let std = (2.0 / pair[0] as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            weights.push(Array2::from_shape_simple_fn((pair[0], pair[1]), || normal.sample(&mut rng)));
            biases.push(Array1::zeros(pair[1]));
        }
        Self {
            config,
            head,
            weights,
            biases,
            history: Vec::new(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.inputs()];
        d.extend(self.weights.iter().map(|w| w.ncols()));
        d
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.inputs() {
            return Err(Error::Usage(format!(
                "model expects {} features, got {width}",
                self.inputs()
            )));
        }
        Ok(())
    }

    /// Post-activation outputs of every layer; the last entry holds raw
    /// output scores (before softmax).
    fn forward(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.weights.len());
        let last = self.weights.len() - 1;
        let mut h = x.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = h.dot(w) + b;
            if l < last {
                relu_inplace(&mut z);
            }
            acts.push(z.clone());
            h = z;
        }
        acts
    }

    /// Pre-activations of the hidden layers.
    pub fn hidden_preactivations(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut out = Vec::new();
        let mut h = x.to_owned();
        for (w, b) in self.weights.iter().zip(&self.biases).take(self.weights.len() - 1) {
            let z = h.dot(w) + b;
            h = z.mapv(|v| v.max(0.0));
            out.push(z);
        }
        out
    }

    fn finish(&self, mut z: Array2<f64>) -> Array2<f64> {
        match self.head {
            Head::Regression { upper } => z.mapv_inplace(|v| v.clamp(0.0, upper)),
            Head::Classification { .. } => softmax_rows(&mut z),
        }
        z
    }

    /// Row-wise predictions: clamped values (one column) for regression,
    /// class scores summing to one for classification.
    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(x.ncols())?;
        let z = self.forward(x).pop().expect("at least one layer");
        Ok(self.finish(z))
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_width(x.len())?;
        let mut h = ArrayView1::from(x).to_owned();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = h.dot(w) + b;
            if l < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        let row = h.insert_axis(Axis(0));
        Ok(self.finish(row).into_raw_vec_and_offset().0)
    }

    /// Mean loss of raw outputs against targets.
    pub fn loss(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<f64> {
        self.check_width(x.ncols())?;
        let z = self.forward(x).pop().expect("at least one layer");
        Ok(self.output_loss(z, y).0)
    }

    /// Loss and its gradient with respect to the raw output scores.
    fn output_loss(&self, mut z: Array2<f64>, y: ArrayView1<f64>) -> (f64, Array2<f64>) {
        let n = z.nrows() as f64;
        match self.head {
            Head::Regression { .. } => {
                let mut loss = 0.0;
                for (zi, ti) in z.column_mut(0).iter_mut().zip(y.iter()) {
                    let d = *zi - ti;
                    loss += d * d;
                    *zi = 2.0 * d / n;
                }
                (loss / n, z)
            }
            Head::Classification { .. } => {
                softmax_rows(&mut z);
                let mut loss = 0.0;
                for (mut row, &t) in z.rows_mut().into_iter().zip(y.iter()) {
                    let k = t as usize;
                    loss -= row[k].max(1e-300).ln();
                    row[k] -= 1.0;
                    row /= n;
                }
                (loss / n, z)
            }
        }
    }

    /// Mean loss on a batch and the gradients of every weight and bias.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
    ) -> (f64, Vec<Array2<f64>>, Vec<Array1<f64>>) {
        let mut acts = self.forward(x);
        let out = acts.pop().expect("at least one layer");
        let (loss, mut delta) = self.output_loss(out, y);
        let depth = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); depth];
        let mut gb = vec![Array1::zeros(0); depth];
        for l in (0..depth).rev() {
            gw[l] = if l == 0 { x.t().dot(&delta) } else { acts[l - 1].t().dot(&delta) };
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l].t());
                Zip::from(&mut back).and(&acts[l - 1]).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        (loss, gw, gb)
    }
}

struct Adam {
    mw: Vec<Array2<f64>>,
    vw: Vec<Array2<f64>>,
    mb: Vec<Array1<f64>>,
    vb: Vec<Array1<f64>>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(m: &Mlp) -> Self {
        Self {
            mw: m.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            vw: m.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            mb: m.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            vb: m.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            t: 0,
        }
    }

    fn step(&mut self, m: &mut Mlp, gw: &[Array2<f64>], gb: &[Array1<f64>], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let a = lr * c2.sqrt() / c1;
        let eps = Self::EPS * c2.sqrt();
        for l in 0..m.weights.len() {
            Zip::from(&mut m.weights[l])
                .and(&mut self.mw[l])
                .and(&mut self.vw[l])
                .and(&gw[l])
                .for_each(|p, mm, vv, &g| {
                    *mm = Self::B1 * *mm + (1.0 - Self::B1) * g;
                    *vv = Self::B2 * *vv + (1.0 - Self::B2) * g * g;
                    *p -= a * *mm / (vv.sqrt() + eps);
                });
            Zip::from(&mut m.biases[l])
                .and(&mut self.mb[l])
                .and(&mut self.vb[l])
                .and(&gb[l])
                .for_each(|p, mm, vv, &g| {
                    *mm = Self::B1 * *mm + (1.0 - Self::B1) * g;
                    *vv = Self::B2 * *vv + (1.0 - Self::B2) * g * g;
                    *p -= a * *mm / (vv.sqrt() + eps);
                });
        }
    }
}

/// Feature matrix and target vector.
#[derive(Debug, Clone)]
pub struct Xy {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

impl Xy {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Usage(format!("{} feature rows but {} targets", x.nrows(), y.len())));
        }
        Ok(Self { x, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.len());
        let mut x = Array2::zeros((rows.len(), width));
        for (i, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(Error::Usage(format!("row {i} has {} features, expected {width}", r.len())));
            }
            x.row_mut(i).assign(&ArrayView1::from(r.as_slice()));
        }
        Self::new(x, Array1::from(y.to_vec()))
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn width(&self) -> usize {
        self.x.ncols()
    }

    pub fn select(&self, idx: &[usize]) -> Xy {
        Xy {
            x: self.x.select(Axis(0), idx),
            y: self.y.select(Axis(0), idx),
        }
    }

    pub fn head(&self, n: usize) -> Xy {
        let n = n.min(self.len());
        Xy {
            x: self.x.slice(s![..n, ..]).to_owned(),
            y: self.y.slice(s![..n]).to_owned(),
        }
    }
}

/// Trains a fresh network of shape `cfg` with early stopping on `val`; the
/// returned weights are those of the best validation epoch.
pub fn train_mlp(cfg: &MlpConfig, head: Head, train: &Xy, val: &Xy) -> Result<Mlp> {
    cfg.validate()?;
    train_from(Mlp::init(train.width(), head, cfg.clone()), train, val)
}

/// Continues training `model` (any layer sizes) on `train`.
pub fn train_from(mut model: Mlp, train: &Xy, val: &Xy) -> Result<Mlp> {
    let cfg = model.config.clone();
    cfg.validate_training()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Usage("training and validation sets must be non-empty".into()));
    }
    if train.width() != model.inputs() || val.width() != model.inputs() {
        return Err(Error::Usage("feature widths of model and data differ".into()));
    }
    if let Head::Classification { classes } = model.head {
        if let Some(bad) = train.y.iter().chain(val.y.iter()).find(|&&t| t < 0.0 || t as usize >= classes) {
            return Err(Error::Usage(format!("class label {bad} outside 0..{classes}")));
        }
    }
    let mut adam = Adam::new(&model);
    let mut best = (f64::INFINITY, model.weights.clone(), model.biases.clone());
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    for epoch in 0..cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64 + 1);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = train.x.select(Axis(0), batch);
            let yb = train.y.select(Axis(0), batch);
            let (loss, gw, gb) = model.loss_and_gradients(xb.view(), yb.view());
            if !loss.is_finite() {
                return Err(Error::Training {
                    msg: format!("loss became {loss} in epoch {epoch}"),
                    history,
                });
            }
            total += loss * batch.len() as f64;
            adam.step(&mut model, &gw, &gb, cfg.learning_rate);
        }
        let train_loss = total / train.len() as f64;
        let val_loss = model.loss(val.x.view(), val.y.view())?;
        history.push((train_loss, val_loss));
        if !val_loss.is_finite() {
            return Err(Error::Training {
                msg: format!("validation loss became {val_loss} in epoch {epoch}"),
                history,
            });
        }
        log::debug!("seed {} epoch {epoch}: train {train_loss:.3e} val {val_loss:.3e}", cfg.seed);
        if val_loss < best.0 {
            best = (val_loss, model.weights.clone(), model.biases.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience.max(1) {
                break;
            }
        }
    }
    model.weights = best.1;
    model.biases = best.2;
    model.history = history;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cfg(lr: f64, epochs: usize) -> MlpConfig {
        MlpConfig {
            layers: 2,
            width: 100,
            learning_rate: lr,
            max_epochs: epochs,
            batch_size: 50,
            patience: 20,
            seed: 3,
        }
    }

    fn flat(m: &Mlp) -> Vec<f64> {
        m.weights
            .iter()
            .flat_map(|w| w.iter().copied())
            .chain(m.biases.iter().flat_map(|b| b.iter().copied()))
            .collect()
    }

    fn set_flat(m: &mut Mlp, p: &[f64]) {
        let mut it = p.iter().copied();
        for w in &mut m.weights {
            w.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        for b in &mut m.biases {
            b.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
    }

    fn gradient_check(head: Head, y: Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let x = Array2::from_shape_simple_fn((10, 5), || normal.sample(&mut rng));
        let mut m = Mlp::with_dims(&[5, 8, 8, head.outputs()], head, MlpConfig::default());
        for b in &mut m.biases {
            b.iter_mut().for_each(|v| *v = normal.sample(&mut rng) * 0.1);
        }
        let (_, gw, gb) = m.loss_and_gradients(x.view(), y.view());
        let analytic: Vec<f64> = gw
            .iter()
            .flat_map(|w| w.iter().copied())
            .chain(gb.iter().flat_map(|b| b.iter().copied()))
            .collect();
        let p0 = flat(&m);
        let h = 1e-6;
        let mut num = Vec::with_capacity(p0.len());
        for i in 0..p0.len() {
            let mut p = p0.clone();
            p[i] += h;
            set_flat(&mut m, &p);
            let up = m.loss(x.view(), y.view()).unwrap();
            p[i] -= 2.0 * h;
            set_flat(&mut m, &p);
            let down = m.loss(x.view(), y.view()).unwrap();
            num.push((up - down) / (2.0 * h));
        }
        let diff: f64 = analytic.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt()
            + num.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(diff / norm <= 1e-4, "relative gradient error {}", diff / norm);
    }

    #[test]
    fn gradients_match_finite_differences() {
        gradient_check(Head::Regression { upper: 1.0 }, Array1::linspace(-1.0, 1.0, 10));
        gradient_check(Head::Classification { classes: 3 }, Array1::from_iter((0..10).map(|i| (i % 3) as f64)));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut m = Mlp::init(4, Head::Regression { upper: 1.0 }, MlpConfig::default());
        m.weights.iter_mut().for_each(|w| w.fill(0.0));
        assert_eq!(m.predict_one(&[0.3, -0.2, 0.9, 1.0]).unwrap(), vec![0.0]);
        assert!(m.predict_one(&[0.3]).is_err());
    }

    #[test]
    fn softmax_scores_normalized() {
        let m = Mlp::init(3, Head::Classification { classes: 3 }, MlpConfig::default());
        let x = array![[0.1, 0.2, -5.0], [10.0, -3.0, 2.0]];
        for row in m.predict_batch(x.view()).unwrap().rows() {
            assert!(row.iter().all(|v| *v >= 0.0));
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        let one = m.predict_one(&[10.0, -3.0, 2.0]).unwrap();
        let batch = m.predict_batch(x.view()).unwrap();
        for (a, b) in one.iter().zip(batch.row(1)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hidden_layers_positively_homogeneous() {
        let mut m = Mlp::init(4, Head::Regression { upper: 1.0 }, MlpConfig::default());
        m.biases.iter_mut().for_each(|b| b.fill(0.0));
        let x = array![[0.3, -0.7, 0.2, 0.9]];
        let a = m.hidden_preactivations(x.view());
        let b = m.hidden_preactivations((&x * 2.5).view());
        for (la, lb) in a.iter().zip(&b) {
            for (u, v) in la.iter().zip(lb.iter()) {
                assert!((2.5 * u - v).abs() < 1e-9 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn learns_linear_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f: Vec<f64> = (0..1000).map(|_| rand::Rng::gen_range(&mut rng, 0.0..0.5)).collect();
        let x = Array2::from_shape_vec((1000, 1), f.clone()).unwrap();
        let y = Array1::from_iter(f.iter().map(|v| 2.0 * v));
        let data = Xy::new(x, y).unwrap();
        let (train, val) = (data.select(&(0..800).collect::<Vec<_>>()), data.select(&(800..1000).collect::<Vec<_>>()));
        let m = train_mlp(&cfg(1e-3, 100), Head::Regression { upper: 1.0 }, &train, &val).unwrap();
        let p = m.predict_batch(val.x.view()).unwrap();
        let mae = (&p.column(0) - &val.y).mapv(f64::abs).mean().unwrap();
        assert!(mae <= 1e-2, "{mae}");
        assert!(!m.history.is_empty());
    }

    #[test]
    fn learns_constant_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_simple_fn((5000, 1), || rand::Rng::gen_range(&mut rng, -1.0..1.0));
        let data = Xy::new(x, Array1::from_elem(5000, 0.3)).unwrap();
        let (train, val) = (data.head(4000), data.select(&(4000..5000).collect::<Vec<_>>()));
        let m = train_mlp(&cfg(1e-3, 200), Head::Regression { upper: 1.0 }, &train, &val).unwrap();
        for row in val.x.rows() {
            let p = m.predict_one(row.as_slice().unwrap()).unwrap()[0];
            assert!((p - 0.3).abs() <= 1e-3, "{p}");
        }
    }

    #[test]
    fn divergence_reports_history() {
        let x = Array2::from_elem((20, 2), 1e200);
        let data = Xy::new(x, Array1::from_elem(20, 0.5)).unwrap();
        match train_mlp(&cfg(1e-3, 5), Head::Regression { upper: 1.0 }, &data, &data) {
            Err(Error::Training { .. }) => {}
            other => panic!("{:?}", other.map(|m| m.history)),
        }
    }

    #[test]
    fn config_bounds() {
        assert!(MlpConfig::new(1, 100).is_err());
        assert!(MlpConfig::new(6, 100).is_err());
        assert!(MlpConfig::new(3, 120).is_err());
        assert!(MlpConfig::new(3, 550).is_err());
        assert!(MlpConfig::new(5, 500).is_ok());
    }
}
