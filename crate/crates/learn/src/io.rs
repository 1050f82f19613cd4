//! Versioned plain-text model files.
//!
//! One record per line, whitespace separated, numbers with 17 significant
//! digits. The first line is `bellnet-model <version>`, the second names the
//! model type (`mlp` or `ensemble`). Weight matrices are written row-major
//! with shape `(fan_in, fan_out)`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use bellnet_core::{Error, Result};
use ndarray::{Array1, Array2};

use crate::ensemble::{Blender, EnsembleModel, MemberScore};
use crate::metrics::Metrics;
use crate::mlp::{Head, Mlp, MlpConfig};
use crate::trees::{BoostInit, ExtraTrees, GradientBoosting, Node, Tree};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "bellnet-model";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn nums<'a>(it: impl IntoIterator<Item = &'a f64>) -> String {
    it.into_iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ")
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".to_string(), num)
}

fn write_head(out: &mut String, h: Head) {
    match h {
        Head::Regression { upper } => writeln!(out, "head regression {}", num(upper)),
        Head::Classification { classes } => writeln!(out, "head classification {classes}"),
    }
    .unwrap();
}

fn write_mlp(out: &mut String, m: &Mlp) {
    let c = &m.config;
    writeln!(
        out,
        "config {} {} {} {} {} {} {}",
        c.layers,
        c.width,
        num(c.learning_rate),
        c.batch_size,
        c.max_epochs,
        c.patience,
        c.seed
    )
    .unwrap();
    write_head(out, m.head);
    let dims = m.dims();
    writeln!(out, "dims {}", dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ")).unwrap();
    for (w, b) in m.weights.iter().zip(&m.biases) {
        writeln!(out, "w {}", nums(w.iter())).unwrap();
        writeln!(out, "b {}", nums(b.iter())).unwrap();
    }
    let flat: Vec<f64> = m.history.iter().flat_map(|(a, b)| [*a, *b]).collect();
    writeln!(out, "history {} {}", m.history.len(), nums(&flat)).unwrap();
}

fn write_tree(out: &mut String, t: &Tree) {
    writeln!(out, "tree {}", t.nodes.len()).unwrap();
    for n in &t.nodes {
        match n {
            Node::Leaf(v) => writeln!(out, "leaf {} {}", v.len(), nums(v)),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => writeln!(out, "split {feature} {} {left} {right}", num(*threshold)),
        }
        .unwrap();
    }
}

pub fn mlp_to_text(m: &Mlp) -> String {
    let mut out = format!("{MAGIC} {FORMAT_VERSION}\nmlp\n");
    write_mlp(&mut out, m);
    out
}

pub fn ensemble_to_text(e: &EnsembleModel) -> String {
    let mut out = format!("{MAGIC} {FORMAT_VERSION}\nensemble\n");
    write_head(&mut out, e.head);
    writeln!(out, "expand_poly2 {}", e.expand_poly2).unwrap();
    writeln!(out, "ledger {}", e.ledger.len()).unwrap();
    for s in &e.ledger {
        let conf = s
            .metrics
            .confusion
            .map_or("-".to_string(), |c| c.iter().flatten().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        writeln!(
            out,
            "score {} {} {} {} {} {} {} {}",
            s.layers,
            s.width,
            s.seed,
            s.kept,
            s.metrics.n,
            opt(s.metrics.mae),
            opt(s.metrics.accuracy),
            conf
        )
        .unwrap();
    }
    writeln!(out, "members {}", e.members.len()).unwrap();
    for m in &e.members {
        write_mlp(&mut out, m);
    }
    match &e.blender {
        Blender::Boosting(gb) => {
            let init = match gb.init {
                BoostInit::RowMean => "rowmean".to_string(),
                BoostInit::Constant(c) => format!("constant {}", num(c)),
            };
            writeln!(out, "boosting {} {} {init}", gb.trees.len(), num(gb.shrinkage)).unwrap();
            gb.trees.iter().for_each(|t| write_tree(&mut out, t));
        }
        Blender::Forest(f) => {
            writeln!(out, "forest {} {}", f.trees.len(), f.classes).unwrap();
            f.trees.iter().for_each(|t| write_tree(&mut out, t));
        }
    }
    out
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    line: u64,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            it: text.lines().enumerate(),
            line: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    /// Next non-empty line split into tokens, checking the leading keyword.
    fn expect(&mut self, key: &str) -> Result<Vec<&'a str>> {
        loop {
            let (i, l) = self
                .it
                .next()
                .ok_or_else(|| Error::Parse {
                    line: self.line + 1,
                    msg: format!("unexpected end of file, expected '{key}'"),
                })?;
            self.line = i as u64 + 1;
            let mut toks = l.split_whitespace();
            match toks.next() {
                None => continue,
                Some(k) if k == key => return Ok(toks.collect()),
                Some(k) => return Err(self.err(format!("expected '{key}', found '{k}'"))),
            }
        }
    }

    fn parse<T: std::str::FromStr>(&self, tok: Option<&&str>, what: &str) -> Result<T> {
        tok.and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err(format!("missing or malformed {what}")))
    }

    fn floats(&self, toks: &[&str]) -> Result<Vec<f64>> {
        toks.iter()
            .map(|t| t.parse().map_err(|_| self.err(format!("'{t}' is not a number"))))
            .collect()
    }

    fn opt(&self, tok: Option<&&str>) -> Result<Option<f64>> {
        match tok {
            Some(&"-") => Ok(None),
            t => self.parse(t, "metric").map(Some),
        }
    }
}

fn read_head(l: &mut Lines) -> Result<Head> {
    let t = l.expect("head")?;
    match t.first() {
        Some(&"regression") => Ok(Head::Regression {
            upper: l.parse(t.get(1), "upper bound")?,
        }),
        Some(&"classification") => Ok(Head::Classification {
            classes: l.parse(t.get(1), "class count")?,
        }),
        _ => Err(l.err("unknown head")),
    }
}

fn read_mlp(l: &mut Lines) -> Result<Mlp> {
    let c = l.expect("config")?;
    let config = MlpConfig {
        layers: l.parse(c.first(), "layers")?,
        width: l.parse(c.get(1), "width")?,
        learning_rate: l.parse(c.get(2), "learning rate")?,
        batch_size: l.parse(c.get(3), "batch size")?,
        max_epochs: l.parse(c.get(4), "epochs")?,
        patience: l.parse(c.get(5), "patience")?,
        seed: l.parse(c.get(6), "seed")?,
    };
    let head = read_head(l)?;
    let dims: Vec<usize> = l
        .expect("dims")?
        .iter()
        .map(|t| t.parse().map_err(|_| l.err("malformed dims")))
        .collect::<Result<_>>()?;
    if dims.len() < 2 || dims.last() != Some(&head.outputs()) {
        return Err(l.err("layer sizes do not match the output head"));
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for p in dims.windows(2) {
        let t = l.expect("w")?;
        let w = l.floats(&t)?;
        let w = Array2::from_shape_vec((p[0], p[1]), w).map_err(|_| l.err(format!("expected {}x{} weights", p[0], p[1])))?;
        let t = l.expect("b")?;
        let b = l.floats(&t)?;
        if b.len() != p[1] {
            return Err(l.err(format!("expected {} biases", p[1])));
        }
        weights.push(w);
        biases.push(Array1::from(b));
    }
    let h = l.expect("history")?;
    let n: usize = l.parse(h.first(), "history length")?;
    let flat = l.floats(&h[1..])?;
    if flat.len() != 2 * n {
        return Err(l.err("history length mismatch"));
    }
    Ok(Mlp {
        config,
        head,
        weights,
        biases,
        history: flat.chunks(2).map(|p| (p[0], p[1])).collect(),
    })
}

fn read_tree(l: &mut Lines) -> Result<Tree> {
    let t = l.expect("tree")?;
    let n: usize = l.parse(t.first(), "node count")?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let (i, line) = l.it.next().ok_or_else(|| l.err("unexpected end of tree"))?;
        l.line = i as u64 + 1;
        let t: Vec<&str> = line.split_whitespace().collect();
        nodes.push(match t.first() {
            Some(&"leaf") => {
                let k: usize = l.parse(t.get(1), "leaf size")?;
                let v = l.floats(&t[2..])?;
                if v.len() != k {
                    return Err(l.err("leaf size mismatch"));
                }
                Node::Leaf(v)
            }
            Some(&"split") => Node::Split {
                feature: l.parse(t.get(1), "feature")?,
                threshold: l.parse(t.get(2), "threshold")?,
                left: l.parse(t.get(3), "left child")?,
                right: l.parse(t.get(4), "right child")?,
            },
            _ => return Err(l.err("expected 'leaf' or 'split'")),
        });
    }
    if nodes.iter().any(|nd| matches!(nd, Node::Split { left, right, .. } if *left >= n || *right >= n)) {
        return Err(l.err("tree child index out of range"));
    }
    Ok(Tree { nodes })
}

fn read_preamble<'a>(text: &'a str, kind: &str) -> Result<Lines<'a>> {
    let mut l = Lines::new(text);
    let v = l.expect(MAGIC)?;
    let version: u32 = l.parse(v.first(), "format version")?;
    if version != FORMAT_VERSION {
        return Err(l.err(format!("unsupported format version {version}")));
    }
    l.expect(kind)?;
    Ok(l)
}

pub fn mlp_from_text(text: &str) -> Result<Mlp> {
    let mut l = read_preamble(text, "mlp")?;
    read_mlp(&mut l)
}

pub fn ensemble_from_text(text: &str) -> Result<EnsembleModel> {
    let mut l = read_preamble(text, "ensemble")?;
    let head = read_head(&mut l)?;
    let t = l.expect("expand_poly2")?;
    let expand_poly2 = l.parse(t.first(), "flag")?;
    let t = l.expect("ledger")?;
    let n: usize = l.parse(t.first(), "ledger size")?;
    let mut ledger = Vec::with_capacity(n);
    for _ in 0..n {
        let t = l.expect("score")?;
        let confusion = match t.get(7) {
            Some(&"-") => None,
            Some(s) => {
                let v: Vec<u64> = s.split(',').map(|x| x.parse().map_err(|_| l.err("bad confusion"))).collect::<Result<_>>()?;
                if v.len() != 9 {
                    return Err(l.err("confusion needs 9 counts"));
                }
                Some([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
            }
            None => return Err(l.err("missing confusion")),
        };
        ledger.push(MemberScore {
            layers: l.parse(t.first(), "layers")?,
            width: l.parse(t.get(1), "width")?,
            seed: l.parse(t.get(2), "seed")?,
            kept: l.parse(t.get(3), "kept flag")?,
            metrics: Metrics {
                n: l.parse(t.get(4), "count")?,
                mae: l.opt(t.get(5))?,
                accuracy: l.opt(t.get(6))?,
                confusion,
            },
        });
    }
    let t = l.expect("members")?;
    let n: usize = l.parse(t.first(), "member count")?;
    let members = (0..n).map(|_| read_mlp(&mut l)).collect::<Result<Vec<_>>>()?;
    if members.is_empty() {
        return Err(l.err("an ensemble needs at least one member"));
    }
    let blender = match head {
        Head::Regression { .. } => {
            let t = l.expect("boosting")?;
            let count: usize = l.parse(t.first(), "tree count")?;
            let shrinkage = l.parse(t.get(1), "shrinkage")?;
            let init = match t.get(2) {
                Some(&"rowmean") => BoostInit::RowMean,
                Some(&"constant") => BoostInit::Constant(l.parse(t.get(3), "constant")?),
                _ => return Err(l.err("unknown boosting init")),
            };
            let trees = (0..count).map(|_| read_tree(&mut l)).collect::<Result<_>>()?;
            Blender::Boosting(GradientBoosting { init, shrinkage, trees })
        }
        Head::Classification { .. } => {
            let t = l.expect("forest")?;
            let count: usize = l.parse(t.first(), "tree count")?;
            let classes = l.parse(t.get(1), "class count")?;
            let trees = (0..count).map(|_| read_tree(&mut l)).collect::<Result<_>>()?;
            Blender::Forest(ExtraTrees { classes, trees })
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

pub fn save_ensemble(e: &EnsembleModel, path: &Path) -> Result<()> {
    fs::write(path, ensemble_to_text(e))?;
    Ok(())
}

pub fn load_ensemble(path: &Path) -> Result<EnsembleModel> {
    ensemble_from_text(&fs::read_to_string(path)?)
}

pub fn save_mlp(m: &Mlp, path: &Path) -> Result<()> {
    fs::write(path, mlp_to_text(m))?;
    Ok(())
}

pub fn load_mlp(path: &Path) -> Result<Mlp> {
    mlp_from_text(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::train_blender;
    use crate::mlp::Xy;
    use crate::trees::{BoostParams, ForestParams};
    use ndarray::Array2;

    fn member(head: Head, seed: u64) -> Mlp {
        let mut m = Mlp::with_dims(&[3, 5, 4, head.outputs()], head, MlpConfig { seed, ..MlpConfig::default() });
        m.history = vec![(0.5, 0.25), (0.125, f64::NAN)];
        m.biases[0][1] = -1.0 / 3.0;
        m
    }

    fn data(classes: bool) -> Xy {
        let x = Array2::from_shape_fn((60, 3), |(i, j)| ((i * 7 + j * 13) % 17) as f64 / 17.0 - 0.5);
        let y = (0..60).map(|i| if classes { (i % 3) as f64 } else { (i % 5) as f64 / 10.0 }).collect();
        Xy::new(x, y).unwrap()
    }

    #[test]
    fn mlp_round_trip() {
        let m = member(Head::Regression { upper: 0.5 }, 4);
        let back = mlp_from_text(&mlp_to_text(&m)).unwrap();
        assert_eq!(back.weights, m.weights);
        assert_eq!(back.biases, m.biases);
        assert_eq!(back.config, m.config);
        assert_eq!(back.history[0], m.history[0]);
        assert!(back.history[1].1.is_nan());
    }

    #[test]
    fn ensemble_round_trips() {
        for classes in [false, true] {
            let head = if classes { Head::Classification { classes: 3 } } else { Head::Regression { upper: 1.0 } };
            let mut members = vec![member(head, 1), member(head, 2)];
            members.iter_mut().for_each(|m| m.history.truncate(1));
            let ledger = vec![MemberScore {
                layers: 2,
                width: 100,
                seed: 1,
                kept: true,
                metrics: if classes {
                    Metrics::from_confusion([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
                } else {
                    Metrics::regression(&[0.1], &[0.2]).unwrap()
                },
            }];
            let params = BoostParams { trees: 5, ..BoostParams::default() };
            let forest = ForestParams { trees: 5, ..ForestParams::default() };
            let e = train_blender(members, ledger, &data(classes), head, false, params, forest).unwrap();
            let text = ensemble_to_text(&e);
            let back = ensemble_from_text(&text).unwrap();
            assert_eq!(back, e);
            assert_eq!(ensemble_to_text(&back), text);
        }
    }

    #[test]
    fn malformed_files_name_the_line() {
        let m = member(Head::Regression { upper: 1.0 }, 1);
        let text = mlp_to_text(&m).replace("\nb ", "\nb oops ");
        match mlp_from_text(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
        assert!(mlp_from_text("bellnet-model 99\nmlp\n").is_err());
        assert!(mlp_from_text("").is_err());
    }
}
