//! Mean absolute error, accuracy and confusion counts.

use std::fmt;

use bellnet_core::classify::CorrelationClass;
use bellnet_core::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub n: usize,
    pub mae: Option<f64>,
    pub accuracy: Option<f64>,
    /// `confusion[i][j]` counts records of true class `i` predicted as `j`.
    pub confusion: Option<[[u64; 3]; 3]>,
}

impl Metrics {
    pub fn regression(pred: &[f64], target: &[f64]) -> Result<Self> {
        if pred.len() != target.len() || pred.is_empty() {
            return Err(Error::Usage(format!(
                "need equal, non-zero numbers of predictions and targets ({} vs {})",
                pred.len(),
                target.len()
            )));
        }
        let mae = pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64;
        Ok(Self {
            n: pred.len(),
            mae: Some(mae),
            accuracy: None,
            confusion: None,
        })
    }

    pub fn classification(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() || pred.is_empty() {
            return Err(Error::Usage(format!(
                "need equal, non-zero numbers of predictions and labels ({} vs {})",
                pred.len(),
                truth.len()
            )));
        }
        let mut c = [[0u64; 3]; 3];
        for (&p, &t) in pred.iter().zip(truth) {
            if p > 2 || t > 2 {
                return Err(Error::Usage(format!("class label outside 0..3 ({t} -> {p})")));
            }
            c[t][p] += 1;
        }
        Ok(Self::from_confusion(c))
    }

    pub fn from_confusion(c: [[u64; 3]; 3]) -> Self {
        let n: u64 = c.iter().flatten().sum();
        let hits: u64 = (0..3).map(|i| c[i][i]).sum();
        Self {
            n: n as usize,
            mae: None,
            accuracy: Some(if n == 0 { 0.0 } else { hits as f64 / n as f64 }),
            confusion: Some(c),
        }
    }

    /// Local records predicted post-quantum plus post-quantum records
    /// predicted local.
    pub fn local_postquantum_confusions(&self) -> Option<u64> {
        let (l, p) = (CorrelationClass::Local.index(), CorrelationClass::PostQuantum.index());
        self.confusion.map(|c| c[l][p] + c[p][l])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        s += &format!("n,{}\n", self.n);
        if let Some(m) = self.mae {
            s += &format!("mae,{m:.10e}\n");
        }
        if let Some(a) = self.accuracy {
            s += &format!("accuracy,{a:.10}\n");
        }
        if let Some(c) = self.confusion {
            for (i, row) in c.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    s += &format!("confusion_{i}_{j},{v}\n");
                }
            }
        }
        s
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records: {}", self.n)?;
        if let Some(m) = self.mae {
            writeln!(f, "MAE: {m:.4e}")?;
        }
        if let Some(a) = self.accuracy {
            writeln!(f, "accuracy: {:.5}", a)?;
        }
        if let Some(c) = self.confusion {
            writeln!(f, "{:>14} {:>10} {:>10} {:>13}", "true \\ pred", "local", "quantum", "post-quantum")?;
            for (class, row) in CorrelationClass::ALL.iter().zip(c) {
                writeln!(f, "{:>14} {:>10} {:>10} {:>13}", class.to_string(), row[0], row[1], row[2])?;
            }
        }
        Ok(())
    }
}
