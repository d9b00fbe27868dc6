use serde::{Deserialize, Serialize};

use super::{check_pair, Sequence};
use crate::error::{Error, Result};

/// Local distance between two points of equal dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
    /// Elementwise `x * ln(x / y)` summed; inputs must be positive.
    #[serde(rename = "kl")]
    KullbackLeibler,
}

impl Metric {
    #[inline]
    pub fn distance(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => {
                if x.len() == 1 {
                    (x[0] - y[0]).abs()
                } else {
                    x.iter()
                        .zip(y)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                }
            }
            Metric::Manhattan => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
            Metric::KullbackLeibler => x.iter().zip(y).map(|(a, b)| a * (a / b).ln()).sum(),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "manhattan" | "l1" => Ok(Metric::Manhattan),
            "kl" | "kullback-leibler" => Ok(Metric::KullbackLeibler),
            other => Err(Error::arg(format!("unknown metric {other:?}"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::KullbackLeibler => "kl",
        })
    }
}

pub(super) fn check_positive(s: &Sequence) -> Result<()> {
    match s.data.iter().position(|&x| !(x > 0.0)) {
        Some(i) => Err(Error::Domain(format!(
            "kl metric needs strictly positive entries, found {} at time step {}",
            s.data[i],
            i / s.dim
        ))),
        None => Ok(()),
    }
}

/// Pairwise local costs between every column of `a` and every column of `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    metric: Metric,
}

impl CostMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.cols + l]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

pub fn cost_matrix(a: &Sequence, b: &Sequence, metric: Metric) -> Result<CostMatrix> {
    check_pair(a, b, metric)?;
    let (rows, cols) = (a.len(), b.len());
    let mut values = Vec::with_capacity(rows * cols);
    for k in 0..rows {
        let x = a.point(k);
        values.extend((0..cols).map(|l| metric.distance(x, b.point(l))));
    }
    Ok(CostMatrix {
        rows,
        cols,
        values,
        metric,
    })
}
