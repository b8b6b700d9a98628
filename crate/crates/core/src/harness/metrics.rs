use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// Success ratios after one interaction of one repetition. A ratio over an
/// empty task set is NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub relation: String,
    pub repetition: usize,
    pub interaction: usize,
    pub seen_ratio: f64,
    pub unseen_ratio: f64,
    pub all_ratio: f64,
    pub demos_received: usize,
}

/// Population mean and standard deviation over the defined values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let vals: Vec<f64> = values.into_iter().filter(|v| !v.is_nan()).collect();
        let n = vals.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN, n };
        }
        // shifted by the first value so identical inputs give exactly zero spread
        let shift = vals[0];
        let offset = vals.iter().map(|v| v - shift).sum::<f64>() / n as f64;
        let mean = shift + offset;
        let var = vals.iter().map(|v| (v - shift - offset).powi(2)).sum::<f64>() / n as f64;
        Self { mean, std: var.sqrt(), n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub interaction: usize,
    pub seen: Stat,
    pub unseen: Stat,
    pub all: Stat,
    pub demos: Stat,
}

/// Mean and std of every metric per interaction index, pooled over all
/// relations and repetitions in `rows`.
pub fn aggregate(rows: &[MetricsRow]) -> Vec<AggregateRow> {
    let mut by_k: BTreeMap<usize, Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        by_k.entry(r.interaction).or_default().push(r);
    }
    by_k.into_iter()
        .map(|(interaction, rs)| AggregateRow {
            interaction,
            seen: Stat::of(rs.iter().map(|r| r.seen_ratio)),
            unseen: Stat::of(rs.iter().map(|r| r.unseen_ratio)),
            all: Stat::of(rs.iter().map(|r| r.all_ratio)),
            demos: Stat::of(rs.iter().map(|r| r.demos_received as f64)),
        })
        .collect()
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>, HarnessError> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| HarnessError::io(path, e))).collect()
}
