use serde::{Deserialize, Serialize};

use super::protocol::{bootstrap_subset, build_report, prepare, EvalConfig, EvalCorpus, Protocol};
use crate::error::{Error, Result};
use crate::matching::{Algorithm, MatchParams};
use crate::pipeline::ReferenceSet;

pub const GAMMA_GRID: [f64; 6] = [1.0, 2.0, 5.0, 10.0, 100.0, 500.0];
pub const ELASTICITY_GRID: [usize; 6] = [5, 10, 15, 20, 25, 30];

/// Name and value of the parameter `algorithm` is tuned on.
pub fn tuned_parameter(algorithm: Algorithm, params: &MatchParams) -> (&'static str, f64) {
    match algorithm {
        Algorithm::Sdtw | Algorithm::Gak => ("gamma", params.gamma),
        Algorithm::Mvm => ("v", params.elasticity_v as f64),
        Algorithm::Dtw => ("none", 0.0),
    }
}

/// The sweep used for `algorithm`, built on `base`.
pub fn default_grid(algorithm: Algorithm, base: MatchParams) -> Vec<MatchParams> {
    match algorithm {
        Algorithm::Sdtw | Algorithm::Gak => GAMMA_GRID.iter().map(|&g| base.with_gamma(g)).collect(),
        Algorithm::Mvm => ELASTICITY_GRID.iter().map(|&v| base.with_elasticity(v)).collect(),
        Algorithm::Dtw => vec![base],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub value: f64,
    pub params: MatchParams,
    pub accuracy: f64,
}

/// Accuracy at every grid point and the selected optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    pub algorithm: Algorithm,
    pub parameter: String,
    pub rows: Vec<GridRow>,
    pub best: MatchParams,
    pub best_accuracy: f64,
}

impl GridTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("algorithm,{},accuracy\n", self.parameter);
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", self.algorithm, r.value, r.accuracy));
        }
        out
    }
}

/// Score every grid point and return the argmax; ties go to the smaller
/// parameter value.
pub fn grid_search<F>(algorithm: Algorithm, grid: &[MatchParams], mut score: F) -> Result<GridTable>
where
    F: FnMut(&MatchParams) -> Result<f64>,
{
    if grid.is_empty() {
        return Err(Error::arg("parameter grid is empty"));
    }
    let mut points: Vec<MatchParams> = grid.to_vec();
    for p in &points {
        p.validate()?;
    }
    points.sort_by(|a, b| tuned_parameter(algorithm, a).1.total_cmp(&tuned_parameter(algorithm, b).1));
    let mut rows = Vec::with_capacity(points.len());
    let mut best: Option<(MatchParams, f64)> = None;
    for p in points {
        let acc = score(&p)?;
        if !acc.is_nan() && best.is_none_or(|(_, b)| acc > b) {
            best = Some((p, acc));
        }
        rows.push(GridRow {
            value: tuned_parameter(algorithm, &p).1,
            params: p,
            accuracy: acc,
        });
    }
    let (best, best_accuracy) = best.ok_or_else(|| Error::Domain("every grid point scored NaN".into()))?;
    Ok(GridTable {
        algorithm,
        parameter: tuned_parameter(algorithm, &best).0.to_string(),
        rows,
        best,
        best_accuracy,
    })
}

/// Grid search scored on a seeded `fraction` of the noise scenarios.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_grid_search(
    protocol: Protocol,
    corpus: &EvalCorpus,
    refs_same: &ReferenceSet,
    refs_other: Option<&ReferenceSet>,
    algorithm: Algorithm,
    grid: &[MatchParams],
    fraction: f64,
    cfg: &EvalConfig,
) -> Result<GridTable> {
    let subset = bootstrap_subset(cfg.scenarios, fraction, cfg.seed)?;
    grid_search(algorithm, grid, |p| {
        let prepared = prepare(protocol, corpus, refs_same, refs_other, algorithm, p, cfg)?;
        let runs = prepared.run(Some(&subset), cfg.exec)?;
        Ok(build_report(protocol, algorithm, p, cfg, prepared.labels(), &runs)?.acc)
    })
}
