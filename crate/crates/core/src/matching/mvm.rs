use super::{check_pair, MatchScore, Metric, Sequence};
use crate::error::{Error, Result};

/// Minimal variance matching of a shorter `query` into a `target`.
///
/// Every query point is matched to exactly one target point with strictly
/// increasing target indices. Consecutive query points may advance the
/// target index by `1..=min(1 + L - K, elasticity_v)`; leading and trailing
/// target points can be skipped. The score is the least total local cost.
pub fn mvm(query: &Sequence, target: &Sequence, elasticity_v: usize, metric: Metric) -> Result<MatchScore> {
    check_pair(query, target, metric)?;
    let (k_len, l_len) = (query.len(), target.len());
    if k_len > l_len {
        return Err(Error::arg(format!(
            "query of length {k_len} is longer than target of length {l_len}"
        )));
    }
    if elasticity_v == 0 {
        return Err(Error::arg("elasticity v must be at least 1"));
    }
    let slack = l_len - k_len;
    let width = (1 + slack).min(elasticity_v);
    // query point k can only sit on target indices k..=k + slack
    let band = slack + 1;
    let inf = f64::INFINITY;
    let mut prev: Vec<f64> = (0..band)
        .map(|o| metric.distance(query.point(0), target.point(o)))
        .collect();
    let mut cur = vec![inf; band];
    for k in 1..k_len {
        let x = query.point(k);
        for o in 0..band {
            // previous target index l - s = (k - 1) + (o + 1 - s)
            let mut best = inf;
            for s in 1..=width {
                if let Some(po) = (o + 1).checked_sub(s) {
                    best = best.min(prev[po]);
                }
            }
            cur[o] = if best == inf {
                inf
            } else {
                best + metric.distance(x, target.point(k + o))
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(MatchScore::Distance(prev.iter().copied().fold(inf, f64::min)))
}
