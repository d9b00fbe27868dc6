use super::{check_pair, MatchScore, Metric, Sequence};
use crate::error::Result;

/// Classic dynamic time warping with unit steps {(1,0), (0,1), (1,1)},
/// anchored at both ends.
pub fn dtw(a: &Sequence, b: &Sequence, metric: Metric) -> Result<MatchScore> {
    check_pair(a, b, metric)?;
    let d = super::sweep::anchored(
        a,
        b,
        metric,
        0.0,
        f64::INFINITY,
        |diag, up, left| diag.min(up).min(left),
        |acc, cost| cost + acc,
    );
    Ok(MatchScore::Distance(d))
}
