use super::{check_pair, dtw, MatchScore, Metric, Sequence};
use crate::error::{Error, Result};

/// Generalised soft minimum: `min` for `gamma == 0`, otherwise
/// `-gamma * ln(sum(exp(-a_i / gamma)))`, evaluated with a max shift.
pub fn softmin(values: &[f64], gamma: f64) -> f64 {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    if gamma == 0.0 || m == f64::INFINITY {
        return m;
    }
    let s: f64 = values.iter().map(|&a| (-(a - m) / gamma).exp()).sum();
    m - gamma * s.ln()
}

/// Terms below `exp(-40)` change a sum that contains 1 by less than 1e-17
/// relative and are dropped. The shifted maximum is exactly `exp(0) = 1`.
#[inline]
fn exp_neg(z: f64) -> f64 {
    if z < -40.0 {
        0.0
    } else if z == 0.0 {
        1.0
    } else {
        z.exp()
    }
}

#[inline]
fn softmin3(a: f64, b: f64, c: f64, gamma: f64, inv_gamma: f64) -> f64 {
    let m = a.min(b).min(c);
    if m == f64::INFINITY {
        return m;
    }
    let s = exp_neg((m - a) * inv_gamma) + exp_neg((m - b) * inv_gamma) + exp_neg((m - c) * inv_gamma);
    m - gamma * s.ln()
}

#[inline]
fn logsumexp3(a: f64, b: f64, c: f64) -> f64 {
    let m = a.max(b).max(c);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + (exp_neg(a - m) + exp_neg(b - m) + exp_neg(c - m)).ln()
}

/// Soft dynamic time warping. `gamma == 0` is plain [`dtw`].
pub fn sdtw(a: &Sequence, b: &Sequence, gamma: f64, metric: Metric) -> Result<MatchScore> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::arg(format!("gamma must be >= 0, got {gamma}")));
    }
    if gamma == 0.0 {
        return dtw(a, b, metric);
    }
    check_pair(a, b, metric)?;
    let inv_gamma = 1.0 / gamma;
    let d = super::sweep::anchored(
        a,
        b,
        metric,
        0.0,
        f64::INFINITY,
        |diag, up, left| softmin3(diag, up, left, gamma, inv_gamma),
        |acc, cost| cost + acc,
    );
    Ok(MatchScore::Distance(d))
}

/// Natural log of the global alignment kernel
/// `sum over alignments of exp(-cost / gamma)`, accumulated in log space.
pub fn log_gak(a: &Sequence, b: &Sequence, gamma: f64, metric: Metric) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::arg(format!("gak needs gamma > 0, got {gamma}")));
    }
    check_pair(a, b, metric)?;
    let inv_gamma = 1.0 / gamma;
    Ok(super::sweep::anchored(
        a,
        b,
        metric,
        0.0,
        f64::NEG_INFINITY,
        logsumexp3,
        |acc, cost| acc - cost * inv_gamma,
    ))
}

/// Global alignment kernel as a similarity score.
pub fn gak(a: &Sequence, b: &Sequence, gamma: f64, metric: Metric) -> Result<MatchScore> {
    log_gak(a, b, gamma, metric).map(|log_value| MatchScore::Similarity { log_value })
}
