//! Exhaustive reference implementations for small inputs.
//!
//! These enumerate every warping path (or every admissible index map for
//! MVM) explicitly and share no code with the dynamic programs beyond the
//! local metric.

use super::{check_pair, MatchParams, MatchScore, Sequence};
use crate::error::{Error, Result};

/// Largest sequence length the enumerators accept.
pub const MAX_ENUMERATION_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    Dtw,
    Sdtw,
    Gak,
    Mvm,
}

fn guard(a: &Sequence, b: &Sequence) -> Result<()> {
    if a.len() > MAX_ENUMERATION_LEN || b.len() > MAX_ENUMERATION_LEN {
        return Err(Error::Refused(format!(
            "enumeration limited to length {MAX_ENUMERATION_LEN}, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Total cost of every monotone warping path from (0,0) to (K-1,L-1).
pub fn alignment_costs(a: &Sequence, b: &Sequence, params: &MatchParams) -> Result<Vec<f64>> {
    check_pair(a, b, params.metric)?;
    guard(a, b)?;
    let mut out = Vec::new();
    // explicit stack of (i, j, cost so far including cell (i, j))
    let first = params.metric.distance(a.point(0), b.point(0));
    let mut stack = vec![(0usize, 0usize, first)];
    let (k_end, l_end) = (a.len() - 1, b.len() - 1);
    while let Some((i, j, c)) = stack.pop() {
        if i == k_end && j == l_end {
            out.push(c);
            continue;
        }
        for (di, dj) in [(1, 0), (0, 1), (1, 1)] {
            let (ni, nj) = (i + di, j + dj);
            if ni <= k_end && nj <= l_end {
                stack.push((ni, nj, c + params.metric.distance(a.point(ni), b.point(nj))));
            }
        }
    }
    Ok(out)
}

/// Cost of every strictly increasing query-to-target index map whose
/// consecutive advances lie in `1..=min(1 + L - K, v)`.
pub fn injection_costs(query: &Sequence, target: &Sequence, params: &MatchParams) -> Result<Vec<f64>> {
    check_pair(query, target, params.metric)?;
    guard(query, target)?;
    let (k, l) = (query.len(), target.len());
    if k > l {
        return Err(Error::arg("query longer than target"));
    }
    let width = (1 + l - k).min(params.elasticity_v);
    let mut out = Vec::new();
    let mut idx = Vec::with_capacity(k);
    fn rec(
        depth: usize,
        idx: &mut Vec<usize>,
        q: &Sequence,
        t: &Sequence,
        width: usize,
        params: &MatchParams,
        out: &mut Vec<f64>,
    ) {
        let (k, l) = (q.len(), t.len());
        if depth == k {
            out.push(
                idx.iter()
                    .enumerate()
                    .map(|(qi, &ti)| params.metric.distance(q.point(qi), t.point(ti)))
                    .sum(),
            );
            return;
        }
        let start = idx.last().map_or(0, |&p| p + 1);
        for ti in start..l {
            if let Some(&p) = idx.last() {
                if ti - p > width {
                    break;
                }
            }
            idx.push(ti);
            rec(depth + 1, idx, q, t, width, params, out);
            idx.pop();
        }
    }
    rec(0, &mut idx, query, target, width, params, &mut out);
    Ok(out)
}

/// Reference value of the chosen matcher by exhaustive enumeration.
pub fn brute_force_oracle(kind: OracleKind, a: &Sequence, b: &Sequence, params: &MatchParams) -> Result<MatchScore> {
    match kind {
        OracleKind::Dtw => {
            let costs = alignment_costs(a, b, params)?;
            Ok(MatchScore::Distance(costs.into_iter().fold(f64::INFINITY, f64::min)))
        }
        OracleKind::Sdtw => {
            let costs = alignment_costs(a, b, params)?;
            let g = params.gamma;
            let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
            if g == 0.0 {
                return Ok(MatchScore::Distance(min));
            }
            let s: f64 = costs.iter().map(|c| (-(c - min) / g).exp()).sum();
            Ok(MatchScore::Distance(min - g * s.ln()))
        }
        OracleKind::Gak => {
            let g = params.gamma;
            if !(g > 0.0) {
                return Err(Error::arg("gak needs gamma > 0"));
            }
            let costs = alignment_costs(a, b, params)?;
            let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
            let s: f64 = costs.iter().map(|c| (-(c - min) / g).exp()).sum();
            Ok(MatchScore::Similarity {
                log_value: -min / g + s.ln(),
            })
        }
        OracleKind::Mvm => {
            let costs = injection_costs(a, b, params)?;
            Ok(MatchScore::Distance(costs.into_iter().fold(f64::INFINITY, f64::min)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uni(xs: &[f64]) -> Sequence {
        Sequence::univariate(xs).unwrap()
    }

    #[test]
    fn path_counts_are_delannoy_numbers() {
        let p = MatchParams::default();
        let x = uni(&[0.0; 3]);
        assert_eq!(alignment_costs(&x, &x, &p).unwrap().len(), 13);
        let y = uni(&[0.0; 4]);
        assert_eq!(alignment_costs(&x, &y, &p).unwrap().len(), 25);
    }

    #[test]
    fn trivial_cases() {
        let p = MatchParams::default().with_gamma(2.0);
        let one = uni(&[1.0]);
        assert_eq!(brute_force_oracle(OracleKind::Dtw, &one, &one, &p).unwrap().value(), 0.0);
        let k = brute_force_oracle(OracleKind::Gak, &uni(&[1.0]), &uni(&[4.0]), &p).unwrap();
        assert!((k.value() - (-1.5f64).exp()).abs() < 1e-15);
        // K == L leaves a single injection: the identity
        let q = uni(&[1.0, 2.0, 3.0]);
        let t = uni(&[3.0, 2.0, 0.0]);
        let m = brute_force_oracle(OracleKind::Mvm, &q, &t, &p).unwrap();
        assert_eq!(m.value(), 2.0 + 0.0 + 3.0);
    }

    #[test]
    fn injection_counts() {
        let p = MatchParams::default().with_elasticity(100);
        let q = uni(&[0.0; 2]);
        let t = uni(&[0.0; 4]);
        assert_eq!(injection_costs(&q, &t, &p).unwrap().len(), 6);
        let p1 = p.with_elasticity(1);
        assert_eq!(injection_costs(&q, &t, &p1).unwrap().len(), 3);
    }

    #[test]
    fn refuses_large_inputs() {
        let p = MatchParams::default();
        let big = uni(&[0.0; 9]);
        assert!(matches!(
            brute_force_oracle(OracleKind::Dtw, &big, &big, &p),
            Err(Error::Refused(_))
        ));
    }
}
