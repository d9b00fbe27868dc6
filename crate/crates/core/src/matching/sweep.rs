use super::{Metric, Sequence};

/// Anchored three-neighbour recursion over the K×L grid, visited by
/// anti-diagonals so that cells on one diagonal are independent.
///
/// `combine(diag, up, left)` merges predecessors, with `none` standing in
/// for cells outside the grid; `step(acc, cost)` adds the local cost. The
/// origin takes `start` in place of the merged predecessors. Every cell
/// sees exactly the operations a row-major sweep would apply.
#[inline]
pub(super) fn anchored<C, S>(a: &Sequence, b: &Sequence, metric: Metric, start: f64, none: f64, combine: C, step: S) -> f64
where
    C: Fn(f64, f64, f64) -> f64,
    S: Fn(f64, f64) -> f64,
{
    let (k, l) = (a.len(), b.len());
    let mut d2 = vec![none; k];
    let mut d1 = vec![none; k];
    let mut d0 = vec![none; k];
    for d in 0..k + l - 1 {
        let lo = d.saturating_sub(l - 1);
        let hi = d.min(k - 1);
        for i in lo..=hi {
            let j = d - i;
            let acc = if d == 0 {
                start
            } else {
                let up = if i > 0 { d1[i - 1] } else { none };
                let left = if j > 0 { d1[i] } else { none };
                let diag = if i > 0 && j > 0 { d2[i - 1] } else { none };
                combine(diag, up, left)
            };
            d0[i] = step(acc, metric.distance(a.point(i), b.point(j)));
        }
        std::mem::swap(&mut d2, &mut d1);
        std::mem::swap(&mut d1, &mut d0);
    }
    d1[k - 1]
}
