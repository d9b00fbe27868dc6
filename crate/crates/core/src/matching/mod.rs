//! Elastic matching between multivariate sequences.
//!
//! Four matchers share the same column-wise local cost:
//! [`dtw`], its soft-minimum relaxation [`sdtw`], the global alignment
//! kernel [`gak`], and minimal variance matching [`mvm`]. The
//! [`oracle`] module enumerates alignments exhaustively for small inputs
//! and is what the dynamic programs are tested against.

mod cost;
mod dtw;
mod mvm;
pub mod oracle;
mod soft;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cost::{cost_matrix, CostMatrix, Metric};
pub use dtw::dtw;
pub use mvm::mvm;
pub use soft::{gak, log_gak, sdtw, softmin};

/// A sequence of `len` points in `dim` dimensions, stored column-major so
/// that each time step is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    dim: usize,
    data: Vec<f64>,
}

impl Sequence {
    /// Build from F rows of K samples each.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::EmptyInput("sequence needs at least one feature row".into()));
        }
        let len = rows[0].as_ref().len();
        if len == 0 {
            return Err(Error::EmptyInput("sequence has no samples".into()));
        }
        if rows.iter().any(|r| r.as_ref().len() != len) {
            return Err(Error::arg("sequence rows differ in length"));
        }
        let mut data = Vec::with_capacity(dim * len);
        for k in 0..len {
            data.extend(rows.iter().map(|r| r.as_ref()[k]));
        }
        Ok(Self { dim, data })
    }

    pub fn univariate(xs: &[f64]) -> Result<Self> {
        Self::from_rows(&[xs])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The point at time step `k`.
    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }
}

pub(crate) fn check_pair(a: &Sequence, b: &Sequence, metric: Metric) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::arg(format!(
            "sequences have {} and {} features",
            a.dim(),
            b.dim()
        )));
    }
    if metric == Metric::KullbackLeibler {
        cost::check_positive(a)?;
        cost::check_positive(b)?;
    }
    Ok(())
}

/// Elastic matching algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dtw,
    Sdtw,
    Gak,
    Mvm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Dtw, Algorithm::Sdtw, Algorithm::Gak, Algorithm::Mvm];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dtw => "dtw",
            Algorithm::Sdtw => "sdtw",
            Algorithm::Gak => "gak",
            Algorithm::Mvm => "mvm",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dtw" => Ok(Algorithm::Dtw),
            "sdtw" | "soft-dtw" => Ok(Algorithm::Sdtw),
            "gak" => Ok(Algorithm::Gak),
            "mvm" => Ok(Algorithm::Mvm),
            other => Err(Error::arg(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Free parameters of the matchers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    /// Smoothing of sDTW and GAK.
    pub gamma: f64,
    /// Largest target-index advance per MVM link.
    pub elasticity_v: usize,
    pub metric: Metric,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            gamma: 5.0,
            elasticity_v: 10,
            metric: Metric::Euclidean,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::arg(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.elasticity_v == 0 {
            return Err(Error::arg("elasticity v must be at least 1"));
        }
        Ok(())
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }

    pub fn with_elasticity(self, elasticity_v: usize) -> Self {
        Self {
            elasticity_v,
            ..self
        }
    }
}

/// Result of one match: a distance (lower is closer) or a kernel
/// similarity, kept as its logarithm so long sequences do not underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatchScore {
    Distance(f64),
    Similarity { log_value: f64 },
}

impl MatchScore {
    /// The raw score: the distance, or the similarity itself.
    pub fn value(&self) -> f64 {
        match *self {
            MatchScore::Distance(d) => d,
            MatchScore::Similarity { log_value } => log_value.exp(),
        }
    }

    /// Distance semantics for argmin decisions; similarities map to `-log k`.
    pub fn as_distance(&self) -> f64 {
        match *self {
            MatchScore::Distance(d) => d,
            MatchScore::Similarity { log_value } => -log_value,
        }
    }

    pub fn is_similarity(&self) -> bool {
        matches!(self, MatchScore::Similarity { .. })
    }
}

/// Run `algorithm` on `(a, b)`.
pub fn score(algorithm: Algorithm, a: &Sequence, b: &Sequence, params: &MatchParams) -> Result<MatchScore> {
    match algorithm {
        Algorithm::Dtw => dtw(a, b, params.metric),
        Algorithm::Sdtw => sdtw(a, b, params.gamma, params.metric),
        Algorithm::Gak => gak(a, b, params.gamma, params.metric),
        Algorithm::Mvm => mvm(a, b, params.elasticity_v, params.metric),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_layout_is_column_major() {
        let s = Sequence::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.point(1), &[2.0, 5.0]);
        assert!(Sequence::from_rows::<Vec<f64>>(&[]).is_err());
        assert!(Sequence::univariate(&[]).is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("lcss".parse::<Algorithm>().is_err());
    }

    #[test]
    fn similarity_maps_to_negative_log() {
        let s = MatchScore::Similarity { log_value: -2.5 };
        assert_eq!(s.as_distance(), 2.5);
        assert!((s.value() - (-2.5f64).exp()).abs() < 1e-15);
        assert_eq!(MatchScore::Distance(3.0).as_distance(), 3.0);
    }

    #[test]
    fn params_validation() {
        assert!(MatchParams::default().validate().is_ok());
        assert!(MatchParams::default().with_gamma(-1.0).validate().is_err());
        assert!(MatchParams::default().with_elasticity(0).validate().is_err());
    }
}
