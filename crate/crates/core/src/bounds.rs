use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lower_i, upper_i]`, used for control bounds and for
/// the region of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct BoxBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(intervals: &[(f64, f64)]) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidArgument("bounds need at least one dimension".into()));
        }
        for (i, &(lo, hi)) in intervals.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "bounds for dimension {i} are not well ordered: [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self {
            lower: intervals.iter().map(|b| b.0).collect(),
            upper: intervals.iter().map(|b| b.1).collect(),
        })
    }

    pub fn symmetric(half_widths: &[f64]) -> Result<Self> {
        Self::new(&half_widths.iter().map(|&w| (-w, w)).collect::<Vec<_>>())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn span(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.dim()
            && v.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *x >= *l && *x <= *u)
    }

    pub fn clamp_in_place(&self, v: &mut [f64]) {
        for (x, (l, u)) in v.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*l, *u);
        }
    }

    /// Zero, clamped into the box.
    pub fn clamped_zero(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        self.clamp_in_place(&mut z);
        z
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| rng.random_range(*l..=*u))
            .collect()
    }

    /// Concatenation `self × other`.
    pub fn product(&self, other: &BoxBounds) -> BoxBounds {
        let mut lower = self.lower.clone();
        lower.extend_from_slice(&other.lower);
        let mut upper = self.upper.clone();
        upper.extend_from_slice(&other.upper);
        BoxBounds { lower, upper }
    }

    /// The box repeated `times` times.
    pub fn repeat(&self, times: usize) -> BoxBounds {
        BoxBounds {
            lower: self.lower.repeat(times),
            upper: self.upper.repeat(times),
        }
    }
}

impl TryFrom<Vec<[f64; 2]>> for BoxBounds {
    type Error = Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(&v.iter().map(|b| (b[0], b[1])).collect::<Vec<_>>())
    }
}

impl From<BoxBounds> for Vec<[f64; 2]> {
    fn from(b: BoxBounds) -> Self {
        b.lower.iter().zip(&b.upper).map(|(l, u)| [*l, *u]).collect()
    }
}
