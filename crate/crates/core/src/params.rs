//! Degree bookkeeping: noise regularity and the parabolic scaling.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;

use crate::error::{Result, TreeError};

/// Which of the two degree assignments to use. They differ only on the
/// rough noise symbol: `Deg1` gives `Xi1` the same regularity as `Xi0`,
/// `Deg0` shifts it up by (d+2)/2.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum DegreeKind {
    Deg0,
    Deg1,
}

impl DegreeKind {
    pub fn from_index(i: u8) -> DegreeKind {
        if i == 0 {
            DegreeKind::Deg0
        } else {
            DegreeKind::Deg1
        }
    }
}

#[derive(Clone, Debug)]
pub struct DegreeParams {
    /// Regularity of the driving noise, e.g. -3/2 - 1/100 in one space dimension.
    pub alpha: BigRational,
    /// Number of space dimensions.
    pub d: usize,
    /// Scaling per direction, time first; parabolic by default.
    pub scaling: Vec<u32>,
}

impl DegreeParams {
    pub fn new(alpha: BigRational, d: usize, scaling: Option<Vec<u32>>) -> Result<Self> {
        if !alpha.is_negative() {
            return Err(TreeError::Config("alpha must be negative".into()));
        }
        let scaling = scaling.unwrap_or_else(|| Self::parabolic(d));
        if scaling.len() != d + 1 {
            return Err(TreeError::Config(format!(
                "scaling needs {} entries, got {}",
                d + 1,
                scaling.len()
            )));
        }
        if scaling.iter().any(|&s| s == 0) {
            return Err(TreeError::Config("scaling entries must be >= 1".into()));
        }
        Ok(DegreeParams { alpha, d, scaling })
    }

    fn parabolic(d: usize) -> Vec<u32> {
        let mut s = vec![1; d + 1];
        s[0] = 2;
        s
    }

    /// alpha = -3/2 - 1/100, one space dimension, parabolic scaling.
    pub fn default_d1() -> Self {
        DegreeParams {
            alpha: rat(-151, 100),
            d: 1,
            scaling: vec![2, 1],
        }
    }

    /// alpha = -5/2 - 1/100, three space dimensions, parabolic scaling.
    pub fn default_d3() -> Self {
        DegreeParams {
            alpha: rat(-251, 100),
            d: 3,
            scaling: vec![2, 1, 1, 1],
        }
    }

    /// The gap (d+2)/2 separating the two noise regularities.
    pub fn noise_shift(&self) -> BigRational {
        rat(self.d as i64 + 2, 2)
    }

    pub fn scaled_size(&self, k: &crate::multi_index::MultiIndex) -> BigRational {
        BigRational::from_integer(BigInt::from(k.scaled_size(&self.scaling)))
    }
}

pub fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}
