//! Multi-indexes over the d+1 space-time directions (direction 0 is time).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// A multi-index in N^{d+1}. Component 0 is the time direction.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d + 1])
    }

    /// Unit index in direction `j` (0 = time).
    pub fn unit(d: usize, j: usize) -> Self {
        let mut v = vec![0; d + 1];
        v[j] = 1;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if self.dim() != other.dim() {
            return None;
        }
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    pub fn leq(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Plain (unscaled) total of the entries; drives signs like (-1)^{|k|}.
    pub fn total(&self) -> u64 {
        self.0.iter().map(|&e| e as u64).sum()
    }

    /// Scaled size |k|_s = sum_j s_j k_j.
    pub fn scaled_size(&self, scaling: &[u32]) -> u64 {
        debug_assert_eq!(self.dim(), scaling.len());
        self.0
            .iter()
            .zip(scaling)
            .map(|(&e, &s)| e as u64 * s as u64)
            .sum()
    }

    pub fn factorial(&self) -> BigInt {
        self.0.iter().map(|&e| fact(e)).product()
    }

    /// k! / (k-p)! componentwise, or None when p does not fit under k.
    pub fn falling_factorial(&self, p: &MultiIndex) -> Option<BigInt> {
        let rest = self.checked_sub(p)?;
        Some(self.factorial() / rest.factorial())
    }

    /// Componentwise binomial coefficient; zero unless j <= k.
    pub fn binomial(&self, j: &MultiIndex) -> BigInt {
        match self.falling_factorial(j) {
            Some(ff) => ff / j.factorial(),
            None => BigInt::zero(),
        }
    }

    /// All multi-indexes with |k|_s strictly below `bound`, in sorted order.
    pub fn below(scaling: &[u32], bound: &BigRational) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        if bound.is_positive() {
            let mut cur = vec![0u32; scaling.len()];
            collect_below(scaling, bound, 0, BigRational::zero(), &mut cur, &mut out);
        }
        out.sort();
        out
    }
}

fn collect_below(
    scaling: &[u32],
    bound: &BigRational,
    pos: usize,
    used: BigRational,
    cur: &mut Vec<u32>,
    out: &mut Vec<MultiIndex>,
) {
    if pos == scaling.len() {
        out.push(MultiIndex(cur.clone()));
        return;
    }
    let step = BigRational::from_integer(BigInt::from(scaling[pos]));
    let mut e = 0u32;
    loop {
        let total = &used + &step * BigRational::from_integer(BigInt::from(e));
        if &total >= bound {
            break;
        }
        cur[pos] = e;
        collect_below(scaling, bound, pos + 1, total, cur, out);
        e += 1;
    }
    cur[pos] = 0;
}

pub fn fact(n: u32) -> BigInt {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= BigInt::from(i);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    #[test]
    fn factorials_and_binomials() {
        let k = MultiIndex(vec![3, 2]);
        assert_eq!(k.factorial(), BigInt::from(12));
        let p = MultiIndex(vec![1, 2]);
        // 3!/2! * 2!/0! = 3 * 2 = 6
        assert_eq!(k.falling_factorial(&p), Some(BigInt::from(6)));
        assert_eq!(k.falling_factorial(&MultiIndex(vec![4, 0])), None);
        assert_eq!(k.binomial(&MultiIndex(vec![2, 1])), BigInt::from(6));
        assert_eq!(k.binomial(&MultiIndex(vec![0, 3])), BigInt::from(0));
    }

    #[test]
    fn scaled_enumeration_matches_hand_count() {
        // parabolic scaling (2,1): |k|_s < 3 gives
        // (0,0),(0,1),(0,2),(1,0) -> 4 indexes
        let got = MultiIndex::below(&[2, 1], &rat(3, 1));
        assert_eq!(got.len(), 4);
        assert!(got.contains(&MultiIndex(vec![1, 0])));
        assert!(got.contains(&MultiIndex(vec![0, 2])));
        assert!(!got.contains(&MultiIndex(vec![1, 1])));
        // non-positive bound is empty
        assert!(MultiIndex::below(&[2, 1], &rat(-1, 2)).is_empty());
        assert!(MultiIndex::below(&[2, 1], &rat(0, 1)).is_empty());
    }
}
