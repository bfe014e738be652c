//! The positive-degree side: monomials `X^k * prod_j I+_{a_j}(t_j)` whose
//! planted factors all have strictly positive degree. A factor of
//! non-positive degree makes the whole monomial zero, which is what keeps
//! every Taylor-style sum in the coactions finite.

use std::fmt;

use num_rational::BigRational;
use num_traits::Signed;

use crate::error::{Result, TreeError};
use crate::lincomb::Comb;
use crate::multi_index::MultiIndex;
use crate::params::{DegreeKind, DegreeParams};
use crate::tree::DecoratedTree;

/// Which degree the positivity constraint uses. `Plus0` symbols pair with
/// deg_0, `Plus1` with deg_1.
pub type PlusKind = DegreeKind;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct PlusFactor {
    pub kind: PlusKind,
    pub index: MultiIndex,
    pub body: DecoratedTree,
}

impl PlusFactor {
    /// Degree of I_a(body) measured with this factor's own kind.
    pub fn degree(&self, params: &DegreeParams) -> BigRational {
        self.body.degree(self.kind, params) + crate::params::rat(2, 1)
            - params.scaled_size(&self.index)
    }

    pub fn is_positive(&self, params: &DegreeParams) -> bool {
        use num_traits::ToPrimitive;
        let (f, n, sh) = self.body.degree_parts(self.kind, params);
        let fixed = f + 2 - self.index.scaled_size(&params.scaling) as i64;
        // deg = fixed + n*alpha + sh*(d+2)/2; with alpha = p/q (q > 0) the sign
        // of deg matches the sign of 2*q*fixed + 2*n*p + sh*(d+2)*q.
        if let (Some(p), Some(q)) = (
            params.alpha.numer().to_i64(),
            params.alpha.denom().to_i64(),
        ) {
            let val = 2 * q as i128 * fixed as i128
                + 2 * n as i128 * p as i128
                + sh as i128 * (params.d as i128 + 2) * q as i128;
            return val > 0;
        }
        self.degree(params).is_positive()
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct PlusMonomial {
    poly: MultiIndex,
    factors: Vec<PlusFactor>,
}

pub type PlusComb = Comb<PlusMonomial>;
/// Tree (x) plus-monomial, the target of the coactions.
pub type TensorElem = Comb<(DecoratedTree, PlusMonomial)>;
/// Plus (x) plus, the target of the coproduct on the positive side.
pub type TensorPlus = Comb<(PlusMonomial, PlusMonomial)>;

impl PlusMonomial {
    /// Build a monomial, or None when a factor has non-positive degree
    /// (the zero monomial).
    pub fn new(
        poly: MultiIndex,
        mut factors: Vec<PlusFactor>,
        params: &DegreeParams,
    ) -> Option<Self> {
        if factors.iter().any(|f| !f.is_positive(params)) {
            return None;
        }
        factors.sort();
        Some(PlusMonomial { poly, factors })
    }

    pub fn one(d: usize) -> Self {
        PlusMonomial {
            poly: MultiIndex::zero(d),
            factors: vec![],
        }
    }

    pub fn monomial(k: MultiIndex) -> Self {
        PlusMonomial {
            poly: k,
            factors: vec![],
        }
    }

    /// A single planted factor; None when its degree is not positive.
    pub fn plant(
        kind: PlusKind,
        index: MultiIndex,
        body: DecoratedTree,
        params: &DegreeParams,
    ) -> Option<Self> {
        let d = body.dim();
        let f = PlusFactor { kind, index, body };
        if !f.is_positive(params) {
            return None;
        }
        Some(PlusMonomial {
            poly: MultiIndex::zero(d),
            factors: vec![f],
        })
    }

    pub fn poly(&self) -> &MultiIndex {
        &self.poly
    }

    pub fn factors(&self) -> &[PlusFactor] {
        &self.factors
    }

    pub fn is_one(&self) -> bool {
        self.poly.is_zero() && self.factors.is_empty()
    }

    /// Product of monomials. Factors of both kinds may not mix.
    pub fn mult(&self, other: &PlusMonomial) -> Result<PlusMonomial> {
        let kinds: std::collections::BTreeSet<_> = self
            .factors
            .iter()
            .chain(&other.factors)
            .map(|f| f.kind as u8)
            .collect();
        if kinds.len() > 1 {
            return Err(TreeError::KindMismatch);
        }
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        factors.sort();
        Ok(PlusMonomial {
            poly: self.poly.add(&other.poly),
            factors,
        })
    }

    pub fn degree(&self, params: &DegreeParams) -> BigRational {
        let mut deg = params.scaled_size(&self.poly);
        for f in &self.factors {
            deg += f.degree(params);
        }
        deg
    }
}

impl fmt::Display for PlusMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.poly.is_zero() {
            parts.push(format!("X^{}", index_str(&self.poly)));
        }
        for fac in &self.factors {
            let tag = match fac.kind {
                DegreeKind::Deg0 => "I+",
                DegreeKind::Deg1 => "I+1",
            };
            parts.push(format!("{}_{}[{}]", tag, index_str(&fac.index), fac.body));
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

fn index_str(a: &MultiIndex) -> String {
    let inner: Vec<String> = a.0.iter().map(|e| e.to_string()).collect();
    format!("({})", inner.join(","))
}

/// Bilinear product of plus-combinations; zero monomials drop out.
pub fn mult_plus(a: &PlusComb, b: &PlusComb, params: &DegreeParams) -> Result<PlusComb> {
    let mut out = PlusComb::zero();
    for (ma, ca) in a.iter() {
        for (mb, cb) in b.iter() {
            let m = ma.mult(mb)?;
            // re-validate: both inputs were positive so the product is too,
            // but go through the constructor to keep one source of truth
            if let Some(m) = PlusMonomial::new(m.poly.clone(), m.factors.clone(), params) {
                out.add_term(m, ca * cb);
            }
        }
    }
    Ok(out)
}

/// The resummed basis: tilde-I+_a(t) = sum_l X^l/l! I+_{a+l}(t), truncated
/// by positivity of each summand. Kind is the plus-0 flavour.
pub fn tilde_basis(a: &MultiIndex, t: &DecoratedTree, params: &DegreeParams) -> PlusComb {
    let mut out = PlusComb::zero();
    let bound = t.degree(DegreeKind::Deg0, params) + crate::params::rat(2, 1)
        - params.scaled_size(a);
    for l in MultiIndex::below(&params.scaling, &bound) {
        let idx = a.add(&l);
        if let Some(f) = PlusMonomial::plant(DegreeKind::Deg0, idx, t.clone(), params) {
            let m = PlusMonomial {
                poly: l.clone(),
                factors: f.factors,
            };
            out.add_term(
                m,
                BigRational::new(1.into(), l.factorial()),
            );
        }
    }
    out
}

/// Invert the basis change: I+_a(t) = sum_l (-X)^l/l! tilde-I+_{a+l}(t).
/// Returns the list of (l, coefficient) pairs for the surviving terms.
pub fn tilde_inverse_support(
    a: &MultiIndex,
    t: &DecoratedTree,
    params: &DegreeParams,
) -> Vec<(MultiIndex, BigRational)> {
    let bound = t.degree(DegreeKind::Deg0, params) + crate::params::rat(2, 1)
        - params.scaled_size(a);
    MultiIndex::below(&params.scaling, &bound)
        .into_iter()
        .map(|l| {
            let sign = if l.total() % 2 == 0 { 1 } else { -1 };
            let c = BigRational::new(sign.into(), l.factorial());
            (l, c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{rat, DegreeParams};
    use crate::tree::parse_tree;

    fn params() -> DegreeParams {
        DegreeParams::default_d1()
    }

    #[test]
    fn positivity_gates_construction() {
        let p = params();
        let xi = parse_tree("Xi0", 1).unwrap();
        // deg0 I(Xi0) = alpha + 2 = 49/100 > 0
        assert!(PlusMonomial::plant(DegreeKind::Deg0, MultiIndex::zero(1), xi.clone(), &p).is_some());
        // deg0 I_(0,1)(Xi0) = -51/100 <= 0
        assert!(PlusMonomial::plant(DegreeKind::Deg0, MultiIndex(vec![0, 1]), xi, &p).is_none());
    }

    #[test]
    fn tilde_basis_example() {
        // tilde-I+_0(Xi1): deg0 I(Xi1) = alpha + 3/2 + 2 = 199/100, so
        // l in {0, (0,1)} survive and (1,0), (0,2) die.
        let p = params();
        let xi1 = parse_tree("Xi1", 1).unwrap();
        let tb = tilde_basis(&MultiIndex::zero(1), &xi1, &p);
        assert_eq!(tb.len(), 2);
        let lead = PlusMonomial::plant(DegreeKind::Deg0, MultiIndex::zero(1), xi1.clone(), &p).unwrap();
        assert_eq!(tb.coeff(&lead), rat(1, 1));
        let shifted = PlusMonomial {
            poly: MultiIndex(vec![0, 1]),
            factors: PlusMonomial::plant(DegreeKind::Deg0, MultiIndex(vec![0, 1]), xi1, &p)
                .unwrap()
                .factors,
        };
        assert_eq!(tb.coeff(&shifted), rat(1, 1));
    }

    #[test]
    fn tilde_inversion_is_exact() {
        // Substituting the tilde expansion into the inverse support must
        // reproduce the original symbol: the X exponents telescope.
        let p = params();
        let body = parse_tree("I[Xi0]", 1).unwrap(); // higher degree -> several l
        let a = MultiIndex::zero(1);
        let mut total = PlusComb::zero();
        for (l, c) in tilde_inverse_support(&a, &body, &p) {
            let tilde = tilde_basis(&a.add(&l), &body, &p);
            let xl = PlusComb::term(PlusMonomial::monomial(l.clone()), rat(1, 1));
            total.add(&mult_plus(&xl, &tilde, &p).unwrap().scaled(&c));
        }
        let expect = PlusComb::term(
            PlusMonomial::plant(DegreeKind::Deg0, a, body, &p).unwrap(),
            rat(1, 1),
        );
        assert_eq!(total, expect);
    }

    #[test]
    fn kind_mixing_is_rejected() {
        let p = params();
        let xi = parse_tree("Xi0", 1).unwrap();
        let a = PlusMonomial::plant(DegreeKind::Deg0, MultiIndex::zero(1), xi.clone(), &p).unwrap();
        let b = PlusMonomial::plant(DegreeKind::Deg1, MultiIndex::zero(1), xi, &p).unwrap();
        assert!(a.mult(&b).is_err());
        assert!(a.mult(&a).is_ok());
    }

    #[test]
    fn rendering() {
        let p = params();
        let xi = parse_tree("Xi0", 1).unwrap();
        let m = PlusMonomial::plant(DegreeKind::Deg0, MultiIndex::zero(1), xi, &p).unwrap();
        assert_eq!(m.to_string(), "I+_(0,0)[Xi0]");
        assert_eq!(PlusMonomial::one(1).to_string(), "1");
    }
}
