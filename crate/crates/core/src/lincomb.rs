//! Formal linear combinations with exact rational coefficients.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hash};

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::Result;

/// Finite linear combination of basis elements `K` over the rationals.
/// Zero coefficients are never stored, so equality is structural. The
/// backing map uses a fixed-seed hasher so iteration order is reproducible
/// run to run, which keeps reports byte-identical across repeats.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Comb<K: Eq + Hash + Clone> {
    terms: HashMap<K, BigRational, BuildHasherDefault<DefaultHasher>>,
}

impl<K: Eq + Hash + Clone> Default for Comb<K> {
    fn default() -> Self {
        Comb {
            terms: HashMap::default(),
        }
    }
}

impl<K: Eq + Hash + Clone> Comb<K> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn term(key: K, coeff: BigRational) -> Self {
        let mut c = Self::zero();
        c.add_term(key, coeff);
        c
    }

    pub fn unit_term(key: K) -> Self {
        Self::term(key, BigRational::from_integer(1.into()))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, key: &K) -> BigRational {
        self.terms.get(key).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &BigRational)> {
        self.terms.iter()
    }

    pub fn into_iter_terms(self) -> impl Iterator<Item = (K, BigRational)> {
        self.terms.into_iter()
    }

    pub fn add_term(&mut self, key: K, coeff: BigRational) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(key) {
            std::collections::hash_map::Entry::Occupied(mut slot) => {
                *slot.get_mut() += coeff;
                if slot.get().is_zero() {
                    slot.remove();
                }
            }
            std::collections::hash_map::Entry::Vacant(slot) => {
                slot.insert(coeff);
            }
        }
    }

    pub fn add(&mut self, other: &Comb<K>) {
        for (k, c) in other.iter() {
            self.add_term(k.clone(), c.clone());
        }
    }

    pub fn sub(&mut self, other: &Comb<K>) {
        for (k, c) in other.iter() {
            self.add_term(k.clone(), -c.clone());
        }
    }

    pub fn scaled(&self, factor: &BigRational) -> Comb<K> {
        let mut out = Comb::zero();
        if factor.is_zero() {
            return out;
        }
        for (k, c) in self.iter() {
            out.add_term(k.clone(), c * factor);
        }
        out
    }

    /// Lift a linear map on basis elements to the whole combination.
    pub fn map<K2: Eq + Hash + Clone>(&self, f: impl Fn(&K) -> Comb<K2>) -> Comb<K2> {
        let mut out = Comb::zero();
        for (k, c) in self.iter() {
            out.add(&f(k).scaled(c));
        }
        out
    }

    /// Same as `map` for maps that can fail (e.g. products of noises).
    pub fn try_map<K2: Eq + Hash + Clone>(
        &self,
        f: impl Fn(&K) -> Result<Comb<K2>>,
    ) -> Result<Comb<K2>> {
        let mut out = Comb::zero();
        for (k, c) in self.iter() {
            out.add(&f(k)?.scaled(c));
        }
        Ok(out)
    }
}

impl<K: Eq + Hash + Clone> FromIterator<(K, BigRational)> for Comb<K> {
    fn from_iter<T: IntoIterator<Item = (K, BigRational)>>(iter: T) -> Self {
        let mut c = Comb::zero();
        for (k, v) in iter {
            c.add_term(k, v);
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::rat;

    #[test]
    fn cancellation_removes_terms() {
        let mut c = Comb::term("a", rat(1, 2));
        c.add_term("a", rat(-1, 2));
        assert!(c.is_zero());
        c.add_term("b", rat(0, 1));
        assert!(c.is_zero());
    }

    #[test]
    fn map_is_linear() {
        let mut c = Comb::term(1i32, rat(2, 1));
        c.add_term(2, rat(3, 1));
        let doubled = c.map(|k| Comb::term(k * 10, rat(1, 1)));
        assert_eq!(doubled.coeff(&10), rat(2, 1));
        assert_eq!(doubled.coeff(&20), rat(3, 1));
    }
}
