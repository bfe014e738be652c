//! Decorated rooted trees.
//!
//! A tree is, at its root, a product `X^k * noise * prod_i I_{a_i}(t_i)`:
//! a polynomial decoration, at most one noise symbol, and a multiset of
//! kernel edges to subtrees. Children are kept sorted by their canonical
//! text, so structural equality is equality of trees.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Result, TreeError};
use crate::lincomb::Comb;
use crate::multi_index::MultiIndex;
use crate::params::{DegreeKind, DegreeParams};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Noise {
    None,
    Xi0,
    Xi1,
}

/// The canonical rendering and its hash are computed once at construction.
/// The rendering is injective (parsing inverts it), so equality, ordering and
/// hashing all ride on the cached string instead of walking the tree.
#[derive(Clone, Debug)]
pub struct DecoratedTree {
    poly: MultiIndex,
    noise: Noise,
    children: std::sync::Arc<Vec<(MultiIndex, DecoratedTree)>>,
    repr: std::sync::Arc<str>,
    hash: u64,
}

impl PartialEq for DecoratedTree {
    fn eq(&self, other: &Self) -> bool {
        self.hash == other.hash && self.repr == other.repr
    }
}

impl Eq for DecoratedTree {}

impl std::hash::Hash for DecoratedTree {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        state.write_u64(self.hash);
    }
}

impl PartialOrd for DecoratedTree {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DecoratedTree {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.repr.cmp(&other.repr)
    }
}

pub type TreeComb = Comb<DecoratedTree>;

impl DecoratedTree {
    pub fn assemble(
        poly: MultiIndex,
        noise: Noise,
        mut children: Vec<(MultiIndex, DecoratedTree)>,
    ) -> Self {
        children.sort_by_cached_key(|(a, t)| factor_repr(a, t));
        let mut parts: Vec<String> = Vec::new();
        if !poly.is_zero() {
            parts.push(format!("X^{}", index_string(&poly)));
        }
        for (a, t) in &children {
            parts.push(factor_repr(a, t));
        }
        match noise {
            Noise::None => {}
            Noise::Xi0 => parts.push("Xi0".to_string()),
            Noise::Xi1 => parts.push("Xi1".to_string()),
        }
        let repr: std::sync::Arc<str> = if parts.is_empty() {
            "1".into()
        } else {
            parts.join("*").into()
        };
        let hash = {
            use std::hash::{Hash, Hasher};
            let mut h = std::collections::hash_map::DefaultHasher::new();
            repr.hash(&mut h);
            h.finish()
        };
        DecoratedTree {
            poly,
            noise,
            children: std::sync::Arc::new(children),
            repr,
            hash,
        }
    }

    pub fn one(d: usize) -> Self {
        Self::assemble(MultiIndex::zero(d), Noise::None, vec![])
    }

    pub fn xi0(d: usize) -> Self {
        Self::assemble(MultiIndex::zero(d), Noise::Xi0, vec![])
    }

    pub fn xi1(d: usize) -> Self {
        Self::assemble(MultiIndex::zero(d), Noise::Xi1, vec![])
    }

    pub fn monomial(k: MultiIndex) -> Self {
        Self::assemble(k, Noise::None, vec![])
    }

    /// The planted tree I_a(t): a single kernel edge above `t`.
    pub fn plant(a: MultiIndex, t: DecoratedTree) -> Self {
        let d = a.dim() - 1;
        Self::assemble(MultiIndex::zero(d), Noise::None, vec![(a, t)])
    }

    pub fn poly(&self) -> &MultiIndex {
        &self.poly
    }

    pub fn noise(&self) -> Noise {
        self.noise
    }

    pub fn children(&self) -> &[(MultiIndex, DecoratedTree)] {
        &self.children
    }

    pub fn dim(&self) -> usize {
        self.poly.dim() - 1
    }

    pub fn is_one(&self) -> bool {
        self.poly.is_zero() && self.noise == Noise::None && self.children.is_empty()
    }

    /// Pure polynomial X^k (including 1).
    pub fn is_poly(&self) -> bool {
        self.noise == Noise::None && self.children.is_empty()
    }

    /// Exactly I_0(t) with nothing else at the root.
    pub fn is_planted(&self) -> bool {
        self.poly.is_zero()
            && self.noise == Noise::None
            && self.children.len() == 1
            && self.children[0].0.is_zero()
    }

    pub fn with_poly(&self, poly: MultiIndex) -> Self {
        Self::assemble(poly, self.noise, (*self.children).clone())
    }

    /// Root-identifying product. Fails when both factors carry a noise.
    pub fn product(&self, other: &DecoratedTree) -> Result<DecoratedTree> {
        let noise = match (self.noise, other.noise) {
            (Noise::None, n) | (n, Noise::None) => n,
            _ => return Err(TreeError::NoiseProduct),
        };
        let mut children = (*self.children).clone();
        children.extend(other.children.iter().cloned());
        Ok(Self::assemble(self.poly.add(&other.poly), noise, children))
    }

    pub fn noise_count(&self) -> u64 {
        let own = if self.noise == Noise::None { 0 } else { 1 };
        own + self
            .children
            .iter()
            .map(|(_, t)| t.noise_count())
            .sum::<u64>()
    }

    pub fn contains_xi1(&self) -> bool {
        self.noise == Noise::Xi1 || self.children.iter().any(|(_, t)| t.contains_xi1())
    }

    /// Edges of the underlying combinatorial tree: kernel edges plus noises.
    pub fn size(&self) -> u64 {
        let own = if self.noise == Noise::None { 0 } else { 1 };
        own + self
            .children
            .iter()
            .map(|(_, t)| 1 + t.size())
            .sum::<u64>()
    }

    /// Drop every polynomial decoration (used for shape conformance).
    pub fn strip_poly(&self) -> DecoratedTree {
        Self::assemble(
            MultiIndex::zero(self.dim()),
            self.noise,
            self.children
                .iter()
                .map(|(a, t)| (a.clone(), t.strip_poly()))
                .collect(),
        )
    }

    pub fn degree(&self, kind: DegreeKind, params: &DegreeParams) -> BigRational {
        let (fixed, noises, shifts) = self.degree_parts(kind, params);
        let mut deg = BigRational::from_integer(fixed.into());
        if noises != 0 {
            deg += BigRational::from_integer(noises.into()) * &params.alpha;
        }
        if shifts != 0 {
            deg += BigRational::from_integer(shifts.into()) * params.noise_shift();
        }
        deg
    }

    /// The degree decomposed as `fixed + noises * alpha + shifts * (d+2)/2`,
    /// all in machine integers; the rational arithmetic only happens once at
    /// the end of `degree`.
    pub(crate) fn degree_parts(&self, kind: DegreeKind, params: &DegreeParams) -> (i64, i64, i64) {
        let mut fixed = self.poly.scaled_size(&params.scaling) as i64;
        let (mut noises, mut shifts) = (0i64, 0i64);
        match (self.noise, kind) {
            (Noise::None, _) => {}
            (Noise::Xi1, DegreeKind::Deg0) => {
                noises += 1;
                shifts += 1;
            }
            _ => noises += 1,
        }
        for (a, t) in self.children.iter() {
            let (cf, cn, cs) = t.degree_parts(kind, params);
            fixed += cf + 2 - a.scaled_size(&params.scaling) as i64;
            noises += cn;
            shifts += cs;
        }
        (fixed, noises, shifts)
    }

    /// The abstract derivative D_p: Leibniz over the root factors, where a
    /// kernel edge shifts its index by p, the polynomial factor differentiates,
    /// and noises contribute no term of their own.
    pub fn derive(&self, p: &MultiIndex) -> TreeComb {
        let mut out = TreeComb::unit_term(self.clone());
        for j in 0..p.0.len() {
            for _ in 0..p.0[j] {
                out = out.map(|t| t.derive_once(j));
            }
        }
        out
    }

    /// Single derivative in direction j, Leibniz over the root factors.
    fn derive_once(&self, j: usize) -> TreeComb {
        let mut out = TreeComb::zero();
        let e = MultiIndex::unit(self.poly.dim() - 1, j);
        if let Some(reduced) = self.poly.checked_sub(&e) {
            out.add_term(
                Self::assemble(reduced, self.noise, (*self.children).clone()),
                BigRational::from_integer(BigInt::from(self.poly.0[j])),
            );
        }
        for i in 0..self.children.len() {
            let mut children = (*self.children).clone();
            children[i].0 = children[i].0.add(&e);
            out.add_term(
                Self::assemble(self.poly.clone(), self.noise, children),
                BigRational::from_integer(1.into()),
            );
        }
        out
    }

    /// Size of the automorphism group: per node, each class of identical
    /// (edge index, subtree) children with multiplicity m contributes
    /// m! * S(subtree)^m.
    pub fn symmetry_factor(&self) -> BigInt {
        let mut acc = BigInt::from(1);
        let mut i = 0;
        while i < self.children.len() {
            let mut j = i;
            while j < self.children.len() && self.children[j] == self.children[i] {
                j += 1;
            }
            let mult = (j - i) as u32;
            let sub = self.children[i].1.symmetry_factor();
            acc *= crate::multi_index::fact(mult);
            acc *= sub.pow(mult);
            i = j;
        }
        acc
    }

}

fn index_string(a: &MultiIndex) -> String {
    let inner: Vec<String> = a.0.iter().map(|e| e.to_string()).collect();
    format!("({})", inner.join(","))
}

fn factor_repr(a: &MultiIndex, t: &DecoratedTree) -> String {
    if a.is_zero() {
        format!("I[{}]", t.repr)
    } else {
        format!("I_{}[{}]", index_string(a), t.repr)
    }
}

impl fmt::Display for DecoratedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.repr)
    }
}

// ---------------------------------------------------------------------------
// Parsing

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
    d: Option<usize>,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(TreeError::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> Result<()> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{}'", b as char))
        }
    }

    fn int(&mut self) -> Result<u32> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected an integer");
        }
        std::str::from_utf8(&self.input[start..self.pos])
            .unwrap()
            .parse()
            .or_else(|_| self.err("integer out of range"))
    }

    fn index(&mut self) -> Result<MultiIndex> {
        self.eat(b'(')?;
        let mut v = vec![self.int()?];
        while self.peek() == Some(b',') {
            self.pos += 1;
            v.push(self.int()?);
        }
        self.eat(b')')?;
        match self.d {
            Some(d) if d + 1 != v.len() => self.err("inconsistent index dimensions"),
            _ => {
                self.d = Some(v.len() - 1);
                Ok(MultiIndex(v))
            }
        }
    }

    fn factor(&mut self) -> Result<Factor> {
        match self.peek() {
            Some(b'1') => {
                self.pos += 1;
                Ok(Factor::One)
            }
            Some(b'X') => {
                self.pos += 1;
                if self.peek() == Some(b'i') {
                    self.pos += 1;
                    match self.peek() {
                        Some(b'0') => {
                            self.pos += 1;
                            Ok(Factor::Noise(Noise::Xi0))
                        }
                        Some(b'1') => {
                            self.pos += 1;
                            Ok(Factor::Noise(Noise::Xi1))
                        }
                        _ => self.err("expected Xi0 or Xi1"),
                    }
                } else {
                    self.eat(b'^')?;
                    Ok(Factor::Poly(self.index()?))
                }
            }
            Some(b'I') => {
                self.pos += 1;
                let a = if self.peek() == Some(b'_') {
                    self.pos += 1;
                    Some(self.index()?)
                } else {
                    None
                };
                self.eat(b'[')?;
                let t = self.tree()?;
                self.eat(b']')?;
                let d = t.dim();
                if let Some(known) = self.d {
                    if known != d {
                        return self.err("inconsistent index dimensions");
                    }
                }
                let a = a.unwrap_or_else(|| MultiIndex::zero(d));
                if a.dim() != d + 1 {
                    return self.err("edge index dimension does not match subtree");
                }
                Ok(Factor::Edge(a, t))
            }
            Some(c) => self.err(format!("unexpected character '{}'", c as char)),
            None => self.err("unexpected end of input"),
        }
    }

    fn tree(&mut self) -> Result<DecoratedTree> {
        let mut factors = vec![self.factor()?];
        while self.peek() == Some(b'*') {
            self.pos += 1;
            factors.push(self.factor()?);
        }
        // The dimension may only be known after seeing an index somewhere;
        // bare products of 1/Xi default to the tightest guess below.
        let d = self.d.unwrap_or(1);
        let mut poly = MultiIndex::zero(d);
        let mut noise = Noise::None;
        let mut children = Vec::new();
        for f in factors {
            match f {
                Factor::One => {}
                Factor::Poly(k) => {
                    if k.dim() != d + 1 {
                        return self.err("inconsistent index dimensions");
                    }
                    poly = poly.add(&k);
                }
                Factor::Noise(n) => {
                    if noise != Noise::None {
                        return self.err("two noises in one node");
                    }
                    noise = n;
                }
                Factor::Edge(a, t) => children.push((a, t)),
            }
        }
        Ok(DecoratedTree::assemble(poly, noise, children))
    }
}

enum Factor {
    One,
    Poly(MultiIndex),
    Noise(Noise),
    Edge(MultiIndex, DecoratedTree),
}

/// Parse the canonical tree grammar. `d_hint` fixes the dimension for inputs
/// that never mention an index (e.g. "Xi0").
pub fn parse_tree(input: &str, d_hint: usize) -> Result<DecoratedTree> {
    let mut p = Parser {
        input: input.as_bytes(),
        pos: 0,
        d: Some(d_hint),
    };
    let t = p.tree()?;
    if p.pos != p.input.len() {
        return p.err("trailing input");
    }
    let d = t.dim();
    if !dims_uniform(&t, d) {
        return Err(TreeError::Parse {
            pos: 0,
            msg: "inconsistent index dimensions".into(),
        });
    }
    Ok(t)
}

fn dims_uniform(t: &DecoratedTree, d: usize) -> bool {
    t.poly().dim() == d + 1
        && t.children()
            .iter()
            .all(|(a, c)| a.dim() == d + 1 && dims_uniform(c, d))
}

/// Parse "coeff*tree" terms joined by '+'. A bare rational means that
/// multiple of the empty tree; a bare tree has coefficient one.
pub fn parse_comb(input: &str, d_hint: usize) -> Result<TreeComb> {
    let mut comb = TreeComb::zero();
    for raw in input.split('+') {
        let term = raw.trim();
        if term.is_empty() {
            return Err(TreeError::Parse {
                pos: 0,
                msg: "empty term".into(),
            });
        }
        let (coeff_str, tree_str) = match term.split_once('*') {
            Some((c, t)) if looks_rational(c) => (Some(c), t),
            _ => (None, term),
        };
        let coeff = match coeff_str {
            Some(c) => parse_rational(c)?,
            None => {
                if looks_rational(term) {
                    comb.add_term(
                        DecoratedTree::one(d_hint),
                        parse_rational(term)?,
                    );
                    continue;
                }
                BigRational::from_integer(1.into())
            }
        };
        comb.add_term(parse_tree(tree_str, d_hint)?, coeff);
    }
    Ok(comb)
}

fn looks_rational(s: &str) -> bool {
    let s = s.trim();
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_digit() || c == '/' || c == '-')
        && s.chars().any(|c| c.is_ascii_digit())
        // "1" alone is the empty tree, not a coefficient, when no '*' follows
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let parse_int = |t: &str| -> Result<BigInt> {
        t.parse().map_err(|_| TreeError::Parse {
            pos: 0,
            msg: format!("bad integer '{t}'"),
        })
    };
    match s.split_once('/') {
        Some((p, q)) => {
            let den = parse_int(q)?;
            if den == BigInt::from(0) {
                return Err(TreeError::Parse {
                    pos: 0,
                    msg: "zero denominator".into(),
                });
            }
            Ok(BigRational::new(parse_int(p)?, den))
        }
        None => Ok(BigRational::from_integer(parse_int(s)?)),
    }
}

/// Render a rational without spaces, integers plainly.
pub fn rational_string(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Render a combination as "coeff*tree + ..." with larger trees first.
pub fn comb_string(c: &TreeComb) -> String {
    if c.is_zero() {
        return "0".to_string();
    }
    let mut terms: Vec<(u64, String, &BigRational)> = c
        .iter()
        .map(|(t, r)| (t.size(), t.to_string(), r))
        .collect();
    terms.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let rendered: Vec<String> = terms
        .into_iter()
        .map(|(_, t, r)| {
            if r == &BigRational::from_integer(1.into()) {
                t
            } else {
                format!("{}*{}", rational_string(r), t)
            }
        })
        .collect();
    rendered.join(" + ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::rat;
    use std::collections::BTreeSet;

    fn t(s: &str) -> DecoratedTree {
        parse_tree(s, 1).unwrap()
    }

    #[test]
    fn canonical_form_sorts_and_merges() {
        assert_eq!(t("Xi0*I[Xi0]").to_string(), "I[Xi0]*Xi0");
        assert_eq!(t("X^(0,1)*I[Xi0]*X^(1,0)").to_string(), "X^(1,1)*I[Xi0]");
        assert_eq!(t("I_(0,2)[Xi0]*I[Xi0]").to_string(), "I[Xi0]*I_(0,2)[Xi0]");
        assert_eq!(t("1").to_string(), "1");
        assert_eq!(t("X^(0,0)*1").to_string(), "1");
    }

    #[test]
    fn product_merges_roots() {
        let a = t("X^(0,1)*I[Xi0]");
        let b = t("Xi0*I_(0,2)[Xi1]");
        let p = a.product(&b).unwrap();
        assert_eq!(p.to_string(), "X^(0,1)*I[Xi0]*I_(0,2)[Xi1]*Xi0");
        assert!(t("Xi0").product(&t("Xi1")).is_err());
    }

    #[test]
    fn degrees_match_hand_arithmetic() {
        // alpha = -3/2 exactly, for readable numbers
        let params = DegreeParams::new(rat(-3, 2), 1, None).unwrap();
        assert_eq!(t("Xi0").degree(DegreeKind::Deg0, &params), rat(-3, 2));
        assert_eq!(t("Xi1").degree(DegreeKind::Deg0, &params), rat(0, 1));
        assert_eq!(t("Xi1").degree(DegreeKind::Deg1, &params), rat(-3, 2));
        // |X^(1,2)|_s = 2 + 2 = 4, so the product with Xi0 sits at 5/2
        assert_eq!(
            t("X^(1,2)*Xi0").degree(DegreeKind::Deg0, &params),
            rat(5, 2)
        );
        // planted: deg + 2 - |a|
        assert_eq!(t("I[Xi0]").degree(DegreeKind::Deg0, &params), rat(1, 2));
        assert_eq!(
            t("I_(0,2)[Xi0]").degree(DegreeKind::Deg1, &params),
            rat(-3, 2)
        );
        // additivity over root factors
        let prod = t("I[Xi0]*I_(0,2)[Xi0]");
        assert_eq!(prod.degree(DegreeKind::Deg0, &params), rat(-1, 1));
    }

    #[test]
    fn derive_leibniz_example() {
        // D_(0,1)(X^(0,2) I_(0,1)(Xi0)) = 2 X^(0,1) I_(0,1)(Xi0) + X^(0,2) I_(0,2)(Xi0)
        let input = t("X^(0,2)*I_(0,1)[Xi0]");
        let got = input.derive(&MultiIndex(vec![0, 1]));
        assert_eq!(got.coeff(&t("X^(0,1)*I_(0,1)[Xi0]")), rat(2, 1));
        assert_eq!(got.coeff(&t("X^(0,2)*I_(0,2)[Xi0]")), rat(1, 1));
        assert_eq!(got.len(), 2);
        // deriving a bare noise gives zero
        assert!(t("Xi0").derive(&MultiIndex(vec![0, 1])).is_zero());
        // X^q with q < p dies
        assert!(t("X^(0,1)").derive(&MultiIndex(vec![0, 2])).is_zero());
    }

    #[test]
    fn derive_is_a_derivation() {
        let p = MultiIndex(vec![0, 1]);
        let pairs = [
            ("X^(1,1)", "I[Xi0]"),
            ("I[Xi0]*Xi0", "I_(0,2)[I[Xi0]]"),
            ("X^(0,2)", "X^(0,1)*I[Xi1]"),
        ];
        for (a, b) in pairs {
            let (a, b) = (t(a), t(b));
            let lhs = a.product(&b).unwrap().derive(&p);
            let mut rhs = a.derive(&p).try_map(|s| Ok(Comb::unit_term(s.product(&b)?))).unwrap();
            rhs.add(&b.derive(&p).try_map(|s| Ok(Comb::unit_term(a.product(s)?))).unwrap());
            assert_eq!(lhs, rhs, "Leibniz failed for {a} * {b}");
        }
    }

    // Independent automorphism count: the number of distinct ordered
    // drawings of a tree times |Aut| equals the product of the factorials
    // of the child counts over all nodes.
    fn ordered_drawings(t: &DecoratedTree) -> BTreeSet<String> {
        fn go(t: &DecoratedTree) -> BTreeSet<String> {
            if t.children().is_empty() {
                let mut s = BTreeSet::new();
                s.insert(format!("{:?}{:?}", t.poly(), t.noise()));
                return s;
            }
            let per_child: Vec<Vec<String>> = t
                .children()
                .iter()
                .map(|(a, c)| {
                    go(c)
                        .into_iter()
                        .map(|s| format!("{:?}<{}>", a, s))
                        .collect()
                })
                .collect();
            let mut out = BTreeSet::new();
            let mut order: Vec<usize> = (0..per_child.len()).collect();
            permute(&mut order, 0, &mut |ord| {
                // children are unlabeled: each drawing is one choice of
                // permutation and one drawing per child
                let mut combos = vec![String::new()];
                for &i in ord.iter() {
                    let mut next = Vec::new();
                    for prefix in &combos {
                        for s in &per_child[i] {
                            next.push(format!("{prefix}({s})"));
                        }
                    }
                    combos = next;
                }
                for c in combos {
                    out.insert(format!("{:?}{:?}{}", t.poly(), t.noise(), c));
                }
            });
            out
        }
        fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
            if k == v.len() {
                f(v);
                return;
            }
            for i in k..v.len() {
                v.swap(k, i);
                permute(v, k + 1, f);
                v.swap(k, i);
            }
        }
        go(t)
    }

    fn child_factorials(t: &DecoratedTree) -> BigInt {
        let mut acc = crate::multi_index::fact(t.children().len() as u32);
        for (_, c) in t.children() {
            acc *= child_factorials(c);
        }
        acc
    }

    #[test]
    fn symmetry_factor_agrees_with_drawing_count() {
        for s in [
            "Xi0",
            "I[Xi0]",
            "I[Xi0]*I[Xi0]",
            "I[Xi0]*I[Xi0]*I_(0,2)[Xi0]",
            "I[I[Xi0]*I[Xi0]]*I[I[Xi0]*I[Xi0]]",
            "I[Xi0]*I[Xi1]",
            "I[I[Xi0]]*I[I[Xi0]]*I[I[Xi0]]",
            "I[Xi0*I[Xi0]]*I[Xi0]*I[Xi0]",
        ] {
            let tree = t(s);
            let drawings = ordered_drawings(&tree).len();
            let expect = child_factorials(&tree) / BigInt::from(drawings as u64);
            assert_eq!(tree.symmetry_factor(), expect, "tree {s}");
        }
        // frozen values
        assert_eq!(t("I[Xi0]*I[Xi0]*I_(0,2)[Xi0]").symmetry_factor(), BigInt::from(2));
        assert_eq!(
            t("I[I[Xi0]*I[Xi0]]*I[I[Xi0]*I[Xi0]]").symmetry_factor(),
            BigInt::from(8)
        );
    }

    #[test]
    fn parse_reports_positions() {
        match parse_tree("I[Xi0", 1) {
            Err(TreeError::Parse { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_tree("Xi0*Xi1", 1).is_err());
        assert!(parse_tree("I_(0,1,2)[Xi0]", 1).is_err());
    }

    #[test]
    fn comb_rendering() {
        let mut c = TreeComb::zero();
        c.add_term(t("I[Xi0]*Xi0"), rat(1, 1));
        c.add_term(t("1"), rat(-1, 2));
        assert_eq!(comb_string(&c), "I[Xi0]*Xi0 + -1/2*1");
        let parsed = parse_comb("I[Xi0]*Xi0 + -1/2*1", 1).unwrap();
        assert_eq!(parsed, c);
        assert_eq!(parse_comb("3/2", 1).unwrap().coeff(&t("1")), rat(3, 2));
    }
}
