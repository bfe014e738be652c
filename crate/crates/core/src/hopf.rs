//! Coactions, coproducts, the antipode, the noise derivation and the two
//! recentering-comparison maps on decorated trees.

use num_rational::BigRational;
use num_traits::One;

use crate::error::{Result, TreeError};
use crate::multi_index::MultiIndex;
use crate::params::{rat, DegreeKind, DegreeParams};
use crate::plus::{PlusComb, PlusFactor, PlusMonomial, TensorElem, TensorPlus};
use crate::tree::{DecoratedTree, Noise, TreeComb};
use std::rc::Rc;

fn one_rat() -> BigRational {
    BigRational::one()
}

fn tensor_term(t: DecoratedTree, m: PlusMonomial, c: BigRational) -> TensorElem {
    TensorElem::term((t, m), c)
}

/// Pointwise product on tree (x) plus tensors. Noise collisions on the tree
/// side cannot occur for the coactions (each root carries at most one noise
/// and only its own coaction re-emits it), so they surface as a panic.
fn tensor_mult(a: &TensorElem, b: &TensorElem, params: &DegreeParams) -> TensorElem {
    let mut out = TensorElem::zero();
    for ((ta, ma), ca) in a.iter() {
        for ((tb, mb), cb) in b.iter() {
            let t = ta
                .product(tb)
                .expect("noise collision in a coaction product");
            let m = ma.mult(mb).expect("kind mismatch in a coaction product");
            if let Some(m) = PlusMonomial::new(m.poly().clone(), m.factors().to_vec(), params) {
                out.add_term((t, m), ca * cb);
            }
        }
    }
    out
}

fn tensor_plus_mult(a: &TensorPlus, b: &TensorPlus, params: &DegreeParams) -> Result<TensorPlus> {
    let mut out = TensorPlus::zero();
    for ((la, ra), ca) in a.iter() {
        for ((lb, rb), cb) in b.iter() {
            let l = la.mult(lb)?;
            let r = ra.mult(rb)?;
            let l = PlusMonomial::new(l.poly().clone(), l.factors().to_vec(), params);
            let r = PlusMonomial::new(r.poly().clone(), r.factors().to_vec(), params);
            if let (Some(l), Some(r)) = (l, r) {
                out.add_term((l, r), ca * cb);
            }
        }
    }
    Ok(out)
}

/// Binomial splitting of a polynomial decoration across a tensor.
fn split_poly(k: &MultiIndex) -> TensorElem {
    let mut out = TensorElem::zero();
    let d = k.dim() - 1;
    for j in all_sub_indexes(k) {
        let rest = k.checked_sub(&j).unwrap();
        out.add_term(
            (
                DecoratedTree::monomial(j.clone()),
                PlusMonomial::monomial(rest),
            ),
            BigRational::from_integer(k.binomial(&j)),
        );
    }
    let _ = d;
    out
}

fn all_sub_indexes(k: &MultiIndex) -> Vec<MultiIndex> {
    let mut out = vec![MultiIndex(vec![])];
    for &e in &k.0 {
        let mut next = Vec::new();
        for prefix in &out {
            for v in 0..=e {
                let mut p = prefix.0.clone();
                p.push(v);
                next.push(MultiIndex(p));
            }
        }
        out = next;
    }
    out
}

/// The coaction Delta_i. Noises are sent to `noise (x) 1`; a planted tree
/// splits into `(I_a (x) Id) Delta_i` plus the double Taylor sum whose
/// length is controlled by deg_i of the planted tree.
/// Per-thread memo of the symbolic maps, bucketed by the degree parameters
/// they were computed under. Runs rarely switch parameters, so the buckets
/// live in a linear list compared by value; lookups never clone the tree.
#[derive(Default)]
struct HopfMemo {
    coactions: [std::collections::HashMap<DecoratedTree, Rc<TensorElem>>; 2],
    planted: [std::collections::HashMap<(MultiIndex, DecoratedTree), Rc<TensorElem>>; 2],
    delta_hats: std::collections::HashMap<DecoratedTree, Rc<TensorElem>>,
    gamma_hats: std::collections::HashMap<PlusMonomial, Rc<PlusComb>>,
    /// Total stored tensor terms, a proxy for memory held by the memo.
    stored_terms: u64,
    /// Terms held by the planted maps alone.
    planted_terms: u64,
    /// How many times a budget forced a flush.
    flushes: u64,
}

/// Flush thresholds for the memo. Planted pieces include many one-off
/// decoration bumps coming from derivative checks, so they are dropped
/// early and often; whole-tree entries only go in the (rare) event the
/// total footprint grows past the safety net.
const PLANTED_TERM_BUDGET: u64 = 1_500_000;
const MEMO_TERM_BUDGET: u64 = 8_000_000;

/// Entry and term counts of this thread's memo, plus the number of times it
/// hit the budget and was flushed. Diagnostics only.
pub fn memo_stats() -> (usize, u64, u64) {
    HOPF_MEMO.with(|cell| {
        let buckets = cell.borrow();
        let entries = buckets
            .iter()
            .map(|(_, _, m)| {
                m.coactions[0].len()
                    + m.coactions[1].len()
                    + m.planted[0].len()
                    + m.planted[1].len()
                    + m.delta_hats.len()
                    + m.gamma_hats.len()
            })
            .sum();
        let terms = buckets.iter().map(|(_, _, m)| m.stored_terms).sum();
        let flushes = buckets.iter().map(|(_, _, m)| m.flushes).sum();
        (entries, terms, flushes)
    })
}

impl HopfMemo {
    fn charge(&mut self, terms: usize) {
        self.stored_terms += terms as u64;
        if self.planted_terms > PLANTED_TERM_BUDGET {
            self.flushes += 1;
            self.planted[0].clear();
            self.planted[1].clear();
            self.stored_terms -= self.planted_terms;
            self.planted_terms = 0;
        }
        if self.stored_terms > MEMO_TERM_BUDGET {
            self.flushes += 1;
            self.coactions[0].clear();
            self.coactions[1].clear();
            self.planted[0].clear();
            self.planted[1].clear();
            self.delta_hats.clear();
            self.gamma_hats.clear();
            self.stored_terms = 0;
            self.planted_terms = 0;
        }
    }

    fn charge_planted(&mut self, terms: usize) {
        self.planted_terms += terms as u64;
        self.charge(terms);
    }
}

thread_local! {
    static HOPF_MEMO: std::cell::RefCell<Vec<(BigRational, Vec<u32>, HopfMemo)>> =
        const { std::cell::RefCell::new(Vec::new()) };
}

fn with_memo<R>(params: &DegreeParams, f: impl FnOnce(&mut HopfMemo) -> R) -> R {
    HOPF_MEMO.with(|cell| {
        let mut buckets = cell.borrow_mut();
        if let Some(i) = buckets
            .iter()
            .position(|(a, s, _)| *a == params.alpha && *s == params.scaling)
        {
            return f(&mut buckets[i].2);
        }
        buckets.push((params.alpha.clone(), params.scaling.clone(), HopfMemo::default()));
        let last = buckets.last_mut().expect("just pushed");
        f(&mut last.2)
    })
}

/// Memoised per thread: the same subtrees recur across the enumeration, and
/// the coaction of a tree recurses into the coactions of all its subtrees.
pub fn coaction(kind: DegreeKind, t: &DecoratedTree, params: &DegreeParams) -> Rc<TensorElem> {
    let hit = with_memo(params, |m| m.coactions[kind as usize].get(t).cloned());
    if let Some(v) = hit {
        return v;
    }
    let v = Rc::new(coaction_impl(kind, t, params));
    with_memo(params, |m| {
        m.coactions[kind as usize].insert(t.clone(), v.clone());
        m.charge(v.len());
    });
    v
}

/// Like `coaction` but never stored in the memo: one-off queries (e.g. on
/// derivatives of enumerated trees) would otherwise crowd out the entries
/// that actually recur. Subtree lookups still go through the memo.
pub fn coaction_uncached(kind: DegreeKind, t: &DecoratedTree, params: &DegreeParams) -> TensorElem {
    coaction_impl(kind, t, params)
}

fn coaction_impl(kind: DegreeKind, t: &DecoratedTree, params: &DegreeParams) -> TensorElem {
    let d = t.dim();
    let mut acc = split_poly(t.poly());
    if t.noise() != Noise::None {
        let noise_tree = match t.noise() {
            Noise::Xi0 => DecoratedTree::xi0(d),
            Noise::Xi1 => DecoratedTree::xi1(d),
            Noise::None => unreachable!(),
        };
        acc = acc.map(|(tt, m)| {
            tensor_term(
                noise_tree.product(tt).expect("root noise is unique"),
                m.clone(),
                one_rat(),
            )
        });
    }
    for (a, sub) in t.children() {
        let planted = coaction_planted(kind, a, sub, params);
        acc = tensor_mult(&acc, &planted, params);
    }
    acc
}

/// Memoised separately from whole-tree coactions: a tree and its node
/// derivatives share every planted factor whose edge index is untouched.
fn coaction_planted(
    kind: DegreeKind,
    a: &MultiIndex,
    sub: &DecoratedTree,
    params: &DegreeParams,
) -> Rc<TensorElem> {
    let key = (a.clone(), sub.clone());
    let hit = with_memo(params, |m| m.planted[kind as usize].get(&key).cloned());
    if let Some(v) = hit {
        return v;
    }
    let v = Rc::new(coaction_planted_impl(kind, a, sub, params));
    with_memo(params, |m| {
        m.planted[kind as usize].insert(key, v.clone());
        m.charge_planted(v.len());
    });
    v
}

fn coaction_planted_impl(
    kind: DegreeKind,
    a: &MultiIndex,
    sub: &DecoratedTree,
    params: &DegreeParams,
) -> TensorElem {
    let mut out = TensorElem::zero();
    // (I_a (x) Id) Delta_i sub
    for ((tt, m), c) in coaction(kind, sub, params).iter() {
        out.add_term((DecoratedTree::plant(a.clone(), tt.clone()), m.clone()), c.clone());
    }
    // Taylor terms X^l/l! (x) X^m/m! I+_{a+l+m}(sub)
    let bound = sub.degree(kind, params) + rat(2, 1) - params.scaled_size(a);
    for n in MultiIndex::below(&params.scaling, &bound) {
        let idx = a.add(&n);
        let plant = match PlusMonomial::plant(kind, idx, sub.clone(), params) {
            Some(p) => p,
            None => continue,
        };
        for l in all_sub_indexes(&n) {
            let m = n.checked_sub(&l).unwrap();
            let coeff = BigRational::new(1.into(), l.factorial() * m.factorial());
            let right = PlusMonomial::monomial(m)
                .mult(&plant)
                .expect("monomial times factor");
            out.add_term((DecoratedTree::monomial(l.clone()), right), coeff);
        }
    }
    out
}

/// The coproduct on the positive side.
pub fn coproduct_plus(m: &PlusMonomial, params: &DegreeParams) -> Result<TensorPlus> {
    let d = m.poly().dim() - 1;
    let mut acc = TensorPlus::zero();
    for j in all_sub_indexes(m.poly()) {
        let rest = m.poly().checked_sub(&j).unwrap();
        acc.add_term(
            (PlusMonomial::monomial(j.clone()), PlusMonomial::monomial(rest)),
            BigRational::from_integer(m.poly().binomial(&j)),
        );
    }
    for f in m.factors() {
        let part = coproduct_plus_factor(f, params)?;
        acc = tensor_plus_mult(&acc, &part, params)?;
    }
    let _ = d;
    Ok(acc)
}

fn coproduct_plus_factor(f: &PlusFactor, params: &DegreeParams) -> Result<TensorPlus> {
    let mut out = TensorPlus::zero();
    let d = f.body.dim();
    // 1 (x) I+_a(body)
    out.add_term(
        (
            PlusMonomial::one(d),
            PlusMonomial::new(MultiIndex::zero(d), vec![f.clone()], params)
                .expect("factor of an existing monomial is positive"),
        ),
        one_rat(),
    );
    // sum_l (I+_{a+l} (x) (-X)^l / l!) Delta_i body
    let bound = f.degree(params);
    let inner = coaction(f.kind, &f.body, params);
    for l in MultiIndex::below(&params.scaling, &bound) {
        let idx = f.index.add(&l);
        let sign = if l.total() % 2 == 0 { 1 } else { -1 };
        let coeff = BigRational::new(sign.into(), l.factorial());
        for ((tt, m), c) in inner.iter() {
            let left = match PlusMonomial::plant(f.kind, idx.clone(), tt.clone(), params) {
                Some(p) => p,
                None => continue,
            };
            let right = PlusMonomial::monomial(l.clone()).mult(m)?;
            let right = PlusMonomial::new(right.poly().clone(), right.factors().to_vec(), params)
                .expect("factors already positive");
            out.add_term((left, right), c * &coeff);
        }
    }
    Ok(out)
}

/// The antipode, multiplicative with A(X) = -X and the planted recursion
/// A(I+_a t) = -sum_l X^l/l! M (I+_{a+l} (x) A) Delta_i t.
pub fn antipode(m: &PlusMonomial, params: &DegreeParams) -> Result<PlusComb> {
    let mut memo = AntipodeMemo::default();
    antipode_memo(m, params, &mut memo)
}

/// Memo tables shared across the antipode recursion; the same monomials and
/// factors reappear many times through the nested coactions. A memo may be
/// kept alive across calls (it is tied to one set of degree parameters).
#[derive(Default)]
pub struct AntipodeMemo {
    monomials: std::collections::HashMap<PlusMonomial, PlusComb>,
    factors: std::collections::HashMap<PlusFactor, PlusComb>,
}

pub fn antipode_memo(
    m: &PlusMonomial,
    params: &DegreeParams,
    memo: &mut AntipodeMemo,
) -> Result<PlusComb> {
    if let Some(v) = memo.monomials.get(m) {
        return Ok(v.clone());
    }
    let sign = if m.poly().total() % 2 == 0 { 1 } else { -1 };
    let mut acc = PlusComb::term(
        PlusMonomial::monomial(m.poly().clone()),
        BigRational::from_integer(sign.into()),
    );
    for f in m.factors() {
        let part = antipode_factor(f, params, memo)?;
        acc = crate::plus::mult_plus(&acc, &part, params)?;
    }
    memo.monomials.insert(m.clone(), acc.clone());
    Ok(acc)
}

fn antipode_factor(
    f: &PlusFactor,
    params: &DegreeParams,
    memo: &mut AntipodeMemo,
) -> Result<PlusComb> {
    if let Some(v) = memo.factors.get(f) {
        return Ok(v.clone());
    }
    let mut out = PlusComb::zero();
    let inner = coaction(f.kind, &f.body, params);
    for ((tt, m), c) in inner.iter() {
        let bound = tt.degree(f.kind, params) + rat(2, 1) - params.scaled_size(&f.index);
        let anti_m = antipode_memo(m, params, memo)?;
        for l in MultiIndex::below(&params.scaling, &bound) {
            let idx = f.index.add(&l);
            let left = match PlusMonomial::plant(f.kind, idx, tt.clone(), params) {
                Some(p) => p,
                None => continue,
            };
            let xl = PlusMonomial::monomial(l.clone());
            let coeff = c * BigRational::new(BigInt::from(-1), l.factorial());
            let base = crate::plus::mult_plus(
                &PlusComb::term(xl.mult(&left)?, one_rat()),
                &anti_m,
                params,
            )?;
            out.add(&base.scaled(&coeff));
        }
    }
    memo.factors.insert(f.clone(), out.clone());
    Ok(out)
}

use num_bigint::BigInt;

/// The noise derivation: replace one Xi0 by Xi1, summed over occurrences.
pub fn d_xi(t: &DecoratedTree) -> TreeComb {
    let mut out = TreeComb::zero();
    if t.noise() == Noise::Xi0 {
        out.add_term(
            DecoratedTree::assemble(t.poly().clone(), Noise::Xi1, t.children().to_vec()),
            one_rat(),
        );
    }
    for i in 0..t.children().len() {
        let (a, sub) = &t.children()[i];
        for (s, c) in d_xi(sub).iter() {
            let mut children = t.children().to_vec();
            children[i] = (a.clone(), s.clone());
            out.add_term(
                DecoratedTree::assemble(t.poly().clone(), t.noise(), children),
                c.clone(),
            );
        }
    }
    out
}

/// The deformed coaction used to compare the two models. It fixes
/// polynomials and noises (tau (x) 1) and deforms planted trees by a
/// correction sum gated from below by deg_1.
pub fn delta_hat0(t: &DecoratedTree, params: &DegreeParams) -> Rc<TensorElem> {
    let hit = with_memo(params, |m| m.delta_hats.get(t).cloned());
    if let Some(v) = hit {
        return v;
    }
    let v = Rc::new(delta_hat0_impl(t, params));
    with_memo(params, |m| {
        m.delta_hats.insert(t.clone(), v.clone());
        m.charge(v.len());
    });
    v
}

fn delta_hat0_impl(t: &DecoratedTree, params: &DegreeParams) -> TensorElem {
    let d = t.dim();
    let mut acc = tensor_term(
        DecoratedTree::monomial(t.poly().clone()),
        PlusMonomial::one(d),
        one_rat(),
    );
    if t.noise() != Noise::None {
        let noise_tree = match t.noise() {
            Noise::Xi0 => DecoratedTree::xi0(d),
            Noise::Xi1 => DecoratedTree::xi1(d),
            Noise::None => unreachable!(),
        };
        acc = acc.map(|(tt, m)| {
            tensor_term(
                noise_tree.product(tt).expect("root noise is unique"),
                m.clone(),
                one_rat(),
            )
        });
    }
    for (a, sub) in t.children() {
        let planted = delta_hat0_planted(a, sub, params);
        acc = tensor_mult(&acc, &planted, params);
    }
    acc
}

fn delta_hat0_planted(
    a: &MultiIndex,
    sub: &DecoratedTree,
    params: &DegreeParams,
) -> TensorElem {
    let inner = delta_hat0(sub, params);
    let mut out = TensorElem::zero();
    for ((tt, m), c) in inner.iter() {
        out.add_term(
            (DecoratedTree::plant(a.clone(), tt.clone()), m.clone()),
            c.clone(),
        );
    }
    // - sum_{deg_1(I_a sub) <= |l|} X^l/l! (x) M(I+0_{a+l} (x) Id) DeltaHat0(sub)
    let lower = sub.degree(DegreeKind::Deg1, params) + rat(2, 1) - params.scaled_size(a);
    for ((tt, m), c) in inner.iter() {
        let upper = tt.degree(DegreeKind::Deg0, params) + rat(2, 1) - params.scaled_size(a);
        for l in MultiIndex::below(&params.scaling, &upper) {
            if params.scaled_size(&l) < lower {
                continue;
            }
            let idx = a.add(&l);
            let plant = match PlusMonomial::plant(DegreeKind::Deg0, idx, tt.clone(), params) {
                Some(p) => p,
                None => continue,
            };
            let right = plant.mult(m).expect("plus-0 factors");
            if let Some(right) =
                PlusMonomial::new(right.poly().clone(), right.factors().to_vec(), params)
            {
                let coeff = c * BigRational::new(BigInt::from(-1), l.factorial());
                out.add_term((DecoratedTree::monomial(l.clone()), right), coeff);
            }
        }
    }
    out
}

/// The character-side companion of `delta_hat0`: kills any polynomial part,
/// fixes noises, and on a planted symbol applies the deformed coaction of
/// the body when deg_1 of the planted tree is non-positive.
pub fn gamma_hat0(m: &PlusMonomial, params: &DegreeParams) -> Result<Rc<PlusComb>> {
    let hit = with_memo(params, |m2| m2.gamma_hats.get(m).cloned());
    if let Some(v) = hit {
        return Ok(v);
    }
    let v = Rc::new(gamma_hat0_impl(m, params)?);
    with_memo(params, |m2| {
        m2.gamma_hats.insert(m.clone(), v.clone());
        m2.charge(v.len());
    });
    Ok(v)
}

fn gamma_hat0_impl(m: &PlusMonomial, params: &DegreeParams) -> Result<PlusComb> {
    if m.factors().iter().any(|f| f.kind != DegreeKind::Deg0) {
        return Err(TreeError::KindMismatch);
    }
    let d = m.poly().dim() - 1;
    if !m.poly().is_zero() {
        return Ok(PlusComb::zero());
    }
    let mut acc = PlusComb::term(PlusMonomial::one(d), one_rat());
    for f in m.factors() {
        let deg1 = f.body.degree(DegreeKind::Deg1, params) + rat(2, 1)
            - params.scaled_size(&f.index);
        if deg1 > rat(0, 1) {
            return Ok(PlusComb::zero());
        }
        let mut part = PlusComb::zero();
        for ((tt, mm), c) in delta_hat0(&f.body, params).iter() {
            let plant = match PlusMonomial::plant(
                DegreeKind::Deg0,
                f.index.clone(),
                tt.clone(),
                params,
            ) {
                Some(p) => p,
                None => continue,
            };
            let prod = plant.mult(mm)?;
            if let Some(prod) =
                PlusMonomial::new(prod.poly().clone(), prod.factors().to_vec(), params)
            {
                part.add_term(prod, -c.clone());
            }
        }
        acc = crate::plus::mult_plus(&acc, &part, params)?;
    }
    Ok(acc)
}

/// Projection killing every tree that contains Xi1.
pub fn project_q0(c: &TreeComb) -> TreeComb {
    c.iter()
        .filter(|(t, _)| !t.contains_xi1())
        .map(|(t, r)| (t.clone(), r.clone()))
        .collect()
}

/// Projection onto bare planted trees I_0(t).
pub fn project_planted(c: &TreeComb) -> TreeComb {
    c.iter()
        .filter(|(t, _)| t.is_planted())
        .map(|(t, r)| (t.clone(), r.clone()))
        .collect()
}

/// (D_p (x) Id) on a coaction value.
pub fn derive_left(p: &MultiIndex, t: &TensorElem) -> TensorElem {
    t.map(|(tt, m)| {
        tt.derive(p)
            .iter()
            .map(|(s, c)| ((s.clone(), m.clone()), c.clone()))
            .collect()
    })
}

/// (Id (x) GammaHat0) composed with the plain coaction.
pub fn id_gamma_hat0(t: &TensorElem, params: &DegreeParams) -> Result<TensorElem> {
    let mut out = TensorElem::zero();
    for ((tt, m), c) in t.iter() {
        for (g, cg) in gamma_hat0(m, params)?.iter() {
            out.add_term((tt.clone(), g.clone()), c * cg);
        }
    }
    Ok(out)
}

/// Counit-style check value: M(A (x) Id) Delta+ m, which must be 1 for the
/// empty monomial and 0 otherwise.
pub fn antipode_convolution(m: &PlusMonomial, params: &DegreeParams) -> Result<PlusComb> {
    let mut out = PlusComb::zero();
    for ((l, r), c) in coproduct_plus(m, params)?.iter() {
        let anti = antipode(l, params)?;
        let rc = PlusComb::term(r.clone(), one_rat());
        out.add(&crate::plus::mult_plus(&anti, &rc, params)?.scaled(c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::DegreeParams;
    use crate::tree::parse_tree;

    fn p() -> DegreeParams {
        DegreeParams::default_d1()
    }

    fn t(s: &str) -> DecoratedTree {
        parse_tree(s, 1).unwrap()
    }

    fn tensor_text(e: &TensorElem) -> String {
        // larger left trees first, then lexicographic
        let mut terms: Vec<((u64, u64), String, String)> = e
            .iter()
            .map(|((tt, m), c)| {
                (
                    (tt.size(), u64::from(tt.poly().total())),
                    format!("{tt} (x) {m}"),
                    crate::tree::rational_string(c),
                )
            })
            .collect();
        terms.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        terms
            .into_iter()
            .map(|(_, s, c)| if c == "1" { s } else { format!("{c}*{s}") })
            .collect::<Vec<_>>()
            .join(" + ")
    }

    #[test]
    fn coaction_golden_cases() {
        let p = p();
        assert_eq!(
            tensor_text(&coaction(DegreeKind::Deg0, &t("I[Xi0]"), &p)),
            "I[Xi0] (x) 1 + 1 (x) I+_(0,0)[Xi0]"
        );
        // noises are grouplike-to-the-left under both coactions
        assert_eq!(
            tensor_text(&coaction(DegreeKind::Deg0, &t("Xi0"), &p)),
            "Xi0 (x) 1"
        );
        assert_eq!(
            tensor_text(&coaction(DegreeKind::Deg1, &t("Xi1"), &p)),
            "Xi1 (x) 1"
        );
        // X splits binomially
        assert_eq!(
            tensor_text(&coaction(DegreeKind::Deg0, &t("X^(0,1)"), &p)),
            "X^(0,1) (x) 1 + 1 (x) X^(0,1)"
        );
        // deg0 I(Xi1) = 199/100: Taylor terms up to |l+m| <= 1 appear
        assert_eq!(
            tensor_text(&coaction(DegreeKind::Deg0, &t("I[Xi1]"), &p)),
            "I[Xi1] (x) 1 + X^(0,1) (x) I+_(0,1)[Xi1] + 1 (x) I+_(0,0)[Xi1] + 1 (x) X^(0,1)*I+_(0,1)[Xi1]"
        );
    }

    #[test]
    fn coaction_triangular() {
        let p = p();
        for s in ["I[Xi0]", "I[Xi0]*Xi0", "I[I[Xi0]*I[Xi0]]", "I_(0,2)[Xi0]*I[Xi0]"] {
            let tree = t(s);
            for kind in [DegreeKind::Deg0, DegreeKind::Deg1] {
                let full = coaction(kind, &tree, &p);
                let lead = full.coeff(&(tree.clone(), PlusMonomial::one(1)));
                assert_eq!(lead, rat(1, 1), "leading term of {s}");
                for ((lt, m), _) in full.iter() {
                    if lt == &tree && m.is_one() {
                        continue;
                    }
                    assert!(
                        lt.degree(kind, &p) < tree.degree(kind, &p),
                        "triangularity violated for {s}: left factor {lt}"
                    );
                }
            }
        }
    }

    #[test]
    fn delta_hat_golden() {
        let p = p();
        // DeltaHat0 I(Xi1) = I(Xi1) (x) 1 - X^(0,1) (x) I+_(0,1)[Xi1]
        assert_eq!(
            tensor_text(&delta_hat0(&t("I[Xi1]"), &p)),
            "I[Xi1] (x) 1 + -1*X^(0,1) (x) I+_(0,1)[Xi1]"
        );
        // trees without Xi1 are fixed (tau (x) 1)
        for s in ["Xi0", "I[Xi0]", "I[Xi0]*I_(0,2)[Xi0]", "X^(1,1)*I[Xi0]*Xi0"] {
            let tree = t(s);
            let got = delta_hat0(&tree, &p);
            assert_eq!(*got, tensor_term(tree, PlusMonomial::one(1), rat(1, 1)), "{s}");
        }
    }

    #[test]
    fn delta_hat_equals_gamma_composition() {
        // DeltaHat0 = (Id (x) GammaHat0) Delta_0, checked on trees with Xi1
        let p = p();
        for s in [
            "Xi1",
            "I[Xi1]",
            "I[Xi1]*Xi0",
            "I[Xi1]*I[Xi0]",
            "I_(0,1)[Xi1]",
            "I[I[Xi1]]",
            "I[I[Xi0]*Xi1]",
            "I[Xi0]*I_(0,2)[Xi1]",
        ] {
            let tree = t(s);
            let lhs = delta_hat0(&tree, &p);
            let rhs = id_gamma_hat0(&coaction(DegreeKind::Deg0, &tree, &p), &p).unwrap();
            assert_eq!(*lhs, rhs, "mismatch for {s}");
        }
    }

    #[test]
    fn delta_hat_upper_triangular() {
        let p = p();
        for s in ["I[Xi1]", "I[I[Xi1]]", "I[Xi1]*I[Xi0]", "I_(0,1)[I[Xi1]]"] {
            let tree = t(s);
            for ((lt, m), _) in delta_hat0(&tree, &p).iter() {
                if lt == &tree && m.is_one() {
                    continue;
                }
                assert!(
                    lt.degree(DegreeKind::Deg1, &p) >= tree.degree(DegreeKind::Deg1, &p),
                    "lower bound violated for {s}: {lt}"
                );
            }
        }
    }

    #[test]
    fn d_xi_golden_and_derivation() {
        let tree = t("I[Xi0]*Xi0");
        let got = d_xi(&tree);
        assert_eq!(got.coeff(&t("I[Xi0]*Xi1")), rat(1, 1));
        assert_eq!(got.coeff(&t("I[Xi1]*Xi0")), rat(1, 1));
        assert_eq!(got.len(), 2);
        assert!(d_xi(&t("X^(1,1)")).is_zero());
        assert!(d_xi(&t("Xi1")).is_zero());
        // multiplicity: two identical branches give coefficient 2 on the
        // single replaced representative
        let twin = t("I[Xi0]*I[Xi0]");
        assert_eq!(d_xi(&twin).coeff(&t("I[Xi0]*I[Xi1]")), rat(2, 1));
    }

    #[test]
    fn coproduct_and_antipode_convolution() {
        let p = p();
        let xi = t("Xi0");
        let m0 = PlusMonomial::plant(DegreeKind::Deg0, MultiIndex::zero(1), xi, &p).unwrap();
        // golden: Delta+ I+(Xi0) = I+(Xi0) (x) 1 + 1 (x) I+(Xi0)
        let cp = coproduct_plus(&m0, &p).unwrap();
        assert_eq!(cp.len(), 2);
        assert_eq!(cp.coeff(&(m0.clone(), PlusMonomial::one(1))), rat(1, 1));
        assert_eq!(cp.coeff(&(PlusMonomial::one(1), m0.clone())), rat(1, 1));
        // golden: A(I+(Xi0)) = -I+(Xi0)
        let anti = antipode(&m0, &p).unwrap();
        assert_eq!(anti, PlusComb::term(m0.clone(), rat(-1, 1)));

        // convolution identity M(A (x) Id) Delta+ = counit
        let deep = PlusMonomial::plant(
            DegreeKind::Deg0,
            MultiIndex::zero(1),
            t("I[Xi0]*Xi0"),
            &p,
        );
        let mut samples = vec![
            PlusMonomial::one(1),
            PlusMonomial::monomial(MultiIndex(vec![1, 2])),
            m0.clone(),
            m0.mult(&m0).unwrap(),
            PlusMonomial::plant(DegreeKind::Deg0, MultiIndex::zero(1), t("I[Xi0]"), &p).unwrap(),
            PlusMonomial::plant(DegreeKind::Deg1, MultiIndex::zero(1), t("Xi1"), &p).unwrap(),
        ];
        samples.extend(deep);
        for m in samples {
            let got = antipode_convolution(&m, &p).unwrap();
            let expect = if m.is_one() {
                PlusComb::term(PlusMonomial::one(1), rat(1, 1))
            } else {
                PlusComb::zero()
            };
            assert_eq!(got, expect, "convolution failed for {m}");
        }
    }

    #[test]
    fn derivative_commutes_with_coaction() {
        // (D_p (x) Id) Delta_0 = Delta_0 D_p
        let p = p();
        let ps = [MultiIndex(vec![0, 1]), MultiIndex(vec![0, 2]), MultiIndex(vec![1, 0])];
        for s in ["I[Xi0]", "I[Xi1]", "I[Xi0]*Xi0", "X^(0,1)*I[I[Xi0]]"] {
            let tree = t(s);
            for idx in &ps {
                let lhs = derive_left(idx, &coaction(DegreeKind::Deg0, &tree, &p));
                let rhs = tree
                    .derive(idx)
                    .map(|s| (*coaction(DegreeKind::Deg0, s, &p)).clone());
                assert_eq!(lhs, rhs, "D_{idx:?} on {s}");
            }
        }
    }

    #[test]
    fn gamma_hat_kills_polynomials() {
        let p = p();
        let m = PlusMonomial::monomial(MultiIndex(vec![0, 1]));
        assert!(gamma_hat0(&m, &p).unwrap().is_zero());
        assert_eq!(
            *gamma_hat0(&PlusMonomial::one(1), &p).unwrap(),
            PlusComb::term(PlusMonomial::one(1), rat(1, 1))
        );
    }
}
