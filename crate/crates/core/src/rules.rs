//! Rule sets describing which node shapes may occur in a tree, and the
//! bounded enumeration of all conforming trees.

use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::Signed;

use crate::error::{Result, TreeError};
use crate::hopf::{coaction, d_xi};
use crate::multi_index::MultiIndex;
use crate::params::{DegreeKind, DegreeParams};
use crate::tree::{DecoratedTree, Noise};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RuleName {
    /// Quasilinear multiplicative noise: nodes are `(prod I) I_2` or a noise.
    Qua,
    /// Same, completed with the bare products `prod I` hit by renormalisation.
    QuaComplete,
    /// Generalised KPZ: products of I with up to two gradient edges, or a
    /// noise with I-children.
    Gkpz,
    /// Cubic node shapes in three space dimensions.
    Phi43,
}

impl RuleName {
    pub fn parse(s: &str) -> Result<RuleName> {
        match s {
            "qua" => Ok(RuleName::Qua),
            "qua_c" | "qua_complete" => Ok(RuleName::QuaComplete),
            "gkpz" => Ok(RuleName::Gkpz),
            "phi43" => Ok(RuleName::Phi43),
            other => Err(TreeError::Config(format!("unknown rule set '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RuleName::Qua => "qua",
            RuleName::QuaComplete => "qua_c",
            RuleName::Gkpz => "gkpz",
            RuleName::Phi43 => "phi43",
        }
    }
}

/// One admissible node shape: an optional noise, an exact multiset of
/// decorated kernel edges, and optionally any number of undecorated ones.
#[derive(Clone, Debug)]
pub struct NodeShape {
    pub noise: bool,
    pub fixed: Vec<MultiIndex>,
    pub repeat_zero: bool,
}

#[derive(Clone, Debug)]
pub struct RuleSet {
    pub name: RuleName,
    /// Space dimension the rule usually lives in.
    pub d: usize,
    pub shapes: Vec<NodeShape>,
}

impl RuleSet {
    pub fn new(name: RuleName) -> RuleSet {
        let shape = |noise, fixed: Vec<MultiIndex>, repeat_zero| NodeShape {
            noise,
            fixed,
            repeat_zero,
        };
        match name {
            RuleName::Qua => {
                let i2 = MultiIndex(vec![0, 2]);
                RuleSet {
                    name,
                    d: 1,
                    shapes: vec![shape(false, vec![i2], true), shape(true, vec![], false)],
                }
            }
            RuleName::QuaComplete => {
                let i2 = MultiIndex(vec![0, 2]);
                RuleSet {
                    name,
                    d: 1,
                    shapes: vec![
                        shape(false, vec![], true),
                        shape(false, vec![i2], true),
                        shape(true, vec![], false),
                    ],
                }
            }
            RuleName::Gkpz => {
                let i1 = MultiIndex(vec![0, 1]);
                RuleSet {
                    name,
                    d: 1,
                    shapes: vec![
                        shape(false, vec![], true),
                        shape(false, vec![i1.clone()], true),
                        shape(false, vec![i1.clone(), i1], true),
                        shape(true, vec![], true),
                    ],
                }
            }
            RuleName::Phi43 => {
                let z = MultiIndex::zero(3);
                RuleSet {
                    name,
                    d: 3,
                    shapes: vec![
                        shape(false, vec![z.clone()], false),
                        shape(false, vec![z.clone(), z.clone()], false),
                        shape(false, vec![z.clone(), z.clone(), z], false),
                        shape(true, vec![], false),
                    ],
                }
            }
        }
    }

    pub fn default_params(&self) -> DegreeParams {
        match self.name {
            RuleName::Phi43 => DegreeParams::default_d3(),
            _ => DegreeParams::default_d1(),
        }
    }

    /// Does the rule set admit the empty product (the tree `1`)?
    pub fn allows_unit(&self) -> bool {
        self.shapes
            .iter()
            .any(|s| !s.noise && s.fixed.is_empty() && s.repeat_zero)
    }

    fn node_conforms(&self, noise: bool, edges: &[&MultiIndex]) -> bool {
        'shapes: for s in &self.shapes {
            if s.noise != noise {
                continue;
            }
            let mut remaining: Vec<&MultiIndex> = edges.to_vec();
            for f in &s.fixed {
                match remaining.iter().position(|a| **a == *f) {
                    Some(i) => {
                        remaining.remove(i);
                    }
                    None => continue 'shapes,
                }
            }
            if remaining.iter().all(|a| a.is_zero()) && (s.repeat_zero || remaining.is_empty()) {
                return true;
            }
        }
        false
    }

    /// Shape conformance, ignoring polynomial decorations everywhere and
    /// treating the two noises alike.
    pub fn conforms(&self, t: &DecoratedTree) -> bool {
        if t.is_one() && !self.allows_unit() {
            return false;
        }
        let edges: Vec<&MultiIndex> = t.children().iter().map(|(a, _)| a).collect();
        if !t.is_one() && !self.node_conforms(t.noise() != Noise::None, &edges) {
            return false;
        }
        t.children().iter().all(|(_, sub)| self.conforms_inner(sub))
    }

    fn conforms_inner(&self, t: &DecoratedTree) -> bool {
        // inner nodes may be the empty product even for rule sets without
        // a bare-product shape only when they are literally 1 under a cut;
        // we keep it strict except for the unit itself
        if t.is_one() {
            return true;
        }
        self.conforms(t)
    }
}

/// All conforming trees without polynomial decorations, using only the
/// plain noise Xi0, with at most `max_noises` noises and `max_edges` edges
/// (kernel edges plus noises). Every planted argument carries at least one
/// noise; the unit tree appears exactly when the rule set admits the empty
/// product. Output is sorted by canonical text.
pub fn enumerate_t0(
    rules: &RuleSet,
    max_noises: u64,
    max_edges: u64,
    cap: usize,
) -> Result<Vec<DecoratedTree>> {
    let d = rules.d;
    // pool of generated trees with their (edges, noises)
    let mut pool: Vec<(DecoratedTree, u64, u64)> = Vec::new();
    for e in 1..=max_edges {
        let mut fresh: BTreeSet<DecoratedTree> = BTreeSet::new();
        for shape in &rules.shapes {
            let base_edges = if shape.noise { 1 } else { 0 };
            if shape.noise && max_noises == 0 {
                continue;
            }
            let fixed = shape.fixed.clone();
            if base_edges + fixed.len() as u64 > e {
                continue;
            }
            // budget for children: each child costs 1 + size(subtree)
            let budget = e - base_edges;
            let noise_budget = max_noises - if shape.noise { 1 } else { 0 };
            let mut chosen: Vec<(MultiIndex, DecoratedTree)> = Vec::new();
            assign_fixed(
                &fixed,
                0,
                budget,
                noise_budget,
                shape.repeat_zero,
                &pool,
                d,
                &mut chosen,
                &mut |children| {
                    let t = DecoratedTree::assemble(
                        MultiIndex::zero(d),
                        if shape.noise { Noise::Xi0 } else { Noise::None },
                        children.to_vec(),
                    );
                    if t.size() == e {
                        fresh.insert(t);
                    }
                },
            );
        }
        for t in fresh {
            if pool.iter().any(|(q, _, _)| *q == t) {
                continue;
            }
            let (edges, noises) = (t.size(), t.noise_count());
            pool.push((t, edges, noises));
            if pool.len() > cap {
                return Err(TreeError::BoundsTooLarge { cap });
            }
        }
    }
    let mut out: Vec<DecoratedTree> = pool.into_iter().map(|(t, _, _)| t).collect();
    if rules.allows_unit() {
        out.push(DecoratedTree::one(d));
    }
    out.sort_by_cached_key(|t| t.to_string());
    Ok(out)
}

/// Pick subtrees for the fixed edges, then arbitrarily many zero edges.
#[allow(clippy::too_many_arguments)]
fn assign_fixed(
    fixed: &[MultiIndex],
    pos: usize,
    budget: u64,
    noise_budget: u64,
    repeat_zero: bool,
    pool: &[(DecoratedTree, u64, u64)],
    d: usize,
    chosen: &mut Vec<(MultiIndex, DecoratedTree)>,
    emit: &mut impl FnMut(&[(MultiIndex, DecoratedTree)]),
) {
    if pos == fixed.len() {
        if repeat_zero {
            let zero = MultiIndex::zero(d);
            pick_zero_children(&zero, 0, budget, noise_budget, pool, chosen, emit);
        } else if budget == 0 {
            emit(chosen);
        }
        return;
    }
    // for equal consecutive fixed indexes, enforce non-decreasing pool order
    // to avoid emitting the same multiset twice
    let min_idx = if pos > 0 && fixed[pos - 1] == fixed[pos] {
        chosen
            .last()
            .map(|_| last_pool_index(pool, chosen))
            .unwrap_or(0)
    } else {
        0
    };
    for (i, (sub, se, sn)) in pool.iter().enumerate().skip(min_idx) {
        let cost = 1 + se;
        if cost > budget || *sn > noise_budget || *sn == 0 {
            continue;
        }
        chosen.push((fixed[pos].clone(), sub.clone()));
        assign_fixed(
            fixed,
            pos + 1,
            budget - cost,
            noise_budget - sn,
            repeat_zero,
            pool,
            d,
            chosen,
            emit,
        );
        chosen.pop();
        let _ = i;
    }
}

fn last_pool_index(pool: &[(DecoratedTree, u64, u64)], chosen: &[(MultiIndex, DecoratedTree)]) -> usize {
    let last = &chosen.last().unwrap().1;
    pool.iter().position(|(t, _, _)| t == last).unwrap_or(0)
}

fn pick_zero_children(
    zero: &MultiIndex,
    min_idx: usize,
    budget: u64,
    noise_budget: u64,
    pool: &[(DecoratedTree, u64, u64)],
    chosen: &mut Vec<(MultiIndex, DecoratedTree)>,
    emit: &mut impl FnMut(&[(MultiIndex, DecoratedTree)]),
) {
    emit(chosen);
    for i in min_idx..pool.len() {
        let (sub, se, sn) = &pool[i];
        let cost = 1 + se;
        if cost > budget || *sn > noise_budget || *sn == 0 {
            continue;
        }
        chosen.push((zero.clone(), sub.clone()));
        pick_zero_children(zero, i, budget - cost, noise_budget - sn, pool, chosen, emit);
        chosen.pop();
    }
}

/// All trees obtained from the list by replacing at most one Xi0 with Xi1.
/// The originals are included.
pub fn lift_t1(trees: &[DecoratedTree]) -> Vec<DecoratedTree> {
    let mut out: BTreeSet<DecoratedTree> = trees.iter().cloned().collect();
    for t in trees {
        for (s, _) in d_xi(t).iter() {
            out.insert(s.clone());
        }
    }
    let mut v: Vec<DecoratedTree> = out.into_iter().collect();
    v.sort_by_cached_key(|t| t.to_string());
    v
}

#[derive(Clone, Debug)]
pub struct AssumptionViolation {
    pub tree: DecoratedTree,
    /// The offending branch I_a(D_Xi sub), rendered on the undifferentiated
    /// subtree for readability.
    pub branch: DecoratedTree,
    pub degree: BigRational,
}

/// For every tree, every root branch that contains a noise must yield a
/// positive-degree planted factor once the noise there is roughened.
pub fn check_assumption1(
    trees: &[DecoratedTree],
    params: &DegreeParams,
) -> Vec<AssumptionViolation> {
    let mut out = Vec::new();
    for t in trees {
        let mut seen: BTreeSet<(MultiIndex, DecoratedTree)> = BTreeSet::new();
        for (a, sub) in t.children() {
            if sub.noise_count() == 0 || !seen.insert((a.clone(), sub.clone())) {
                continue;
            }
            // deg0 I_a(D_Xi sub) = deg0(sub) + shift + 2 - |a|
            let degree = sub.degree(DegreeKind::Deg0, params)
                + params.noise_shift()
                + crate::params::rat(2, 1)
                - params.scaled_size(a);
            if !degree.is_positive() {
                out.push(AssumptionViolation {
                    tree: t.clone(),
                    branch: DecoratedTree::plant(a.clone(), sub.clone()),
                    degree,
                });
            }
        }
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct ClosureReport {
    /// Trees whose image under the preparation map leaves the enumeration.
    pub r_escapes: Vec<(DecoratedTree, DecoratedTree)>,
    /// Coaction left factors (mod polynomial decorations) that do not
    /// conform to the rule shapes.
    pub coaction_escapes: Vec<(DecoratedTree, DecoratedTree)>,
}

impl ClosureReport {
    pub fn is_closed(&self) -> bool {
        self.r_escapes.is_empty() && self.coaction_escapes.is_empty()
    }
}

pub fn check_closure(
    rules: &RuleSet,
    trees: &[DecoratedTree],
    prep: &crate::prep::PrepMap,
    params: &DegreeParams,
) -> Result<ClosureReport> {
    let set: BTreeSet<&DecoratedTree> = trees.iter().collect();
    let mut report = ClosureReport::default();
    for t in trees {
        for (img, _) in prep.apply(t)?.iter() {
            if !set.contains(img) {
                report.r_escapes.push((t.clone(), img.clone()));
            }
        }
        for ((left, _), _) in coaction(DegreeKind::Deg0, t, params).iter() {
            let stripped = left.strip_poly();
            if !rules.conforms(&stripped) {
                report.coaction_escapes.push((t.clone(), stripped));
            }
        }
    }
    report.r_escapes.sort_by_cached_key(|(a, b)| format!("{a}|{b}"));
    report.r_escapes.dedup_by_key(|(a, b)| format!("{a}|{b}"));
    report
        .coaction_escapes
        .sort_by_cached_key(|(a, b)| format!("{a}|{b}"));
    report
        .coaction_escapes
        .dedup_by_key(|(a, b)| format!("{a}|{b}"));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prep::PrepMap;
    use crate::tree::parse_tree;

    #[test]
    fn cubic_enumeration_matches_hand_list() {
        // All conforming trees with at most 2 noises and 5 edges, listed by
        // hand: kernel chains and the products admitted by the I/II shapes.
        let rules = RuleSet::new(RuleName::Phi43);
        let got = enumerate_t0(&rules, 2, 5, 10_000).unwrap();
        let expect: Vec<DecoratedTree> = [
            "Xi0",
            "I[Xi0]",
            "I[I[Xi0]]",
            "I[Xi0]*I[Xi0]",
            "I[I[I[Xi0]]]",
            "I[I[Xi0]]*I[Xi0]",
            "I[I[I[I[Xi0]]]]",
            "I[I[Xi0]*I[Xi0]]",
        ]
        .iter()
        .map(|s| parse_tree(s, 3).unwrap())
        .collect();
        let mut expect = expect;
        expect.sort_by_cached_key(|t| t.to_string());
        assert_eq!(got, expect);
    }

    #[test]
    fn unit_and_shape_membership() {
        let gkpz = RuleSet::new(RuleName::Gkpz);
        let trees = enumerate_t0(&gkpz, 2, 4, 10_000).unwrap();
        let has = |s: &str| trees.contains(&parse_tree(s, 1).unwrap());
        assert!(has("1"));
        assert!(has("Xi0"));
        assert!(has("I[Xi0]"));
        assert!(has("I_(0,1)[Xi0]"));
        assert!(has("I_(0,1)[Xi0]*I_(0,1)[Xi0]"));
        assert!(has("I[Xi0]*Xi0"));
        assert!(!has("I_(0,2)[Xi0]"));
        for t in &trees {
            assert!(gkpz.conforms(t), "enumerated tree fails conformance: {t}");
        }

        let qua = RuleSet::new(RuleName::Qua);
        let trees = enumerate_t0(&qua, 2, 4, 10_000).unwrap();
        let has = |s: &str| trees.contains(&parse_tree(s, 1).unwrap());
        assert!(!has("1"));
        assert!(has("I_(0,2)[Xi0]"));
        assert!(has("I[Xi0]*I_(0,2)[Xi0]"));
        assert!(!has("I[Xi0]"));
        assert!(!qua.conforms(&parse_tree("I[Xi0]", 1).unwrap()));
        assert!(RuleSet::new(RuleName::QuaComplete)
            .conforms(&parse_tree("I[Xi0]", 1).unwrap()));
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let rules = RuleSet::new(RuleName::Gkpz);
        assert!(matches!(
            enumerate_t0(&rules, 3, 8, 5),
            Err(TreeError::BoundsTooLarge { cap: 5 })
        ));
    }

    #[test]
    fn rough_lift_adds_single_substitutions() {
        let base = vec![parse_tree("I[Xi0]*Xi0", 1).unwrap()];
        let lifted = lift_t1(&base);
        let expect: Vec<DecoratedTree> = ["I[Xi0]*Xi0", "I[Xi0]*Xi1", "I[Xi1]*Xi0"]
            .iter()
            .map(|s| parse_tree(s, 1).unwrap())
            .collect();
        let mut expect = expect;
        expect.sort_by_cached_key(|t| t.to_string());
        assert_eq!(lifted, expect);
    }

    #[test]
    fn branch_positivity_holds_for_gkpz_and_fails_for_qua() {
        let gkpz = RuleSet::new(RuleName::Gkpz);
        let params = gkpz.default_params();
        let trees = enumerate_t0(&gkpz, 2, 5, 100_000).unwrap();
        assert!(check_assumption1(&trees, &params).is_empty());

        let qua = RuleSet::new(RuleName::Qua);
        let trees = enumerate_t0(&qua, 2, 5, 100_000).unwrap();
        let violations = check_assumption1(&trees, &qua.default_params());
        assert!(!violations.is_empty());
        // the smallest offender is the second-derivative edge over a noise,
        // whose roughened degree is just below zero
        assert!(violations
            .iter()
            .any(|v| v.branch == parse_tree("I_(0,2)[Xi0]", 1).unwrap()
                && v.degree == crate::params::rat(-1, 100)));
    }

    #[test]
    fn completed_quasilinear_set_is_closed() {
        let rules = RuleSet::new(RuleName::QuaComplete);
        let params = rules.default_params();
        let trees = enumerate_t0(&rules, 2, 5, 100_000).unwrap();
        let prep = PrepMap::quasilinear(crate::params::rat(1, 1));
        let report = check_closure(&rules, &trees, &prep, &params).unwrap();
        assert!(
            report.is_closed(),
            "escapes: {:?} {:?}",
            report.r_escapes,
            report.coaction_escapes
        );
    }
}
