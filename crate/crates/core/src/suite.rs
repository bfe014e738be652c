//! Identity suites: exact rational checks of the symbolic layer over an
//! enumerated tree family, and floating-point checks of the grid model.
//!
//! Both suites produce a deterministic, machine-readable [`Report`]; the
//! symbolic suite demands exact equality of linear combinations, while the
//! numeric suite compares grid fields pointwise against a relative
//! tolerance with an absolute floor.

use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, TreeError};
use crate::grid::{Field, Grid, NoisePair};
use crate::hopf::{
    antipode, coaction, coaction_uncached, d_xi, delta_hat0, derive_left, id_gamma_hat0,
};
use crate::model::{comb_to_num, derivative_weights, ratf, GridModel, NumComb};
use crate::multi_index::MultiIndex;
use crate::params::{DegreeKind, DegreeParams};
use crate::plus::TensorElem;
use crate::prep::{verify_assumption2, verify_axioms, PrepMap};
use crate::rules::{check_assumption1, check_closure, enumerate_t0, lift_t1, RuleSet};
use crate::tree::{parse_tree, rational_string, DecoratedTree, TreeComb};

/// Outcome of one identity on one subject (a tree, a pair of trees, ...).
#[derive(Serialize, Clone, Debug)]
pub struct IdentityResult {
    pub identity: String,
    pub subject: String,
    pub passed: bool,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub detail: String,
}

impl IdentityResult {
    fn exact(identity: &str, subject: String, passed: bool, detail: String) -> IdentityResult {
        IdentityResult {
            identity: identity.to_string(),
            subject,
            passed,
            max_abs_error: 0.0,
            max_rel_error: 0.0,
            detail: if passed { String::new() } else { detail },
        }
    }
}

/// Full run record; serialization is deterministic for a fixed configuration.
#[derive(Serialize, Clone, Debug)]
pub struct Report {
    pub suite: String,
    pub rule: String,
    pub prep: String,
    pub alpha: String,
    pub max_noises: u64,
    pub max_edges: u64,
    pub tree_count: usize,
    pub assumption_violations: Vec<String>,
    pub results: Vec<IdentityResult>,
    pub passed: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    /// One line per identity: pass/fail with subject counts and the worst
    /// observed errors.
    pub fn summary(&self) -> String {
        let mut order: Vec<String> = Vec::new();
        let mut stats: std::collections::BTreeMap<String, (usize, usize, f64, f64)> =
            Default::default();
        for r in &self.results {
            if !stats.contains_key(&r.identity) {
                order.push(r.identity.clone());
            }
            let e = stats.entry(r.identity.clone()).or_insert((0, 0, 0.0, 0.0));
            e.0 += 1;
            if !r.passed {
                e.1 += 1;
            }
            e.2 = e.2.max(r.max_abs_error);
            e.3 = e.3.max(r.max_rel_error);
        }
        let mut out = String::new();
        for id in order {
            let (n, failed, abs, rel) = stats[&id];
            if failed == 0 {
                out.push_str(&format!(
                    "PASS {id} ({n} subjects, max abs {abs:.3e}, max rel {rel:.3e})\n"
                ));
            } else {
                out.push_str(&format!(
                    "FAIL {id} ({failed}/{n} subjects, max abs {abs:.3e}, max rel {rel:.3e})\n"
                ));
            }
        }
        out.push_str(&format!(
            "{}: {} ({} trees, {} checks)\n",
            self.suite,
            if self.passed { "all passed" } else { "FAILURES" },
            self.tree_count,
            self.results.len()
        ));
        out
    }
}

fn finalize(mut report: Report) -> Report {
    report.passed = report.results.iter().all(|r| r.passed);
    report
}

fn assumption_strings(trees: &[DecoratedTree], params: &DegreeParams) -> Vec<String> {
    check_assumption1(trees, params)
        .iter()
        .map(|v| {
            format!(
                "{} : branch {} has degree {}",
                v.tree,
                v.branch,
                rational_string(&v.degree)
            )
        })
        .collect()
}

fn tensor_string(t: &TensorElem) -> String {
    if t.is_zero() {
        return "0".into();
    }
    t.iter()
        .map(|((tt, m), c)| format!("{}*{} (x) {}", rational_string(c), tt, m))
        .collect::<Vec<_>>()
        .join(" + ")
}

// ---------------------------------------------------------------------------
// Symbolic suite
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SymbolicOptions {
    pub max_noises: u64,
    pub max_edges: u64,
    pub cap: usize,
}

impl Default for SymbolicOptions {
    fn default() -> Self {
        SymbolicOptions {
            max_noises: 3,
            max_edges: 8,
            cap: 200_000,
        }
    }
}

/// Exact checks over the enumerated family: serialization round trips,
/// commutation of node derivatives with the coaction, the factorisation
/// and triangular structure of the deformed coaction, the Leibniz rule for
/// the noise derivation, and every preparation-map axiom.
pub fn run_symbolic_suite(
    rules: &RuleSet,
    prep: &PrepMap,
    params: &DegreeParams,
    opts: &SymbolicOptions,
) -> Result<Report> {
    let t0 = enumerate_t0(rules, opts.max_noises, opts.max_edges, opts.cap)?;
    let t1 = lift_t1(&t0);
    let d = params.d;
    let e1 = MultiIndex::unit(d, 1);
    let derivative_orders = vec![MultiIndex::unit(d, 0), e1.clone(), e1.add(&e1)];

    let mut clock = std::time::Instant::now();
    let per_tree: Vec<Vec<IdentityResult>> = t1
        .par_iter()
        .map(|t| {
            let mut out = Vec::new();
            let text = t.to_string();

            // parse . serialize is the identity
            let roundtrip = parse_tree(&text, d).map(|p| p == *t).unwrap_or(false);
            out.push(IdentityResult::exact(
                "serialization_round_trip",
                text.clone(),
                roundtrip,
                format!("reparse of {text} did not reproduce the tree"),
            ));

            let __t0 = std::time::Instant::now();
            // node derivatives commute with the plain coaction
            for p in &derivative_orders {
                let lhs = derive_left(p, &coaction(DegreeKind::Deg0, t, params));
                let mut rhs = TensorElem::zero();
                for (s, c) in t.derive(p).iter() {
                    for (key, ck) in coaction_uncached(DegreeKind::Deg0, s, params).iter() {
                        rhs.add_term(key.clone(), c * ck);
                    }
                }
                let passed = lhs == rhs;
                out.push(IdentityResult::exact(
                    "derivative_coaction_commutation",
                    format!("D_{p:?} {text}"),
                    passed,
                    if passed {
                        String::new()
                    } else {
                        format!("{} vs {}", tensor_string(&lhs), tensor_string(&rhs))
                    },
                ));
            }

            let __t1 = std::time::Instant::now();
            // deformed coaction factors through the plain one
            let lhs = delta_hat0(t, params);
            let rhs = id_gamma_hat0(&coaction(DegreeKind::Deg0, t, params), params)
                .expect("deformed corrector");
            let factorises = *lhs == rhs;
            out.push(IdentityResult::exact(
                "deformed_coaction_factorisation",
                text.clone(),
                factorises,
                if factorises {
                    String::new()
                } else {
                    format!("{} vs {}", tensor_string(&lhs), tensor_string(&rhs))
                },
            ));

            let __t2 = std::time::Instant::now();
            // triangular structure of the plain coactions
            for kind in [DegreeKind::Deg0, DegreeKind::Deg1] {
                let deg = t.degree(kind, params);
                let mut ok = true;
                let mut bad = String::new();
                for ((lt, m), _) in coaction(kind, t, params).iter() {
                    if lt == t && m.is_one() {
                        continue;
                    }
                    if lt.degree(kind, params) >= deg {
                        ok = false;
                        bad = format!("left factor {lt} has degree >= {}", rational_string(&deg));
                        break;
                    }
                }
                out.push(IdentityResult::exact(
                    "coaction_triangularity",
                    format!("{kind:?} {text}"),
                    ok,
                    bad,
                ));
            }

            // triangular structure of the deformed coaction: every
            // non-leading left factor has rough degree at least deg_1(t)
            let deg1 = t.degree(DegreeKind::Deg1, params);
            let mut ok = true;
            let mut bad = String::new();
            for ((lt, m), _) in lhs.iter() {
                if lt == t && m.is_one() {
                    continue;
                }
                if lt.degree(DegreeKind::Deg1, params) < deg1 {
                    ok = false;
                    bad = format!("left factor {lt} has degree < {}", rational_string(&deg1));
                    break;
                }
            }
            out.push(IdentityResult::exact(
                "deformed_coaction_triangularity",
                text.clone(),
                ok,
                bad,
            ));

            // the deformed coaction fixes noise-smooth trees
            if !t.contains_xi1() {
                let trivial = TensorElem::unit_term((t.clone(), crate::plus::PlusMonomial::one(d)));
                let fixed = *lhs == trivial;
                out.push(IdentityResult::exact(
                    "deformed_coaction_fixes_smooth",
                    text.clone(),
                    fixed,
                    if fixed { String::new() } else { tensor_string(&lhs) },
                ));
            }
            let __t3 = std::time::Instant::now();
            if std::env::var("DECTREE_TIMING").is_ok() {
                SYM_DERIV.with(|c| c.set(c.get() + (__t1 - __t0).as_secs_f64()));
                SYM_FACT.with(|c| c.set(c.get() + (__t2 - __t1).as_secs_f64()));
                SYM_TRI.with(|c| c.set(c.get() + (__t3 - __t2).as_secs_f64()));
            }
            out
        })
        .collect();

    tick("per_tree_checks", &mut clock);
    if std::env::var("DECTREE_TIMING").is_ok() {
        // per-thread accumulators: with one rayon worker these cover the run
        rayon::broadcast(|_| {
            let (entries, terms, flushes) = crate::hopf::memo_stats();
            eprintln!(
                "[timing] sym worker: deriv {:.1}s fact {:.1}s tri {:.1}s; memo {} entries {} terms {} flushes",
                SYM_DERIV.with(|c| c.get()),
                SYM_FACT.with(|c| c.get()),
                SYM_TRI.with(|c| c.get()),
                entries,
                terms,
                flushes
            );
        });
    }
    let mut results: Vec<IdentityResult> = per_tree.into_iter().flatten().collect();

    // the noise derivation satisfies the Leibniz rule on products
    for a in t1.iter().take(10) {
        for b in t1.iter().take(10) {
            let prod = match a.product(b) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let lhs = d_xi(&prod);
            let mut rhs = TreeComb::zero();
            for (s, c) in d_xi(a).iter() {
                rhs.add_term(s.product(b).expect("product"), c.clone());
            }
            for (s, c) in d_xi(b).iter() {
                rhs.add_term(a.product(s).expect("product"), c.clone());
            }
            results.push(IdentityResult::exact(
                "noise_derivation_leibniz",
                format!("{a} , {b}"),
                lhs == rhs,
                format!(
                    "{} vs {}",
                    crate::tree::comb_string(&lhs),
                    crate::tree::comb_string(&rhs)
                ),
            ));
        }
    }

    tick("leibniz", &mut clock);

    // preparation-map axioms, grouped per axiom
    let failures = verify_axioms(prep, &t1, params)?;
    tick("prep_axioms", &mut clock);
    for axiom in [
        "fixes_primitives",
        "triangular",
        "coaction_0_commutes",
        "coaction_1_commutes",
        "d_xi_commutes",
        "q0_commutes",
        "delta_hat0_commutes",
    ] {
        let bad: Vec<&crate::prep::AxiomFailure> =
            failures.iter().filter(|f| f.axiom == axiom).collect();
        results.push(IdentityResult::exact(
            &format!("prep_{axiom}"),
            format!("{} on {} trees", prep.name, t1.len()),
            bad.is_empty(),
            bad.iter()
                .map(|f| format!("{}: {}", f.tree, f.detail))
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }

    // quasilinear extraction shape
    let shape_failures = verify_assumption2(prep, &t0, params)?;
    tick("extraction_shape", &mut clock);
    results.push(IdentityResult::exact(
        "prep_quasilinear_extraction",
        format!("{} on {} trees", prep.name, t0.len()),
        shape_failures.is_empty(),
        shape_failures
            .iter()
            .map(|f| format!("{}: {}", f.tree, f.detail))
            .collect::<Vec<_>>()
            .join("; "),
    ));

    // the enumeration is stable under the preparation map and coaction
    let closure = check_closure(rules, &t0, prep, params)?;
    tick("closure", &mut clock);
    results.push(IdentityResult::exact(
        "rule_closure",
        format!("{} / {}", rules.name.as_str(), prep.name),
        closure.is_closed(),
        format!(
            "preparation escapes: {:?}; coaction escapes: {:?}",
            closure
                .r_escapes
                .iter()
                .map(|(a, b)| format!("{a} -> {b}"))
                .collect::<Vec<_>>(),
            closure
                .coaction_escapes
                .iter()
                .map(|(a, b)| format!("{a} -> {b}"))
                .collect::<Vec<_>>()
        ),
    ));

    Ok(finalize(Report {
        suite: "symbolic".into(),
        rule: rules.name.as_str().into(),
        prep: prep.name.clone(),
        alpha: rational_string(&params.alpha),
        max_noises: opts.max_noises,
        max_edges: opts.max_edges,
        tree_count: t1.len(),
        assumption_violations: assumption_strings(&t0, params),
        results,
        passed: false,
    }))
}

// ---------------------------------------------------------------------------
// Numeric suite
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct NumericOptions {
    /// Grid sizes, time direction first; length must be d + 1.
    pub grid_sizes: Vec<usize>,
    /// None: fixed trigonometric noise; Some: seeded random noise.
    pub seed: Option<u64>,
    pub base_points: usize,
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub max_noises: u64,
    pub max_edges: u64,
    pub cap: usize,
    /// Support radius of the mollified kernel cutoff, in (0, 1/2).
    pub cutoff: f64,
}

impl Default for NumericOptions {
    fn default() -> Self {
        NumericOptions {
            grid_sizes: vec![48, 32],
            seed: None,
            base_points: 8,
            tol_rel: 1e-8,
            tol_abs: 1e-12,
            max_noises: 2,
            max_edges: 5,
            cap: 200_000,
            cutoff: 0.25,
        }
    }
}

// Wall-clock diagnostics per identity block, printed to stderr when the
// DECTREE_TIMING environment variable is set.
thread_local! {
    static SYM_DERIV: std::cell::Cell<f64> = const { std::cell::Cell::new(0.0) };
    static SYM_FACT: std::cell::Cell<f64> = const { std::cell::Cell::new(0.0) };
    static SYM_TRI: std::cell::Cell<f64> = const { std::cell::Cell::new(0.0) };
}

fn tick(label: &str, clock: &mut std::time::Instant) {
    if std::env::var_os("DECTREE_TIMING").is_some() {
        eprintln!("[timing] {label}: {:.1}s", clock.elapsed().as_secs_f64());
    }
    *clock = std::time::Instant::now();
}

/// Pointwise comparator: every point must satisfy
/// |a - b| <= max(tol_rel * max(|a|,|b|), tol_abs).
struct Cmp {
    tol_rel: f64,
    tol_abs: f64,
    max_abs: f64,
    max_rel: f64,
    passed: bool,
}

impl Cmp {
    fn new(opts: &NumericOptions) -> Cmp {
        Cmp {
            tol_rel: opts.tol_rel,
            tol_abs: opts.tol_abs,
            max_abs: 0.0,
            max_rel: 0.0,
            passed: true,
        }
    }

    fn point(&mut self, a: f64, b: f64) {
        let abs = (a - b).abs();
        let mag = a.abs().max(b.abs());
        self.max_abs = self.max_abs.max(abs);
        if mag > 0.0 {
            self.max_rel = self.max_rel.max(abs / mag);
        }
        if abs > (self.tol_rel * mag).max(self.tol_abs) {
            self.passed = false;
        }
    }

    fn slice(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            self.point(*x, *y);
        }
    }

    fn combs(&mut self, a: &NumComb, b: &NumComb) {
        let keys: std::collections::BTreeSet<&DecoratedTree> = a.keys().chain(b.keys()).collect();
        for k in keys {
            self.point(*a.get(k).unwrap_or(&0.0), *b.get(k).unwrap_or(&0.0));
        }
    }

    fn result(self, identity: &str, subject: String) -> IdentityResult {
        IdentityResult {
            identity: identity.to_string(),
            subject,
            passed: self.passed,
            max_abs_error: self.max_abs,
            max_rel_error: self.max_rel,
            detail: String::new(),
        }
    }
}

fn num_sub(a: &NumComb, b: &NumComb) -> NumComb {
    let mut out = a.clone();
    for (k, v) in b {
        *out.entry(k.clone()).or_insert(0.0) -= v;
    }
    out
}

fn num_q0(c: &NumComb) -> NumComb {
    c.iter()
        .filter(|(t, _)| !t.contains_xi1())
        .map(|(t, v)| (t.clone(), *v))
        .collect()
}

/// Is `t` of the quasilinear product shape: no root decorations, exactly
/// one doubly differentiated branch, all other branches undifferentiated?
fn quasi_shape(t: &DecoratedTree, d: usize) -> bool {
    let i2 = second_space_derivative(d);
    t.noise() == crate::tree::Noise::None
        && t.poly().is_zero()
        && !t.children().is_empty()
        && t.children().iter().filter(|(a, _)| *a == i2).count() == 1
        && t.children().iter().all(|(a, _)| a.is_zero() || *a == i2)
}

fn second_space_derivative(d: usize) -> MultiIndex {
    let e1 = MultiIndex::unit(d, 1);
    e1.add(&e1)
}

/// Floating-point checks of the grid model: every identity is algebraic in
/// the discrete convolution and stencil operators, so both sides agree to
/// roundoff whenever the identity holds.
pub fn run_numeric_suite(
    rules: &RuleSet,
    prep: &PrepMap,
    params: &DegreeParams,
    opts: &NumericOptions,
) -> Result<Report> {
    if opts.grid_sizes.len() != params.d + 1 {
        return Err(TreeError::Config(format!(
            "grid has {} directions but the dimension needs {}",
            opts.grid_sizes.len(),
            params.d + 1
        )));
    }
    if opts.grid_sizes.iter().any(|&n| n < 16) {
        return Err(TreeError::Config(
            "every grid direction needs at least 16 points".into(),
        ));
    }
    if !(opts.cutoff > 0.0 && opts.cutoff < 0.5) {
        return Err(TreeError::Config(
            "kernel cutoff radius must lie in (0, 1/2)".into(),
        ));
    }

    let t0 = enumerate_t0(rules, opts.max_noises, opts.max_edges, opts.cap)?;
    let t1 = lift_t1(&t0);
    let assumption_violations = assumption_strings(&t0, params);
    let branch_positive = assumption_violations.is_empty();

    let grid = Grid::new(opts.grid_sizes.clone());
    let noise = match opts.seed {
        None => NoisePair::deterministic(&grid),
        Some(s) => NoisePair::seeded(&grid, s),
    };
    let margin = 7;
    let points = grid.base_points(opts.base_points, margin);
    if points.len() < 3 {
        return Err(TreeError::Config(
            "grid too small for interior base points".into(),
        ));
    }
    let mut model = GridModel::new(grid.clone(), noise, params.clone(), prep.clone());
    if opts.cutoff != 0.25 {
        model.kernels = std::rc::Rc::new(crate::grid::KernelFamily::heat_with_radius(
            &grid,
            opts.cutoff,
        ));
    }
    let n = points.len();
    let pairs: Vec<(usize, usize)> = (0..n).map(|i| (points[i], points[(i + 1) % n])).collect();
    let triples: Vec<(usize, usize, usize)> = (0..n)
        .map(|i| (points[i], points[(i + 1) % n], points[(i + 2) % n]))
        .collect();
    let zero = MultiIndex::zero(params.d);
    let i2 = second_space_derivative(params.d);
    let mut results: Vec<IdentityResult> = Vec::new();
    let mut clock = std::time::Instant::now();

    // Pi = (pre-model (x) character) applied to the coaction
    for (kind, list) in [(DegreeKind::Deg0, &t0), (DegreeKind::Deg1, &t1)] {
        for t in list.iter() {
            let mut cmp = Cmp::new(opts);
            let co = coaction(kind, t, params);
            for &x in &points {
                let mut rhs = vec![0.0; grid.len()];
                for ((lt, m), c) in co.iter() {
                    let w = ratf(c) * model.f_char(x, m);
                    if w != 0.0 {
                        for (o, v) in rhs.iter_mut().zip(model.pre(lt).iter()) {
                            *o += w * v;
                        }
                    }
                }
                cmp.slice(&model.pi(x, kind, t), &rhs);
            }
            results.push(cmp.result("model_factorisation", format!("{kind:?} {t}")));
        }
    }
    tick("model_factorisation", &mut clock);

    // the pre-model is recovered from any centred model via the antipode
    for t in &t0 {
        let mut cmp = Cmp::new(opts);
        let co: Vec<_> = coaction(DegreeKind::Deg0, t, params)
            .iter()
            .map(|((lt, m), c)| {
                (lt.clone(), antipode(m, params).expect("antipode"), c.clone())
            })
            .collect();
        for &x in &points {
            let mut rhs = vec![0.0; grid.len()];
            for (lt, inv, c) in &co {
                let w = ratf(c) * model.f_char_comb(x, inv);
                if w != 0.0 {
                    for (o, v) in rhs.iter_mut().zip(model.pi(x, DegreeKind::Deg0, lt).iter()) {
                        *o += w * v;
                    }
                }
            }
            cmp.slice(&model.pre(t), &rhs);
        }
        results.push(cmp.result("pre_model_inversion", t.to_string()));
    }
    tick("pre_model_inversion", &mut clock);

    // the rough model factors through the smooth one and the deformed
    // coaction, in both plain and unrenormalised flavours
    for t in &t1 {
        let dh = delta_hat0(t, params);
        let mut cmp = Cmp::new(opts);
        let mut cmp_hat = Cmp::new(opts);
        for &x in &points {
            let mut rhs = vec![0.0; grid.len()];
            let mut rhs_hat = vec![0.0; grid.len()];
            for ((lt, m), c) in dh.iter() {
                let w = ratf(c) * model.f_char(x, m);
                if w != 0.0 {
                    for (o, v) in rhs.iter_mut().zip(model.pi(x, DegreeKind::Deg0, lt).iter()) {
                        *o += w * v;
                    }
                    for (o, v) in rhs_hat
                        .iter_mut()
                        .zip(model.pi_hat(x, DegreeKind::Deg0, lt).iter())
                    {
                        *o += w * v;
                    }
                }
            }
            cmp.slice(&model.pi(x, DegreeKind::Deg1, t), &rhs);
            cmp_hat.slice(&model.pi_hat(x, DegreeKind::Deg1, t), &rhs_hat);
        }
        results.push(cmp.result("rough_model_factorisation", t.to_string()));
        results.push(cmp_hat.result("rough_model_factorisation_hat", t.to_string()));
    }
    tick("rough_model_factorisation", &mut clock);

    // analytic Malliavin derivative (exact interpolation in the
    // perturbation size) equals the noise derivation under the model
    let degree = opts.max_noises as usize;
    let weights = derivative_weights(degree);
    let perturbed: Vec<GridModel> = (0..=degree).map(|j| model.perturbed(j as f64)).collect();
    for t in &t0 {
        let mut cmp = Cmp::new(opts);
        let dnum = comb_to_num(&d_xi(t));
        for &x in &points {
            let mut analytic = vec![0.0; grid.len()];
            for (j, w) in weights.iter().enumerate() {
                if *w == 0.0 {
                    continue;
                }
                for (o, v) in analytic
                    .iter_mut()
                    .zip(perturbed[j].pi(x, DegreeKind::Deg1, t).iter())
                {
                    *o += w * v;
                }
            }
            let algebraic = model.apply_pi(x, DegreeKind::Deg1, &dnum);
            cmp.slice(&analytic, &algebraic);
        }
        results.push(cmp.result("malliavin_derivative", t.to_string()));
    }
    tick("malliavin_derivative", &mut clock);

    // the reexpansion character evaluates the centred model (positive
    // degree planted trees only)
    for t in &t0 {
        let planted_deg = t.degree(DegreeKind::Deg0, params) + crate::params::rat(2, 1);
        if planted_deg <= BigRational::from_integer(0.into()) {
            continue;
        }
        let tilde = crate::plus::tilde_basis(&zero, t, params);
        let planted = DecoratedTree::plant(zero.clone(), t.clone());
        let mut cmp = Cmp::new(opts);
        for &(x, y) in &pairs {
            let lhs: f64 = tilde
                .iter()
                .map(|(m, c)| ratf(c) * model.gamma(x, y, m))
                .sum();
            let rhs = model.pi(y, DegreeKind::Deg0, &planted)[x];
            cmp.point(lhs, rhs);
        }
        results.push(cmp.result("character_evaluates_model", t.to_string()));
    }
    tick("character_evaluates_model", &mut clock);

    // reexpansion axiom in both flavours
    for (kind, list) in [(DegreeKind::Deg0, &t0), (DegreeKind::Deg1, &t1)] {
        for t in list.iter() {
            let mut cmp = Cmp::new(opts);
            let mut cmp_hat = Cmp::new(opts);
            for &(x, y) in &pairs {
                let g = model.gamma_map(kind, x, y, t);
                cmp.slice(&model.apply_pi(x, kind, &g), &model.pi(y, kind, t));
                cmp_hat.slice(&model.apply_pi_hat(x, kind, &g), &model.pi_hat(y, kind, t));
            }
            results.push(cmp.result("reexpansion_axiom", format!("{kind:?} {t}")));
            results.push(cmp_hat.result("reexpansion_axiom_hat", format!("{kind:?} {t}")));
        }
    }
    tick("reexpansion_axiom", &mut clock);

    // diagonal derivative reexpansion (needs positive-degree noise branches;
    // trees carrying a noise on the root are excluded, since for those the
    // noise derivative keeps a bare rough-noise term that the curtailing
    // projection removes from the reexpanded side)
    let mut dg_time = std::time::Duration::ZERO;
    let mut pi_time = std::time::Duration::ZERO;
    if branch_positive {
        for t in t0.iter().filter(|t| t.noise() == crate::tree::Noise::None) {
            let dnum = comb_to_num(&d_xi(t));
            let mut cmp = Cmp::new(opts);
            let mut cmp_hat = Cmp::new(opts);
            for &(x, y) in &pairs {
                let t_dg = std::time::Instant::now();
                let dg = model.d_gamma(y, x, t);
                dg_time += t_dg.elapsed();
                let t_pi = std::time::Instant::now();
                cmp.point(
                    model.apply_pi(y, DegreeKind::Deg1, &dg)[y],
                    model.apply_pi(x, DegreeKind::Deg1, &dnum)[y],
                );
                pi_time += t_pi.elapsed();
                cmp_hat.point(
                    model.apply_pi_hat(y, DegreeKind::Deg1, &dg)[y],
                    model.apply_pi_hat(x, DegreeKind::Deg1, &dnum)[y],
                );
            }
            results.push(cmp.result("derivative_reexpansion", t.to_string()));
            results.push(cmp_hat.result("derivative_reexpansion_hat", t.to_string()));
        }

        // projecting the derivative reexpansion onto planted trees only
        // changes it by the diagonal constant
        for t in &t0 {
            let planted_deg = t.degree(DegreeKind::Deg0, params) + crate::params::rat(2, 1);
            if planted_deg <= BigRational::from_integer(0.into()) {
                continue;
            }
            let planted = DecoratedTree::plant(zero.clone(), t.clone());
            let dnum = comb_to_num(&d_xi(&planted));
            let mut cmp = Cmp::new(opts);
            for &(x, y) in &pairs {
                let t_pi = std::time::Instant::now();
                let delta = model.apply_pi(x, DegreeKind::Deg1, &dnum);
                pi_time += t_pi.elapsed();
                let t_dg = std::time::Instant::now();
                let dg = model.d_gamma(y, x, &planted);
                dg_time += t_dg.elapsed();
                let dg_planted: NumComb = dg
                    .iter()
                    .filter(|(s, _)| s.is_planted() && s.children()[0].0.is_zero())
                    .map(|(s, v)| (s.clone(), *v))
                    .collect();
                let lhs = delta[y] - model.apply_pi(y, DegreeKind::Deg1, &dg)[y];
                let rhs = -model.apply_pi(y, DegreeKind::Deg1, &dg_planted)[y];
                cmp.point(lhs, rhs);
            }
            results.push(cmp.result("planted_projection", planted.to_string()));
        }
    }
    if std::env::var_os("DECTREE_TIMING").is_some() {
        eprintln!(
            "[timing]   d_gamma {:.1}s, apply_pi {:.1}s, plans {:.1}s, chars {:.1}s",
            dg_time.as_secs_f64(),
            pi_time.as_secs_f64(),
            crate::model::PLAN_TIME.with(|c| c.get()),
            crate::model::CHAR_TIME.with(|c| c.get()),
        );
        eprintln!(
            "[timing]   conv {:.1}s over {} convolutions",
            crate::model::CONV_TIME.with(|c| c.get()),
            crate::model::CONV_COUNT.with(|c| c.get()),
        );
    }
    tick("derivative_reexpansion", &mut clock);

    // cocycle property of the derivative reexpansion
    for t in &t0 {
        let dnum = comb_to_num(&d_xi(t));
        let mut cmp = Cmp::new(opts);
        for &(y, z, x) in &triples {
            let lhs = num_sub(
                &model.d_gamma(y, x, t),
                &model.gamma_map_comb(DegreeKind::Deg1, y, z, &model.d_gamma(z, x, t)),
            );
            let rhs = num_sub(
                &num_q0(&model.gamma_map_comb(DegreeKind::Deg0, y, x, &dnum)),
                &model.gamma_map_comb(
                    DegreeKind::Deg0,
                    y,
                    z,
                    &num_q0(&model.gamma_map_comb(DegreeKind::Deg0, z, x, &dnum)),
                ),
            );
            cmp.combs(&lhs, &rhs);
        }
        results.push(cmp.result("derivative_reexpansion_cocycle", t.to_string()));
    }
    tick("cocycle", &mut clock);

    // kernel edge decorations count discrete derivatives
    let orders = vec![MultiIndex::unit(params.d, 1), i2.clone()];
    for t in t0.iter().take(4) {
        let base = DecoratedTree::plant(zero.clone(), t.clone());
        for a in &orders {
            let decorated = DecoratedTree::plant(a.clone(), t.clone());
            let mut cmp = Cmp::new(opts);
            cmp.slice(
                &model.pre_hat(&decorated),
                &grid.stencil_pow(&model.pre_hat(&base), a),
            );
            results.push(cmp.result("edge_decoration_is_derivative", decorated.to_string()));

            let mut cmp_hat = Cmp::new(opts);
            for &x in &points {
                let lhs = model.pi_hat(x, DegreeKind::Deg0, &decorated);
                let rhs = grid.stencil_pow(&model.pi_hat(x, DegreeKind::Deg0, &base), a);
                for idx in 0..grid.len() {
                    if grid.is_interior(idx, margin) {
                        cmp_hat.point(lhs[idx], rhs[idx]);
                    }
                }
            }
            results.push(
                cmp_hat.result("edge_decoration_is_derivative_centred", decorated.to_string()),
            );
        }
    }

    // quasilinear diagonal factorisation and its derivative form
    for t in t0.iter().filter(|t| quasi_shape(t, params.d)) {
        let body = t
            .children()
            .iter()
            .find(|(a, _)| *a == i2)
            .map(|(_, s)| s.clone())
            .expect("doubly differentiated branch");
        let i2tree = DecoratedTree::plant(i2.clone(), body.clone());
        let itree = DecoratedTree::plant(zero.clone(), body.clone());
        let dnum_full = comb_to_num(&d_xi(t));
        let dnum_i2 = comb_to_num(&d_xi(&i2tree));
        let dnum_i = comb_to_num(&d_xi(&itree));

        let mut cmp_f = Cmp::new(opts);
        let mut cmp_d = Cmp::new(opts);
        for &(x, y) in &pairs {
            let f_full = model.apply_pi(x, DegreeKind::Deg1, &dnum_full)[y]
                - model.apply_pi(y, DegreeKind::Deg1, &model.d_gamma(y, x, t))[y];
            let f_hat_i2 = model.apply_pi_hat(x, DegreeKind::Deg1, &dnum_i2)[y]
                - model.apply_pi_hat(y, DegreeKind::Deg1, &model.d_gamma(y, x, &i2tree))[y];
            let mut product = 1.0;
            for (a, sub) in t.children() {
                if a.is_zero() {
                    let factor = DecoratedTree::plant(zero.clone(), sub.clone());
                    product *= model.pi_hat(x, DegreeKind::Deg1, &factor)[y];
                }
            }
            cmp_f.point(f_full, product * f_hat_i2);

            let mut g: Field = model.apply_pi_hat(x, DegreeKind::Deg1, &dnum_i);
            let correction = model.apply_pi_hat(y, DegreeKind::Deg1, &model.d_gamma(y, x, &itree));
            for (o, v) in g.iter_mut().zip(&correction) {
                *o -= v;
            }
            let d2g = grid.stencil(&grid.stencil(&g, 1), 1);
            cmp_d.point(f_hat_i2, d2g[y]);
        }
        results.push(cmp_f.result("quasilinear_diagonal_factorisation", t.to_string()));
        results.push(cmp_d.result("quasilinear_derivative_identity", t.to_string()));
    }

    Ok(finalize(Report {
        suite: "numeric".into(),
        rule: rules.name.as_str().into(),
        prep: prep.name.clone(),
        alpha: rational_string(&params.alpha),
        max_noises: opts.max_noises,
        max_edges: opts.max_edges,
        tree_count: t1.len(),
        assumption_violations,
        results,
        passed: false,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::RuleName;

    #[test]
    fn symbolic_suite_passes_on_a_small_family() {
        let rules = RuleSet::new(RuleName::Gkpz);
        let params = rules.default_params();
        let opts = SymbolicOptions {
            max_noises: 2,
            max_edges: 4,
            cap: 100_000,
        };
        let report =
            run_symbolic_suite(&rules, &PrepMap::trivial(), &params, &opts).expect("suite");
        for r in report.results.iter().filter(|r| !r.passed) {
            eprintln!("{}: {} -- {}", r.identity, r.subject, r.detail);
        }
        assert!(report.passed);
    }

    #[test]
    fn adversarial_prep_fails_triangularity_only_there() {
        let rules = RuleSet::new(RuleName::QuaComplete);
        let params = rules.default_params();
        let opts = SymbolicOptions {
            max_noises: 2,
            max_edges: 4,
            cap: 100_000,
        };
        let report =
            run_symbolic_suite(&rules, &PrepMap::adversarial(), &params, &opts).expect("suite");
        assert!(!report.passed);
        assert!(report
            .results
            .iter()
            .any(|r| r.identity == "prep_triangular" && !r.passed));
    }

    #[test]
    fn numeric_suite_passes_on_a_coarse_grid() {
        let rules = RuleSet::new(RuleName::Gkpz);
        let params = rules.default_params();
        let opts = NumericOptions {
            grid_sizes: vec![24, 24],
            base_points: 4,
            max_noises: 1,
            max_edges: 3,
            ..Default::default()
        };
        let report =
            run_numeric_suite(&rules, &PrepMap::trivial(), &params, &opts).expect("suite");
        for r in report.results.iter().filter(|r| !r.passed) {
            eprintln!(
                "{}: {} -- abs {:.3e} rel {:.3e}",
                r.identity, r.subject, r.max_abs_error, r.max_rel_error
            );
        }
        assert!(report.passed);
        assert!(report.assumption_violations.is_empty());
    }

    #[test]
    fn numeric_suite_rejects_mismatched_grid() {
        let rules = RuleSet::new(RuleName::Gkpz);
        let params = rules.default_params();
        let opts = NumericOptions {
            grid_sizes: vec![24, 24, 24],
            ..Default::default()
        };
        let err = run_numeric_suite(&rules, &PrepMap::trivial(), &params, &opts);
        assert!(err.is_err());
    }
}
