//! Grid realisation of the renormalised models: the uncentered pre-model,
//! the centered models for both degrees, their characters, reexpansion maps
//! and the derivative reexpansion, together with an exact Malliavin
//! derivative taken through polynomial interpolation in the perturbation.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::grid::{Field, Grid, KernelFamily, NoisePair};
use crate::hopf::{coaction, coproduct_plus, d_xi, delta_hat0};
use crate::multi_index::MultiIndex;
use crate::params::{DegreeKind, DegreeParams};
use crate::plus::PlusMonomial;
use crate::prep::PrepMap;
use crate::tree::{DecoratedTree, Noise, TreeComb};

/// Linear combination of trees with floating-point coefficients.
pub type NumComb = BTreeMap<DecoratedTree, f64>;

pub fn ratf(r: &BigRational) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

pub fn comb_to_num(c: &TreeComb) -> NumComb {
    c.iter().map(|(t, c)| (t.clone(), ratf(c))).collect()
}

pub fn num_add(out: &mut NumComb, t: &DecoratedTree, c: f64) {
    if c != 0.0 {
        *out.entry(t.clone()).or_insert(0.0) += c;
    }
}

/// Cache key for the field-valued maps; `x` is a flat grid index.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
enum FieldKey {
    Pre(DecoratedTree),
    PreHat(DecoratedTree),
    Pi(usize, DegreeKind, DecoratedTree),
    PiHat(usize, DegreeKind, DecoratedTree),
    Conv(MultiIndex, Box<FieldKey>),
}

/// Purely symbolic intermediates (coactions, deformed coactions and the
/// antipode expansion behind the reexpansion character). They depend only
/// on the degree parameters, so perturbed copies of a model share them.
#[derive(Default)]
struct SymbolicCache {
    gamma_plans: RefCell<HashMap<PlusMonomial, Rc<GammaPlan>>>,
    antipodes: RefCell<crate::hopf::AntipodeMemo>,
}

/// Expansion of the coproduct of a plus monomial with the antipode already
/// applied to the left leg: a list of (antipode of left leg, right leg,
/// rational coefficient).
type GammaPlan = Vec<(crate::plus::PlusComb, PlusMonomial, f64)>;

pub struct GridModel {
    pub grid: Grid,
    pub kernels: Rc<KernelFamily>,
    pub xi: Field,
    pub delta_xi: Field,
    pub params: DegreeParams,
    pub prep: PrepMap,
    fields: RefCell<HashMap<FieldKey, Rc<Field>>>,
    /// Single-point values of convolved fields; avoids materialising a full
    /// convolution when only one grid point of it is ever read.
    field_points: RefCell<HashMap<(FieldKey, usize), f64>>,
    chars: RefCell<HashMap<PlusMonomial, HashMap<usize, f64>>>,
    gammas: RefCell<HashMap<PlusMonomial, HashMap<(usize, usize), f64>>>,
    symbolic: Rc<SymbolicCache>,
}

impl GridModel {
    pub fn new(grid: Grid, noise: NoisePair, params: DegreeParams, prep: PrepMap) -> GridModel {
        let kernels = Rc::new(KernelFamily::heat(&grid));
        GridModel {
            grid,
            kernels,
            xi: noise.xi,
            delta_xi: noise.delta_xi,
            params,
            prep,
            fields: Default::default(),
            field_points: Default::default(),
            chars: Default::default(),
            gammas: Default::default(),
            symbolic: Default::default(),
        }
    }

    /// Same model with the driving noise shifted by eps times the
    /// perturbation direction.
    pub fn perturbed(&self, eps: f64) -> GridModel {
        let xi = self
            .xi
            .iter()
            .zip(&self.delta_xi)
            .map(|(a, b)| a + eps * b)
            .collect();
        GridModel {
            grid: self.grid.clone(),
            kernels: self.kernels.clone(),
            xi,
            delta_xi: self.delta_xi.clone(),
            params: self.params.clone(),
            prep: self.prep.clone(),
            fields: Default::default(),
            field_points: Default::default(),
            chars: Default::default(),
            gammas: Default::default(),
            symbolic: self.symbolic.clone(),
        }
    }

    fn coaction_cached(&self, kind: DegreeKind, t: &DecoratedTree) -> Rc<crate::plus::TensorElem> {
        coaction(kind, t, &self.params)
    }

    fn delta_hat0_cached(&self, t: &DecoratedTree) -> Rc<crate::plus::TensorElem> {
        delta_hat0(t, &self.params)
    }

    fn gamma_plan(&self, m: &PlusMonomial) -> Rc<GammaPlan> {
        if let Some(v) = self.symbolic.gamma_plans.borrow().get(m) {
            return v.clone();
        }
        let _t = ScopeTimer(&PLAN_TIME, std::time::Instant::now());
        let mut plan = GammaPlan::new();
        let mut memo = self.symbolic.antipodes.borrow_mut();
        for ((m1, m2), c) in coproduct_plus(m, &self.params).expect("coproduct").iter() {
            let anti =
                crate::hopf::antipode_memo(m1, &self.params, &mut memo).expect("antipode");
            plan.push((anti, m2.clone(), ratf(c)));
        }
        drop(memo);
        let v = Rc::new(plan);
        self.symbolic
            .gamma_plans
            .borrow_mut()
            .insert(m.clone(), v.clone());
        v
    }

    fn noise_field(&self, n: Noise) -> Field {
        match n {
            Noise::None => vec![1.0; self.grid.len()],
            Noise::Xi0 => self.xi.clone(),
            Noise::Xi1 => self.delta_xi.clone(),
        }
    }

    fn cached(&self, key: FieldKey, build: impl FnOnce(&Self) -> Field) -> Rc<Field> {
        if let Some(f) = self.fields.borrow().get(&key) {
            return f.clone();
        }
        let f = Rc::new(build(self));
        self.fields.borrow_mut().insert(key, f.clone());
        f
    }

    fn conv(&self, a: &MultiIndex, inner: FieldKey, field: &Field) -> Rc<Field> {
        self.cached(FieldKey::Conv(a.clone(), Box::new(inner)), |m| {
            let _t = ScopeTimer(&CONV_TIME, std::time::Instant::now());
            CONV_COUNT.with(|c| c.set(c.get() + 1));
            m.grid.convolve(&m.kernels.derived(a), field)
        })
    }

    /// The uncentered interpretation without the top-level renormalisation.
    pub fn pre_hat(&self, t: &DecoratedTree) -> Rc<Field> {
        self.cached(FieldKey::PreHat(t.clone()), |m| {
            let mut out = m.grid.monomial(t.poly());
            mul_assign(&mut out, &m.noise_field(t.noise()));
            for (a, sub) in t.children() {
                let inner = m.pre(sub);
                let c = m.conv(a, FieldKey::Pre(sub.clone()), &inner);
                mul_assign(&mut out, &c);
            }
            out
        })
    }

    /// The uncentered interpretation: pre_hat after the preparation map.
    pub fn pre(&self, t: &DecoratedTree) -> Rc<Field> {
        self.cached(FieldKey::Pre(t.clone()), |m| {
            let mut out = vec![0.0; m.grid.len()];
            for (s, c) in m.prep.apply(t).expect("preparation map").iter() {
                add_scaled(&mut out, &m.pre_hat(s), ratf(c));
            }
            out
        })
    }

    /// Degree of the planted tree I_a(sub) for the given truncation degree.
    fn planted_degree(&self, kind: DegreeKind, a: &MultiIndex, sub: &DecoratedTree) -> BigRational {
        sub.degree(kind, &self.params) + crate::params::rat(2, 1) - self.params.scaled_size(a)
    }

    /// Centered interpretation based at grid point x, without the top-level
    /// renormalisation.
    pub fn pi_hat(&self, x: usize, kind: DegreeKind, t: &DecoratedTree) -> Rc<Field> {
        self.cached(FieldKey::PiHat(x, kind, t.clone()), |m| {
            let xp = m.grid.point(x);
            let mut out = m.grid.monomial_at(t.poly(), &xp);
            mul_assign(&mut out, &m.noise_field(t.noise()));
            for (a, sub) in t.children() {
                let base = m.conv_pi(a, x, kind, sub);
                let mut planted: Field = base.as_ref().clone();
                let deg = m.planted_degree(kind, a, sub);
                for k in MultiIndex::below(&m.params.scaling, &deg) {
                    let at_x = m.conv_pi_at(&a.add(&k), x, kind, sub, x);
                    let scale = at_x / ratf(&BigRational::from_integer(k.factorial()));
                    let mono = m.grid.monomial_at(&k, &xp);
                    for (p, v) in planted.iter_mut().enumerate() {
                        *v -= scale * mono[p];
                    }
                }
                mul_assign(&mut out, &planted);
            }
            out
        })
    }

    /// Centered renormalised model at grid point x.
    pub fn pi(&self, x: usize, kind: DegreeKind, t: &DecoratedTree) -> Rc<Field> {
        self.cached(FieldKey::Pi(x, kind, t.clone()), |m| {
            let mut out = vec![0.0; m.grid.len()];
            for (s, c) in m.prep.apply(t).expect("preparation map").iter() {
                add_scaled(&mut out, &m.pi_hat(x, kind, s), ratf(c));
            }
            out
        })
    }

    fn conv_pi(&self, a: &MultiIndex, x: usize, kind: DegreeKind, t: &DecoratedTree) -> Rc<Field> {
        let inner = self.pi(x, kind, t);
        self.conv(a, FieldKey::Pi(x, kind, t.clone()), &inner)
    }

    /// One grid point of D^a K convolved with the centred model of `t`,
    /// without materialising the full convolution.
    fn conv_pi_at(
        &self,
        a: &MultiIndex,
        x: usize,
        kind: DegreeKind,
        t: &DecoratedTree,
        at: usize,
    ) -> f64 {
        let key = FieldKey::Conv(a.clone(), Box::new(FieldKey::Pi(x, kind, t.clone())));
        if let Some(f) = self.fields.borrow().get(&key) {
            return f[at];
        }
        if let Some(v) = self.field_points.borrow().get(&(key.clone(), at)) {
            return *v;
        }
        let inner = self.pi(x, kind, t);
        let v = self
            .grid
            .convolve_at(&self.kernels.derived(a), &inner, at);
        self.field_points.borrow_mut().insert((key, at), v);
        v
    }

    /// The recentering character at grid point x. The truncation degree per
    /// factor is the one recorded in the factor itself.
    pub fn f_char(&self, x: usize, m: &PlusMonomial) -> f64 {
        if let Some(v) = self.chars.borrow().get(m).and_then(|per| per.get(&x)) {
            return *v;
        }
        let _t = ScopeTimer(&CHAR_TIME, std::time::Instant::now());
        let xp = self.grid.point(x);
        let mut out = 1.0;
        for (j, &e) in m.poly().0.iter().enumerate() {
            out *= (-xp[j]).powi(e as i32);
        }
        for f in m.factors() {
            out *= -self.conv_pi_at(&f.index, x, f.kind, &f.body, x);
        }
        self.chars
            .borrow_mut()
            .entry(m.clone())
            .or_default()
            .insert(x, out);
        out
    }

    /// Linear extension of the character to plus combinations.
    pub fn f_char_comb(&self, x: usize, c: &crate::plus::PlusComb) -> f64 {
        c.iter().map(|(m, r)| ratf(r) * self.f_char(x, m)).sum()
    }

    /// The reexpansion character gamma_{ab} = (f_a A (x) f_b) Delta^+,
    /// so that pi(a) composed with the reexpansion map yields pi(b).
    pub fn gamma(&self, a: usize, b: usize, m: &PlusMonomial) -> f64 {
        if let Some(v) = self.gammas.borrow().get(m).and_then(|per| per.get(&(a, b))) {
            return *v;
        }
        let mut out = 0.0;
        for (anti, m2, c) in self.gamma_plan(m).iter() {
            out += c * self.f_char_comb(a, anti) * self.f_char(b, m2);
        }
        self.gammas
            .borrow_mut()
            .entry(m.clone())
            .or_default()
            .insert((a, b), out);
        out
    }

    /// Reexpansion map Gamma_{ab} = (Id (x) gamma_{ab}) Delta_kind.
    pub fn gamma_map(&self, kind: DegreeKind, a: usize, b: usize, t: &DecoratedTree) -> NumComb {
        let mut out = NumComb::new();
        for ((t1, m), c) in self.coaction_cached(kind, t).iter() {
            num_add(&mut out, t1, ratf(c) * self.gamma(a, b, m));
        }
        out
    }

    pub fn gamma_map_comb(
        &self,
        kind: DegreeKind,
        a: usize,
        b: usize,
        c: &NumComb,
    ) -> NumComb {
        let mut out = NumComb::new();
        for (t, w) in c {
            for (s, v) in self.gamma_map(kind, a, b, t) {
                num_add(&mut out, &s, w * v);
            }
        }
        out
    }

    /// Derivative reexpansion: the noise-derivative of the tree is deformed
    /// by the curtailing coaction, reexpanded from x to y, paired with the
    /// character at x, and projected onto trees without the rough noise.
    pub fn d_gamma(&self, y: usize, x: usize, t: &DecoratedTree) -> NumComb {
        let mut out = NumComb::new();
        for (s, cs) in d_xi(t).iter() {
            for (tree, c) in self.d_gamma_bar_term(y, x, s) {
                if !tree.contains_xi1() {
                    num_add(&mut out, &tree, ratf(cs) * c);
                }
            }
        }
        out
    }

    /// The multiplicative companion of d_gamma, without the noise derivative
    /// and without the projection.
    pub fn d_gamma_bar(&self, y: usize, x: usize, t: &DecoratedTree) -> NumComb {
        self.d_gamma_bar_term(y, x, t)
    }

    fn d_gamma_bar_term(&self, y: usize, x: usize, t: &DecoratedTree) -> NumComb {
        let mut out = NumComb::new();
        for ((t1, m), c) in self.delta_hat0_cached(t).iter() {
            let fx = self.f_char(x, m);
            if fx == 0.0 {
                continue;
            }
            for (t2, c2) in self.gamma_map(DegreeKind::Deg0, y, x, t1) {
                num_add(&mut out, &t2, ratf(c) * fx * c2);
            }
        }
        out
    }

    /// Evaluate a tree combination through the centered model.
    pub fn apply_pi(&self, x: usize, kind: DegreeKind, c: &NumComb) -> Field {
        let mut out = vec![0.0; self.grid.len()];
        for (t, w) in c {
            add_scaled(&mut out, &self.pi(x, kind, t), *w);
        }
        out
    }

    pub fn apply_pi_hat(&self, x: usize, kind: DegreeKind, c: &NumComb) -> Field {
        let mut out = vec![0.0; self.grid.len()];
        for (t, w) in c {
            add_scaled(&mut out, &self.pi_hat(x, kind, t), *w);
        }
        out
    }

    /// Exact Malliavin derivative of any field-valued functional of the
    /// model: the functional is polynomial in the noise of degree at most
    /// `degree`, so differentiation through interpolation at the nodes
    /// 0..=degree in the perturbation size is exact.
    pub fn malliavin(&self, degree: usize, eval: impl Fn(&GridModel) -> Field) -> Field {
        let weights = derivative_weights(degree);
        let mut out = vec![0.0; self.grid.len()];
        for (j, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let m = self.perturbed(j as f64);
            add_scaled(&mut out, &eval(&m), *w);
        }
        out
    }
}

thread_local! {
    pub static PLAN_TIME: std::cell::Cell<f64> = const { std::cell::Cell::new(0.0) };
    pub static CHAR_TIME: std::cell::Cell<f64> = const { std::cell::Cell::new(0.0) };
    pub static CONV_TIME: std::cell::Cell<f64> = const { std::cell::Cell::new(0.0) };
    pub static CONV_COUNT: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
}

struct ScopeTimer(&'static std::thread::LocalKey<std::cell::Cell<f64>>, std::time::Instant);
impl Drop for ScopeTimer {
    fn drop(&mut self) {
        let dt = self.1.elapsed().as_secs_f64();
        self.0.with(|c| c.set(c.get() + dt));
    }
}

fn mul_assign(out: &mut Field, other: &Field) {
    for (o, v) in out.iter_mut().zip(other) {
        *o *= v;
    }
}

fn add_scaled(out: &mut Field, other: &Field, c: f64) {
    if c == 0.0 {
        return;
    }
    for (o, v) in out.iter_mut().zip(other) {
        *o += c * v;
    }
}

/// Weights w_j with p'(0) = sum_j w_j p(j) exact for polynomials p of the
/// given degree, using the nodes 0, 1, ..., degree.
pub fn derivative_weights(degree: usize) -> Vec<f64> {
    let n = degree;
    let mut w = vec![0.0; n + 1];
    w[0] = -(1..=n).map(|m| 1.0 / m as f64).sum::<f64>();
    for j in 1..=n {
        let mut acc = 1.0 / j as f64;
        for k in 1..=n {
            if k != j {
                acc *= -(k as f64) / (j as f64 - k as f64);
            }
        }
        w[j] = acc;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::parse_tree;

    fn model() -> GridModel {
        let grid = Grid::new(vec![16, 16]);
        let noise = NoisePair::deterministic(&grid);
        GridModel::new(grid, noise, DegreeParams::default_d1(), PrepMap::trivial())
    }

    fn t(s: &str) -> DecoratedTree {
        parse_tree(s, 1).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-8_f64.mul_add(a.abs().max(b.abs()), 1e-12)
    }

    #[test]
    fn derivative_weights_differentiate_polynomials() {
        let w = derivative_weights(3);
        // p(x) = 2x^3 - x + 5, p'(0) = -1
        let p = |x: f64| 2.0 * x * x * x - x + 5.0;
        let got: f64 = w.iter().enumerate().map(|(j, w)| w * p(j as f64)).sum();
        assert!((got + 1.0).abs() < 1e-9, "{got}");
    }

    #[test]
    fn derivative_reexpansion_golden_case() {
        let m = model();
        let pts = m.grid.base_points(2, 4);
        let (y, x) = (pts[0], pts[1]);

        // on the plain noise the derivative reexpansion vanishes
        assert!(m.d_gamma(y, x, &t("Xi0")).is_empty());

        // on I[Xi0] it is (K*dxi)(y) - (K*dxi)(x) times the empty tree plus
        // (D_x K*dxi)(y) times the space monomial
        let got = m.d_gamma(y, x, &t("I[Xi0]"));
        let k0 = m.grid.convolve(&m.kernels.derived(&MultiIndex(vec![0, 0])), &m.delta_xi);
        let k1 = m.grid.convolve(&m.kernels.derived(&MultiIndex(vec![0, 1])), &m.delta_xi);
        assert_eq!(got.len(), 2);
        assert!(close(got[&t("1")], k0[y] - k0[x]));
        assert!(close(got[&t("X^(0,1)")], k1[y]));
    }

    #[test]
    fn reexpansion_moves_base_point() {
        let m = model();
        let pts = m.grid.base_points(3, 4);
        let (x, y) = (pts[0], pts[2]);
        for s in ["I[Xi0]", "I[Xi0]*Xi0", "I_(0,1)[I[Xi0]*Xi0]"] {
            let tree = t(s);
            for kind in [DegreeKind::Deg0, DegreeKind::Deg1] {
                let moved = m.apply_pi(x, kind, &m.gamma_map(kind, x, y, &tree));
                let direct = m.pi(y, kind, &tree);
                for &p in &pts {
                    assert!(
                        close(moved[p], direct[p]),
                        "{s}: {} vs {} at {p}",
                        moved[p],
                        direct[p]
                    );
                }
            }
        }
    }

    #[test]
    fn character_of_tilde_basis_evaluates_the_model() {
        let m = model();
        let pts = m.grid.base_points(2, 4);
        let (x, y) = (pts[0], pts[1]);
        for s in ["Xi0", "I[Xi0]*Xi0"] {
            let tree = t(s);
            let tilde = crate::plus::tilde_basis(&MultiIndex(vec![0, 0]), &tree, &m.params);
            let lhs: f64 = tilde
                .iter()
                .map(|(mono, c)| ratf(c) * m.gamma(x, y, mono))
                .sum();
            let planted = DecoratedTree::plant(MultiIndex(vec![0, 0]), tree.clone());
            let rhs = m.pi(y, DegreeKind::Deg0, &planted)[x];
            assert!(close(lhs, rhs), "{s}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn malliavin_derivative_of_a_square() {
        let m = model();
        let tree = t("I[Xi0]*I[Xi0]");
        let got = m.malliavin(2, |mm| mm.pre_hat(&tree).as_ref().clone());
        let k = m.grid.convolve(&m.kernels.base, &m.xi);
        let dk = m.grid.convolve(&m.kernels.base, &m.delta_xi);
        for i in 0..m.grid.len() {
            assert!(close(got[i], 2.0 * k[i] * dk[i]));
        }
    }
}
