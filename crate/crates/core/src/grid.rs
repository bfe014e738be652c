//! Periodic space-time grid, discrete convolution, finite-difference
//! stencils and the kernel family used by the grid model.
//!
//! The grid discretises the torus [0,1)^{d+1} (time first). Fields are flat
//! `Vec<f64>` in row-major order. All differentiation is done by iterating a
//! 7-point central first-derivative stencil, which is exact on polynomials
//! of degree up to six; derived kernels are the same stencils applied to the
//! base kernel samples, so that differentiation commutes with convolution
//! exactly at the discrete level.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::multi_index::MultiIndex;

pub type Field = Vec<f64>;

/// 6th-order central first-derivative weights at offsets -3..=3 (before
/// dividing by the grid spacing).
const STENCIL: [f64; 7] = [
    -1.0 / 60.0,
    3.0 / 20.0,
    -3.0 / 4.0,
    0.0,
    3.0 / 4.0,
    -3.0 / 20.0,
    1.0 / 60.0,
];

#[derive(Clone, Debug)]
pub struct Grid {
    /// Points per direction, time first.
    pub sizes: Vec<usize>,
    /// Spacing per direction, 1/size.
    pub spacings: Vec<f64>,
}

impl Grid {
    pub fn new(sizes: Vec<usize>) -> Grid {
        assert!(sizes.iter().all(|&n| n >= 8), "grid too small for stencils");
        let spacings = sizes.iter().map(|&n| 1.0 / n as f64).collect();
        Grid { sizes, spacings }
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> usize {
        self.sizes.len()
    }

    /// Volume element of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacings.iter().product()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        let mut idx = 0;
        for (j, &c) in coords.iter().enumerate() {
            idx = idx * self.sizes[j] + c;
        }
        idx
    }

    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims()];
        for j in (0..self.dims()).rev() {
            out[j] = idx % self.sizes[j];
            idx /= self.sizes[j];
        }
        out
    }

    /// Plain (unwrapped) coordinates of a point, in [0,1)^{d+1}.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.coords(idx)
            .iter()
            .enumerate()
            .map(|(j, &c)| c as f64 * self.spacings[j])
            .collect()
    }

    /// Signed displacement of a grid offset, mapped to [-1/2, 1/2) per
    /// direction. Used to sample kernels centred at the origin.
    pub fn centered_point(&self, idx: usize) -> Vec<f64> {
        self.coords(idx)
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let x = c as f64 * self.spacings[j];
                if x >= 0.5 {
                    x - 1.0
                } else {
                    x
                }
            })
            .collect()
    }

    /// Monomial field z^k with plain coordinates.
    pub fn monomial(&self, k: &MultiIndex) -> Field {
        self.sample(|z| k.0.iter().enumerate().map(|(j, &e)| z[j].powi(e as i32)).product())
    }

    /// Recentered monomial field (z - x)^k with plain differences.
    pub fn monomial_at(&self, k: &MultiIndex, x: &[f64]) -> Field {
        self.sample(|z| {
            k.0.iter()
                .enumerate()
                .map(|(j, &e)| (z[j] - x[j]).powi(e as i32))
                .product()
        })
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Field {
        (0..self.len()).map(|i| f(&self.point(i))).collect()
    }

    fn wrap(&self, j: usize, c: i64) -> usize {
        let n = self.sizes[j] as i64;
        (((c % n) + n) % n) as usize
    }

    /// Periodic convolution against kernel samples centred at index 0:
    /// (k * f)(z) = sum_w k(z - w) f(w) * cell volume.
    pub fn convolve(&self, kernel: &Field, f: &Field) -> Field {
        (0..self.len()).map(|i| self.convolve_at(kernel, f, i)).collect()
    }

    pub fn convolve_at(&self, kernel: &Field, f: &Field, idx: usize) -> f64 {
        let z = self.coords(idx);
        let dims = self.dims();
        let vol = self.cell_volume();
        // Incremental source counter instead of per-point coordinate
        // decomposition; the inner loop is allocation free.
        let mut wc = vec![0usize; dims];
        let mut acc = 0.0;
        for &fw in f.iter() {
            if fw != 0.0 {
                let mut k = 0usize;
                for j in 0..dims {
                    let mut d = z[j] + self.sizes[j] - wc[j];
                    if d >= self.sizes[j] {
                        d -= self.sizes[j];
                    }
                    k = k * self.sizes[j] + d;
                }
                acc += kernel[k] * fw;
            }
            for j in (0..dims).rev() {
                wc[j] += 1;
                if wc[j] < self.sizes[j] {
                    break;
                }
                wc[j] = 0;
            }
        }
        acc * vol
    }

    /// One application of the central first-derivative stencil in direction j
    /// with periodic wrap-around.
    pub fn stencil(&self, f: &Field, j: usize) -> Field {
        let h = self.spacings[j];
        let mut out = vec![0.0; self.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let c = self.coords(i);
            let mut acc = 0.0;
            for (s, &w) in STENCIL.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let mut cc = c.clone();
                cc[j] = self.wrap(j, c[j] as i64 + s as i64 - 3);
                acc += w * f[self.index(&cc)];
            }
            *o = acc / h;
        }
        out
    }

    /// Iterated stencil derivative D^a.
    pub fn stencil_pow(&self, f: &Field, a: &MultiIndex) -> Field {
        let mut out = f.clone();
        for (j, &e) in a.0.iter().enumerate() {
            for _ in 0..e {
                out = self.stencil(&out, j);
            }
        }
        out
    }

    /// True when a grid point keeps at least `margin` cells of distance from
    /// the periodic seam in every direction.
    pub fn is_interior(&self, idx: usize, margin: usize) -> bool {
        self.coords(idx)
            .iter()
            .enumerate()
            .all(|(j, &c)| c >= margin && c + margin < self.sizes[j])
    }

    /// Deterministic list of well-separated interior sample points.
    pub fn base_points(&self, count: usize, margin: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let n = self.len();
        let mut i = 0;
        let step = (n / (3 * count + 1)).max(1);
        while out.len() < count && i < n {
            if self.is_interior(i, margin) {
                out.push(i);
                i += step;
            } else {
                i += 1;
            }
        }
        assert_eq!(out.len(), count, "grid too small for {count} interior points");
        out
    }
}

/// Base integration kernel and its stencil derivatives.
pub struct KernelFamily {
    pub base: Field,
    grid: Grid,
    cache: std::cell::RefCell<std::collections::HashMap<MultiIndex, std::rc::Rc<Field>>>,
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

impl KernelFamily {
    /// A mollified heat kernel with a smooth compactly supported cutoff:
    /// exp(-|x|^2 / (4(t + t0))) / sqrt(t + t0) times bump cutoffs keeping
    /// the support inside |t| < 1/4, |x_j| < 1/4.
    pub fn heat(grid: &Grid) -> KernelFamily {
        KernelFamily::heat_with_radius(grid, 0.25)
    }

    /// Same kernel with a configurable cutoff radius (support |z_j| < radius
    /// in every direction); the radius must stay below one half so the
    /// support fits inside the torus.
    pub fn heat_with_radius(grid: &Grid, radius: f64) -> KernelFamily {
        assert!(radius > 0.0 && radius < 0.5, "cutoff radius must lie in (0, 1/2)");
        let t0 = 0.02;
        let base = (0..grid.len())
            .map(|i| {
                let z = grid.centered_point(i);
                let mut cutoff = bump(z[0] / radius);
                for x in &z[1..] {
                    cutoff *= bump(x / radius);
                }
                if cutoff == 0.0 {
                    return 0.0;
                }
                let s = z[0] + t0 + radius;
                let r2: f64 = z[1..].iter().map(|x| x * x).sum();
                cutoff * (-r2 / (4.0 * s)).exp() / s.sqrt()
            })
            .collect();
        KernelFamily {
            base,
            grid: grid.clone(),
            cache: Default::default(),
        }
    }

    /// D^a K as iterated stencils on the base samples.
    pub fn derived(&self, a: &MultiIndex) -> std::rc::Rc<Field> {
        if let Some(k) = self.cache.borrow().get(a) {
            return k.clone();
        }
        let k = std::rc::Rc::new(self.grid.stencil_pow(&self.base, a));
        self.cache.borrow_mut().insert(a.clone(), k.clone());
        k
    }
}

/// The pair of noise realisations: the driving noise and the direction of
/// the perturbation.
pub struct NoisePair {
    pub xi: Field,
    pub delta_xi: Field,
}

impl NoisePair {
    /// Smooth deterministic trigonometric fields; the default, so reports
    /// are reproducible byte for byte.
    pub fn deterministic(grid: &Grid) -> NoisePair {
        let tau = std::f64::consts::TAU;
        let xi = grid.sample(|z| {
            let spatial: f64 = z[1..].iter().enumerate().map(|(j, x)| (j as f64 + 2.0) * x).sum();
            (tau * (z[0] + spatial)).sin() + 0.5 * (tau * (2.0 * z[0] - spatial)).cos()
        });
        let delta_xi = grid.sample(|z| {
            let spatial: f64 = z[1..].iter().enumerate().map(|(j, x)| (j as f64 + 3.0) * x).sum();
            (tau * (2.0 * z[0] + spatial)).cos() - 0.25 * (tau * spatial).sin()
        });
        NoisePair { xi, delta_xi }
    }

    /// Independent uniform samples in [-1, 1] from a seeded generator.
    pub fn seeded(grid: &Grid, seed: u64) -> NoisePair {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xi = draw();
        let delta_xi = draw();
        NoisePair { xi, delta_xi }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(vec![16, 16])
    }

    #[test]
    fn stencil_is_exact_on_polynomials() {
        let g = grid();
        // f(t,x) = x^5 away from the seam
        let f = g.monomial(&MultiIndex(vec![0, 5]));
        let df = g.stencil(&f, 1);
        for i in 0..g.len() {
            if g.is_interior(i, 4) {
                let z = g.point(i);
                let expect = 5.0 * z[1].powi(4);
                assert!((df[i] - expect).abs() < 1e-9, "at {z:?}: {} vs {expect}", df[i]);
            }
        }
    }

    #[test]
    fn stencil_commutes_with_convolution() {
        let g = grid();
        let kernels = KernelFamily::heat(&g);
        let noise = NoisePair::deterministic(&g);
        let a = MultiIndex(vec![0, 2]);
        let lhs = g.stencil_pow(&g.convolve(&kernels.base, &noise.xi), &a);
        let rhs = g.convolve(&kernels.derived(&a), &noise.xi);
        for i in 0..g.len() {
            assert!((lhs[i] - rhs[i]).abs() < 1e-9 * (1.0 + lhs[i].abs()));
        }
    }

    #[test]
    fn convolution_is_translation_invariant() {
        let g = grid();
        let kernels = KernelFamily::heat(&g);
        let noise = NoisePair::deterministic(&g);
        let c = g.convolve(&kernels.base, &noise.xi);
        // shifting the input shifts the output
        let mut shifted = noise.xi.clone();
        shifted.rotate_right(g.sizes[1]); // shift by one step in time
        let cs = g.convolve(&kernels.base, &shifted);
        for i in 0..g.len() {
            let j = (i + g.sizes[1]) % g.len();
            assert!((c[i] - cs[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn base_points_are_interior_and_distinct() {
        let g = Grid::new(vec![48, 32]);
        let pts = g.base_points(8, 6);
        assert_eq!(pts.len(), 8);
        for &p in &pts {
            assert!(g.is_interior(p, 6));
        }
        let set: std::collections::BTreeSet<_> = pts.iter().collect();
        assert_eq!(set.len(), 8);
    }
}
