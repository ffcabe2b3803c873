//! Smooth radial cutoffs, inhomogeneous dyadic blocks and low-pass truncations.
//!
//! `chi` equals 1 on `|xi| <= 3/4` and vanishes for `|xi| >= 4/3`;
//! `phi(xi) = chi(xi/2) - chi(xi)` is supported in `3/4 <= |xi| <= 8/3`.
//! Because the blocks telescope, `chi(xi) + sum_{j>=0} phi(2^-j xi) = 1`
//! holds by construction.
//!
//! Block `j = -1` is `chi(D)`, block `j >= 0` is `phi(2^-j D)`, and the
//! low-pass operator is `S_n = chi(2^-n D) = sum_{j <= n-1} Delta_j`.

use num_complex::Complex;

use crate::scalar::Real;
use crate::spectral::{to_spectrum, Field, Grid, Multiplier, Spectrum};

/// `exp(-1/t)` for `t > 0`, else 0.
fn flat_exp<T: Real>(t: T) -> T {
    if t > T::zero() {
        (-t.recip()).exp()
    } else {
        T::zero()
    }
}

/// Smooth monotone step: 0 for `t <= 0`, 1 for `t >= 1`, C^infinity between.
pub fn smooth_ramp<T: Real>(t: T) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    if t >= T::one() {
        return T::one();
    }
    let a = flat_exp(t);
    let b = flat_exp(T::one() - t);
    a / (a + b)
}

/// Even cutoff equal to 1 on `|xi| <= plateau` and 0 on `|xi| >= support`.
pub fn radial_cutoff<T: Real>(xi: T, plateau: T, support: T) -> T {
    smooth_ramp((support - xi.abs()) / (support - plateau))
}

/// The pair `(chi, phi)` defining the dyadic partition of unity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffPair<T: Real> {
    plateau: T,
    support: T,
}

impl<T: Real> Default for CutoffPair<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> CutoffPair<T> {
    /// Plateau radius 3/4, support radius 4/3.
    pub fn new() -> Self {
        Self {
            plateau: T::lit(0.75),
            support: T::lit(4.0 / 3.0),
        }
    }

    pub fn plateau(&self) -> T {
        self.plateau
    }

    pub fn support(&self) -> T {
        self.support
    }

    pub fn chi(&self, xi: T) -> T {
        let a = xi.abs();
        if a <= self.plateau {
            T::one()
        } else if a >= self.support {
            T::zero()
        } else {
            radial_cutoff(a, self.plateau, self.support)
        }
    }

    pub fn phi(&self, xi: T) -> T {
        self.chi(xi * T::lit(0.5)) - self.chi(xi)
    }

    /// Symbol of `Delta_j`: `chi` for `j = -1`, `phi(2^-j .)` for `j >= 0`,
    /// zero below.
    pub fn block_symbol(&self, j: i32, xi: T) -> T {
        match j {
            j if j < -1 => T::zero(),
            -1 => self.chi(xi),
            j => {
                let scaled = xi * T::lit(2f64.powi(-j));
                self.phi(scaled)
            }
        }
    }

    /// Symbol of `S_n = chi(2^-n D)`.
    pub fn low_pass_symbol(&self, n: i32, xi: T) -> T {
        self.chi(xi * T::lit(2f64.powi(-n)))
    }

    /// `chi` sampled at the grid frequencies, storage order.
    pub fn chi_table(&self, grid: &Grid<T>) -> Vec<T> {
        grid.frequencies().iter().map(|&xi| self.chi(xi)).collect()
    }

    /// `phi` sampled at the grid frequencies, storage order.
    pub fn phi_table(&self, grid: &Grid<T>) -> Vec<T> {
        grid.frequencies().iter().map(|&xi| self.phi(xi)).collect()
    }
}

/// The symbol of `Delta_j` as a [`Multiplier`].
pub struct BlockMultiplier<T: Real> {
    pub cut: CutoffPair<T>,
    pub j: i32,
}

impl<T: Real> Multiplier<T> for BlockMultiplier<T> {
    fn symbol(&self, xi: T) -> Complex<T> {
        Complex::new(self.cut.block_symbol(self.j, xi), T::zero())
    }
    fn label(&self) -> String {
        format!("Delta_{}", self.j)
    }
}

/// Largest `j` whose annulus `2^j [3/4, 8/3]` meets the grid band, i.e. the
/// largest `j` with `(3/4) 2^j <= xi_max`. Blocks above it vanish on the grid.
pub fn max_block_index<T: Real>(grid: &Grid<T>, cut: &CutoffPair<T>) -> i32 {
    let xi_max = grid.max_frequency();
    let mut j = -1;
    while cut.plateau() * T::lit(2f64.powi(j + 1)) <= xi_max {
        j += 1;
    }
    j
}

fn masked_inverse<T: Real>(s: &Spectrum<T>, mask: impl Fn(T) -> T) -> Field<T> {
    let grid = s.grid();
    let coeffs = s
        .coeffs()
        .iter()
        .zip(grid.frequencies())
        .map(|(&c, &xi)| c * mask(xi))
        .collect();
    Spectrum::new(grid, coeffs)
        .expect("length preserved")
        .to_field()
}

/// `Delta_j u`; zero for `j <= -2`.
pub fn dyadic_block<T: Real>(u: &Field<T>, j: i32, cut: &CutoffPair<T>) -> Field<T> {
    if j < -1 {
        return Field::zeros(u.grid());
    }
    masked_inverse(&to_spectrum(u), |xi| cut.block_symbol(j, xi))
}

/// `S_n u = chi(2^-n D) u`.
pub fn low_pass<T: Real>(u: &Field<T>, n: i32, cut: &CutoffPair<T>) -> Field<T> {
    masked_inverse(&to_spectrum(u), |xi| cut.low_pass_symbol(n, xi))
}

/// `(Id - S_n) u`.
pub fn high_pass<T: Real>(u: &Field<T>, n: i32, cut: &CutoffPair<T>) -> Field<T> {
    u - &low_pass(u, n, cut)
}

/// All blocks `Delta_{-1} u, .., Delta_{j_max} u` of a field.
#[derive(Clone, Debug)]
pub struct DyadicBlocks<T: Real> {
    blocks: Vec<Field<T>>,
    j_max: i32,
}

impl<T: Real> DyadicBlocks<T> {
    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    /// `Delta_j u`, or `None` outside `-1..=j_max`.
    pub fn block(&self, j: i32) -> Option<&Field<T>> {
        if j < -1 {
            return None;
        }
        self.blocks.get((j + 1) as usize)
    }

    /// `(j, Delta_j u)` pairs in increasing `j`.
    pub fn iter(&self) -> impl Iterator<Item = (i32, &Field<T>)> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (i as i32 - 1, b))
    }

    /// Sum of all blocks.
    pub fn reconstruct(&self) -> Field<T> {
        let mut acc = Field::zeros(self.blocks[0].grid());
        for b in &self.blocks {
            acc = &acc + b;
        }
        acc
    }
}

/// Precomputed block masks for one grid, for repeated decompositions.
#[derive(Clone, Debug)]
pub struct Decomposer<T: Real> {
    grid: Grid<T>,
    cut: CutoffPair<T>,
    j_max: i32,
    masks: Vec<Vec<T>>,
}

impl<T: Real> Decomposer<T> {
    pub fn new(grid: &Grid<T>, cut: CutoffPair<T>) -> Self {
        let j_max = max_block_index(grid, &cut);
        let masks = (-1..=j_max)
            .map(|j| {
                grid.frequencies()
                    .iter()
                    .map(|&xi| cut.block_symbol(j, xi))
                    .collect()
            })
            .collect();
        Self {
            grid: grid.clone(),
            cut,
            j_max,
            masks,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn cutoffs(&self) -> &CutoffPair<T> {
        &self.cut
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    /// Mask of block `j` in storage order.
    pub fn mask(&self, j: i32) -> Option<&[T]> {
        if j < -1 {
            return None;
        }
        self.masks.get((j + 1) as usize).map(Vec::as_slice)
    }

    /// Inverse transform of each masked copy of the raw DFT `raw`, calling
    /// `visit(j, samples)` per block. Blocks whose mask misses the spectrum
    /// entirely are reported as exact zeros.
    pub(crate) fn for_each_block(&self, raw: &[Complex<T>], mut visit: impl FnMut(i32, &[T])) {
        let zero = Complex::new(T::zero(), T::zero());
        let zeros = vec![T::zero(); raw.len()];
        for (idx, mask) in self.masks.iter().enumerate() {
            let j = idx as i32 - 1;
            let mut any = false;
            let buf: Vec<Complex<T>> = raw
                .iter()
                .zip(mask)
                .map(|(&c, &m)| {
                    if m == T::zero() {
                        zero
                    } else {
                        any |= c != zero;
                        c * m
                    }
                })
                .collect();
            if any {
                let samples = self.grid.idft_real(buf);
                visit(j, &samples);
            } else {
                visit(j, &zeros);
            }
        }
    }

    pub fn decompose(&self, u: &Field<T>) -> DyadicBlocks<T> {
        assert_eq!(u.grid(), &self.grid, "field lives on a different grid");
        let raw = self.grid.dft(u.values());
        let mut blocks = Vec::with_capacity(self.masks.len());
        self.for_each_block(&raw, |_, samples| {
            blocks.push(Field::from_raw(&self.grid, samples.to_vec()));
        });
        DyadicBlocks {
            blocks,
            j_max: self.j_max,
        }
    }
}

/// All nonvacuous blocks of `u`.
pub fn decompose<T: Real>(u: &Field<T>, cut: &CutoffPair<T>) -> DyadicBlocks<T> {
    Decomposer::new(u.grid(), *cut).decompose(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::lebesgue_norm;
    use std::f64::consts::PI;

    fn l2(u: &Field<f64>) -> f64 {
        lebesgue_norm(u, 2.0).unwrap()
    }

    #[test]
    fn ramp_limits() {
        assert_eq!(smooth_ramp(-0.5f64), 0.0);
        assert_eq!(smooth_ramp(0.0f64), 0.0);
        assert_eq!(smooth_ramp(1.0f64), 1.0);
        assert!((smooth_ramp(0.5f64) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 1..100 {
            let v = smooth_ramp(i as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn cutoff_values() {
        let c = CutoffPair::<f64>::new();
        assert_eq!(c.chi(0.0), 1.0);
        assert_eq!(c.chi(0.75), 1.0);
        assert_eq!(c.chi(4.0 / 3.0), 0.0);
        assert!(c.phi(2.0) > 0.0);
        assert_eq!(c.phi(3.0), 0.0);
        assert_eq!(c.phi(0.7), 0.0);
        assert_eq!(c.phi(0.0), 0.0);
    }

    #[test]
    fn partition_of_unity_at_sample_points() {
        let c = CutoffPair::<f64>::new();
        for xi in [0.1, 1.0, 7.3, 500.0] {
            let total: f64 = c.chi(xi) + (0..=20).map(|j| c.phi(xi * 2f64.powi(-j))).sum::<f64>();
            assert!((total - 1.0).abs() <= 1e-12, "xi={xi}: {total}");
        }
    }

    #[test]
    fn block_index_range() {
        let g = Grid::new(32.0 * PI, 1 << 15).unwrap();
        assert_eq!(max_block_index(&g, &CutoffPair::new()), 9);
        let small = Grid::new(PI, 16).unwrap();
        // xi_max = 8: (3/4) 2^3 = 6 <= 8 < 12
        assert_eq!(max_block_index(&small, &CutoffPair::new()), 3);
    }

    #[test]
    fn single_mode_blocks() {
        let g = Grid::new(PI, 256).unwrap();
        let c = CutoffPair::new();
        for k in [1.0, 3.0, 5.0, 11.0, 40.0] {
            let u = Field::from_fn(&g, |x| (k * x).sin());
            for j in -1..=7 {
                let got = dyadic_block(&u, j, &c);
                let want = u.scale(c.block_symbol(j, k));
                assert!((&got - &want).max_abs() < 1e-13, "k={k} j={j}");
            }
        }
    }

    #[test]
    fn constant_lives_in_low_block() {
        let g = Grid::new(PI, 64).unwrap();
        let c = CutoffPair::new();
        let u = Field::constant(&g, 1.7);
        assert!((&dyadic_block(&u, -1, &c) - &u).max_abs() < 1e-14);
        for j in 0..=4 {
            assert!(dyadic_block(&u, j, &c).max_abs() < 1e-14);
        }
        assert_eq!(dyadic_block(&u, -2, &c).max_abs(), 0.0);
    }

    #[test]
    fn zero_decomposes_to_zero() {
        let g = Grid::<f64>::new(8.0, 256).unwrap();
        let blocks = decompose(&Field::zeros(&g), &CutoffPair::new());
        assert!(blocks.iter().all(|(_, b)| b.max_abs() == 0.0));
    }

    #[test]
    fn gaussian_reconstruction() {
        let g = Grid::<f64>::new(16.0, 1024).unwrap();
        let u = Field::from_fn(&g, |x| (-x * x).exp());
        let blocks = decompose(&u, &CutoffPair::new());
        let err = l2(&(&blocks.reconstruct() - &u));
        assert!(err <= 1e-10 * l2(&u));
        assert_eq!(blocks.block(blocks.j_max() + 1).map(|_| ()), None);
        assert!(blocks.block(-1).is_some());
    }

    #[test]
    fn low_pass_identities() {
        let g = Grid::new(PI, 128).unwrap();
        let c = CutoffPair::new();
        // band-limited to |xi| <= 3 = (3/4) 2^2
        let u = Field::from_fn(&g, |x| x.sin() + 0.5 * (3.0 * x).cos());
        assert!((&low_pass(&u, 2, &c) - &u).max_abs() < 1e-14);
        let w = Field::from_fn(&g, |x| (-(x * x)).exp() * (7.0 * x).sin());
        let sum = &low_pass(&w, 3, &c) + &high_pass(&w, 3, &c);
        assert!((&sum - &w).max_abs() < 1e-15);
    }

    #[test]
    fn low_pass_is_sum_of_lower_blocks() {
        let g = Grid::<f64>::new(10.0, 512).unwrap();
        let c = CutoffPair::new();
        let u = Field::from_fn(&g, |x| (-(x * x)).exp() * (1.0 + (9.0 * x).cos()));
        for n in 0..5 {
            let mut acc = Field::zeros(&g);
            for j in -1..n {
                acc = &acc + &dyadic_block(&u, j, &c);
            }
            assert!((&acc - &low_pass(&u, n, &c)).max_abs() < 1e-13);
        }
    }

    #[test]
    fn decomposer_matches_direct_blocks() {
        let g = Grid::<f64>::new(10.0, 512).unwrap();
        let c = CutoffPair::new();
        let u = Field::from_fn(&g, |x| (-(x * x) / 2.0).exp() * (5.0 * x).sin());
        let d = Decomposer::new(&g, c);
        let blocks = d.decompose(&u);
        for (j, b) in blocks.iter() {
            assert!((b - &dyadic_block(&u, j, &c)).max_abs() < 1e-14);
        }
    }
}
