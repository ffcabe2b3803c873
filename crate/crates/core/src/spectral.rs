//! Periodic grids, real grid functions and their Fourier coefficients.
//!
//! The whole line is replaced by the torus `[-L, L)` sampled at `N` equispaced
//! nodes `x_i = -L + i dx`. Spectra are stored in FFT order (mode indices
//! `0, 1, .., N/2-1, -N/2, .., -1`) and normalized so that coefficient `c_k`
//! is the Fourier coefficient of the trigonometric interpolant:
//!
//! ```text
//! u(x) = sum_k c_k exp(i xi_k x),   xi_k = pi k / L.
//! ```
//!
//! Diagonal operators (Fourier multipliers) act on the single Nyquist mode
//! through the average `(m(xi_N) + m(-xi_N)) / 2`, which keeps real fields
//! real and zeroes it for odd symbols such as `i xi`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;

struct GridInner<T: Real> {
    half_length: T,
    num_points: usize,
    dx: T,
    frequencies: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

/// Uniform periodic grid on `[-L, L)`.
///
/// Cloning is cheap: the FFT plans and the frequency table are shared.
#[derive(Clone)]
pub struct Grid<T: Real>(Arc<GridInner<T>>);

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_length", &self.0.half_length)
            .field("num_points", &self.0.num_points)
            .finish()
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.num_points == other.0.num_points
                && self.0.half_length == other.0.half_length)
    }
}

impl<T: Real> Grid<T> {
    /// Builds the grid with half-length `L` and `N` nodes.
    ///
    /// `N` must be a power of two no smaller than 16.
    pub fn new(half_length: T, num_points: usize) -> Result<Self> {
        if num_points < 16 || !num_points.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(num_points));
        }
        if !(half_length > T::zero()) || !half_length.is_finite() {
            return Err(Error::InvalidHalfLength(half_length.as_f64()));
        }
        let n = T::from_count(num_points);
        let dx = T::lit(2.0) * half_length / n;
        let frequencies = (0..num_points)
            .map(|i| T::PI() * T::lit(mode_index(i, num_points) as f64) / half_length)
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(num_points);
        let inverse = planner.plan_fft_inverse(num_points);
        Ok(Self(Arc::new(GridInner {
            half_length,
            num_points,
            dx,
            frequencies,
            forward,
            inverse,
        })))
    }

    pub fn half_length(&self) -> T {
        self.0.half_length
    }

    pub fn period(&self) -> T {
        T::lit(2.0) * self.0.half_length
    }

    pub fn num_points(&self) -> usize {
        self.0.num_points
    }

    pub fn dx(&self) -> T {
        self.0.dx
    }

    /// Node `x_i = -L + i dx`.
    pub fn x(&self, i: usize) -> T {
        -self.0.half_length + self.0.dx * T::from_count(i)
    }

    pub fn points(&self) -> Vec<T> {
        (0..self.0.num_points).map(|i| self.x(i)).collect()
    }

    /// Signed mode index of storage slot `i`.
    pub fn mode_index(&self, i: usize) -> i64 {
        mode_index(i, self.0.num_points)
    }

    /// Storage slot of signed mode `k` (taken modulo `N`).
    pub fn slot(&self, k: i64) -> usize {
        k.rem_euclid(self.0.num_points as i64) as usize
    }

    /// Angular frequencies `xi_k = pi k / L` in storage order.
    pub fn frequencies(&self) -> &[T] {
        &self.0.frequencies
    }

    /// Magnitude of the Nyquist frequency, `pi N / (2 L)`.
    pub fn max_frequency(&self) -> T {
        T::PI() * T::from_count(self.0.num_points) / (T::lit(2.0) * self.0.half_length)
    }

    /// Frequency spacing `pi / L`.
    pub fn frequency_step(&self) -> T {
        T::PI() / self.0.half_length
    }

    pub fn nyquist_slot(&self) -> usize {
        self.0.num_points / 2
    }

    /// Whether mode `k` survives the two-thirds rule (`|k| <= N/3`).
    pub fn is_dealias_kept(&self, k: i64) -> bool {
        3 * k.unsigned_abs() as usize <= self.0.num_points
    }

    /// Grid frequency closest to `xi`.
    pub fn nearest_frequency(&self, xi: T) -> T {
        let step = self.frequency_step();
        (xi / step).round() * step
    }

    /// Samples a multiplier in storage order, Nyquist slot symmetrized.
    pub fn tabulate<M: Multiplier<T> + ?Sized>(&self, m: &M) -> Vec<Complex<T>> {
        let nyq = self.nyquist_slot();
        let half = T::lit(0.5);
        self.0
            .frequencies
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                if i == nyq {
                    (m.symbol(xi) + m.symbol(-xi)) * half
                } else {
                    m.symbol(xi)
                }
            })
            .collect()
    }

    /// Unnormalized forward DFT of real samples.
    pub(crate) fn dft(&self, values: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.0.forward.process(&mut buf);
        buf
    }

    /// Inverse DFT including the `1/N` factor; returns the complex samples.
    pub(crate) fn idft(&self, mut buf: Vec<Complex<T>>) -> Vec<Complex<T>> {
        self.0.inverse.process(&mut buf);
        let scale = T::one() / T::from_count(self.0.num_points);
        for z in &mut buf {
            *z = *z * scale;
        }
        buf
    }

    /// Inverse DFT keeping only the real part.
    pub(crate) fn idft_real(&self, buf: Vec<Complex<T>>) -> Vec<T> {
        self.idft(buf).into_iter().map(|z| z.re).collect()
    }

    fn phase_sign(&self, i: usize) -> T {
        if self.mode_index(i).rem_euclid(2) == 0 {
            T::one()
        } else {
            -T::one()
        }
    }
}

fn mode_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Real samples of a function on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T: Real> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    /// Validated constructor: the length must match and all samples be finite.
    pub fn new(grid: &Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.num_points() {
            return Err(Error::ShapeMismatch {
                expected: grid.num_points(),
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Constructor for solver internals where non-finite values must be
    /// carried to the caller instead of rejected.
    pub(crate) fn from_raw(grid: &Grid<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.num_points());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self::from_raw(grid, vec![T::zero(); grid.num_points()])
    }

    pub fn constant(grid: &Grid<T>, c: T) -> Self {
        Self::from_raw(grid, vec![c; grid.num_points()])
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &Grid<T>, f: impl Fn(T) -> T) -> Self {
        let values = (0..grid.num_points()).map(|i| f(grid.x(i))).collect();
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(
            T::zero(),
            |acc, v| if v.abs() > acc { v.abs() } else { acc },
        )
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination; panics if the grids differ.
    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_raw(&self.grid, values)
    }

    /// Pointwise product (no dealiasing).
    pub fn product(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    /// Translation by whole cells: returns `u(x - cells dx)`.
    pub fn shift_cells(&self, cells: i64) -> Self {
        let n = self.values.len() as i64;
        let values = (0..n)
            .map(|i| self.values[(i - cells).rem_euclid(n) as usize])
            .collect();
        Self::from_raw(&self.grid, values)
    }

    pub fn to_spectrum(&self) -> Spectrum<T> {
        to_spectrum(self)
    }
}

impl<T: Real> Add for &Field<T> {
    type Output = Field<T>;
    fn add(self, rhs: Self) -> Field<T> {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<T: Real> Sub for &Field<T> {
    type Output = Field<T>;
    fn sub(self, rhs: Self) -> Field<T> {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl<T: Real> Neg for &Field<T> {
    type Output = Field<T>;
    fn neg(self) -> Field<T> {
        self.map(|v| -v)
    }
}

impl<T: Real> Mul<T> for &Field<T> {
    type Output = Field<T>;
    fn mul(self, rhs: T) -> Field<T> {
        self.scale(rhs)
    }
}

/// Fourier coefficients of a grid function, in storage order.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T: Real> {
    grid: Grid<T>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> Spectrum<T> {
    pub fn new(grid: &Grid<T>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != grid.num_points() {
            return Err(Error::ShapeMismatch {
                expected: grid.num_points(),
                actual: coeffs.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Spectrum whose coefficient at frequency `xi` is `f(xi)`.
    pub fn from_fn(grid: &Grid<T>, f: impl Fn(T) -> Complex<T>) -> Self {
        let coeffs = grid.frequencies().iter().map(|&xi| f(xi)).collect();
        Self {
            grid: grid.clone(),
            coeffs,
        }
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self::from_fn(grid, |_| Complex::new(T::zero(), T::zero()))
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    /// Coefficient of signed mode `k`.
    pub fn coeff(&self, k: i64) -> Complex<T> {
        self.coeffs[self.grid.slot(k)]
    }

    /// `(2L sum |c_k|^2)^(1/2)`, the L^2 norm of the interpolant.
    pub fn l2_norm(&self) -> T {
        let sum: T = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        (self.grid.period() * sum).sqrt()
    }

    /// Largest violation of `c_{-k} = conj(c_k)`, relative to the largest
    /// coefficient.
    pub fn hermitian_defect(&self) -> T {
        let scale = self
            .coeffs
            .iter()
            .fold(T::zero(), |acc, c| acc.max(c.norm()));
        if scale == T::zero() {
            return T::zero();
        }
        let n = self.grid.num_points();
        let mut worst = T::zero();
        for i in 1..n {
            if i == self.grid.nyquist_slot() {
                worst = worst.max(self.coeffs[i].im.abs());
                continue;
            }
            let d = (self.coeffs[i] - self.coeffs[n - i].conj()).norm();
            worst = worst.max(d);
        }
        worst = worst.max(self.coeffs[0].im.abs());
        worst / scale
    }

    /// Multiplies every mode by the symbol of `m`.
    pub fn apply<M: Multiplier<T> + ?Sized>(&self, m: &M) -> Self {
        let table = self.grid.tabulate(m);
        self.apply_table(&table)
    }

    pub(crate) fn apply_table(&self, table: &[Complex<T>]) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(table)
            .map(|(&c, &s)| c * s)
            .collect();
        Self {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    /// Exact translation `u(x - a)` through the phase factor `exp(-i xi a)`.
    pub fn translate(&self, a: T) -> Self {
        self.apply(&Symbol::new("translate", move |xi: T| {
            let (s, c) = (xi * a).sin_cos();
            Complex::new(c, -s)
        }))
    }

    /// Real grid function, discarding any imaginary residue.
    pub fn to_field(&self) -> Field<T> {
        from_spectrum(self)
    }

    /// Real grid function, or an error when the imaginary residue exceeds
    /// `tol` relative to the largest output sample.
    pub fn to_field_checked(&self, tol: T, label: &str) -> Result<Field<T>> {
        let samples = self.grid.idft(self.phased_for_inverse());
        let scale = samples
            .iter()
            .fold(T::zero(), |acc, z| acc.max(z.re.abs()).max(z.im.abs()));
        let residue = samples.iter().fold(T::zero(), |acc, z| acc.max(z.im.abs()));
        if scale > T::zero() && residue > tol * scale {
            return Err(Error::NonRealMultiplier {
                label: label.to_string(),
                residue: (residue / scale).as_f64(),
            });
        }
        Ok(Field::from_raw(
            &self.grid,
            samples.into_iter().map(|z| z.re).collect(),
        ))
    }

    fn phased_for_inverse(&self) -> Vec<Complex<T>> {
        let n = T::from_count(self.grid.num_points());
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * (self.grid.phase_sign(i) * n))
            .collect()
    }
}

/// Forward transform with the continuum normalization described in the
/// module docs.
pub fn to_spectrum<T: Real>(u: &Field<T>) -> Spectrum<T> {
    let grid = u.grid();
    let inv_n = T::one() / T::from_count(grid.num_points());
    let coeffs = grid
        .dft(u.values())
        .into_iter()
        .enumerate()
        .map(|(i, c)| c * (grid.phase_sign(i) * inv_n))
        .collect();
    Spectrum {
        grid: grid.clone(),
        coeffs,
    }
}

/// Inverse of [`to_spectrum`]; the imaginary part is dropped.
pub fn from_spectrum<T: Real>(s: &Spectrum<T>) -> Field<T> {
    let values = s.grid.idft_real(s.phased_for_inverse());
    Field::from_raw(&s.grid, values)
}

/// A Fourier multiplier `m(D)` given by its symbol.
pub trait Multiplier<T: Real> {
    fn symbol(&self, xi: T) -> Complex<T>;
    fn label(&self) -> String;
}

/// Multiplier defined by a closure.
pub struct Symbol<F> {
    label: String,
    f: F,
}

impl<F> Symbol<F> {
    pub fn new(label: impl Into<String>, f: F) -> Self {
        Self {
            label: label.into(),
            f,
        }
    }
}

impl<T: Real, F: Fn(T) -> Complex<T>> Multiplier<T> for Symbol<F> {
    fn symbol(&self, xi: T) -> Complex<T> {
        (self.f)(xi)
    }
    fn label(&self) -> String {
        self.label.clone()
    }
}

/// The identity symbol `1`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

/// `d/dx`, symbol `i xi`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Derivative;

/// `Lambda^{-2} = (1 - d^2/dx^2)^{-1}`, symbol `1 / (1 + xi^2)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct HelmholtzInverse;

/// `P(D) = -d/dx Lambda^{-2}`, symbol `-i xi / (1 + xi^2)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct NonlocalP;

impl<T: Real> Multiplier<T> for Identity {
    fn symbol(&self, _xi: T) -> Complex<T> {
        Complex::new(T::one(), T::zero())
    }
    fn label(&self) -> String {
        "identity".into()
    }
}

impl<T: Real> Multiplier<T> for Derivative {
    fn symbol(&self, xi: T) -> Complex<T> {
        Complex::new(T::zero(), xi)
    }
    fn label(&self) -> String {
        "d/dx".into()
    }
}

impl<T: Real> Multiplier<T> for HelmholtzInverse {
    fn symbol(&self, xi: T) -> Complex<T> {
        Complex::new(T::one() / (T::one() + xi * xi), T::zero())
    }
    fn label(&self) -> String {
        "(1 - d^2/dx^2)^-1".into()
    }
}

impl<T: Real> Multiplier<T> for NonlocalP {
    fn symbol(&self, xi: T) -> Complex<T> {
        Complex::new(T::zero(), -xi / (T::one() + xi * xi))
    }
    fn label(&self) -> String {
        "P(D)".into()
    }
}

/// Relative imaginary residue above which a multiplier is reported as not
/// mapping real fields to real fields.
pub const REALITY_TOLERANCE: f64 = 1e-8;

/// `F^{-1}(m(xi) F u)`; fails when the result is not real.
pub fn apply_multiplier<T: Real, M: Multiplier<T> + ?Sized>(
    u: &Field<T>,
    m: &M,
) -> Result<Field<T>> {
    let tol = T::lit(REALITY_TOLERANCE).max(T::epsilon() * T::lit(100.0));
    to_spectrum(u).apply(m).to_field_checked(tol, &m.label())
}

/// Spectral derivative; the Nyquist mode is zeroed.
pub fn derivative<T: Real>(u: &Field<T>) -> Field<T> {
    to_spectrum(u).apply(&Derivative).to_field()
}

/// `(1 - d^2/dx^2)^{-1} u`, i.e. convolution with the periodized `exp(-|x|)/2`.
pub fn helmholtz_inverse<T: Real>(u: &Field<T>) -> Field<T> {
    to_spectrum(u).apply(&HelmholtzInverse).to_field()
}

/// `P(D) u = -d/dx (1 - d^2/dx^2)^{-1} u`.
pub fn nonlocal_p<T: Real>(u: &Field<T>) -> Field<T> {
    to_spectrum(u).apply(&NonlocalP).to_field()
}

/// Rectangle-rule `L^p` norm; `p = +inf` gives the maximum norm.
pub fn lebesgue_norm<T: Real>(u: &Field<T>, p: T) -> Result<T> {
    lp_norm_of_samples(u.values(), u.grid().dx(), p)
}

pub(crate) fn lp_norm_of_samples<T: Real>(values: &[T], dx: T, p: T) -> Result<T> {
    if p.is_nan() || p < T::one() {
        return Err(Error::InvalidExponent(p.as_f64()));
    }
    let max = values.iter().fold(
        T::zero(),
        |acc, v| if v.abs() > acc { v.abs() } else { acc },
    );
    if p.is_infinite() || max == T::zero() {
        return Ok(max);
    }
    // Scaling by the maximum keeps |u|^p away from overflow and underflow.
    let sum: T = if p == T::lit(2.0) {
        values.iter().map(|&v| (v / max) * (v / max)).sum()
    } else {
        values.iter().map(|&v| (v.abs() / max).powf(p)).sum()
    };
    Ok(max * (dx * sum).powf(p.recip()))
}

/// Two-thirds rule: zeroes every mode with `|k| > N/3`.
pub fn dealias<T: Real>(s: &Spectrum<T>) -> Spectrum<T> {
    let grid = s.grid();
    let coeffs = s
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if grid.is_dealias_kept(grid.mode_index(i)) {
                c
            } else {
                Complex::new(T::zero(), T::zero())
            }
        })
        .collect();
    Spectrum {
        grid: grid.clone(),
        coeffs,
    }
}

/// Pointwise product followed by the two-thirds truncation.
pub fn dealiased_product<T: Real>(a: &Field<T>, b: &Field<T>) -> Field<T> {
    dealias(&to_spectrum(&a.product(b))).to_field()
}

/// Translation `u(x - a)`, either by exact spectral phase shift or by an
/// index roll (which requires `a` to be a whole number of cells).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Translation {
    Spectral,
    IndexRoll,
}

pub fn translate<T: Real>(u: &Field<T>, a: T, method: Translation) -> Result<Field<T>> {
    match method {
        Translation::Spectral => Ok(to_spectrum(u).translate(a).to_field()),
        Translation::IndexRoll => {
            let cells = a / u.grid().dx();
            let rounded = cells.round();
            if (cells - rounded).abs() > T::lit(1e-9) * T::one().max(cells.abs()) {
                return Err(Error::NonGridAligned(a.as_f64()));
            }
            let cells = rounded.to_i64().ok_or(Error::NonGridAligned(a.as_f64()))?;
            Ok(u.shift_cells(cells))
        }
    }
}
