//! Explicit initial data: the band-limited profile `phi`, the high/low
//! frequency packets `f_n`, `g_n`, their shifted combinations, periodized
//! peakons and the preset data `u0`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::littlewood_paley::radial_cutoff;
use crate::scalar::Real;
use crate::spectral::{translate, Field, Grid, Spectrum, Translation};

/// Carrier frequency factor of the high-frequency packet.
pub const CARRIER_FACTOR: f64 = 17.0 / 12.0;

/// Band-limited bump with `phi_hat = 1` on `|xi| <= 1/4` and `0` on `|xi| >= 1/2`.
#[derive(Clone, Debug)]
pub struct ProfilePhi<T: Real> {
    field: Field<T>,
}

impl<T: Real> ProfilePhi<T> {
    pub const PLATEAU: f64 = 0.25;
    pub const SUPPORT: f64 = 0.5;

    /// The Fourier transform `phi_hat(xi)`.
    pub fn hat(xi: T) -> T {
        radial_cutoff(xi, T::lit(Self::PLATEAU), T::lit(Self::SUPPORT))
    }

    pub fn field(&self) -> &Field<T> {
        &self.field
    }

    pub fn grid(&self) -> &Grid<T> {
        self.field.grid()
    }

    /// Largest `|phi|` on `|x| >= radius`.
    pub fn tail_bound(&self, radius: T) -> T {
        let g = self.grid();
        self.field
            .values()
            .iter()
            .enumerate()
            .filter(|(i, _)| g.x(*i).abs() >= radius)
            .fold(T::zero(), |acc, (_, v)| acc.max(v.abs()))
    }
}

/// Samples of `phi` obtained by placing `phi_hat(xi_k) / (2L)` on each mode.
///
/// Needs at least 8 grid modes with `|xi| <= 1/2`.
pub fn build_phi<T: Real>(grid: &Grid<T>) -> Result<ProfilePhi<T>> {
    let support = T::lit(ProfilePhi::<T>::SUPPORT);
    let resolved = grid
        .frequencies()
        .iter()
        .filter(|xi| xi.abs() <= support)
        .count();
    if resolved < 8 {
        return Err(Error::GridTooCoarse(format!(
            "only {resolved} modes with |xi| <= 1/2; need at least 8 (L >= 16 pi recommended)"
        )));
    }
    let scale = grid.period().recip();
    let field = Spectrum::from_fn(grid, |xi| {
        Complex::new(ProfilePhi::<T>::hat(xi) * scale, T::zero())
    })
    .to_field();
    Ok(ProfilePhi { field })
}

/// Grid frequency nearest to `(17/12) 2^n`.
///
/// Using an exact grid mode keeps the packet spectrum a shifted copy of
/// `phi_hat` instead of leaking across the whole band.
pub fn carrier_frequency<T: Real>(grid: &Grid<T>, n: i32) -> T {
    grid.nearest_frequency(T::lit(CARRIER_FACTOR * 2f64.powi(n)))
}

/// Checks `n >= 3` and that `carrier + 1/2 <= (2/3) xi_max`.
pub fn check_resolvable<T: Real>(grid: &Grid<T>, n: i32) -> Result<()> {
    if n < 3 {
        return Err(Error::Unresolvable {
            n,
            reason: "packet index must be at least 3 for single-block localization".into(),
        });
    }
    let top = carrier_frequency(grid, n) + T::lit(ProfilePhi::<T>::SUPPORT);
    let limit = T::lit(2.0 / 3.0) * grid.max_frequency();
    if top > limit {
        return Err(Error::Unresolvable {
            n,
            reason: format!("packet reaches {top} but the dealiased band ends at {limit}"),
        });
    }
    Ok(())
}

/// Largest resolvable packet index on `grid`, if any.
pub fn max_resolvable_index<T: Real>(grid: &Grid<T>) -> Option<i32> {
    (3..40)
        .take_while(|&n| check_resolvable(grid, n).is_ok())
        .last()
}

/// `f_n = 2^{-ns} phi(x) sin(k_n x)` with `k_n` the snapped carrier.
pub fn make_f_n<T: Real>(phi: &ProfilePhi<T>, n: i32, s: T) -> Result<Field<T>> {
    let grid = phi.grid();
    check_resolvable(grid, n)?;
    let amp = T::lit(2.0).powf(-s * T::lit(n as f64));
    let k = carrier_frequency(grid, n);
    let values = phi
        .field
        .values()
        .iter()
        .enumerate()
        .map(|(i, &p)| amp * p * (k * grid.x(i)).sin())
        .collect();
    Field::new(grid, values)
}

/// `g_n = (12/17) 2^{-n} phi(x)`.
pub fn make_g_n<T: Real>(phi: &ProfilePhi<T>, n: i32) -> Field<T> {
    let c = T::lit(2f64.powi(-n) / CARRIER_FACTOR);
    phi.field.scale(c)
}

/// Parameters of the shifted datum `(f_n + omega g_n)(x - m)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PacketSpec<T: Real> {
    pub n: i32,
    pub omega: u8,
    /// Shift in whole grid cells.
    pub shift_cells: i64,
    pub s: T,
}

impl<T: Real> PacketSpec<T> {
    pub fn new(grid: &Grid<T>, n: i32, omega: u8, shift_cells: i64, s: T) -> Result<Self> {
        check_resolvable(grid, n)?;
        if omega > 1 {
            return Err(Error::InvalidArgument(format!(
                "omega must be 0 or 1, got {omega}"
            )));
        }
        Ok(Self {
            n,
            omega,
            shift_cells,
            s,
        })
    }

    pub fn shift(&self, grid: &Grid<T>) -> T {
        T::lit(self.shift_cells as f64) * grid.dx()
    }
}

/// Number of cells closest to the shift `m`.
pub fn snap_shift<T: Real>(grid: &Grid<T>, m: T) -> i64 {
    (m / grid.dx()).round().to_i64().unwrap_or(0)
}

/// `v = (f_n + omega g_n)(x - m)`.
pub fn make_v<T: Real>(
    phi: &ProfilePhi<T>,
    spec: &PacketSpec<T>,
    method: Translation,
) -> Result<Field<T>> {
    let mut v = make_f_n(phi, spec.n, spec.s)?;
    if spec.omega == 1 {
        v = &v + &make_g_n(phi, spec.n);
    }
    translate(&v, spec.shift(phi.grid()), method)
}

/// Periodized peakon `c cosh(L - d) / sinh(L)` with `d` the periodic
/// distance to `x0`.
pub fn make_peakon<T: Real>(grid: &Grid<T>, c: T, x0: T) -> Field<T> {
    let l = grid.half_length();
    let period = grid.period();
    let two_l_decay = (-period).exp();
    Field::from_fn(grid, |x| {
        let mut d = (x - x0) % period;
        if d < T::zero() {
            d = d + period;
        }
        if d > l {
            d = period - d;
        }
        // cosh(L - d) / sinh(L), written to avoid overflow for large L
        c * ((-d).exp() + (d - period).exp()) / (T::one() - two_l_decay)
    })
}

/// Preset initial data concentrated near the origin.
#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    Zero,
    /// `exp(-x^2)`
    Gaussian,
    /// Sum of four modulated bumps with spectrum in `|xi| <= 2`.
    LowBandRandom {
        seed: u64,
    },
    /// Peakon mollified by the Gaussian multiplier `exp(-(w xi)^2 / 2)`.
    SmoothedPeakon {
        width: f64,
    },
    /// Peakon filtered by `1 / (1 + w^2 xi^2)`; its spectrum keeps an
    /// algebraic `xi^-4` tail.
    HelmholtzPeakon {
        width: f64,
    },
}

impl Preset {
    pub const DEFAULT_PEAKON_WIDTH: f64 = 0.5;
    pub const DEFAULT_SEED: u64 = 7;

    /// Spectral band of the preset, when compactly supported.
    pub fn band_limit(&self) -> Option<f64> {
        match self {
            Preset::Zero => Some(0.0),
            Preset::LowBandRandom { .. } => Some(LOW_BAND_RADIUS),
            _ => None,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Zero => write!(f, "zero"),
            Preset::Gaussian => write!(f, "gaussian"),
            Preset::LowBandRandom { seed } => write!(f, "low_band_random({seed})"),
            Preset::SmoothedPeakon { width } => write!(f, "smoothed_peakon({width})"),
            Preset::HelmholtzPeakon { width } => write!(f, "helmholtz_peakon({width})"),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    /// Accepts `name` or `name(arg)`, e.g. `low_band_random(7)`.
    fn from_str(text: &str) -> Result<Self> {
        let unknown = || Error::UnknownPreset(text.to_string());
        let t = text.trim();
        let (name, arg) = match t.find('(') {
            Some(open) => {
                let close = t.strip_suffix(')').ok_or_else(unknown)?;
                (&t[..open], Some(close[open + 1..].trim()))
            }
            None => (t, None),
        };
        let width = |arg: Option<&str>| -> Result<f64> {
            match arg {
                None => Ok(Preset::DEFAULT_PEAKON_WIDTH),
                Some(a) => {
                    let w: f64 = a.parse().map_err(|_| unknown())?;
                    if w > 0.0 && w.is_finite() {
                        Ok(w)
                    } else {
                        Err(unknown())
                    }
                }
            }
        };
        match (name.trim(), arg) {
            ("zero", None) => Ok(Preset::Zero),
            ("gaussian", None) => Ok(Preset::Gaussian),
            ("low_band_random", None) => Ok(Preset::LowBandRandom {
                seed: Preset::DEFAULT_SEED,
            }),
            ("low_band_random", Some(a)) => Ok(Preset::LowBandRandom {
                seed: a.parse().map_err(|_| unknown())?,
            }),
            ("smoothed_peakon", a) => Ok(Preset::SmoothedPeakon { width: width(a)? }),
            ("helmholtz_peakon", a) => Ok(Preset::HelmholtzPeakon { width: width(a)? }),
            _ => Err(unknown()),
        }
    }
}

const LOW_BAND_RADIUS: f64 = 2.0;

/// Samples of a preset datum.
pub fn preset_u0<T: Real>(preset: &Preset, grid: &Grid<T>) -> Field<T> {
    let inv_period = grid.period().recip();
    let real = |v: T| Complex::new(v, T::zero());
    match preset {
        Preset::Zero => Field::zeros(grid),
        Preset::Gaussian => Field::from_fn(grid, |x| (-x * x).exp()),
        Preset::SmoothedPeakon { width } => {
            let w = T::lit(*width);
            Spectrum::from_fn(grid, |xi| {
                let kernel = T::lit(2.0) / (T::one() + xi * xi);
                real(inv_period * kernel * (-(w * xi) * (w * xi) * T::lit(0.5)).exp())
            })
            .to_field()
        }
        Preset::HelmholtzPeakon { width } => {
            let w = T::lit(*width);
            Spectrum::from_fn(grid, |xi| {
                let kernel = T::lit(2.0) / (T::one() + xi * xi);
                real(inv_period * kernel / (T::one() + w * w * xi * xi))
            })
            .to_field()
        }
        Preset::LowBandRandom { seed } => low_band_random(grid, *seed),
    }
}

/// Parses and samples a preset by name.
pub fn preset_by_name<T: Real>(name: &str, grid: &Grid<T>) -> Result<Field<T>> {
    Ok(preset_u0(&name.parse()?, grid))
}

fn low_band_random<T: Real>(grid: &Grid<T>, seed: u64) -> Field<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    struct Bump {
        amp: f64,
        centre: f64,
        freq: f64,
    }
    let bumps: Vec<Bump> = (0..4)
        .map(|_| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            Bump {
                amp: sign * rng.random_range(0.5..2.0),
                centre: rng.random_range(-2.0..2.0),
                freq: rng.random_range(0.0..1.0),
            }
        })
        .collect();
    // Each bump has a profile band-limited to |xi| <= 1, modulated by a
    // carrier in [0, 1], so the sum lives in |xi| <= 2.
    let inv_period = grid.period().recip();
    let profile = |xi: T| radial_cutoff(xi, T::lit(0.5), T::one());
    Spectrum::from_fn(grid, |xi| {
        let mut acc = Complex::new(T::zero(), T::zero());
        for b in &bumps {
            let k = T::lit(b.freq);
            let mag = T::lit(0.5 * b.amp) * (profile(xi - k) + profile(xi + k)) * inv_period;
            let (s, c) = (xi * T::lit(b.centre)).sin_cos();
            acc = acc + Complex::new(c, -s) * mag;
        }
        acc
    })
    .to_field()
}
