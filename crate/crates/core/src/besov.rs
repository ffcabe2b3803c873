//! Inhomogeneous Besov norms `B^s_{p,r}` built from dyadic blocks, plus the
//! product and interpolation quantities checked by the inequality sweeps.

use crate::error::{Error, Result};
use crate::littlewood_paley::{CutoffPair, Decomposer};
use crate::scalar::Real;
use crate::spectral::{lp_norm_of_samples, to_spectrum, Field, Grid};

/// Index triple `(s, p, r)`; `p` and `r` may be `+inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesovParams<T: Real> {
    pub s: T,
    pub p: T,
    pub r: T,
}

impl<T: Real> BesovParams<T> {
    pub fn new(s: T, p: T, r: T) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::InvalidBesovParams(format!(
                "s must be finite, got {s}"
            )));
        }
        for (name, v) in [("p", p), ("r", r)] {
            if v.is_nan() || v < T::one() {
                return Err(Error::InvalidBesovParams(format!(
                    "{name} must lie in [1, inf], got {v}"
                )));
            }
        }
        Ok(Self { s, p, r })
    }

    pub fn with_s(self, s: T) -> Self {
        Self { s, ..self }
    }

    pub fn with_r(self, r: T) -> Self {
        Self { r, ..self }
    }
}

/// Well-posedness range: `s > max(3/2, 1 + 1/p)` and `r < inf`.
pub fn check_index_condition<T: Real>(prm: &BesovParams<T>) -> bool {
    let threshold = T::lit(1.5).max(T::one() + prm.p.recip());
    prm.s > threshold && prm.r.is_finite()
}

/// `l^r` norm of `(2^{sj} a_j)_j` for block norms `a_j`, `j = -1, 0, ..`.
pub fn weighted_sequence_norm<T: Real>(block_norms: &[T], s: T, r: T) -> T {
    let two = T::lit(2.0);
    let terms: Vec<T> = block_norms
        .iter()
        .enumerate()
        .map(|(i, &a)| two.powf(s * T::lit(i as f64 - 1.0)) * a)
        .collect();
    let max = terms.iter().fold(T::zero(), |acc, &t| acc.max(t));
    if r.is_infinite() || max == T::zero() {
        return max;
    }
    let sum: T = terms.iter().map(|&t| (t / max).powf(r)).sum();
    max * sum.powf(r.recip())
}

/// Besov norm evaluator with the block masks of one grid precomputed.
#[derive(Clone, Debug)]
pub struct BesovNorm<T: Real> {
    decomposer: Decomposer<T>,
}

impl<T: Real> BesovNorm<T> {
    pub fn new(grid: &Grid<T>) -> Self {
        Self::with_cutoffs(grid, CutoffPair::new())
    }

    pub fn with_cutoffs(grid: &Grid<T>, cut: CutoffPair<T>) -> Self {
        Self {
            decomposer: Decomposer::new(grid, cut),
        }
    }

    pub fn decomposer(&self) -> &Decomposer<T> {
        &self.decomposer
    }

    pub fn grid(&self) -> &Grid<T> {
        self.decomposer.grid()
    }

    /// `||Delta_j u||_{L^p}` for `j = -1..=j_max`.
    pub fn block_norms(&self, u: &Field<T>, p: T) -> Result<Vec<T>> {
        if p.is_nan() || p < T::one() {
            return Err(Error::InvalidExponent(p.as_f64()));
        }
        if u.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        let grid = self.grid();
        let dx = grid.dx();
        let raw = grid.dft(u.values());
        let mut out = Vec::with_capacity(self.decomposer.j_max() as usize + 2);
        let mut failure = None;
        self.decomposer.for_each_block(&raw, |_, samples| {
            match lp_norm_of_samples(samples, dx, p) {
                Ok(v) => out.push(v),
                Err(e) => failure = Some(e),
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    pub fn norm(&self, u: &Field<T>, prm: &BesovParams<T>) -> Result<T> {
        let a = self.block_norms(u, prm.p)?;
        Ok(weighted_sequence_norm(&a, prm.s, prm.r))
    }

    /// `||u||_{B^{theta s1 + (1-theta) s2}} - ||u||_{B^{s1}}^theta ||u||_{B^{s2}}^(1-theta)`,
    /// nonpositive by Hölder's inequality.
    pub fn interpolation_defect(
        &self,
        u: &Field<T>,
        s1: T,
        s2: T,
        theta: T,
        p: T,
        r: T,
    ) -> Result<T> {
        check_interpolation_args(s1, s2, theta)?;
        let a = self.block_norms(u, p)?;
        let mid = theta * s1 + (T::one() - theta) * s2;
        let lhs = weighted_sequence_norm(&a, mid, r);
        let n1 = weighted_sequence_norm(&a, s1, r);
        let n2 = weighted_sequence_norm(&a, s2, r);
        Ok(lhs - n1.powf(theta) * n2.powf(T::one() - theta))
    }

    /// Endpoint form with a `B_{p,1}` left side and `B_{p,inf}` right side.
    /// Returns the smallest constant `C` making
    /// `||u||_{B^{mid}_{p,1}} <= C/(s2-s1) (1/theta + 1/(1-theta)) ||u||^theta_{B^{s1}_{p,inf}} ||u||^(1-theta)_{B^{s2}_{p,inf}}`
    /// hold for this `u` (zero for `u = 0`).
    pub fn interpolation_endpoint_constant(
        &self,
        u: &Field<T>,
        s1: T,
        s2: T,
        theta: T,
        p: T,
    ) -> Result<T> {
        check_interpolation_args(s1, s2, theta)?;
        let a = self.block_norms(u, p)?;
        let one = T::one();
        let mid = theta * s1 + (one - theta) * s2;
        let lhs = weighted_sequence_norm(&a, mid, one);
        let n1 = weighted_sequence_norm(&a, s1, T::infinity());
        let n2 = weighted_sequence_norm(&a, s2, T::infinity());
        let factor = (theta.recip() + (one - theta).recip()) / (s2 - s1);
        let rhs = factor * n1.powf(theta) * n2.powf(one - theta);
        if rhs == T::zero() {
            return Ok(T::zero());
        }
        Ok(lhs / rhs)
    }

    /// `||uv||_{B^s} / (||u||_{B^s} ||v||_inf + ||v||_{B^s} ||u||_inf)`.
    pub fn product_ratio(&self, u: &Field<T>, v: &Field<T>, prm: &BesovParams<T>) -> Result<T> {
        if !(prm.s > T::zero()) {
            return Err(Error::InvalidBesovParams(format!(
                "product estimate needs s > 0, got {}",
                prm.s
            )));
        }
        if u.grid() != v.grid() {
            return Err(Error::GridMismatch);
        }
        let num = self.norm(&u.product(v), prm)?;
        let den = self.norm(u, prm)? * v.max_abs() + self.norm(v, prm)? * u.max_abs();
        if den == T::zero() {
            return Err(Error::UndefinedInput(
                "product ratio has a zero denominator".into(),
            ));
        }
        Ok(num / den)
    }
}

fn check_interpolation_args<T: Real>(s1: T, s2: T, theta: T) -> Result<()> {
    if !(s1 < s2) {
        return Err(Error::InvalidArgument(format!(
            "need s1 < s2, got {s1} and {s2}"
        )));
    }
    if !(theta > T::zero() && theta < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "theta must lie in (0, 1), got {theta}"
        )));
    }
    Ok(())
}

/// One-shot Besov norm with the standard cutoffs.
pub fn besov_norm<T: Real>(u: &Field<T>, prm: &BesovParams<T>, cut: &CutoffPair<T>) -> Result<T> {
    BesovNorm::with_cutoffs(u.grid(), *cut).norm(u, prm)
}

pub fn interpolation_defect<T: Real>(
    u: &Field<T>,
    s1: T,
    s2: T,
    theta: T,
    p: T,
    r: T,
) -> Result<T> {
    BesovNorm::new(u.grid()).interpolation_defect(u, s1, s2, theta, p, r)
}

pub fn product_ratio<T: Real>(u: &Field<T>, v: &Field<T>, prm: &BesovParams<T>) -> Result<T> {
    BesovNorm::new(u.grid()).product_ratio(u, v, prm)
}

/// Spectral `H^s` norm `(2L sum (1 + xi^2)^s |c_k|^2)^(1/2)`.
pub fn sobolev_norm<T: Real>(u: &Field<T>, s: T) -> T {
    let spec = to_spectrum(u);
    let sum: T = spec
        .coeffs()
        .iter()
        .zip(u.grid().frequencies())
        .map(|(c, &xi)| (T::one() + xi * xi).powf(s) * c.norm_sqr())
        .sum();
    (u.grid().period() * sum).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::lebesgue_norm;
    use std::f64::consts::PI;

    fn prm(s: f64, p: f64, r: f64) -> BesovParams<f64> {
        BesovParams::new(s, p, r).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(BesovParams::new(2.0, 0.5, 2.0).is_err());
        assert!(BesovParams::new(2.0, 2.0, f64::NAN).is_err());
        assert!(BesovParams::new(f64::INFINITY, 2.0, 2.0).is_err());
        assert!(BesovParams::new(2.0, f64::INFINITY, f64::INFINITY).is_ok());
    }

    #[test]
    fn index_condition_examples() {
        assert!(check_index_condition(&prm(2.0, 2.0, 2.0)));
        assert!(!check_index_condition(&prm(1.5, 2.0, 2.0)));
        assert!(!check_index_condition(&prm(2.0, 1.0, 1.0)));
        assert!(!check_index_condition(&prm(2.0, 2.0, f64::INFINITY)));
        assert!(!check_index_condition(&prm(1.2, 2.0, 2.0)));
        assert!(check_index_condition(&prm(1.6, f64::INFINITY, 1.0)));
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let g = Grid::<f64>::new(8.0, 256).unwrap();
        let ev = BesovNorm::new(&g);
        for p in [
            prm(2.0, 2.0, 2.0),
            prm(-1.0, 1.0, 1.0),
            prm(3.0, f64::INFINITY, f64::INFINITY),
        ] {
            assert_eq!(ev.norm(&Field::zeros(&g), &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_block_norm_ignores_r() {
        // xi = 3/2 lies where phi = 1, so only block j = 0 survives.
        let g = Grid::new(2.0 * PI, 128).unwrap();
        let u = Field::from_fn(&g, |x| (1.5 * x).sin());
        let ev = BesovNorm::new(&g);
        let l2 = lebesgue_norm(&u, 2.0).unwrap();
        for r in [1.0, 2.0, 5.0, f64::INFINITY] {
            let n = ev.norm(&u, &prm(1.7, 2.0, r)).unwrap();
            assert!((n - l2).abs() < 1e-12 * l2, "r={r}");
        }
        // xi = 6 sits in block 2, weight 2^{2s}
        let u = Field::from_fn(&g, |x| (6.0 * x).cos());
        let l2 = lebesgue_norm(&u, 2.0).unwrap();
        let n = ev.norm(&u, &prm(1.5, 2.0, 3.0)).unwrap();
        assert!((n - 8.0 * l2).abs() < 1e-12 * n);
    }

    #[test]
    fn homogeneity() {
        let g = Grid::<f64>::new(10.0, 512).unwrap();
        let u = Field::from_fn(&g, |x| (-x * x).exp());
        let ev = BesovNorm::new(&g);
        for p in [
            prm(2.0, 2.0, 2.0),
            prm(2.0, 4.0, 2.0),
            prm(2.0, f64::INFINITY, 2.0),
        ] {
            let a = ev.norm(&u, &p).unwrap();
            let b = ev.norm(&u.scale(0.5), &p).unwrap();
            assert!((b / a - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolation_is_zero_for_single_block_and_zero() {
        let g = Grid::new(2.0 * PI, 128).unwrap();
        let ev = BesovNorm::new(&g);
        let u = Field::from_fn(&g, |x| (1.5 * x).sin());
        let d = ev
            .interpolation_defect(&u, 1.0, 3.0, 0.5, 2.0, 2.0)
            .unwrap();
        assert!(d.abs() < 1e-12);
        let z = ev
            .interpolation_defect(&Field::zeros(&g), 1.0, 3.0, 0.5, 2.0, 2.0)
            .unwrap();
        assert_eq!(z, 0.0);
        assert!(ev
            .interpolation_defect(&u, 3.0, 1.0, 0.5, 2.0, 2.0)
            .is_err());
        assert!(ev
            .interpolation_defect(&u, 1.0, 3.0, 1.0, 2.0, 2.0)
            .is_err());
    }

    #[test]
    fn product_ratio_cases() {
        let g = Grid::<f64>::new(8.0, 256).unwrap();
        let ev = BesovNorm::new(&g);
        let p = prm(2.0, 2.0, 2.0);
        let u = Field::from_fn(&g, |x| (-x * x).exp());
        let one = Field::constant(&g, 1.0);
        let ratio = ev.product_ratio(&u, &one, &p).unwrap();
        let expected = ev.norm(&u, &p).unwrap()
            / (ev.norm(&u, &p).unwrap() + ev.norm(&one, &p).unwrap() * u.max_abs());
        assert!((ratio - expected).abs() < 1e-12);
        assert!(ratio < 1.0);
        assert!(matches!(
            ev.product_ratio(&Field::zeros(&g), &u, &p),
            Err(Error::UndefinedInput(_))
        ));
        assert!(ev.product_ratio(&u, &u, &prm(0.0, 2.0, 2.0)).is_err());
    }

    #[test]
    fn sobolev_norm_of_mode() {
        let g = Grid::new(PI, 64).unwrap();
        let u = Field::from_fn(&g, |x| (3.0 * x).sin());
        // ||sin 3x||_{L^2}^2 = pi, weight (1 + 9)^s
        assert!((sobolev_norm(&u, 1.0) - (10.0 * PI).sqrt()).abs() < 1e-12);
        assert!((sobolev_norm(&u, 0.0) - PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn weighted_sequence_limits() {
        let a = [1.0f64, 0.0, 2.0];
        assert!((weighted_sequence_norm(&a, 0.0, 1.0) - 3.0).abs() < 1e-15);
        assert!((weighted_sequence_norm(&a, 1.0, f64::INFINITY) - 4.0).abs() < 1e-15);
        assert_eq!(weighted_sequence_norm(&[0.0f64, 0.0], 2.0, 2.0), 0.0);
    }
}
