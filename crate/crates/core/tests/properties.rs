use std::f64::consts::PI;

use chnu::besov::{BesovNorm, BesovParams};
use chnu::experiments::{fit_slope, random_band_field, required_constant, NormCurve};
use chnu::initial_data::{build_phi, make_g_n, Preset};
use chnu::littlewood_paley::{decompose, low_pass, CutoffPair};
use chnu::spectral::{
    dealias, derivative, helmholtz_inverse, lebesgue_norm, translate, Translation,
};
use chnu::{Field64, Grid64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid() -> Grid64 {
    Grid64::new(8.0 * PI, 512).unwrap()
}

fn field(seed: u64, band: f64) -> Field64 {
    random_band_field(&grid(), &mut ChaCha8Rng::seed_from_u64(seed), band)
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(1.0),
        Just(2.0),
        Just(3.0),
        Just(f64::INFINITY),
        1.0f64..6.0
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partition_of_unity(xi in -600.0f64..600.0) {
        let cut = CutoffPair::<f64>::new();
        let total: f64 = (-1..=12).map(|j| cut.block_symbol(j, xi)).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn blocks_reconstruct_the_field(seed in 0u64..1000, band in 0.5f64..20.0) {
        let u = field(seed, band);
        let back = decompose(&u, &CutoffPair::new()).reconstruct();
        let err = (&back - &u).max_abs();
        prop_assert!(err <= 1e-12 * u.max_abs().max(1.0));
    }

    #[test]
    fn besov_norm_is_a_norm(
        a in 0u64..1000, b in 0u64..1000, c in -3.0f64..3.0,
        s in -1.0f64..3.0, p in exponent(), r in exponent(),
    ) {
        let norm = BesovNorm::new(&grid());
        let prm = BesovParams::new(s, p, r).unwrap();
        let (u, v) = (field(a, 10.0), field(b + 1000, 10.0));
        let nu = norm.norm(&u, &prm).unwrap();
        let nv = norm.norm(&v, &prm).unwrap();
        let nsum = norm.norm(&(&u + &v), &prm).unwrap();
        prop_assert!(nsum <= (nu + nv) * (1.0 + 1e-12));
        let scaled = norm.norm(&u.scale(c), &prm).unwrap();
        prop_assert!((scaled - c.abs() * nu).abs() <= 1e-12 * nu.max(1e-300));
    }

    #[test]
    fn besov_norm_is_translation_invariant(seed in 0u64..1000, cells in -256i64..256, p in exponent()) {
        let norm = BesovNorm::new(&grid());
        let prm = BesovParams::new(2.0, p, 2.0).unwrap();
        let u = field(seed, 12.0);
        let a = norm.norm(&u, &prm).unwrap();
        let b = norm.norm(&u.shift_cells(cells), &prm).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn besov_norm_decreases_in_r(seed in 0u64..1000, s in -1.0f64..3.0, r1 in 1.0f64..4.0, dr in 0.0f64..4.0) {
        let norm = BesovNorm::new(&grid());
        let u = field(seed, 12.0);
        let a = norm.norm(&u, &BesovParams::new(s, 2.0, r1).unwrap()).unwrap();
        let b = norm.norm(&u, &BesovParams::new(s, 2.0, r1 + dr).unwrap()).unwrap();
        let c = norm.norm(&u, &BesovParams::new(s, 2.0, f64::INFINITY).unwrap()).unwrap();
        prop_assert!(b <= a * (1.0 + 1e-12));
        prop_assert!(c <= b * (1.0 + 1e-12));
    }

    #[test]
    fn interpolation_inequality(
        seed in 0u64..1000, s1 in -1.0f64..2.0, gap in 0.1f64..2.0,
        theta in 0.05f64..0.95, p in exponent(), r in exponent(),
    ) {
        let norm = BesovNorm::new(&grid());
        let u = field(seed, 20.0);
        let d = norm.interpolation_defect(&u, s1, s1 + gap, theta, p, r).unwrap();
        let mid = BesovParams::new(theta * s1 + (1.0 - theta) * (s1 + gap), p, r).unwrap();
        prop_assert!(d <= 1e-12 * norm.norm(&u, &mid).unwrap());
    }

    #[test]
    fn low_pass_is_a_contraction_in_l2(seed in 0u64..1000, n in -1i32..8) {
        let u = field(seed, 20.0);
        let s = low_pass(&u, n, &CutoffPair::new());
        let a = lebesgue_norm(&s, 2.0).unwrap();
        let b = lebesgue_norm(&u, 2.0).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-12));
    }

    #[test]
    fn dealias_is_idempotent(seed in 0u64..1000) {
        let u = field(seed, 80.0);
        let once = dealias(&u.to_spectrum());
        let twice = dealias(&once);
        prop_assert_eq!(once.coeffs(), twice.coeffs());
    }

    #[test]
    fn derivative_commutes_with_translation(seed in 0u64..1000, cells in -100i64..100) {
        let u = field(seed, 10.0);
        let a = derivative(&u.shift_cells(cells));
        let b = derivative(&u).shift_cells(cells);
        prop_assert!((&a - &b).max_abs() <= 1e-12 * a.max_abs().max(1.0));
    }

    #[test]
    fn helmholtz_inverse_is_l2_contraction(seed in 0u64..1000) {
        let u = field(seed, 20.0);
        let a = lebesgue_norm(&helmholtz_inverse(&u), 2.0).unwrap();
        let b = lebesgue_norm(&u, 2.0).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-12));
    }

    #[test]
    fn spectral_and_roll_translation_agree(seed in 0u64..1000, cells in -300i64..300) {
        let g = grid();
        let u = field(seed, 15.0);
        let a = cells as f64 * g.dx();
        let s = translate(&u, a, Translation::Spectral).unwrap();
        let r = translate(&u, a, Translation::IndexRoll).unwrap();
        prop_assert!((&s - &r).max_abs() <= 1e-12 * u.max_abs().max(1.0));
    }

    #[test]
    fn g_n_halves(n in 3i32..7) {
        let g = Grid64::new(16.0 * PI, 1024).unwrap();
        let phi = build_phi(&g).unwrap();
        let a = make_g_n(&phi, n);
        let b = make_g_n(&phi, n + 1);
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert_eq!(*y, *x / 2.0);
        }
    }

    #[test]
    fn fit_recovers_linear_slope(a in -10.0f64..10.0, samples in 8usize..60) {
        let times: Vec<f64> = (0..samples).map(|i| 0.25 * i as f64 / (samples - 1) as f64).collect();
        let values = times.iter().map(|t| a * t).collect();
        let fit = fit_slope(&NormCurve::new("c", times, values), 0.25).unwrap();
        prop_assert!((fit.slope - a).abs() <= 1e-12 * a.abs().max(1.0));
        prop_assert!(fit.residual <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn required_constant_finds_threshold(c0 in 0.0f64..100.0) {
        let c = required_constant(|c| c >= c0);
        prop_assert!(c >= c0 && c - c0 <= 1e-9 * c0.max(1e-6));
    }

    #[test]
    fn preset_text_round_trips(seed in 0u64..1_000_000, width in 0.01f64..4.0) {
        for p in [
            Preset::LowBandRandom { seed },
            Preset::SmoothedPeakon { width },
            Preset::HelmholtzPeakon { width },
        ] {
            let back: Preset = p.to_string().parse().unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
