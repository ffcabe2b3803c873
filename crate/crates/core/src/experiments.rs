//! Experiment harnesses. Each run evolves a handful of data, reduces the
//! trajectories to norm curves and fitted slopes, and records premise and
//! conclusion checks against explicit thresholds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use num_complex::Complex;

use crate::besov::{check_index_condition, BesovNorm, BesovParams};
use crate::error::{Error, Result};
use crate::initial_data::{
    build_phi, carrier_frequency, check_resolvable, make_f_n, make_g_n, make_v, preset_u0,
    snap_shift, PacketSpec, Preset, ProfilePhi,
};
use crate::littlewood_paley::{radial_cutoff, CutoffPair};
use crate::scalar::Real;
use crate::solver::{
    linear_transport_evolve, BFamily, ModelParams, SolverConfig, Status, Trajectory,
};
use crate::spectral::{derivative, lebesgue_norm, Field, Grid, Spectrum, Translation};

/// Frozen-phase slope for `(s, p, r) = (2, 2, 2)` on the default grid and
/// default solver settings, as produced by [`predicted_slope`].
pub const C_PRED: f64 = 0.023_613_306_255_576_36;

/// Packet index used by [`predicted_slope`] when resolvable.
pub const ORACLE_REFERENCE_N: i32 = 5;

pub const MIN_FIT_SAMPLES: usize = 8;

/// Fewest surviving packet indices for a theorem experiment to count.
pub const MIN_SURVIVORS: usize = 3;

/// Calibrated constants are this multiple of the training supremum.
pub const CALIBRATION_MARGIN: f64 = 2.0;

pub const DEFAULT_HALF_LENGTH: f64 = 32.0 * std::f64::consts::PI;
pub const DEFAULT_POINTS: usize = 1 << 15;
pub const DEFAULT_DT: f64 = 0.001;
pub const DEFAULT_HORIZON: f64 = 0.25;
pub const DEFAULT_SAMPLE_EVERY: usize = 10;

/// Norm of a difference of trajectories at the sample times.
#[derive(Clone, Debug, PartialEq)]
pub struct NormCurve {
    pub label: String,
    pub n: Option<i32>,
    pub omega: Option<u8>,
    pub m: Option<f64>,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl NormCurve {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(
            times.len(),
            values.len(),
            "curve times and values differ in length"
        );
        Self {
            label: label.into(),
            n: None,
            omega: None,
            m: None,
            times,
            values,
        }
    }

    pub fn with_n(mut self, n: i32) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_omega(mut self, omega: u8) -> Self {
        self.omega = Some(omega);
        self
    }

    pub fn with_m(mut self, m: f64) -> Self {
        self.m = Some(m);
        self
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0, |a, &v| a.max(v))
    }

    pub fn last(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }

    /// Sort key used to pair curves across runs.
    pub fn key(&self) -> (String, Option<i32>, Option<u8>) {
        (self.label.clone(), self.n, self.omega)
    }
}

/// Through-origin least-squares fit on `[0, horizon]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub horizon: f64,
    /// RMS of `value - slope * t` over the fitted samples.
    pub residual: f64,
}

pub fn fit_slope(curve: &NormCurve, horizon: f64) -> Result<FitResult> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "fit horizon must be positive, got {horizon}"
        )));
    }
    let last = curve.times.last().copied().unwrap_or(0.0);
    let slack = 1e-9 * horizon;
    if last < horizon - slack {
        return Err(Error::TimeRange {
            available: last,
            requested: horizon,
        });
    }
    let pts: Vec<(f64, f64)> = curve
        .times
        .iter()
        .zip(&curve.values)
        .filter(|(&t, _)| t >= 0.0 && t <= horizon + slack)
        .map(|(&t, &v)| (t, v))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            found: pts.len(),
        });
    }
    let stt: f64 = pts.iter().map(|(t, _)| t * t).sum();
    let stv: f64 = pts.iter().map(|(t, v)| t * v).sum();
    let slope = if stt > 0.0 { stv / stt } else { 0.0 };
    let ss: f64 = pts.iter().map(|(t, v)| (v - slope * t).powi(2)).sum();
    Ok(FitResult {
        slope,
        horizon,
        residual: (ss / pts.len() as f64).sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verdict {
    Pass,
    Fail,
    /// A premise failed, so the conclusion carries no information.
    Invalidated,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Invalidated => "INVALIDATED",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        }
    }
}

/// A recorded number compared against a threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub verdict: Verdict,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        let ok = match relation {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
        };
        Self {
            name: name.into(),
            value,
            relation,
            threshold,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, Relation::AtMost, threshold)
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, Relation::AtLeast, threshold)
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledFit {
    pub label: String,
    pub n: Option<i32>,
    pub fit: FitResult,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    /// Echo of the settings as key/value text.
    pub config: Vec<(String, String)>,
    pub curves: Vec<NormCurve>,
    pub fits: Vec<LabeledFit>,
    pub premises: Vec<Check>,
    pub conclusions: Vec<Check>,
    /// Auxiliary and calibrated quantities.
    pub constants: Vec<(String, f64)>,
    /// Dropped runs and other remarks.
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(experiment: impl Into<String>) -> Self {
        Self {
            experiment: experiment.into(),
            ..Self::default()
        }
    }

    pub fn echo(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    pub fn constant(&mut self, key: impl Into<String>, value: f64) {
        self.constants.push((key.into(), value));
    }

    pub fn constant_value(&self, key: &str) -> Option<f64> {
        self.constants
            .iter()
            .find(|(k, _)| k == key)
            .map(|&(_, v)| v)
    }

    pub fn conclusion(&self, name: &str) -> Option<&Check> {
        self.conclusions.iter().find(|c| c.name == name)
    }

    pub fn premise(&self, name: &str) -> Option<&Check> {
        self.premises.iter().find(|c| c.name == name)
    }

    pub fn curve(&self, label: &str, n: Option<i32>) -> Option<&NormCurve> {
        self.curves.iter().find(|c| c.label == label && c.n == n)
    }

    pub fn fit(&self, label: &str, n: Option<i32>) -> Option<&FitResult> {
        self.fits
            .iter()
            .find(|f| f.label == label && f.n == n)
            .map(|f| &f.fit)
    }

    /// Marks every conclusion invalidated when a premise did not pass.
    pub fn finalize(mut self) -> Self {
        if self.premises.iter().any(|p| !p.passed()) {
            for c in &mut self.conclusions {
                c.verdict = Verdict::Invalidated;
            }
        }
        self
    }

    /// `Fail` beats `Invalidated` beats `Pass`.
    pub fn overall(&self) -> Verdict {
        let vs = self
            .premises
            .iter()
            .chain(&self.conclusions)
            .map(|c| c.verdict);
        let mut out = Verdict::Pass;
        for v in vs {
            out = match (out, v) {
                (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
                (Verdict::Invalidated, _) | (_, Verdict::Invalidated) => Verdict::Invalidated,
                _ => Verdict::Pass,
            };
        }
        if self.premises.iter().any(|p| !p.passed()) && out == Verdict::Pass {
            out = Verdict::Invalidated;
        }
        out
    }
}

/// Grid, model and time stepping shared by every run of an experiment.
#[derive(Clone, Debug)]
pub struct Settings<T: Real> {
    pub grid: Grid<T>,
    pub model: ModelParams<T>,
    pub solver: SolverConfig<T>,
    /// Fit horizon `T0`; at most `solver.t_end`.
    pub horizon: T,
}

impl<T: Real> Settings<T> {
    pub fn new(
        grid: Grid<T>,
        model: ModelParams<T>,
        solver: SolverConfig<T>,
        horizon: T,
    ) -> Result<Self> {
        solver.validate()?;
        if !(horizon > T::zero()) || horizon > solver.t_end * (T::one() + T::lit(1e-12)) {
            return Err(Error::InvalidConfig(format!(
                "fit horizon {horizon} must lie in (0, t_end = {}]",
                solver.t_end
            )));
        }
        Ok(Self {
            grid,
            model,
            solver,
            horizon,
        })
    }

    /// Camassa-Holm with `dt = 0.001`, `T0 = t_end = 0.25`, samples every 10 steps.
    pub fn with_grid(grid: Grid<T>) -> Self {
        let solver = SolverConfig::new(T::lit(DEFAULT_DT), T::lit(DEFAULT_HORIZON))
            .with_sample_every(DEFAULT_SAMPLE_EVERY);
        Self {
            grid,
            model: ModelParams::camassa_holm(),
            solver,
            horizon: T::lit(DEFAULT_HORIZON),
        }
    }

    /// The default grid `L = 32 pi`, `N = 2^15`.
    pub fn standard() -> Self {
        let grid =
            Grid::new(T::lit(DEFAULT_HALF_LENGTH), DEFAULT_POINTS).expect("default grid is valid");
        Self::with_grid(grid)
    }

    /// Same settings on another grid.
    pub fn regrid(&self, grid: Grid<T>) -> Self {
        Self {
            grid,
            ..self.clone()
        }
    }

    /// Times at which trajectories are sampled.
    pub fn sample_times(&self) -> Vec<T> {
        let (steps, h) = self.solver.step_plan();
        let mut out = vec![T::zero()];
        for done in 1..=steps {
            if done % self.solver.sample_every == 0 || done == steps {
                out.push(if done == steps {
                    self.solver.t_end
                } else {
                    T::from_count(done) * h
                });
            }
        }
        out
    }

    fn echo(&self, report: &mut ExperimentReport) {
        report.echo("grid.L", self.grid.half_length().as_f64());
        report.echo("grid.N", self.grid.num_points());
        report.echo("model.b", self.model.b.as_f64());
        report.echo("solver.dt", self.solver.dt.as_f64());
        report.echo("solver.t_end", self.solver.t_end.as_f64());
        report.echo("solver.sample_every", self.solver.sample_every);
        report.echo("solver.dealias", self.solver.dealias);
        report.echo("T0", self.horizon.as_f64());
    }
}

fn echo_params<T: Real>(report: &mut ExperimentReport, prm: &BesovParams<T>) {
    report.echo("besov.s", prm.s.as_f64());
    report.echo("besov.p", prm.p.as_f64());
    report.echo("besov.r", prm.r.as_f64());
}

/// Evolver and Besov norm bound to one set of settings.
struct Runner<'a, T: Real> {
    settings: &'a Settings<T>,
    solver: BFamily<T>,
    norm: BesovNorm<T>,
}

impl<'a, T: Real> Runner<'a, T> {
    fn new(settings: &'a Settings<T>) -> Self {
        Self {
            settings,
            solver: BFamily::new(&settings.grid, settings.model, settings.solver.dealias),
            norm: BesovNorm::new(&settings.grid),
        }
    }

    fn evolve(&self, u0: &Field<T>) -> Result<Trajectory<T>> {
        self.solver.evolve(u0, &self.settings.solver)
    }

    /// Blow-up time if it falls before the fit horizon.
    fn early_blowup(&self, trajs: &[&Trajectory<T>]) -> Option<f64> {
        trajs.iter().find_map(|tr| match tr.status() {
            Status::BlowupDetected { time } if time < self.settings.horizon => Some(time.as_f64()),
            _ => None,
        })
    }

    fn besov(&self, u: &Field<T>, prm: &BesovParams<T>) -> Result<f64> {
        Ok(self.norm.norm(u, prm)?.as_f64())
    }

    /// `|| sum_k c_k traj_k(t) ||` at every sample.
    fn combination_curve(
        &self,
        label: &str,
        parts: &[(f64, &Trajectory<T>)],
        prm: &BesovParams<T>,
    ) -> Result<NormCurve> {
        let len = parts.iter().map(|(_, tr)| tr.len()).min().unwrap_or(0);
        let times: Vec<f64> = parts[0].1.times()[..len]
            .iter()
            .map(|t| t.as_f64())
            .collect();
        let mut values = Vec::with_capacity(len);
        for i in 0..len {
            let fields: Vec<(f64, &Field<T>)> =
                parts.iter().map(|&(c, tr)| (c, &tr.states()[i])).collect();
            values.push(self.besov(&combine(&fields), prm)?);
        }
        Ok(NormCurve::new(label, times, values))
    }
}

/// `sum_k c_k u_k`.
fn combine<T: Real>(parts: &[(f64, &Field<T>)]) -> Field<T> {
    let (c0, u0) = parts[0];
    let mut acc: Vec<T> = u0.values().iter().map(|&v| T::lit(c0) * v).collect();
    for &(c, u) in &parts[1..] {
        let c = T::lit(c);
        for (a, &v) in acc.iter_mut().zip(u.values()) {
            *a = *a + c * v;
        }
    }
    Field::new(u0.grid(), acc).expect("combination of finite fields")
}

fn require_theorem_params<T: Real>(prm: &BesovParams<T>) -> Result<()> {
    if check_index_condition(prm) {
        Ok(())
    } else {
        Err(Error::InvalidBesovParams(format!(
            "theorem experiments need s > max(3/2, 1 + 1/p), got s = {}, p = {}",
            prm.s, prm.p
        )))
    }
}

fn require_resolvable<T: Real>(grid: &Grid<T>, n_list: &[i32]) -> Result<()> {
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("n_list is empty".into()));
    }
    for &n in n_list {
        check_resolvable(grid, n)?;
    }
    Ok(())
}

fn sorted_unique(n_list: &[i32]) -> Vec<i32> {
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    ns
}

/// Frozen-phase prediction for the solution-map gap at packet index `n`:
/// `|| 2^{-ns} phi (sin(k_n x - t phi) - sin(k_n x)) ||_{B^s}`, sampled at
/// the solver's sample times.
pub fn frozen_phase_oracle<T: Real>(
    settings: &Settings<T>,
    prm: &BesovParams<T>,
    n: i32,
) -> Result<NormCurve> {
    let grid = &settings.grid;
    let phi = build_phi(grid)?;
    check_resolvable(grid, n)?;
    let k = carrier_frequency(grid, n);
    let amp = T::lit(2.0).powf(-prm.s * T::lit(n as f64));
    let norm = BesovNorm::new(grid);
    let times = settings.sample_times();
    let mut values = Vec::with_capacity(times.len());
    for &t in &times {
        let vals: Vec<T> = phi
            .field()
            .values()
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let kx = k * grid.x(i);
                amp * p * ((kx - t * p).sin() - kx.sin())
            })
            .collect();
        values.push(norm.norm(&Field::new(grid, vals)?, prm)?.as_f64());
    }
    Ok(NormCurve::new("oracle", times.iter().map(|t| t.as_f64()).collect(), values).with_n(n))
}

/// Oracle slope on `[0, T0]` at [`ORACLE_REFERENCE_N`] (clamped to the
/// resolvable range).
pub fn predicted_slope<T: Real>(settings: &Settings<T>, prm: &BesovParams<T>) -> Result<f64> {
    let top = crate::initial_data::max_resolvable_index(&settings.grid).ok_or_else(|| {
        Error::Unresolvable {
            n: ORACLE_REFERENCE_N,
            reason: "no packet index is resolvable on this grid".into(),
        }
    })?;
    let n = ORACLE_REFERENCE_N.min(top);
    let curve = frozen_phase_oracle(settings, prm, n)?;
    Ok(fit_slope(&curve, settings.horizon.as_f64())?.slope)
}

/// Leading-order frozen-phase slope `||phi^2||_{L^2} / sqrt(2)` for `p = 2`.
pub fn frozen_phase_slope_l2<T: Real>(phi: &ProfilePhi<T>) -> f64 {
    let sq = phi.field().product(phi.field());
    lebesgue_norm(&sq, T::lit(2.0))
        .map(|v| v.as_f64())
        .unwrap_or(f64::NAN)
        / 2f64.sqrt()
}

/// Premise checks shared by the nonuniform experiments.
fn packet_premises(
    report: &mut ExperimentReport,
    fn_norms: &[(i32, f64)],
    gap_norms: &[(i32, f64)],
    gap_label: &str,
) {
    let (lo, hi) = fn_norms
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(_, v)| {
            (lo.min(v), hi.max(v))
        });
    let spread = if fn_norms.is_empty() {
        0.0
    } else {
        hi / lo - 1.0
    };
    report
        .premises
        .push(Check::at_most("f_n bounded: max/min - 1", spread, 0.05));
    let halving = gap_norms
        .windows(2)
        .filter(|w| w[1].0 == w[0].0 + 1)
        .map(|w| (w[1].1 / w[0].1 - 0.5).abs())
        .fold(0.0, f64::max);
    report.premises.push(Check::at_most(
        format!("{gap_label} halving: max |ratio - 1/2|"),
        halving,
        1e-10,
    ));
}

fn slope_conclusions(
    report: &mut ExperimentReport,
    slopes: &[(i32, f64)],
    c_pred: f64,
    fraction: f64,
    label: &str,
) {
    let min = slopes.iter().map(|&(_, s)| s).fold(f64::INFINITY, f64::min);
    let value = if slopes.is_empty() { 0.0 } else { min / c_pred };
    report.conclusions.push(Check::at_least(
        format!("min slope of {label} / c_pred"),
        value,
        fraction,
    ));
}

fn survivor_premise(report: &mut ExperimentReport, survivors: usize) {
    report.premises.push(Check::at_least(
        "surviving n values",
        survivors as f64,
        MIN_SURVIVORS as f64,
    ));
}

/// Gap `d_n(t) = ||S_t(f_n + g_n) - S_t(f_n)||_{B^s}` for each `n`.
pub fn run_nonuniform_basic<T: Real>(
    settings: &Settings<T>,
    prm: &BesovParams<T>,
    n_list: &[i32],
) -> Result<ExperimentReport> {
    require_theorem_params(prm)?;
    require_resolvable(&settings.grid, n_list)?;
    let ns = sorted_unique(n_list);
    let runner = Runner::new(settings);
    let phi = build_phi(&settings.grid)?;
    let horizon = settings.horizon.as_f64();
    let c_pred = predicted_slope(settings, prm)?;

    let mut report = ExperimentReport::new("nonuniform_basic");
    settings.echo(&mut report);
    echo_params(&mut report, prm);
    report.echo("n_list", format!("{ns:?}"));
    report.constant("c_pred", c_pred);

    let mut fn_norms = Vec::new();
    let mut gn_norms = Vec::new();
    let mut slopes = Vec::new();
    for &n in &ns {
        let f = make_f_n(&phi, n, prm.s)?;
        let g = make_g_n(&phi, n);
        fn_norms.push((n, runner.besov(&f, prm)?));
        let gn = runner.besov(&g, prm)?;
        gn_norms.push((n, gn));
        report.constant(format!("||g_n||, n={n}"), gn);

        let with_g = runner.evolve(&(&f + &g))?;
        let without = runner.evolve(&f)?;
        if let Some(t) = runner.early_blowup(&[&with_g, &without]) {
            report
                .notes
                .push(format!("n={n} dropped: blow-up detected at t={t}"));
            continue;
        }
        let curve = runner
            .combination_curve("d", &[(1.0, &with_g), (-1.0, &without)], prm)?
            .with_n(n);
        let fit = fit_slope(&curve, horizon)?;
        report.constant(format!("d_n(0) - ||g_n||, n={n}"), curve.values[0] - gn);
        slopes.push((n, fit.slope));
        report.fits.push(LabeledFit {
            label: "d".into(),
            n: Some(n),
            fit,
        });
        report.curves.push(curve);
    }

    packet_premises(&mut report, &fn_norms, &gn_norms, "||g_n||");
    survivor_premise(&mut report, slopes.len());
    slope_conclusions(&mut report, &slopes, c_pred, 0.5, "d_n");
    let tail_ratio = growth_ratio(&slopes);
    report.conclusions.push(Check::at_least(
        "slope non-decay: min(top two) / min(bottom two)",
        tail_ratio,
        0.8,
    ));
    Ok(report.finalize())
}

/// `min` of the slopes at the two largest `n` over that at the two smallest.
fn growth_ratio(slopes: &[(i32, f64)]) -> f64 {
    if slopes.len() < 2 {
        return 0.0;
    }
    let k = slopes.len();
    let low = slopes[0].1.min(slopes[1].1);
    let high = slopes[k - 2].1.min(slopes[k - 1].1);
    high / low
}

/// Step-3 decomposition around a generic datum `u0` with packets shifted
/// by `m`: records `D_n`, the shifted-packet gap and the four remainders.
pub fn run_nonuniform_at<T: Real>(
    settings: &Settings<T>,
    u0_preset: &Preset,
    prm: &BesovParams<T>,
    n_list: &[i32],
    m: T,
) -> Result<ExperimentReport> {
    require_theorem_params(prm)?;
    require_resolvable(&settings.grid, n_list)?;
    let grid = &settings.grid;
    let ns = sorted_unique(n_list);
    let runner = Runner::new(settings);
    let phi = build_phi(grid)?;
    let cut = CutoffPair::<T>::new();
    let horizon = settings.horizon.as_f64();
    let c_pred = predicted_slope(settings, prm)?;
    let cells = snap_shift(grid, m);
    let u0 = preset_u0(u0_preset, grid);

    let mut report = ExperimentReport::new("nonuniform_at");
    settings.echo(&mut report);
    echo_params(&mut report, prm);
    report.echo("u0", u0_preset);
    report.echo("n_list", format!("{ns:?}"));
    report.echo("m", m.as_f64());
    report.constant("c_pred", c_pred);
    report.constant("m (snapped)", cells as f64 * grid.dx().as_f64());

    let mut fn_norms = Vec::new();
    let mut gap_norms = Vec::new();
    let mut slopes = Vec::new();
    let mut worst_share = 0.0f64;
    let mut worst_identity = f64::NEG_INFINITY;
    for &n in &ns {
        let v1 = make_v(
            &phi,
            &PacketSpec::new(grid, n, 1, cells, prm.s)?,
            Translation::IndexRoll,
        )?;
        let v0 = make_v(
            &phi,
            &PacketSpec::new(grid, n, 0, cells, prm.s)?,
            Translation::IndexRoll,
        )?;
        fn_norms.push((n, runner.besov(&make_f_n(&phi, n, prm.s)?, prm)?));
        let gap = runner.besov(&(&v1 - &v0), prm)?;
        gap_norms.push((n, gap));
        report.constant(format!("||v1 - v0||, n={n}"), gap);

        let low = crate::littlewood_paley::low_pass(&u0, n, &cut);
        let a1 = runner.evolve(&(&u0 + &v1))?;
        let a0 = runner.evolve(&(&u0 + &v0))?;
        let b1 = runner.evolve(&(&low + &v1))?;
        let b0 = runner.evolve(&(&low + &v0))?;
        let c = runner.evolve(&low)?;
        let p1 = runner.evolve(&v1)?;
        let p0 = runner.evolve(&v0)?;
        if let Some(t) = runner.early_blowup(&[&a1, &a0, &b1, &b0, &c, &p1, &p0]) {
            report
                .notes
                .push(format!("n={n} dropped: blow-up detected at t={t}"));
            continue;
        }
        let big_d = runner
            .combination_curve("D", &[(1.0, &a1), (-1.0, &a0)], prm)?
            .with_n(n)
            .with_m(m.as_f64());
        let shifted = runner
            .combination_curve("d_shifted", &[(1.0, &p1), (-1.0, &p0)], prm)?
            .with_n(n)
            .with_m(m.as_f64());
        let i1 = runner.combination_curve("I1", &[(1.0, &a1), (-1.0, &b1)], prm)?;
        let i2 = runner.combination_curve("I2", &[(1.0, &b1), (-1.0, &c), (-1.0, &p1)], prm)?;
        let i3 = runner.combination_curve("I3", &[(1.0, &a0), (-1.0, &b0)], prm)?;
        let i4 = runner.combination_curve("I4", &[(1.0, &b0), (-1.0, &c), (-1.0, &p0)], prm)?;
        let rem: Vec<f64> = (0..big_d.values.len())
            .map(|k| i1.values[k] + i2.values[k] + i3.values[k] + i4.values[k])
            .collect();
        for ((&d, &r), &s) in big_d.values.iter().zip(&rem).zip(&shifted.values) {
            worst_share = worst_share.max(if d > 0.0 { r / d } else { f64::INFINITY });
            worst_identity = worst_identity.max(s - r - d);
        }
        let fit = fit_slope(&big_d, horizon)?;
        slopes.push((n, fit.slope));
        report.fits.push(LabeledFit {
            label: "D".into(),
            n: Some(n),
            fit,
        });
        report.fits.push(LabeledFit {
            label: "d_shifted".into(),
            n: Some(n),
            fit: fit_slope(&shifted, horizon)?,
        });
        report.curves.push(big_d);
        report.curves.push(shifted);
        for curve in [i1, i2, i3, i4] {
            report.curves.push(curve.with_n(n).with_m(m.as_f64()));
        }
    }

    packet_premises(&mut report, &fn_norms, &gap_norms, "||v1 - v0||");
    survivor_premise(&mut report, slopes.len());
    slope_conclusions(&mut report, &slopes, c_pred, 0.25, "D_n");
    report.conclusions.push(Check::at_most(
        "max over n, t of sum I_i / D_n",
        worst_share,
        0.5,
    ));
    report.conclusions.push(Check::at_most(
        "triangle identity: max(d_shifted - sum I_i - D_n)",
        if worst_identity.is_finite() {
            worst_identity
        } else {
            0.0
        },
        1e-10,
    ));
    Ok(report.finalize())
}

/// `||S_t(u0 + v) - S_t(S_n u0 + v)||_{B^s}` against the tail `||(Id - S_n) u0||`.
pub fn check_truncation_stability<T: Real>(
    settings: &Settings<T>,
    u0_preset: &Preset,
    prm: &BesovParams<T>,
    n_list: &[i32],
    omega: u8,
    m: T,
) -> Result<ExperimentReport> {
    require_theorem_params(prm)?;
    require_resolvable(&settings.grid, n_list)?;
    let grid = &settings.grid;
    let ns = sorted_unique(n_list);
    let runner = Runner::new(settings);
    let phi = build_phi(grid)?;
    let cut = CutoffPair::<T>::new();
    let cells = snap_shift(grid, m);
    let u0 = preset_u0(u0_preset, grid);
    // S_n is the identity on data banded strictly inside the chi plateau.
    let exact = |n: i32| {
        u0_preset
            .band_limit()
            .is_some_and(|b| b < CutoffPair::<f64>::new().plateau() * 2f64.powi(n))
    };

    let mut report = ExperimentReport::new("truncation_stability");
    settings.echo(&mut report);
    echo_params(&mut report, prm);
    report.echo("u0", u0_preset);
    report.echo("n_list", format!("{ns:?}"));
    report.echo("omega", omega);
    report.echo("m", m.as_f64());

    // Per surviving n: (n, exact, tail, max LHS, max ratio).
    let mut rows: Vec<(i32, bool, f64, f64, f64)> = Vec::new();
    for &n in &ns {
        let v = make_v(
            &phi,
            &PacketSpec::new(grid, n, omega, cells, prm.s)?,
            Translation::IndexRoll,
        )?;
        let low = crate::littlewood_paley::low_pass(&u0, n, &cut);
        let tail = runner.besov(&(&u0 - &low), prm)?;
        let full = runner.evolve(&(&u0 + &v))?;
        let trunc = runner.evolve(&(&low + &v))?;
        if let Some(t) = runner.early_blowup(&[&full, &trunc]) {
            report
                .notes
                .push(format!("n={n} dropped: blow-up detected at t={t}"));
            continue;
        }
        let lhs = runner
            .combination_curve("lhs", &[(1.0, &full), (-1.0, &trunc)], prm)?
            .with_n(n)
            .with_omega(omega)
            .with_m(m.as_f64());
        report.constant(format!("||(Id - S_n) u0||, n={n}"), tail);
        let max_ratio = if exact(n) {
            0.0
        } else {
            let ratio = NormCurve {
                label: "ratio".into(),
                values: lhs.values.iter().map(|v| v / tail).collect(),
                ..lhs.clone()
            };
            let r = ratio.max();
            report.curves.push(ratio);
            r
        };
        rows.push((n, exact(n), tail, lhs.max(), max_ratio));
        report.curves.push(lhs);
    }

    survivor_premise(&mut report, rows.len());
    let exact_rows: Vec<_> = rows.iter().filter(|r| r.1).collect();
    if !exact_rows.is_empty() {
        let worst = exact_rows.iter().map(|r| r.3).fold(0.0, f64::max);
        report.conclusions.push(Check::at_most(
            "max LHS where (Id - S_n) u0 = 0",
            worst,
            1e-8,
        ));
    }
    let ratio_rows: Vec<_> = rows.iter().filter(|r| !r.1).collect();
    if ratio_rows.len() >= 2 {
        let all = ratio_rows.iter().map(|r| r.4).fold(0.0, f64::max);
        let prefix = ratio_rows[..ratio_rows.len() - 1]
            .iter()
            .map(|r| r.4)
            .fold(0.0, f64::max);
        report.constant("ratio constant C (all n)", all);
        report.constant("ratio constant C (without largest n)", prefix);
        report.conclusions.push(Check::at_most(
            "ratio max change when adding largest n",
            all / prefix - 1.0,
            0.15,
        ));
        let tails_decrease = ratio_rows.windows(2).all(|w| w[1].2 < w[0].2);
        report.conclusions.push(Check::at_least(
            "tail norm decreasing in n",
            if tails_decrease { 1.0 } else { 0.0 },
            1.0,
        ));
    } else if exact_rows.is_empty() {
        report
            .notes
            .push("fewer than two n with a nonzero tail; ratio stability not assessed".into());
    }
    Ok(report.finalize())
}

/// LHS and `F_n` curves for a single decoupling run with low part `a0` and
/// packet `v0`, given the precomputed low-part trajectory.
fn decoupling_curves<T: Real>(
    runner: &Runner<'_, T>,
    prm: &BesovParams<T>,
    a0: &Field<T>,
    low: &Trajectory<T>,
    v0: &Field<T>,
) -> Result<Option<(NormCurve, NormCurve)>> {
    let both = runner.evolve(&(a0 + v0))?;
    let packet = runner.evolve(v0)?;
    if runner.early_blowup(&[&both, &packet, low]).is_some() {
        return Ok(None);
    }
    let lhs =
        runner.combination_curve("lhs", &[(1.0, &both), (-1.0, low), (-1.0, &packet)], prm)?;
    let len = lhs.values.len();
    let mut integrand = Vec::with_capacity(len);
    for i in 0..len {
        let a = &low.states()[i];
        let b = &packet.states()[i];
        let ab = a.product(b);
        let abxx = derivative(&derivative(&ab));
        let axbx = derivative(a).product(&derivative(b));
        let mut sum = 0.0;
        for f in [&ab, &abxx, &axbx] {
            sum += lebesgue_norm(f, prm.p)?.as_f64();
        }
        integrand.push(sum);
    }
    let f_curve = NormCurve::new(
        "F_n",
        lhs.times.clone(),
        cumulative_trapezoid(&lhs.times, &integrand),
    );
    Ok(Some((lhs, f_curve)))
}

/// Running integral by the trapezoid rule, starting at zero.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for i in 0..values.len() {
        if i > 0 {
            acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// Decoupling of the low part `S_n u0` and a packet shifted by each `m`.
pub fn check_decoupling<T: Real>(
    settings: &Settings<T>,
    u0_preset: &Preset,
    prm: &BesovParams<T>,
    n: i32,
    omega: u8,
    m_list: &[T],
) -> Result<ExperimentReport> {
    require_theorem_params(prm)?;
    require_resolvable(&settings.grid, &[n])?;
    if m_list.is_empty() || m_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(
            "m_list must be nonempty and increasing".into(),
        ));
    }
    let grid = &settings.grid;
    let runner = Runner::new(settings);
    let phi = build_phi(grid)?;
    let cut = CutoffPair::<T>::new();
    let u0 = preset_u0(u0_preset, grid);
    let a0 = crate::littlewood_paley::low_pass(&u0, n, &cut);
    let low = runner.evolve(&a0)?;
    let theta = 1.0 / (prm.s.as_f64() + 1.0);

    let mut report = ExperimentReport::new("decoupling");
    settings.echo(&mut report);
    echo_params(&mut report, prm);
    report.echo("u0", u0_preset);
    report.echo("n", n);
    report.echo("omega", omega);
    report.echo(
        "m_list",
        format!(
            "{:?}",
            m_list.iter().map(|m| m.as_f64()).collect::<Vec<_>>()
        ),
    );
    report.constant("theta", theta);

    let scale = 2f64.powf(n as f64 * (1.0 - theta));
    let mut finals: Vec<(f64, f64, f64)> = Vec::new();
    let mut k_hat = 0.0f64;
    for &m in m_list {
        let cells = snap_shift(grid, m);
        let mm = cells as f64 * grid.dx().as_f64();
        let v = make_v(
            &phi,
            &PacketSpec::new(grid, n, omega, cells, prm.s)?,
            Translation::IndexRoll,
        )?;
        let Some((lhs, f_curve)) = decoupling_curves(&runner, prm, &a0, &low, &v)? else {
            report
                .notes
                .push(format!("m={mm} dropped: blow-up before T0"));
            continue;
        };
        for (l, f) in lhs.values.iter().zip(&f_curve.values) {
            if *f > 0.0 {
                k_hat = k_hat.max(l / (scale * f.powf(theta)));
            }
        }
        report.constant(format!("F_n(T0), m={mm}"), f_curve.last());
        report.constant(format!("LHS(T0), m={mm}"), lhs.last());
        finals.push((mm, f_curve.last(), lhs.last()));
        report
            .curves
            .push(lhs.with_n(n).with_omega(omega).with_m(mm));
        report
            .curves
            .push(f_curve.with_n(n).with_omega(omega).with_m(mm));
    }
    report.constant("K (sup of LHS / (2^{n(1-theta)} F_n^theta))", k_hat);

    report.premises.push(Check::at_least(
        "surviving m values",
        finals.len() as f64,
        m_list.len() as f64,
    ));
    let f_mono = finals.windows(2).all(|w| w[1].1 < w[0].1);
    let l_mono = finals.windows(2).all(|w| w[1].2 < w[0].2);
    report.conclusions.push(Check::at_least(
        "F_n(T0) decreasing in m",
        f64::from(u8::from(f_mono)),
        1.0,
    ));
    report.conclusions.push(Check::at_least(
        "LHS(T0) decreasing in m",
        f64::from(u8::from(l_mono)),
        1.0,
    ));
    let per_doubling = finals
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).powf(1.0 / (w[1].0 / w[0].0).log2()))
        .fold(f64::INFINITY, f64::min);
    if finals.len() >= 2 {
        report.conclusions.push(Check::at_least(
            "F_n drop factor per doubling of m",
            per_doubling,
            3.0,
        ));
    }
    Ok(report.finalize())
}

/// Smallest `C >= 0` with `holds(C)`, assuming monotonicity in `C`.
/// Infinite when no `C` up to `1e12` works.
pub fn required_constant(holds: impl Fn(f64) -> bool) -> f64 {
    if holds(0.0) {
        return 0.0;
    }
    let mut hi = 1e-6;
    while !holds(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    let mut lo = hi / 2.0;
    if hi == 1e-6 {
        lo = 0.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `observed <= bound` up to rounding.
fn within(observed: f64, bound: f64) -> bool {
    observed <= bound * (1.0 + 1e-12) + 1e-300
}

/// Train/held-out calibration of one envelope constant.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub name: String,
    /// Required constants of the training problems.
    pub training: Vec<f64>,
    pub held_out: Vec<f64>,
    /// `CALIBRATION_MARGIN` times the training supremum.
    pub constant: f64,
    pub violations: usize,
}

impl Calibration {
    pub fn new(name: impl Into<String>, training: Vec<f64>, held_out: Vec<f64>) -> Self {
        let sup = training.iter().fold(0.0, |a: f64, &b| a.max(b));
        let constant = CALIBRATION_MARGIN * sup;
        let violations = held_out.iter().filter(|&&c| !(c <= constant)).count();
        Self {
            name: name.into(),
            training,
            held_out,
            constant,
            violations,
        }
    }

    fn record(&self, report: &mut ExperimentReport) {
        let sup = self.training.iter().fold(0.0, |a: f64, &b| a.max(b));
        report.constant(format!("{}: training sup", self.name), sup);
        report.constant(format!("{}: calibrated C", self.name), self.constant);
        report.constant(
            format!("{}: held-out sup", self.name),
            self.held_out.iter().fold(0.0, |a: f64, &b| a.max(b)),
        );
        report.conclusions.push(Check::at_most(
            format!("{}: held-out violations", self.name),
            self.violations as f64,
            0.0,
        ));
    }
}

/// Band-limited random field: one to four modulated bumps with carriers in
/// `[0, band]`, widths in `[0.5, 4]` and centres in `[-L/4, L/4]`.
pub fn random_band_field<T: Real>(grid: &Grid<T>, rng: &mut ChaCha8Rng, band: f64) -> Field<T> {
    let count = rng.random_range(1..=4);
    let quarter = grid.half_length().as_f64() / 4.0;
    let bumps: Vec<(f64, f64, f64, f64)> = (0..count)
        .map(|_| {
            let amp = rng.random_range(-1.0..1.0);
            let centre = rng.random_range(-quarter..quarter);
            let freq = rng.random_range(0.0..band.max(f64::MIN_POSITIVE));
            let width = rng.random_range(0.5..4.0);
            (amp, centre, freq, width)
        })
        .collect();
    let inv_period = grid.period().recip();
    Spectrum::from_fn(grid, |xi| {
        let mut acc = Complex::new(T::zero(), T::zero());
        for &(amp, centre, freq, width) in &bumps {
            // spectral half-width 1/width, band-limited by the ramp
            let (lo, hi) = (T::lit(0.5 / width), T::lit(1.0 / width));
            let k = T::lit(freq);
            let mag = T::lit(0.5 * amp)
                * (radial_cutoff(xi - k, lo, hi) + radial_cutoff(xi + k, lo, hi))
                * inv_period;
            let (s, c) = (xi * T::lit(centre)).sin_cos();
            acc = acc + Complex::new(c, -s) * mag;
        }
        acc
    })
    .to_field()
}

/// `(u0, u0 + eps w)` pairs of random low-band data.
pub fn nearby_pairs<T: Real>(
    grid: &Grid<T>,
    seed: u64,
    count: usize,
    eps: f64,
) -> Vec<(Field<T>, Field<T>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u = random_band_field(grid, &mut rng, 1.0);
            let w = random_band_field(grid, &mut rng, 1.0);
            let v = &u + &w.scale(T::lit(eps));
            (u, v)
        })
        .collect()
}

/// Required constants of the two-solution envelopes for one pair.
struct PairConstants {
    lower: f64,
    upper: f64,
}

fn two_solution_constants<T: Real>(
    runner: &Runner<'_, T>,
    prm: &BesovParams<T>,
    u0: &Field<T>,
    v0: &Field<T>,
) -> Result<Option<(PairConstants, NormCurve, NormCurve)>> {
    let u = runner.evolve(u0)?;
    let v = runner.evolve(v0)?;
    if runner.early_blowup(&[&u, &v]).is_some() {
        return Ok(None);
    }
    let lower_prm = prm.with_s(prm.s - T::one());
    let len = u.len().min(v.len());
    let times: Vec<f64> = u.times()[..len].iter().map(|t| t.as_f64()).collect();
    let mut w_lo = Vec::with_capacity(len);
    let mut w_hi = Vec::with_capacity(len);
    let mut sum_uv = Vec::with_capacity(len);
    let mut cross = Vec::with_capacity(len);
    for i in 0..len {
        let (a, b) = (&u.states()[i], &v.states()[i]);
        let w = a - b;
        let wl = runner.besov(&w, &lower_prm)?;
        w_lo.push(wl);
        w_hi.push(runner.besov(&w, prm)?);
        sum_uv.push(runner.besov(a, prm)? + runner.besov(b, prm)?);
        cross.push(wl * runner.besov(&derivative(b), prm)?);
    }
    let big_v = cumulative_trapezoid(&times, &sum_uv);
    let big_j = cumulative_trapezoid(&times, &cross);
    let (w0_lo, w0_hi) = (w_lo[0], w_hi[0]);
    let lower =
        required_constant(|c| (0..len).all(|i| within(w_lo[i], w0_lo * (c * big_v[i]).exp())));
    let upper = required_constant(|c| {
        (0..len).all(|i| within(w_hi[i], (w0_hi + c * big_j[i]) * (c * big_v[i]).exp()))
    });
    Ok(Some((
        PairConstants { lower, upper },
        NormCurve::new("w lower", times.clone(), w_lo),
        NormCurve::new("w", times, w_hi),
    )))
}

/// Gronwall envelopes for two solutions: `||w||_{B^{s-1}}` and `||w||_{B^s}`.
/// Constants are calibrated on `training` and asserted on `held_out`.
pub fn check_two_solution_stability<T: Real>(
    settings: &Settings<T>,
    prm: &BesovParams<T>,
    training: &[(Field<T>, Field<T>)],
    held_out: &[(Field<T>, Field<T>)],
) -> Result<ExperimentReport> {
    require_theorem_params(prm)?;
    let runner = Runner::new(settings);
    let mut report = ExperimentReport::new("two_solution_stability");
    settings.echo(&mut report);
    echo_params(&mut report, prm);
    report.echo("training pairs", training.len());
    report.echo("held-out pairs", held_out.len());
    report.constant("calibration margin", CALIBRATION_MARGIN);

    let mut sets: [(Vec<f64>, Vec<f64>); 2] = Default::default();
    for (which, pairs) in [training, held_out].into_iter().enumerate() {
        for (i, (u0, v0)) in pairs.iter().enumerate() {
            match two_solution_constants(&runner, prm, u0, v0)? {
                Some((c, lo, hi)) => {
                    sets[which].0.push(c.lower);
                    sets[which].1.push(c.upper);
                    if which == 1 {
                        let tag = format!("pair {i}");
                        report.curves.push(NormCurve {
                            label: format!("{} ({tag})", lo.label),
                            ..lo
                        });
                        report.curves.push(NormCurve {
                            label: format!("{} ({tag})", hi.label),
                            ..hi
                        });
                    }
                }
                None => report.notes.push(format!(
                    "{} pair {i} dropped: blow-up before T0",
                    if which == 0 { "training" } else { "held-out" }
                )),
            }
        }
    }
    let [(train_lo, train_hi), (held_lo, held_hi)] = sets;
    report.premises.push(Check::at_least(
        "training pairs surviving",
        train_lo.len() as f64,
        1.0,
    ));
    Calibration::new("B^{s-1} envelope", train_lo, held_lo).record(&mut report);
    Calibration::new("B^s envelope", train_hi, held_hi).record(&mut report);
    Ok(report.finalize())
}

/// Which velocity norm enters `V(t)` for the transport estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransportCase {
    /// `sigma > 1 + 1/p`, or `sigma = 1 + 1/p` with `r = 1`: `||u_x||_{B^{sigma-1}_{p,r}}`.
    Supercritical,
    /// `sigma = 1 + 1/p`, `r > 1`: `||u_x||_{B^sigma_{p,r}}`.
    Critical,
    /// `sigma < 1 + 1/p`: `||u_x||_{B^{1/p}_{p,inf}} + ||u_x||_inf`.
    Subcritical,
}

impl TransportCase {
    pub fn classify(sigma: f64, p: f64, r: f64) -> Self {
        let crit = 1.0 + 1.0 / p;
        if sigma > crit || (sigma == crit && r == 1.0) {
            TransportCase::Supercritical
        } else if sigma == crit {
            TransportCase::Critical
        } else {
            TransportCase::Subcritical
        }
    }
}

/// Steady-coefficient transport problem `f_t + u f_x = g`.
#[derive(Clone, Debug)]
pub struct TransportProblem<T: Real> {
    pub velocity: Field<T>,
    pub f0: Field<T>,
    pub source: Option<Field<T>>,
}

/// Random problems: velocity band 2, datum band 8, and a source on every
/// other problem.
pub fn transport_problems<T: Real>(
    grid: &Grid<T>,
    seed: u64,
    count: usize,
) -> Vec<TransportProblem<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let velocity =
                random_band_field(grid, &mut rng, 2.0).scale(T::lit(rng.random_range(0.5..2.0)));
            let f0 = random_band_field(grid, &mut rng, 8.0);
            let source =
                (i % 2 == 1).then(|| random_band_field(grid, &mut rng, 4.0).scale(T::lit(0.5)));
            TransportProblem {
                velocity,
                f0,
                source,
            }
        })
        .collect()
}

struct TransportConstants {
    first: f64,
    second: Option<f64>,
}

fn transport_constants<T: Real>(
    settings: &Settings<T>,
    norm: &BesovNorm<T>,
    problem: &TransportProblem<T>,
    sigma: T,
    p: T,
    r: T,
) -> Result<(TransportConstants, NormCurve)> {
    let prm = BesovParams::new(sigma, p, r)?;
    let cfg = &settings.solver;
    let velocity = Trajectory::steady(settings.model, problem.velocity.clone(), cfg.t_end);
    let src = problem.source.clone();
    let source_fn = src.as_ref().map(|g| move |_t: T| g.clone());
    let traj = match &source_fn {
        Some(f) => linear_transport_evolve(
            &problem.f0,
            &velocity,
            Some(f as &dyn Fn(T) -> Field<T>),
            cfg,
        )?,
        None => linear_transport_evolve(&problem.f0, &velocity, None, cfg)?,
    };
    let times: Vec<f64> = traj.times().iter().map(|t| t.as_f64()).collect();
    let len = times.len();

    let ux = derivative(&problem.velocity);
    let case = TransportCase::classify(sigma.as_f64(), p.as_f64(), r.as_f64());
    let v_rate = match case {
        TransportCase::Supercritical => norm.norm(&ux, &prm.with_s(sigma - T::one()))?,
        TransportCase::Critical => norm.norm(&ux, &prm)?,
        TransportCase::Subcritical => {
            let low = BesovParams::new(p.recip(), p, T::infinity())?;
            norm.norm(&ux, &low)? + ux.max_abs()
        }
    }
    .as_f64();
    let g_norm = match &problem.source {
        Some(g) => norm.norm(g, &prm)?.as_f64(),
        None => 0.0,
    };
    let f_norms: Vec<f64> = traj
        .states()
        .iter()
        .map(|f| norm.norm(f, &prm).map(|v| v.as_f64()))
        .collect::<Result<_>>()?;
    let f0 = f_norms[0];
    let big_v: Vec<f64> = times.iter().map(|t| v_rate * t).collect();

    // e^{C V(t)} (||f0|| + int_0^t e^{-C V(tau)} ||g|| dtau)
    let first = required_constant(|c| {
        (0..len).all(|i| {
            let weights: Vec<f64> = (0..=i)
                .map(|k| (c * (big_v[i] - big_v[k])).exp() * g_norm)
                .collect();
            let integral = cumulative_trapezoid(&times[..=i], &weights)[i];
            within(f_norms[i], (c * big_v[i]).exp() * f0 + integral)
        })
    });

    let second = if sigma > T::zero() {
        let ux_inf = ux.max_abs().as_f64();
        let ux_low = norm.norm(&ux, &prm.with_s(sigma - T::one()))?.as_f64();
        let mut integrand = Vec::with_capacity(len);
        for (i, f) in traj.states().iter().enumerate() {
            let fx_inf = derivative(f).max_abs().as_f64();
            integrand.push(f_norms[i] * ux_inf + ux_low * fx_inf);
        }
        let h = cumulative_trapezoid(&times, &integrand);
        Some(required_constant(|c| {
            (0..len).all(|i| within(f_norms[i], f0 + g_norm * times[i] + c * h[i]))
        }))
    } else {
        None
    };
    Ok((
        TransportConstants { first, second },
        NormCurve::new("||f||", times, f_norms),
    ))
}

/// Transport a priori estimate: both statements, calibrated on `training`
/// and asserted on `held_out`.
pub fn check_transport_apriori<T: Real>(
    settings: &Settings<T>,
    training: &[TransportProblem<T>],
    held_out: &[TransportProblem<T>],
    sigma: T,
    p: T,
    r: T,
) -> Result<ExperimentReport> {
    let lower = -(p.recip().min(T::one() - p.recip()));
    if sigma < lower {
        return Err(Error::InvalidBesovParams(format!(
            "transport estimate needs sigma >= {lower}, got {sigma}"
        )));
    }
    let norm = BesovNorm::new(&settings.grid);
    let case = TransportCase::classify(sigma.as_f64(), p.as_f64(), r.as_f64());
    let mut report = ExperimentReport::new("transport_apriori");
    settings.echo(&mut report);
    report.echo("sigma", sigma.as_f64());
    report.echo("p", p.as_f64());
    report.echo("r", r.as_f64());
    report.echo("case", format!("{case:?}"));
    report.echo("training problems", training.len());
    report.echo("held-out problems", held_out.len());
    report.constant("calibration margin", CALIBRATION_MARGIN);

    let mut first = (Vec::new(), Vec::new());
    let mut second = (Vec::new(), Vec::new());
    for (which, set) in [training, held_out].into_iter().enumerate() {
        for (i, problem) in set.iter().enumerate() {
            let (c, curve) = transport_constants(settings, &norm, problem, sigma, p, r)?;
            let (a, b) = if which == 0 {
                (&mut first.0, &mut second.0)
            } else {
                (&mut first.1, &mut second.1)
            };
            a.push(c.first);
            if let Some(s) = c.second {
                b.push(s);
            }
            if which == 1 {
                report.curves.push(NormCurve {
                    label: format!("||f|| (problem {i})"),
                    ..curve
                });
            }
        }
    }
    report.premises.push(Check::at_least(
        "training problems",
        first.0.len() as f64,
        1.0,
    ));
    Calibration::new("exponential envelope", first.0, first.1).record(&mut report);
    if !second.0.is_empty() {
        Calibration::new("integral inequality", second.0, second.1).record(&mut report);
    }
    Ok(report.finalize())
}

/// Largest interpolation defect over `count` random fields and random
/// `(s1, s2, theta, p, r)`, relative to the left-hand norm; the inequality
/// says it is never positive.
pub fn interpolation_sweep<T: Real>(
    grid: &Grid<T>,
    seed: u64,
    count: usize,
) -> Result<ExperimentReport> {
    let norm = BesovNorm::new(grid);
    let band = grid.max_frequency().as_f64() / 3.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exps = [1.0, 2.0, 4.0, f64::INFINITY];
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..count {
        let u = random_band_field(grid, &mut rng, band);
        let s1 = rng.random_range(-1.0..2.0);
        let s2 = s1 + rng.random_range(0.1..2.0);
        let theta = rng.random_range(0.05..0.95);
        let p = exps[rng.random_range(0..exps.len())];
        let r = exps[rng.random_range(0..exps.len())];
        let d = norm.interpolation_defect(
            &u,
            T::lit(s1),
            T::lit(s2),
            T::lit(theta),
            T::lit(p),
            T::lit(r),
        )?;
        let mid = BesovParams::new(
            T::lit(theta * s1 + (1.0 - theta) * s2),
            T::lit(p),
            T::lit(r),
        )?;
        worst = worst.max(d.as_f64() / norm.norm(&u, &mid)?.as_f64());
    }
    let mut report = ExperimentReport::new("interpolation_sweep");
    report.echo("grid.L", grid.half_length().as_f64());
    report.echo("grid.N", grid.num_points());
    report.echo("seed", seed);
    report.echo("count", count);
    report.constant("max relative defect", worst);
    report.conclusions.push(Check::at_most(
        "max relative interpolation defect",
        worst,
        1e-12,
    ));
    Ok(report.finalize())
}

/// Empirical supremum of the product ratio on `count` and `2 count` random
/// pairs drawn from one stream.
pub fn product_sweep<T: Real>(
    grid: &Grid<T>,
    prm: &BesovParams<T>,
    seed: u64,
    count: usize,
) -> Result<ExperimentReport> {
    let norm = BesovNorm::new(grid);
    let band = grid.max_frequency().as_f64() / 3.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sup_half = 0.0f64;
    let mut sup_full = 0.0f64;
    for i in 0..2 * count {
        let u = random_band_field(grid, &mut rng, band);
        let v = random_band_field(grid, &mut rng, band);
        let ratio = norm.product_ratio(&u, &v, prm)?.as_f64();
        if i < count {
            sup_half = sup_half.max(ratio);
        }
        sup_full = sup_full.max(ratio);
    }
    let mut report = ExperimentReport::new("product_sweep");
    report.echo("grid.L", grid.half_length().as_f64());
    report.echo("grid.N", grid.num_points());
    echo_params(&mut report, prm);
    report.echo("seed", seed);
    report.echo("count", count);
    report.constant("sup ratio (count)", sup_half);
    report.constant("sup ratio (2 count)", sup_full);
    report.conclusions.push(Check::at_most(
        "relative change of sup when doubling the sample",
        sup_full / sup_half - 1.0,
        0.1,
    ));
    Ok(report.finalize())
}

/// Reports of the default suite: the basic gap and the `u0 = gaussian`,
/// `m = L/2` decomposition, both with `(s, p, r) = (2, 2, 2)`.
pub fn default_suite<T: Real>(
    settings: &Settings<T>,
    n_list: &[i32],
) -> Result<Vec<ExperimentReport>> {
    let two = T::lit(2.0);
    let prm = BesovParams::new(two, two, two)?;
    let m = settings.grid.half_length() / two;
    Ok(vec![
        run_nonuniform_basic(settings, &prm, n_list)?,
        run_nonuniform_at(settings, &Preset::Gaussian, &prm, n_list, m)?,
    ])
}

/// Worst differences between matching fits and curves of two suites.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteComparison {
    /// Largest relative slope change.
    pub slope_change: f64,
    pub slope_worst: String,
    /// Largest sample-wise change relative to the largest curve of the same
    /// report and packet index.
    pub curve_change: f64,
    pub curve_worst: String,
}

pub fn compare_suites(base: &[ExperimentReport], other: &[ExperimentReport]) -> SuiteComparison {
    let mut out = SuiteComparison {
        slope_change: if base.len() == other.len() {
            0.0
        } else {
            f64::INFINITY
        },
        slope_worst: String::new(),
        curve_change: 0.0,
        curve_worst: String::new(),
    };
    for (a, b) in base.iter().zip(other) {
        for fa in &a.fits {
            let change = b.fit(&fa.label, fa.n).map_or(f64::INFINITY, |fb| {
                (fb.slope - fa.fit.slope).abs() / fa.fit.slope.abs()
            });
            if !(change <= out.slope_change) {
                out.slope_change = change;
                out.slope_worst = format!("{} {} n={:?}", a.experiment, fa.label, fa.n);
            }
        }
        for ca in &a.curves {
            let change = match b.curves.iter().find(|c| c.key() == ca.key()) {
                Some(cb) if cb.times.len() == ca.times.len() => {
                    let diff = ca
                        .values
                        .iter()
                        .zip(&cb.values)
                        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
                    let scale = a
                        .curves
                        .iter()
                        .filter(|c| c.n == ca.n)
                        .fold(0.0f64, |m, c| m.max(c.max().abs()));
                    if scale > 0.0 {
                        diff / scale
                    } else {
                        diff
                    }
                }
                _ => f64::INFINITY,
            };
            if !(change <= out.curve_change) {
                out.curve_change = change;
                out.curve_worst = format!(
                    "{} {} n={:?} (max {:.3e})",
                    a.experiment,
                    ca.label,
                    ca.n,
                    ca.max()
                );
            }
        }
    }
    out
}

/// Resolution and domain robustness of the default suite: `fine` doubles
/// `N`, `wide` doubles `L` and `N`.
pub fn check_robustness(
    base: &[ExperimentReport],
    fine: &[ExperimentReport],
    wide: &[ExperimentReport],
) -> ExperimentReport {
    let f = compare_suites(base, fine);
    let w = compare_suites(base, wide);
    let mut report = ExperimentReport::new("robustness");
    report.echo(
        "suites",
        base.iter()
            .map(|r| r.experiment.as_str())
            .collect::<Vec<_>>()
            .join(","),
    );
    report.notes.push(format!(
        "N doubled: worst slope {}, worst curve {}",
        f.slope_worst, f.curve_worst
    ));
    report
        .notes
        .push(format!("L doubled: worst slope {}", w.slope_worst));
    report.conclusions.push(Check::at_most(
        "slope change, N doubled",
        f.slope_change,
        0.01,
    ));
    report.constant(
        "curve change relative to packet scale, N doubled",
        f.curve_change,
    );
    report.conclusions.push(Check::at_most(
        "slope change, L doubled",
        w.slope_change,
        0.05,
    ));
    report.finalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_settings() -> Settings<f64> {
        let grid = Grid::new(16.0 * std::f64::consts::PI, 2048).unwrap();
        Settings::with_grid(grid)
    }

    fn prm() -> BesovParams<f64> {
        BesovParams::new(2.0, 2.0, 2.0).unwrap()
    }

    #[test]
    fn fit_of_linear_curve_is_exact() {
        let times: Vec<f64> = (0..=25).map(|i| i as f64 * 0.01).collect();
        let values = times.iter().map(|t| 3.0 * t).collect();
        let fit = fit_slope(&NormCurve::new("c", times, values), 0.25).unwrap();
        assert_relative_eq!(fit.slope, 3.0, epsilon = 1e-14);
        assert!(fit.residual < 1e-14);
    }

    #[test]
    fn fit_of_zero_curve_is_zero() {
        let times: Vec<f64> = (0..=25).map(|i| i as f64 * 0.01).collect();
        let fit = fit_slope(&NormCurve::new("c", times, vec![0.0; 26]), 0.25).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.residual, 0.0);
    }

    #[test]
    fn fit_ignores_samples_past_horizon() {
        let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.01).collect();
        let values = times
            .iter()
            .map(|&t| if t <= 0.25 { 2.0 * t } else { 100.0 })
            .collect();
        let fit = fit_slope(&NormCurve::new("c", times, values), 0.25).unwrap();
        assert_relative_eq!(fit.slope, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_needs_enough_samples() {
        let times = vec![0.0, 0.1, 0.2, 0.25];
        let err = fit_slope(&NormCurve::new("c", times, vec![0.0; 4]), 0.25).unwrap_err();
        assert_eq!(
            err,
            Error::TooFewSamples {
                needed: 8,
                found: 4
            }
        );
    }

    #[test]
    fn fit_needs_coverage() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.01).collect();
        assert!(matches!(
            fit_slope(&NormCurve::new("c", times, vec![0.0; 11]), 0.25),
            Err(Error::TimeRange { .. })
        ));
    }

    #[test]
    fn failed_premise_invalidates_conclusions() {
        let mut r = ExperimentReport::new("x");
        r.premises.push(Check::at_most("p", 2.0, 1.0));
        r.conclusions.push(Check::at_least("c", 2.0, 1.0));
        let r = r.finalize();
        assert_eq!(r.conclusions[0].verdict, Verdict::Invalidated);
        assert_eq!(r.overall(), Verdict::Fail);

        let mut r = ExperimentReport::new("y");
        r.premises.push(Check::at_most("p", 0.0, 1.0));
        r.conclusions.push(Check::at_least("c", 2.0, 1.0));
        assert_eq!(r.finalize().overall(), Verdict::Pass);
    }

    #[test]
    fn required_constant_bisects_threshold() {
        let c = required_constant(|c| c >= 0.37);
        assert!((c - 0.37).abs() < 1e-12);
        assert_eq!(required_constant(|_| true), 0.0);
        assert_eq!(required_constant(|_| false), f64::INFINITY);
    }

    #[test]
    fn calibration_counts_held_out_violations() {
        let cal = Calibration::new("e", vec![1.0, 2.0], vec![3.0, 4.5, f64::INFINITY]);
        assert_eq!(cal.constant, 4.0);
        assert_eq!(cal.violations, 2);
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let t = [0.0, 0.5, 1.0, 2.0];
        let v: Vec<f64> = t.iter().map(|x| 2.0 * x).collect();
        let out = cumulative_trapezoid(&t, &v);
        assert_relative_eq!(out[3], 4.0, epsilon = 1e-15);
        assert_relative_eq!(out[1], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn transport_cases_follow_index_table() {
        assert_eq!(
            TransportCase::classify(2.0, 2.0, 2.0),
            TransportCase::Supercritical
        );
        assert_eq!(
            TransportCase::classify(1.5, 2.0, 1.0),
            TransportCase::Supercritical
        );
        assert_eq!(
            TransportCase::classify(1.5, 2.0, 2.0),
            TransportCase::Critical
        );
        assert_eq!(
            TransportCase::classify(1.0, 2.0, 2.0),
            TransportCase::Subcritical
        );
    }

    #[test]
    fn sample_times_match_trajectory() {
        let s = small_settings();
        let times = s.sample_times();
        assert_eq!(times.len(), 26);
        assert_relative_eq!(times[25], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn theorem_experiments_reject_low_regularity() {
        let s = small_settings();
        let low = BesovParams::new(1.2, 2.0, 2.0).unwrap();
        assert!(matches!(
            run_nonuniform_basic(&s, &low, &[4]),
            Err(Error::InvalidBesovParams(_))
        ));
    }

    #[test]
    fn unresolvable_n_is_rejected() {
        let s = small_settings();
        assert!(matches!(
            run_nonuniform_basic(&s, &prm(), &[9]),
            Err(Error::Unresolvable { .. })
        ));
    }

    #[test]
    fn decoupling_requires_increasing_m() {
        let s = small_settings();
        assert!(check_decoupling(&s, &Preset::Gaussian, &prm(), 4, 1, &[16.0, 8.0]).is_err());
    }

    #[test]
    fn identical_data_give_zero_gap() {
        let s = small_settings();
        let runner = Runner::new(&s);
        let phi = build_phi(&s.grid).unwrap();
        let f = make_f_n(&phi, 4, 2.0).unwrap();
        let a = runner.evolve(&f).unwrap();
        let b = runner.evolve(&f).unwrap();
        let curve = runner
            .combination_curve("d", &[(1.0, &a), (-1.0, &b)], &prm())
            .unwrap();
        assert!(curve.max() <= 1e-10);
    }

    #[test]
    fn zero_velocity_transport_needs_no_constant() {
        let s = Settings::with_grid(Grid::new(8.0 * std::f64::consts::PI, 256).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f0 = random_band_field(&s.grid, &mut rng, 4.0);
        let problem = TransportProblem {
            velocity: Field::zeros(&s.grid),
            f0,
            source: None,
        };
        let norm = BesovNorm::new(&s.grid);
        let (c, curve) = transport_constants(&s, &norm, &problem, 2.0, 2.0, 2.0).unwrap();
        assert_eq!(c.first, 0.0);
        assert_eq!(c.second, Some(0.0));
        let f0n = curve.values[0];
        assert!(curve.values.iter().all(|v| (v - f0n).abs() <= 1e-12 * f0n));
    }

    #[test]
    fn random_band_field_is_reproducible_and_band_limited() {
        let g = Grid::<f64>::new(8.0 * std::f64::consts::PI, 512).unwrap();
        let a = random_band_field(&g, &mut ChaCha8Rng::seed_from_u64(9), 3.0);
        let b = random_band_field(&g, &mut ChaCha8Rng::seed_from_u64(9), 3.0);
        assert_eq!(a.values(), b.values());
        let spec = a.to_spectrum();
        for (c, &xi) in spec.coeffs().iter().zip(g.frequencies()) {
            if xi.abs() > 3.0 + 2.0 {
                assert!(c.norm() < 1e-15);
            }
        }
    }
}
