use std::f64::consts::PI;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use chnu::besov::{BesovNorm, BesovParams};
use chnu::experiments::{
    check_decoupling, check_robustness, check_transport_apriori, check_truncation_stability,
    check_two_solution_stability, default_suite, fit_slope, frozen_phase_oracle,
    frozen_phase_slope_l2, interpolation_sweep, nearby_pairs, predicted_slope, product_sweep,
    random_band_field, run_nonuniform_at, run_nonuniform_basic, transport_problems, Check,
    ExperimentReport, NormCurve, Settings, Verdict, C_PRED, ORACLE_REFERENCE_N,
};
use chnu::initial_data::{
    build_phi, make_f_n, make_g_n, make_peakon, max_resolvable_index, preset_u0, Preset,
};
use chnu::littlewood_paley::{decompose, max_block_index, CutoffPair};
use chnu::solver::{conserved_quantities, BFamily, ModelParams, SolverConfig, Status};
use chnu::spectral::{helmholtz_inverse, lebesgue_norm};
use chnu::{Field64, Grid64};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{parse_config, ExperimentName, RunConfig};
use crate::error::{exit, CliError};
use crate::report::{overall, write_report, write_report_named};

/// Perturbation size of the two-solution pairs.
const PAIR_EPS: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(
    name = "chnu",
    version,
    about = "Besov-space experiments for the b-family of shallow-water equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the Besov norm of a preset or of samples read from a file.
    BesovNorm(BesovNormArgs),
    /// Evolve the configured datum and write a trajectory report.
    Solve(ConfigArg),
    /// Run one experiment and write its report.
    Experiment {
        /// Experiment name, e.g. nonuniform_basic.
        name: String,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Check a config (when given) and run the invariant suite on a small grid.
    Validate {
        #[arg(long)]
        config: Option<String>,
    },
    /// Compute the frozen-phase and Helmholtz-kernel reference values.
    Oracle(ConfigArg),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// TOML config path, or `default` for built-in defaults.
    #[arg(long, default_value = "default")]
    config: String,
}

#[derive(Debug, Args)]
struct BesovNormArgs {
    /// Preset name, e.g. gaussian or low_band_random(7).
    #[arg(long, conflicts_with = "file", required_unless_present = "file")]
    preset: Option<String>,
    /// Whitespace-separated samples on the grid `x_j = -L + j 2L/N`.
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    s: f64,
    #[arg(long, default_value = "2", value_parser = parse_exponent)]
    p: f64,
    #[arg(long, default_value = "2", value_parser = parse_exponent)]
    r: f64,
    /// Half-length of the periodic box.
    #[arg(long = "half-length", default_value_t = chnu::experiments::DEFAULT_HALF_LENGTH)]
    half_length: f64,
    /// Grid size for presets; files use their sample count.
    #[arg(long, default_value_t = chnu::experiments::DEFAULT_POINTS)]
    points: usize,
}

fn parse_exponent(s: &str) -> Result<f64, String> {
    match s {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => s
            .parse()
            .map_err(|_| format!("expected a number or inf, got {s:?}")),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::USAGE
            } else {
                exit::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::BesovNorm(args) => besov_norm(&args),
        Command::Solve(c) => solve(&load(&c.config, None)?),
        Command::Experiment { name, config } => {
            let name = ExperimentName::parse(&name).ok_or_else(|| {
                let known: Vec<_> = ExperimentName::ALL.iter().map(|e| e.as_str()).collect();
                CliError::Usage(format!(
                    "unknown experiment {name:?}; expected one of {}",
                    known.join(", ")
                ))
            })?;
            experiment(&load(&config.config, Some(name))?)
        }
        Command::Validate { config } => {
            if let Some(c) = config {
                load(&c, None)?;
                println!("config ok");
            }
            validate()
        }
        Command::Oracle(c) => oracle(&load(&c.config, None)?),
    }
}

/// Reads `path` (or the defaults for `default`), overriding the experiment
/// name when given.
fn load(path: &str, name: Option<ExperimentName>) -> Result<RunConfig, CliError> {
    let mut cfg = if path == "default" {
        RunConfig::default()
    } else {
        parse_config(Path::new(path))?
    };
    if let Some(name) = name {
        cfg.experiment.name = name;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn grid(cfg: &RunConfig) -> Result<Grid64, CliError> {
    Ok(Grid64::new(cfg.grid.half_length, cfg.grid.points)?)
}

fn settings(cfg: &RunConfig) -> Result<Settings<f64>, CliError> {
    let mut solver = SolverConfig::new(cfg.solver.dt, cfg.t_end())
        .with_sample_every(cfg.solver.sample_every)
        .with_dealias(cfg.solver.dealias);
    solver.blowup_slope_threshold = cfg.solver.slope_threshold;
    solver.blowup_norm_threshold = cfg.solver.norm_threshold;
    Ok(Settings::new(
        grid(cfg)?,
        ModelParams::new(cfg.model.b)?,
        solver,
        cfg.experiment.horizon,
    )?)
}

fn print_reports(reports: &[ExperimentReport]) {
    for r in reports {
        for c in r.premises.iter().chain(&r.conclusions) {
            println!(
                "{} {}: {}: {:e} {} {:e}",
                c.verdict,
                r.experiment,
                c.name,
                c.value,
                c.relation.symbol(),
                c.threshold
            );
        }
        for note in &r.notes {
            println!("note {}: {note}", r.experiment);
        }
    }
    println!("overall: {}", overall(reports));
}

fn finish(
    reports: &[ExperimentReport],
    cfg: &RunConfig,
    stem: Option<&str>,
) -> Result<i32, CliError> {
    let files = match stem {
        Some(stem) => write_report_named(reports, cfg, stem)?,
        None => write_report(reports, cfg)?,
    };
    print_reports(reports);
    for path in [files.summary, files.curves, files.plot]
        .into_iter()
        .flatten()
    {
        println!("wrote {}", path.display());
    }
    Ok(if overall(reports) == Verdict::Pass {
        exit::SUCCESS
    } else {
        exit::VERDICT
    })
}

fn besov_norm(args: &BesovNormArgs) -> Result<i32, CliError> {
    let prm = BesovParams::new(args.s, args.p, args.r)?;
    let u = match (&args.preset, &args.file) {
        (Some(name), _) => {
            let preset: Preset = name.parse()?;
            preset_u0(&preset, &Grid64::new(args.half_length, args.points)?)
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::MissingFile {
                path: path.clone(),
                message: e.to_string(),
            })?;
            let values = text
                .split_whitespace()
                .map(|w| w.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let g = Grid64::new(args.half_length, values.len())?;
            Field64::new(&g, values)?
        }
        (None, None) => {
            return Err(CliError::Usage(
                "one of --preset or --file is required".into(),
            ))
        }
    };
    println!("{}", BesovNorm::new(u.grid()).norm(&u, &prm)?);
    Ok(exit::SUCCESS)
}

fn solve(cfg: &RunConfig) -> Result<i32, CliError> {
    let s = settings(cfg)?;
    let prm = cfg.besov_params()?;
    let preset = cfg.u0_preset()?;
    let u0 = preset_u0(&preset, &s.grid);
    let tr = BFamily::new(&s.grid, s.model, s.solver.dealias).evolve(&u0, &s.solver)?;
    let norm = BesovNorm::new(&s.grid);
    let times = tr.times().to_vec();
    let mut besov = Vec::new();
    let mut sup = Vec::new();
    let mut mass = Vec::new();
    let mut energy = Vec::new();
    for u in tr.states() {
        besov.push(norm.norm(u, &prm)?);
        sup.push(u.max_abs());
        let c = conserved_quantities(u);
        mass.push(c.mass);
        energy.push(c.h1_energy);
    }
    let mut r = ExperimentReport::new("solve");
    r.echo("u0", &preset);
    r.echo("b", cfg.model.b);
    r.curves
        .push(NormCurve::new("||u||_B", times.clone(), besov));
    r.curves
        .push(NormCurve::new("||u||_inf", times.clone(), sup));
    r.curves.push(NormCurve::new("mass", times.clone(), mass));
    r.curves.push(NormCurve::new("H1 energy", times, energy));
    r.constant("final time", tr.last_time());
    match tr.status() {
        Status::Completed => r.notes.push("completed".into()),
        Status::BlowupDetected { time } => {
            r.constant("blow-up detected at", time);
            r.notes.push(format!("blow-up detected at t = {time}"));
        }
    }
    let stem = format!(
        "solve_{}_{}",
        cfg.experiment.u0.replace(['(', ')'], ""),
        &cfg.hash()[..12]
    );
    finish(&[r.finalize()], cfg, Some(&stem))
}

fn experiment(cfg: &RunConfig) -> Result<i32, CliError> {
    let s = settings(cfg)?;
    let prm = cfg.besov_params()?;
    let n_list = &cfg.experiment.n_list;
    let seed = cfg.experiment.seed;
    let count = cfg.samples();
    let reports = match cfg.experiment.name {
        ExperimentName::NonuniformBasic => vec![run_nonuniform_basic(&s, &prm, n_list)?],
        ExperimentName::NonuniformAt => vec![run_nonuniform_at(
            &s,
            &cfg.u0_preset()?,
            &prm,
            n_list,
            cfg.m(),
        )?],
        ExperimentName::TruncationStability => vec![check_truncation_stability(
            &s,
            &cfg.u0_preset()?,
            &prm,
            n_list,
            cfg.experiment.omega,
            cfg.m(),
        )?],
        ExperimentName::Decoupling => vec![check_decoupling(
            &s,
            &cfg.u0_preset()?,
            &prm,
            cfg.experiment.n,
            cfg.experiment.omega,
            &cfg.m_list(),
        )?],
        ExperimentName::TwoSolutionStability => vec![check_two_solution_stability(
            &s,
            &prm,
            &nearby_pairs(&s.grid, seed, count, PAIR_EPS),
            &nearby_pairs(&s.grid, seed.wrapping_add(1), count, PAIR_EPS),
        )?],
        ExperimentName::TransportApriori => vec![check_transport_apriori(
            &s,
            &transport_problems(&s.grid, seed, count),
            &transport_problems(&s.grid, seed.wrapping_add(1), count),
            prm.s,
            prm.p,
            prm.r,
        )?],
        ExperimentName::InterpolationSweep => vec![interpolation_sweep(&s.grid, seed, count)?],
        ExperimentName::ProductSweep => vec![product_sweep(&s.grid, &prm, seed, count)?],
        ExperimentName::Robustness => {
            let (l, n) = (s.grid.half_length(), s.grid.num_points());
            let mut base = default_suite(&s, n_list)?;
            let fine = default_suite(&s.regrid(Grid64::new(l, 2 * n)?), n_list)?;
            let wide = default_suite(&s.regrid(Grid64::new(2.0 * l, 2 * n)?), n_list)?;
            let r = check_robustness(&base, &fine, &wide);
            base.push(r);
            base
        }
    };
    finish(&reports, cfg, None)
}

/// Fast invariant suite on a small grid.
fn validate() -> Result<i32, CliError> {
    let g = Grid64::new(8.0 * PI, 512)?;
    let cut = CutoffPair::<f64>::new();
    let mut r = ExperimentReport::new("validate");
    r.echo("grid", format!("L = 8 pi, N = {}", g.num_points()));

    let j_max = max_block_index(&g, &cut);
    let xi_max = g.max_frequency();
    let unity = (0..=1000)
        .map(|i| {
            let xi = xi_max * i as f64 / 1000.0;
            ((-1..=j_max).map(|j| cut.block_symbol(j, xi)).sum::<f64>() - 1.0).abs()
        })
        .fold(0.0, f64::max);
    r.conclusions
        .push(Check::at_most("partition of unity defect", unity, 1e-12));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fields: Vec<Field64> = (0..8)
        .map(|_| random_band_field(&g, &mut rng, 20.0))
        .collect();
    let norm = BesovNorm::new(&g);
    let prm = BesovParams::new(2.0, 2.0, 2.0)?;
    let mut recon = 0.0f64;
    let mut triangle = 0.0f64;
    let mut translation = 0.0f64;
    for pair in fields.windows(2) {
        let (u, v) = (&pair[0], &pair[1]);
        let back = decompose(u, &cut).reconstruct();
        recon = recon.max((&back - u).max_abs() / u.max_abs());
        let (nu, nv) = (norm.norm(u, &prm)?, norm.norm(v, &prm)?);
        triangle = triangle.max(norm.norm(&(u + v), &prm)? / (nu + nv) - 1.0);
        translation = translation.max((norm.norm(&u.shift_cells(77), &prm)? / nu - 1.0).abs());
    }
    r.conclusions
        .push(Check::at_most("block reconstruction error", recon, 1e-12));
    r.conclusions.push(Check::at_most(
        "triangle inequality excess",
        triangle,
        1e-12,
    ));
    r.conclusions.push(Check::at_most(
        "translation invariance defect",
        translation,
        1e-12,
    ));

    let pg = Grid64::new(16.0 * PI, 4096)?;
    let phi = build_phi(&pg)?;
    let mut off_block = 0.0f64;
    let mut halving = 0.0f64;
    for n in 3..=5 {
        let f = make_f_n(&phi, n, 2.0)?;
        let total = lebesgue_norm(&f, 2.0)?;
        for (j, block) in decompose(&f, &cut).iter() {
            if j != n {
                off_block = off_block.max(lebesgue_norm(block, 2.0)? / total);
            }
        }
        let (a, b) = (make_g_n(&phi, n), make_g_n(&phi, n + 1));
        halving = halving.max((lebesgue_norm(&b, 2.0)? / lebesgue_norm(&a, 2.0)? - 0.5).abs());
    }
    r.conclusions
        .push(Check::at_most("f_n off-block L2 ratio", off_block, 1e-12));
    r.conclusions
        .push(Check::at_most("g_n halving defect", halving, 1e-12));

    let u0 = preset_u0(&Preset::Gaussian, &g);
    let c0 = conserved_quantities(&u0);
    let cfg = SolverConfig::new(0.001, 0.5).with_sample_every(50);
    let mut energy = 0.0f64;
    let mut mass = 0.0f64;
    for b in [2.0, 3.0] {
        let tr = BFamily::new(&g, ModelParams::new(b)?, true).evolve(&u0, &cfg)?;
        for u in tr.states() {
            let c = conserved_quantities(u);
            mass = mass.max((c.mass - c0.mass).abs());
            if b == 2.0 {
                energy = energy.max((c.h1_energy / c0.h1_energy - 1.0).abs());
            }
        }
    }
    r.conclusions
        .push(Check::at_most("H1 energy drift (b = 2)", energy, 1e-6));
    r.conclusions
        .push(Check::at_most("mass drift (b = 2, 3)", mass, 1e-10));

    let r = r.finalize();
    print_reports(std::slice::from_ref(&r));
    Ok(if r.overall() == Verdict::Pass {
        exit::SUCCESS
    } else {
        exit::VERDICT
    })
}

/// Largest off-kink error of the Helmholtz inverse of a grid delta against
/// the periodized kernel `exp(-|x|) / 2`, on `L = 16`, `N = 2^16`.
fn kernel_oracle() -> Result<f64, CliError> {
    let g = Grid64::new(16.0, 1 << 16)?;
    let n = g.num_points();
    let mut v = vec![0.0; n];
    v[n / 2] = 1.0 / g.dx();
    let out = helmholtz_inverse(&Field64::new(&g, v)?);
    let kernel = make_peakon(&g, 0.5, 0.0);
    Ok((0..n)
        .filter(|&i| g.x(i).abs() >= 1.0)
        .map(|i| (out.values()[i] - kernel.values()[i]).abs())
        .fold(0.0, f64::max))
}

fn oracle(cfg: &RunConfig) -> Result<i32, CliError> {
    let s = settings(cfg)?;
    let prm = cfg.besov_params()?;
    let mut r = ExperimentReport::new("oracle");
    let top = max_resolvable_index(&s.grid);
    for &n in &cfg.experiment.n_list {
        if top.is_some_and(|top| n <= top) {
            let curve = frozen_phase_oracle(&s, &prm, n)?;
            r.constant(
                format!("frozen-phase slope, n={n}"),
                fit_slope(&curve, s.horizon)?.slope,
            );
            r.curves.push(curve);
        }
    }
    let c_pred = predicted_slope(&s, &prm)?;
    r.echo(
        "reference n",
        ORACLE_REFERENCE_N.min(top.unwrap_or(ORACLE_REFERENCE_N)),
    );
    r.constant("c_pred", c_pred);
    r.constant("c_pred committed", C_PRED);
    if prm.p == 2.0 {
        let closed = frozen_phase_slope_l2(&build_phi(&s.grid)?);
        r.constant("||phi^2||_2 / sqrt 2", closed);
        r.conclusions.push(Check::at_most(
            "c_pred vs closed form: relative difference",
            (c_pred / closed - 1.0).abs(),
            1e-3,
        ));
    }
    let kernel = kernel_oracle()?;
    r.constant("helmholtz kernel max error, |x| >= 1", kernel);
    r.conclusions.push(Check::at_most(
        "helmholtz kernel error off the kink",
        kernel,
        1e-8,
    ));
    let stem = format!("oracle_{}", &cfg.hash()[..12]);
    finish(&[r.finalize()], cfg, Some(&stem))
}
