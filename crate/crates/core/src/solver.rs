//! Pseudospectral b-family solver in nonlocal transport form
//!
//! ```text
//! u_t + u u_x = -d/dx (1 - d^2/dx^2)^{-1} ( (b/2) u^2 + ((3-b)/2) u_x^2 ),
//! ```
//!
//! (`b = 2` Camassa-Holm, `b = 3` Degasperis-Procesi), a linear transport
//! evolver, and conservation/blow-up diagnostics.
//!
//! States are marched in DFT space with classical RK4. The advection term is
//! evaluated as `-(u^2)_x / 2`, which coincides with `-u u_x` on the dealiased
//! band and keeps the mean exactly constant.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{derivative, nonlocal_p, Derivative, Field, Grid, NonlocalP};

/// The b-family parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams<T: Real> {
    pub b: T,
}

impl<T: Real> ModelParams<T> {
    pub fn new(b: T) -> Result<Self> {
        if !b.is_finite() {
            return Err(Error::InvalidConfig(format!("b must be finite, got {b}")));
        }
        Ok(Self { b })
    }

    pub fn camassa_holm() -> Self {
        Self { b: T::lit(2.0) }
    }

    pub fn degasperis_procesi() -> Self {
        Self { b: T::lit(3.0) }
    }
}

/// Time-stepping parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig<T: Real> {
    pub dt: T,
    pub t_end: T,
    pub sample_every: usize,
    pub dealias: bool,
    pub blowup_slope_threshold: T,
    pub blowup_norm_threshold: T,
}

impl<T: Real> SolverConfig<T> {
    pub const DEFAULT_SLOPE_THRESHOLD: f64 = 1e3;
    pub const DEFAULT_NORM_THRESHOLD: f64 = 1e6;

    /// Config sampling every step, with dealiasing and default thresholds.
    pub fn new(dt: T, t_end: T) -> Self {
        Self {
            dt,
            t_end,
            sample_every: 1,
            dealias: true,
            blowup_slope_threshold: T::lit(Self::DEFAULT_SLOPE_THRESHOLD),
            blowup_norm_threshold: T::lit(Self::DEFAULT_NORM_THRESHOLD),
        }
    }

    /// `0.5 dx / max(1, ||u0||_inf)`.
    pub fn default_dt(u0: &Field<T>) -> T {
        T::lit(0.5) * u0.grid().dx() / T::one().max(u0.max_abs())
    }

    pub fn with_sample_every(self, sample_every: usize) -> Self {
        Self {
            sample_every,
            ..self
        }
    }

    pub fn with_dealias(self, dealias: bool) -> Self {
        Self { dealias, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end > T::zero()) || !self.t_end.is_finite() {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.dt > self.t_end {
            return bad(format!("dt = {} exceeds t_end = {}", self.dt, self.t_end));
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1".into());
        }
        if !(self.blowup_slope_threshold > T::zero()) || !(self.blowup_norm_threshold > T::zero()) {
            return bad("blow-up thresholds must be positive".into());
        }
        Ok(())
    }

    /// Number of steps and the step actually used: `t_end` is reached exactly.
    pub fn step_plan(&self) -> (usize, T) {
        let ratio = self.t_end / self.dt;
        let mut steps = ratio.round();
        if (ratio - steps).abs() > T::lit(1e-9) * ratio {
            steps = ratio.ceil();
        }
        let steps = steps.to_usize().unwrap_or(1).max(1);
        (steps, self.t_end / T::from_count(steps))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Status<T> {
    Completed,
    BlowupDetected { time: T },
}

/// Sampled solution `t -> S_t(u0)`.
#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    model: ModelParams<T>,
    times: Vec<T>,
    states: Vec<Field<T>>,
    status: Status<T>,
}

impl<T: Real> Trajectory<T> {
    /// A trajectory made of given samples, e.g. a prescribed velocity field.
    pub fn from_samples(
        model: ModelParams<T>,
        times: Vec<T>,
        states: Vec<Field<T>>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::InvalidArgument(
                "trajectory needs matching, nonempty times and states".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("sample times must increase".into()));
        }
        Ok(Self {
            model,
            times,
            states,
            status: Status::Completed,
        })
    }

    /// Constant-in-time trajectory on `[0, t_end]`.
    pub fn steady(model: ModelParams<T>, state: Field<T>, t_end: T) -> Self {
        Self {
            model,
            times: vec![T::zero(), t_end],
            states: vec![state.clone(), state],
            status: Status::Completed,
        }
    }

    pub fn model(&self) -> ModelParams<T> {
        self.model
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn states(&self) -> &[Field<T>] {
        &self.states
    }

    pub fn status(&self) -> Status<T> {
        self.status
    }

    pub fn is_completed(&self) -> bool {
        self.status == Status::Completed
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_time(&self) -> T {
        *self.times.last().expect("trajectory is nonempty")
    }

    pub fn final_state(&self) -> &Field<T> {
        self.states.last().expect("trajectory is nonempty")
    }

    /// Linear interpolation in time; `t` must lie in the sampled range.
    pub fn interpolate(&self, t: T) -> Result<Field<T>> {
        let last = self.last_time();
        let slack = T::lit(1e-9) * T::one().max(last);
        if t < -slack || t > last + slack {
            return Err(Error::TimeRange {
                available: last.as_f64(),
                requested: t.as_f64(),
            });
        }
        if self.times.len() == 1 {
            return Ok(self.states[0].clone());
        }
        let i = match self.times.iter().position(|&s| s > t) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => self.times.len() - 2,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = ((t - t0) / (t1 - t0)).max(T::zero()).min(T::one());
        Ok(self.states[i].zip_with(&self.states[i + 1], |a, b| a + (b - a) * w))
    }
}

/// Spectral tables shared by the b-family and transport right-hand sides.
#[derive(Clone, Debug)]
struct Tables<T: Real> {
    ik: Vec<Complex<T>>,
    pd: Vec<Complex<T>>,
    mask: Vec<T>,
}

impl<T: Real> Tables<T> {
    fn new(grid: &Grid<T>, dealias: bool) -> Self {
        let mask = (0..grid.num_points())
            .map(|i| {
                if !dealias || grid.is_dealias_kept(grid.mode_index(i)) {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect();
        Self {
            ik: grid.tabulate(&Derivative),
            pd: grid.tabulate(&NonlocalP),
            mask,
        }
    }
}

fn axpy<T: Real>(a: &[Complex<T>], h: T, k: &[Complex<T>]) -> Vec<Complex<T>> {
    a.iter().zip(k).map(|(&x, &y)| x + y * h).collect()
}

fn rk4_combine<T: Real>(
    u: &[Complex<T>],
    h: T,
    k1: &[Complex<T>],
    k2: &[Complex<T>],
    k3: &[Complex<T>],
    k4: &[Complex<T>],
) -> Vec<Complex<T>> {
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    (0..u.len())
        .map(|i| u[i] + (k1[i] + (k2[i] + k3[i]) * two + k4[i]) * sixth)
        .collect()
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(
        T::zero(),
        |acc, x| if x.abs() > acc { x.abs() } else { acc },
    )
}

/// The b-family semidiscretization on one grid.
#[derive(Clone, Debug)]
pub struct BFamily<T: Real> {
    grid: Grid<T>,
    model: ModelParams<T>,
    tables: Tables<T>,
}

impl<T: Real> BFamily<T> {
    pub fn new(grid: &Grid<T>, model: ModelParams<T>, dealias: bool) -> Self {
        Self {
            grid: grid.clone(),
            model,
            tables: Tables::new(grid, dealias),
        }
    }

    pub fn model(&self) -> ModelParams<T> {
        self.model
    }

    /// Right-hand side in DFT space, plus the physical `u` and `u_x` it used.
    fn rhs_raw(&self, uh: &[Complex<T>]) -> (Vec<Complex<T>>, Vec<T>, Vec<T>) {
        let t = &self.tables;
        let u = self.grid.idft_real(uh.to_vec());
        let ux = self
            .grid
            .idft_real(uh.iter().zip(&t.ik).map(|(&c, &s)| c * s).collect());
        let half_b = self.model.b * T::lit(0.5);
        let half_rest = (T::lit(3.0) - self.model.b) * T::lit(0.5);
        let sq: Vec<T> = u.iter().map(|&v| v * v).collect();
        let q: Vec<T> = sq
            .iter()
            .zip(&ux)
            .map(|(&s, &d)| half_b * s + half_rest * d * d)
            .collect();
        let sq_h = self.grid.dft(&sq);
        let q_h = self.grid.dft(&q);
        let half = T::lit(0.5);
        let out = (0..uh.len())
            .map(|i| (t.pd[i] * q_h[i] - t.ik[i] * sq_h[i] * half) * t.mask[i])
            .collect();
        (out, u, ux)
    }

    /// `-u u_x - d/dx Lambda^{-2}((b/2) u^2 + ((3-b)/2) u_x^2)`.
    pub fn rhs(&self, u: &Field<T>) -> Field<T> {
        let (r, _, _) = self.rhs_raw(&self.grid.dft(u.values()));
        Field::from_raw(&self.grid, self.grid.idft_real(r))
    }

    fn step_raw(&self, uh: &[Complex<T>], k1: Vec<Complex<T>>, h: T) -> Vec<Complex<T>> {
        let half = h * T::lit(0.5);
        let (k2, _, _) = self.rhs_raw(&axpy(uh, half, &k1));
        let (k3, _, _) = self.rhs_raw(&axpy(uh, half, &k2));
        let (k4, _, _) = self.rhs_raw(&axpy(uh, h, &k3));
        rk4_combine(uh, h, &k1, &k2, &k3, &k4)
    }

    /// One classical RK4 step.
    pub fn step(&self, u: &Field<T>, dt: T) -> Field<T> {
        let uh = self.grid.dft(u.values());
        let (k1, _, _) = self.rhs_raw(&uh);
        let next = self.step_raw(&uh, k1, dt);
        Field::from_raw(&self.grid, self.grid.idft_real(next))
    }

    /// Fixed-step march with sampling and blow-up detection. `states[0]` is
    /// `u0` itself; the final time is always sampled.
    pub fn evolve(&self, u0: &Field<T>, cfg: &SolverConfig<T>) -> Result<Trajectory<T>> {
        cfg.validate()?;
        if u0.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let (steps, h) = cfg.step_plan();
        let mut times = vec![T::zero()];
        let mut states = vec![u0.clone()];
        let mut status = Status::Completed;
        let mut uh = self.grid.dft(u0.values());
        let exceeded = |u: &[T], ux: &[T]| {
            let (mu, mux) = (max_abs(u), max_abs(ux));
            !mu.is_finite()
                || !mux.is_finite()
                || mu > cfg.blowup_norm_threshold
                || mux > cfg.blowup_slope_threshold
        };
        for step in 0..steps {
            let (k1, u, ux) = self.rhs_raw(&uh);
            if exceeded(&u, &ux) {
                status = Status::BlowupDetected {
                    time: T::from_count(step) * h,
                };
                break;
            }
            uh = self.step_raw(&uh, k1, h);
            let done = step + 1;
            if done % cfg.sample_every == 0 || done == steps {
                let u = self.grid.idft_real(uh.clone());
                if u.iter().any(|v| !v.is_finite()) {
                    status = Status::BlowupDetected {
                        time: T::from_count(done) * h,
                    };
                    break;
                }
                times.push(if done == steps {
                    cfg.t_end
                } else {
                    T::from_count(done) * h
                });
                states.push(Field::from_raw(&self.grid, u));
            }
        }
        if status == Status::Completed {
            let (_, u, ux) = self.rhs_raw(&uh);
            if exceeded(&u, &ux) {
                status = Status::BlowupDetected { time: cfg.t_end };
            }
        }
        Ok(Trajectory {
            model: self.model,
            times,
            states,
            status,
        })
    }
}

/// Right-hand side with dealiasing.
pub fn rhs<T: Real>(u: &Field<T>, model: ModelParams<T>) -> Field<T> {
    BFamily::new(u.grid(), model, true).rhs(u)
}

/// `B(f, g) = P(D)(f g + f_x g_x / 2)`.
pub fn bilinear_b<T: Real>(f: &Field<T>, g: &Field<T>) -> Field<T> {
    let fx = derivative(f);
    let gx = derivative(g);
    let half = T::lit(0.5);
    let inner = f.product(g).zip_with(&fx.product(&gx), |a, b| a + half * b);
    nonlocal_p(&inner)
}

/// One dealiased RK4 step.
pub fn step<T: Real>(u: &Field<T>, dt: T, model: ModelParams<T>) -> Field<T> {
    BFamily::new(u.grid(), model, true).step(u, dt)
}

pub fn evolve<T: Real>(
    u0: &Field<T>,
    model: ModelParams<T>,
    cfg: &SolverConfig<T>,
) -> Result<Trajectory<T>> {
    BFamily::new(u0.grid(), model, cfg.dealias).evolve(u0, cfg)
}

/// RK4 march of `f_t + u f_x = g` with `u` interpolated linearly from the
/// samples of `velocity`. `source` defaults to zero.
pub fn linear_transport_evolve<T: Real>(
    f0: &Field<T>,
    velocity: &Trajectory<T>,
    source: Option<&dyn Fn(T) -> Field<T>>,
    cfg: &SolverConfig<T>,
) -> Result<Trajectory<T>> {
    cfg.validate()?;
    let grid = f0.grid().clone();
    let available = velocity.last_time();
    if available + T::lit(1e-9) * T::one().max(available) < cfg.t_end {
        return Err(Error::TimeRange {
            available: available.as_f64(),
            requested: cfg.t_end.as_f64(),
        });
    }
    if velocity.states()[0].grid() != &grid {
        return Err(Error::GridMismatch);
    }
    let tables = Tables::new(&grid, cfg.dealias);
    let rhs_at = |fh: &[Complex<T>], t: T| -> Result<Vec<Complex<T>>> {
        let u = velocity.interpolate(t.min(available))?;
        let fx = grid.idft_real(fh.iter().zip(&tables.ik).map(|(&c, &s)| c * s).collect());
        let prod: Vec<T> = u.values().iter().zip(&fx).map(|(&a, &b)| a * b).collect();
        let prod_h = grid.dft(&prod);
        let mut out: Vec<Complex<T>> = prod_h
            .iter()
            .zip(&tables.mask)
            .map(|(&c, &m)| -c * m)
            .collect();
        if let Some(src) = source {
            let g = src(t);
            for (o, c) in out.iter_mut().zip(grid.dft(g.values())) {
                *o = *o + c;
            }
        }
        Ok(out)
    };
    let (steps, h) = cfg.step_plan();
    let half = h * T::lit(0.5);
    let mut times = vec![T::zero()];
    let mut states = vec![f0.clone()];
    let mut status = Status::Completed;
    let mut fh = grid.dft(f0.values());
    for step in 0..steps {
        let t = T::from_count(step) * h;
        let k1 = rhs_at(&fh, t)?;
        let k2 = rhs_at(&axpy(&fh, half, &k1), t + half)?;
        let k3 = rhs_at(&axpy(&fh, half, &k2), t + half)?;
        let k4 = rhs_at(&axpy(&fh, h, &k3), t + h)?;
        fh = rk4_combine(&fh, h, &k1, &k2, &k3, &k4);
        let done = step + 1;
        if done % cfg.sample_every == 0 || done == steps {
            let f = grid.idft_real(fh.clone());
            let m = max_abs(&f);
            if !m.is_finite() || m > cfg.blowup_norm_threshold {
                status = Status::BlowupDetected {
                    time: T::from_count(done) * h,
                };
                break;
            }
            times.push(if done == steps {
                cfg.t_end
            } else {
                T::from_count(done) * h
            });
            states.push(Field::from_raw(&grid, f));
        }
    }
    Ok(Trajectory {
        model: velocity.model(),
        times,
        states,
        status,
    })
}

/// `mass = int u dx` (equal to `int (u - u_xx) dx` on the torus) and
/// `h1_energy = int (u^2 + u_x^2) dx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conserved<T> {
    pub mass: T,
    pub h1_energy: T,
}

pub fn conserved_quantities<T: Real>(u: &Field<T>) -> Conserved<T> {
    let dx = u.grid().dx();
    let ux = derivative(u);
    let mass = dx * u.values().iter().copied().sum::<T>();
    let energy = dx
        * u.values()
            .iter()
            .zip(ux.values())
            .map(|(&a, &b)| a * a + b * b)
            .sum::<T>();
    Conserved {
        mass,
        h1_energy: energy,
    }
}
