//! Numerical integration of the viscosity flow
//!
//! ```text
//! x'(t) + x(t) = theta(t) f(x(t)) + (1 - theta(t)) T(x(t))
//! ```
//!
//! and of its perturbed, projected variant
//!
//! ```text
//! y'(t) + y(t) = P_C(theta(t) f(y(t)) + (1 - theta(t)) T(y(t)) + h(t)).
//! ```
//!
//! Integration lands exactly on every recording time; the adaptive method
//! carries its step proposal across recording boundaries.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::Problem;
use crate::quad;
use crate::schedule::{ThetaSchedule, ThetaSequence};
use crate::space::Point;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Euler {
        h: f64,
    },
    Rk4 {
        h: f64,
    },
    /// Dormand-Prince 5(4) with embedded error control.
    Rk45 {
        abs_tol: f64,
        rel_tol: f64,
    },
}

/// Which times end up in the trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Recording {
    /// `count` times with `log(1 + t)` equally spaced on `[0, t_end]`.
    LogSpaced { count: usize },
    /// `0, stride, 2 stride, ...` and `t_end`.
    Uniform { stride: f64 },
    /// Explicit times in `[0, t_end]`; `0` is added when missing.
    Times { times: Vec<f64> },
}

impl Default for Recording {
    fn default() -> Self {
        Recording::LogSpaced { count: 512 }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    /// Apply `P_C` after every accepted step.
    #[serde(default = "default_true")]
    pub project_each_step: bool,
    pub t_end: f64,
    #[serde(default)]
    pub recording: Recording,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Rk45 {
                abs_tol: 1e-9,
                rel_tol: 1e-9,
            },
            project_each_step: true,
            t_end: 1e3,
            recording: Recording::default(),
        }
    }
}

impl SolverConfig {
    pub fn rk45(tol: f64, t_end: f64) -> Self {
        SolverConfig {
            method: Method::Rk45 {
                abs_tol: tol,
                rel_tol: tol,
            },
            t_end,
            ..SolverConfig::default()
        }
    }

    pub fn fixed(method: Method, t_end: f64) -> Self {
        SolverConfig {
            method,
            t_end,
            ..SolverConfig::default()
        }
    }

    pub fn with_recording(mut self, recording: Recording) -> Self {
        self.recording = recording;
        self
    }

    pub fn with_projection(mut self, on: bool) -> Self {
        self.project_each_step = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::input(format!("t_end must be positive, got {}", self.t_end)));
        }
        match self.method {
            Method::Euler { h } | Method::Rk4 { h } if !(h > 0.0 && h.is_finite()) => {
                return Err(Error::input(format!("step size must be positive, got {h}")));
            }
            Method::Rk45 { abs_tol, rel_tol } if !(abs_tol > 0.0 && rel_tol > 0.0) => {
                return Err(Error::input("tolerances must be positive"));
            }
            _ => {}
        }
        match &self.recording {
            Recording::LogSpaced { count } if *count < 2 => {
                Err(Error::input("log-spaced recording needs at least two samples"))
            }
            Recording::Uniform { stride } if !(*stride > 0.0) => Err(Error::input("recording stride must be positive")),
            Recording::Times { times }
                if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|t| !(*t >= 0.0 && *t <= self.t_end)) =>
            {
                Err(Error::input("recording times must increase within [0, t_end]"))
            }
            _ => Ok(()),
        }
    }

    /// Scale of the integration error: the tolerance for rk45, `h` for
    /// Euler and `h^4` for rk4.
    pub fn nominal_tolerance(&self) -> f64 {
        match self.method {
            Method::Euler { h } => h,
            Method::Rk4 { h } => h.powi(4),
            Method::Rk45 { abs_tol, rel_tol } => abs_tol.max(rel_tol),
        }
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let t_end = self.t_end;
        let mut times: Vec<f64> = match &self.recording {
            Recording::LogSpaced { count } => {
                let span = (1.0 + t_end).ln();
                (0..*count)
                    .map(|k| (span * k as f64 / (*count - 1) as f64).exp_m1())
                    .collect()
            }
            Recording::Uniform { stride } => {
                let n = (t_end / stride).floor() as usize;
                (0..=n).map(|k| k as f64 * stride).collect()
            }
            Recording::Times { times } => {
                let mut v = times.clone();
                if v.first() != Some(&0.0) {
                    v.insert(0, 0.0);
                }
                v
            }
        };
        times[0] = 0.0;
        if !matches!(self.recording, Recording::Times { .. }) {
            if let Some(last) = times.last_mut() {
                if (*last - t_end).abs() <= 1e-9 * t_end {
                    *last = t_end;
                }
            }
            if *times.last().unwrap_or(&0.0) < t_end {
                times.push(t_end);
            }
        }
        times.dedup_by(|b, a| *b <= *a);
        times
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationClass {
    /// `h ∈ L¹([0, ∞))`
    L1,
    /// `||h(t)|| / theta(t) -> 0`
    OTheta,
    Neither,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationKind {
    Zero,
    /// `c * u / (1 + t)^p` with `u` the normalized `direction`.
    PowerDecay {
        c: f64,
        p: f64,
        direction: Point,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    #[serde(flatten)]
    pub kind: PerturbationKind,
    pub class_claim: PerturbationClass,
}

impl Perturbation {
    pub fn zero() -> Self {
        Perturbation {
            kind: PerturbationKind::Zero,
            class_claim: PerturbationClass::L1,
        }
    }

    pub fn power_decay(c: f64, p: f64, direction: Point, class_claim: PerturbationClass) -> Result<Self> {
        let h = Perturbation {
            kind: PerturbationKind::PowerDecay { c, p, direction },
            class_claim,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if let PerturbationKind::PowerDecay { c, p, direction } = &self.kind {
            if !(c.is_finite() && p.is_finite() && *p >= 0.0) {
                return Err(Error::input("perturbation needs finite c and p >= 0"));
            }
            if direction.norm() == 0.0 {
                return Err(Error::input("perturbation direction must be nonzero"));
            }
        }
        Ok(())
    }

    pub fn at(&self, t: f64, dim: usize) -> Point {
        match &self.kind {
            PerturbationKind::Zero => Point::zeros(dim),
            PerturbationKind::PowerDecay { c, p, direction } => {
                direction.scaled(c / direction.norm() / (1.0 + t).powf(*p))
            }
        }
    }

    fn magnitude(&self, t: f64) -> f64 {
        match &self.kind {
            PerturbationKind::Zero => 0.0,
            PerturbationKind::PowerDecay { c, p, .. } => c.abs() / (1.0 + t).powf(*p),
        }
    }

    /// Class implied by the formula and the schedule.
    pub fn classify(&self, schedule: &ThetaSchedule) -> PerturbationClass {
        match &self.kind {
            PerturbationKind::Zero => PerturbationClass::L1,
            PerturbationKind::PowerDecay { c, .. } if *c == 0.0 => PerturbationClass::L1,
            PerturbationKind::PowerDecay { p, .. } if *p > 1.0 => PerturbationClass::L1,
            PerturbationKind::PowerDecay { p, .. } => match schedule.is_power() {
                Some((_, nu)) if *p > nu => PerturbationClass::OTheta,
                Some(_) => PerturbationClass::Neither,
                None => match schedule.kind {
                    crate::schedule::ScheduleKind::Constant { .. } if *p > 0.0 => PerturbationClass::OTheta,
                    _ => PerturbationClass::Neither,
                },
            },
        }
    }

    /// Numeric evidence on `[0, horizon]` that `class_claim` is right.
    pub fn check_claim(&self, schedule: &ThetaSchedule, horizon: f64) -> bool {
        let half = 0.5 * horizon;
        let int_half = quad::integrate(|s| self.magnitude(s), 0.0, half, 1e-10);
        let int_tail = quad::integrate(|s| self.magnitude(s), half, horizon, 1e-10);
        let l1 = int_tail <= 1e-2 * int_half.max(f64::MIN_POSITIVE) || int_half + int_tail == 0.0;
        let ratio = |t: f64| self.magnitude(t) / schedule.value(t);
        let o_theta = ratio(horizon) <= 0.9 * ratio(half) || ratio(horizon) <= 1e-12;
        match self.class_claim {
            PerturbationClass::L1 => l1,
            PerturbationClass::OTheta => o_theta,
            PerturbationClass::Neither => !l1 && !o_theta,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Recorded solution of a flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Point>,
    /// `||x'(t)||`, the norm of the right-hand side at each record.
    pub derivative_norms: Vec<f64>,
    /// `||x(t) - T(x(t))||`
    pub residuals: Vec<f64>,
    pub problem: Problem,
    pub schedule: ThetaSchedule,
    pub config: SolverConfig,
    pub perturbation: Option<Perturbation>,
    pub stats: SolverStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial(&self) -> &Point {
        &self.states[0]
    }

    pub fn last(&self) -> (f64, &Point) {
        let i = self.len() - 1;
        (self.times[i], &self.states[i])
    }

    /// Linear interpolation of the state at `t` within the recorded range.
    pub fn state_at(&self, t: f64) -> Option<Point> {
        let (first, last) = (*self.times.first()?, *self.times.last()?);
        if t < first || t > last {
            return None;
        }
        let i = self.times.partition_point(|&s| s <= t).min(self.len() - 1);
        if i == 0 || self.times[i - 1] == t {
            return Some(self.states[i.saturating_sub(1)].clone());
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        Some(self.states[i - 1].lincomb(1.0 - w, &self.states[i], w))
    }

    /// CSV with columns `t,x_0..x_{d-1},residual,deriv_norm,dist_qstar`.
    pub fn write_csv<W: Write>(&self, out: W, q_star: Option<&Point>) -> Result<()> {
        let rows = self.times.iter().enumerate().map(|(i, t)| Row {
            index: fmt_float(*t),
            state: &self.states[i],
            residual: self.residuals[i],
            deriv: self.derivative_norms[i],
        });
        write_table(out, "t", self.problem.dim(), rows, q_star)
    }
}

pub(crate) struct Row<'a> {
    pub index: String,
    pub state: &'a Point,
    pub residual: f64,
    pub deriv: f64,
}

/// 17 significant digits.
pub(crate) fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn write_table<'a, W: Write>(
    mut out: W,
    index_label: &str,
    dim: usize,
    rows: impl Iterator<Item = Row<'a>>,
    q_star: Option<&Point>,
) -> Result<()> {
    let mut header = vec![index_label.to_string()];
    header.extend((0..dim).map(|i| format!("x_{i}")));
    header.extend(["residual", "deriv_norm", "dist_qstar"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let mut cells = vec![row.index];
        cells.extend(row.state.coords().iter().map(|c| fmt_float(*c)));
        cells.push(fmt_float(row.residual));
        cells.push(fmt_float(row.deriv));
        cells.push(q_star.map_or(String::new(), |q| fmt_float(row.state.distance(q))));
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// `theta f(x) + (1 - theta) T(x)`, the convex combination both the flow and
/// the discrete iteration are built from.
pub(crate) fn anchored_average(p: &Problem, theta: f64, x: &Point) -> Result<Point> {
    let tx = p.operator.apply(x)?;
    let fx = p.contraction.apply(x)?;
    Ok(fx.lincomb(theta, &tx, 1.0 - theta))
}

/// Right-hand side `theta(t) f(x) + (1 - theta(t)) T(x) - x`.
pub fn rhs_cds(p: &Problem, s: &ThetaSchedule, t: f64, x: &Point) -> Result<Point> {
    x.check_dim(p.dim())?;
    let theta = s.theta(t)?;
    Ok(&anchored_average(p, theta, x)? - x)
}

/// Right-hand side `P_C(theta f(x) + (1 - theta) T(x) + h(t)) - x`.
pub fn rhs_pcds(p: &Problem, s: &ThetaSchedule, h: &Perturbation, t: f64, x: &Point) -> Result<Point> {
    x.check_dim(p.dim())?;
    let theta = s.theta(t)?;
    let shifted = &anchored_average(p, theta, x)? + &h.at(t, p.dim());
    Ok(&p.domain.project(&shifted)? - x)
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

fn combine(y: &Point, h: f64, terms: &[(f64, &Point)]) -> Point {
    let mut v = y.clone().into_coords();
    for (w, k) in terms {
        if *w == 0.0 {
            continue;
        }
        for (vi, ki) in v.iter_mut().zip(k.coords()) {
            *vi += h * w * ki;
        }
    }
    Point::new(v).unwrap_or_else(|_| y.clone())
}

struct Integrator<'a, F> {
    rhs: F,
    problem: &'a Problem,
    cfg: &'a SolverConfig,
    stats: SolverStats,
}

impl<F> Integrator<'_, F>
where
    F: Fn(f64, &Point) -> Result<Point>,
{
    fn eval(&mut self, t: f64, y: &Point) -> Result<Point> {
        self.stats.rhs_evals += 1;
        let k = (self.rhs)(t, y)?;
        if !k.is_finite() {
            return Err(Error::input(format!("right-hand side is not finite at t = {t}")));
        }
        Ok(k)
    }

    fn finish_step(&self, y: Point) -> Result<Point> {
        if self.cfg.project_each_step {
            self.problem.domain.project(&y)
        } else {
            Ok(y)
        }
    }

    fn fixed_step(&mut self, t: f64, y: &Point, h: f64) -> Result<Point> {
        let next = match self.cfg.method {
            Method::Euler { .. } => {
                let k1 = self.eval(t, y)?;
                combine(y, h, &[(1.0, &k1)])
            }
            _ => {
                let k1 = self.eval(t, y)?;
                let k2 = self.eval(t + 0.5 * h, &combine(y, h, &[(0.5, &k1)]))?;
                let k3 = self.eval(t + 0.5 * h, &combine(y, h, &[(0.5, &k2)]))?;
                let k4 = self.eval(t + h, &combine(y, h, &[(1.0, &k3)]))?;
                combine(
                    y,
                    h,
                    &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)],
                )
            }
        };
        self.stats.accepted += 1;
        self.finish_step(next)
    }

    /// Attempts one Dormand-Prince step; returns the new state (if accepted)
    /// and the error-controlled proposal for the next step size.
    fn dopri_step(&mut self, t: f64, y: &Point, h: f64, atol: f64, rtol: f64) -> Result<(Option<Point>, f64)> {
        let k1 = self.eval(t, y)?;
        let k2 = self.eval(t + C2 * h, &combine(y, h, &[(A21, &k1)]))?;
        let k3 = self.eval(t + C3 * h, &combine(y, h, &[(A31, &k1), (A32, &k2)]))?;
        let k4 = self.eval(t + C4 * h, &combine(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
        let k5 = self.eval(
            t + C5 * h,
            &combine(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        )?;
        let k6 = self.eval(
            t + h,
            &combine(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        )?;
        let y_new = combine(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = self.eval(t + h, &y_new)?;

        let d = y.dim() as f64;
        let mut acc = 0.0;
        for i in 0..y.dim() {
            let err = h
                * (E1 * k1.coords()[i]
                    + E3 * k3.coords()[i]
                    + E4 * k4.coords()[i]
                    + E5 * k5.coords()[i]
                    + E6 * k6.coords()[i]
                    + E7 * k7.coords()[i]);
            let sc = atol + rtol * y.coords()[i].abs().max(y_new.coords()[i].abs());
            acc += (err / sc).powi(2);
        }
        let err = (acc / d).sqrt();
        let factor = if err == 0.0 {
            MAX_FACTOR
        } else {
            (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
        };
        if err <= 1.0 {
            self.stats.accepted += 1;
            Ok((Some(self.finish_step(y_new)?), h * factor))
        } else {
            self.stats.rejected += 1;
            Ok((None, h * factor.min(1.0)))
        }
    }

    fn initial_step(&mut self, t: f64, y: &Point, atol: f64, rtol: f64) -> Result<f64> {
        let scaled = |v: &Point, base: &Point| {
            let d = v.dim() as f64;
            (v.coords()
                .iter()
                .zip(base.coords())
                .map(|(a, b)| (a / (atol + rtol * b.abs())).powi(2))
                .sum::<f64>()
                / d)
                .sqrt()
        };
        let f0 = self.eval(t, y)?;
        let d0 = scaled(y, y);
        let d1 = scaled(&f0, y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1 = combine(y, h0, &[(1.0, &f0)]);
        let f1 = self.eval(t + h0, &y1)?;
        let d2 = scaled(&(&f1 - &f0), y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        Ok((100.0 * h0).min(h1))
    }
}

/// Integrates the flow from `x0` over `[0, cfg.t_end]`. With `pert` the
/// projected, perturbed right-hand side is used.
pub fn integrate(
    p: &Problem,
    s: &ThetaSchedule,
    x0: &Point,
    cfg: &SolverConfig,
    pert: Option<&Perturbation>,
) -> Result<Trajectory> {
    p.validate()?;
    s.validate()?;
    cfg.validate()?;
    if let Some(h) = pert {
        h.validate()?;
    }
    if s.sup() > 1.0 {
        return Err(Error::input(format!(
            "theta must stay in (0, 1], but reaches {}; enable clamping",
            s.sup()
        )));
    }
    x0.check_dim(p.dim())?;
    p.domain.require_member(x0, "initial point x0")?;

    let rhs = |t: f64, x: &Point| match pert {
        Some(h) => rhs_pcds(p, s, h, t, x),
        None => rhs_cds(p, s, t, x),
    };
    let mut integ = Integrator {
        rhs,
        problem: p,
        cfg,
        stats: SolverStats::default(),
    };

    let sample_times = cfg.sample_times();
    let mut traj = Trajectory {
        times: Vec::with_capacity(sample_times.len()),
        states: Vec::with_capacity(sample_times.len()),
        derivative_norms: Vec::with_capacity(sample_times.len()),
        residuals: Vec::with_capacity(sample_times.len()),
        problem: p.clone(),
        schedule: s.clone(),
        config: cfg.clone(),
        perturbation: pert.cloned(),
        stats: SolverStats::default(),
    };

    let record = |traj: &mut Trajectory, integ: &mut Integrator<'_, _>, t: f64, y: &Point| -> Result<()> {
        let d = integ.eval(t, y)?.norm();
        traj.times.push(t);
        traj.states.push(y.clone());
        traj.derivative_norms.push(d);
        traj.residuals.push(p.residual(y)?);
        Ok(())
    };

    let mut t = 0.0;
    let mut y = x0.clone();
    record(&mut traj, &mut integ, t, &y)?;

    let mut h_next = match cfg.method {
        Method::Rk45 { abs_tol, rel_tol } => integ.initial_step(t, &y, abs_tol, rel_tol)?,
        Method::Euler { h } | Method::Rk4 { h } => h,
    };

    for &target in &sample_times[1..] {
        while t < target {
            let remaining = target - t;
            match cfg.method {
                Method::Euler { h } | Method::Rk4 { h } => {
                    // Avoid a sliver step from round-off in the step count.
                    let step = if remaining <= h * (1.0 + 1e-9) { remaining } else { h };
                    y = integ.fixed_step(t, &y, step)?;
                    t = if step == remaining { target } else { t + step };
                }
                Method::Rk45 { abs_tol, rel_tol } => {
                    let clipped = h_next >= remaining;
                    let step = if clipped { remaining } else { h_next };
                    if step < 16.0 * f64::EPSILON * t.abs().max(1.0) {
                        traj.stats = integ.stats.clone();
                        return Err(Error::StepUnderflow {
                            t,
                            partial: Box::new(traj),
                        });
                    }
                    let (accepted, proposal) = integ.dopri_step(t, &y, step, abs_tol, rel_tol)?;
                    if let Some(next) = accepted {
                        y = next;
                        t = if clipped { target } else { t + step };
                        // A clipped step says nothing about the natural size.
                        h_next = if clipped { proposal.max(h_next) } else { proposal };
                    } else {
                        h_next = proposal;
                    }
                }
            }
        }
        record(&mut traj, &mut integ, target, &y)?;
    }
    traj.stats = integ.stats;
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerBridgeReport {
    pub steps: usize,
    /// Largest gap divided by `max(1, sup ||x_n||)`.
    pub max_gap: f64,
    pub max_abs_gap: f64,
}

/// Runs explicit Euler with step one on the flow (theta sampled as
/// `theta_n`) next to the discrete viscosity iteration and reports the
/// largest gap over `n <= steps`.
pub fn euler_dds_equivalence<S: ThetaSequence>(
    p: &Problem,
    seq: &S,
    x1: &Point,
    steps: usize,
) -> Result<EulerBridgeReport> {
    let dds = crate::discrete::iterate_dds(p, seq, x1, steps)?;
    let mut y = x1.clone();
    let mut max_abs_gap = 0.0_f64;
    let mut scale = 1.0_f64;
    for (n, x) in dds.states.iter().enumerate() {
        max_abs_gap = max_abs_gap.max(y.distance(x));
        scale = scale.max(x.norm());
        let theta = seq.theta_n(n + 1);
        let field = &anchored_average(p, theta, &y)? - &y;
        y = y.axpy(1.0, &field);
    }
    Ok(EulerBridgeReport {
        steps,
        max_gap: max_abs_gap / scale,
        max_abs_gap,
    })
}
