//! Ground truth and diagnostics: the variational solution `q*`, its
//! residual, the Gronwall-type estimate, rate fits and verdicts on
//! trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{PerturbationClass, Trajectory};
use crate::operators::Problem;
use crate::space::{ConvexSet, DomainSampler, Point, INTERSECTION_TOL};

/// Residuals below this are numerically zero and left out of log fits.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// Minimum number of samples in a rate-fit window.
pub const MIN_WINDOW_SAMPLES: usize = 30;

/// Allowed slack on the fitted slope: pass iff `slope <= -nu + SLOPE_TOL`.
pub const SLOPE_TOL: f64 = 0.1;

/// Tolerated relative growth of the scaled residual sup from one half
/// window to the next.
pub const SCALED_SUP_REL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Residuals at the numerical floor; nothing to fit.
    Floor,
    /// The hypothesis of the check does not hold.
    NotApplicable,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_failure(self) -> bool {
        self == Verdict::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VpSolution {
    pub q_star: Point,
    pub iterations: usize,
    pub final_gap: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// `||q_{k+1} - q_k||` for every iteration.
    pub gaps: Vec<f64>,
    /// `||T(q*) - q*||`
    pub fixed_point_defect: f64,
    #[serde(skip)]
    slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    /// Largest `(gap_{k+1} - eps_k) / gap_k` over gaps above `1e-8`, with
    /// `eps_k` the round-off allowance of one iteration.
    pub max_ratio: f64,
    /// Every consecutive pair satisfies
    /// `gap_{k+1} <= (alpha + 1e-12) gap_k + round-off`.
    pub ok: bool,
}

impl VpSolution {
    /// A-priori distance bound `alpha^k / (1 - alpha) * ||q_1 - q_0||`.
    pub fn a_priori_bound(&self, k: usize) -> f64 {
        let first = self.gaps.first().copied().unwrap_or(0.0);
        self.alpha.powi(k as i32) / self.gamma * first
    }

    pub fn certificate(&self) -> ContractionCertificate {
        let mut max_ratio = 0.0_f64;
        let mut ok = true;
        for w in self.gaps.windows(2) {
            if w[0] >= 1e-8 {
                max_ratio = max_ratio.max((w[1] - self.slack).max(0.0) / w[0]);
            }
            if w[1] > (self.alpha + 1e-12) * w[0] + self.slack {
                ok = false;
            }
        }
        ContractionCertificate { max_ratio, ok }
    }
}

/// Banach iteration `q <- P_Fix(T)(f(q))` from `P_Fix(T)(x_init)` until two
/// iterates are within `tol`.
pub fn solve_vp(p: &Problem, x_init: &Point, tol: f64, max_iter: usize) -> Result<VpSolution> {
    if !(tol > 0.0) {
        return Err(Error::input("tolerance must be positive"));
    }
    x_init.check_dim(p.dim())?;
    let fix = p
        .fix_set()
        .ok_or_else(|| Error::Unsupported("Fix(T) unknown; q* cannot be computed".into()))?;
    let projection_slack = match fix {
        ConvexSet::Intersection { .. } => 2.0 * INTERSECTION_TOL,
        _ => 0.0,
    };
    let mut q = fix.project(x_init)?;
    let mut gaps = Vec::new();
    let mut scale = q.norm();
    for k in 1..=max_iter {
        let next = fix.project(&p.f(&q)?)?;
        let gap = next.distance(&q);
        gaps.push(gap);
        q = next;
        scale = scale.max(q.norm());
        if gap <= tol {
            let fixed_point_defect = p.residual(&q)?;
            return Ok(VpSolution {
                q_star: q,
                iterations: k,
                final_gap: gap,
                alpha: p.alpha(),
                gamma: p.gamma(),
                gaps,
                fixed_point_defect,
                slack: 8.0 * f64::EPSILON * (1.0 + scale) + projection_slack,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        last_gap: gaps.last().copied().unwrap_or(f64::NAN),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VpResidualReport {
    pub max_value: f64,
    pub probes: usize,
    pub pass: bool,
}

/// `max_z <f(q) - q, z - q>` over probes `z ∈ Fix(T)`; passes iff `<= tol`.
pub fn vp_residual(q: &Point, p: &Problem, probes: &[Point], tol: f64) -> Result<VpResidualReport> {
    q.check_dim(p.dim())?;
    let dir = &p.f(q)? - q;
    let mut max_value = f64::NEG_INFINITY;
    for (i, z) in probes.iter().enumerate() {
        let defect = p.residual(z)?;
        if defect > 1e-9 {
            return Err(Error::input(format!(
                "probe {i} is not a fixed point (||Tz - z|| = {defect:.3e})"
            )));
        }
        max_value = max_value.max(dir.dot(&(z - q)));
    }
    if probes.is_empty() {
        max_value = 0.0;
    }
    Ok(VpResidualReport {
        max_value,
        probes: probes.len(),
        pass: max_value <= tol,
    })
}

/// `count` seeded samples of `Fix(T)`.
pub fn fix_probes(p: &Problem, sampler: &mut DomainSampler, count: usize) -> Result<Vec<Point>> {
    let fix = p.fix_set().ok_or_else(|| Error::Unsupported("Fix(T) unknown".into()))?;
    sampler.samples_in(&fix, count)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub inequality_ok: bool,
    /// `None` when the differential inequality already fails.
    pub bound_ok: Option<bool>,
    /// `max (u' + 2 v u - 2 w sqrt(u))` with `u'` from central differences.
    pub max_raw_violation: f64,
    /// The same, less the estimated differencing error at each node.
    pub max_inequality_violation: f64,
    /// `max (sqrt(u) - e^{-V} sqrt(u0) - e^{-V} ∫ e^{V} w)`
    pub max_raw_bound_violation: f64,
    /// The same, less the effect of the estimated quadrature error in `V`.
    pub max_bound_violation: f64,
}

/// Value at `x` of the parabola through three samples.
fn quadratic_at(xs: [f64; 3], us: [f64; 3], x: f64) -> f64 {
    let [x0, x1, x2] = xs;
    let [u0, u1, u2] = us;
    u0 * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2))
        + u1 * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2))
        + u2 * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1))
}

/// Derivative at `x` of the parabola through three samples.
fn three_point_derivative(xs: [f64; 3], us: [f64; 3], x: f64) -> f64 {
    let [x0, x1, x2] = xs;
    let [u0, u1, u2] = us;
    u0 * ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2))
        + u1 * ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2))
        + u2 * ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1))
}

/// Checks `u' + 2 v u <= 2 w sqrt(u)` on the grid (central differences)
/// and the integrated bound
/// `sqrt(u(t)) <= e^{-V(t)} sqrt(u(0)) + e^{-V(t)} ∫_0^t e^{V(s)} w(s) ds`
/// with `V = ∫ v` (trapezoid rule). Both sides allow for the estimated
/// discretization error of the grid; the raw violations are reported too.
pub fn gronwall_check(grid: &[f64], u: &[f64], v: &[f64], w: &[f64], tol: f64) -> Result<GronwallReport> {
    let n = grid.len();
    if n < 3 || u.len() != n || v.len() != n || w.len() != n {
        return Err(Error::input("need at least 3 grid points and matching sample lengths"));
    }
    if grid.windows(2).any(|g| g[1] <= g[0]) {
        return Err(Error::input("grid must be strictly increasing"));
    }
    for (name, s) in [("u", u), ("v", v), ("w", w)] {
        if let Some(i) = s.iter().position(|x| !(*x >= 0.0)) {
            return Err(Error::input(format!("{name}[{i}] is negative or NaN")));
        }
    }

    let derivative = |j: usize, at: usize| {
        three_point_derivative(
            [grid[j - 1], grid[j], grid[j + 1]],
            [u[j - 1], u[j], u[j + 1]],
            grid[at],
        )
    };
    let mut max_raw = f64::NEG_INFINITY;
    let mut max_ineq = f64::NEG_INFINITY;
    for i in 0..n {
        let j = i.clamp(1, n - 2);
        let du = derivative(j, i);
        // Shifted stencils carry a truncation error of the same order; the
        // largest disagreement estimates the differencing error of `du`.
        let err = [j.checked_sub(1).filter(|&k| k >= 1), Some(j + 1).filter(|&k| k + 1 < n)]
            .into_iter()
            .flatten()
            .map(|k| (du - derivative(k, i)).abs())
            .fold(0.0_f64, f64::max);
        let raw = du + 2.0 * v[i] * u[i] - 2.0 * w[i] * u[i].sqrt();
        max_raw = max_raw.max(raw);
        max_ineq = max_ineq.max(raw - err);
    }

    // J(t) = e^{-V(t)} ∫_0^t e^{V(s)} w(s) ds, advanced without forming e^{V}.
    // `dv_err` accumulates the gap between the trapezoid rule and a
    // piecewise quadratic rule, an estimate of the quadrature error in V.
    let mut max_bound = f64::NEG_INFINITY;
    let mut max_raw_bound = f64::NEG_INFINITY;
    let mut big_v = 0.0;
    let mut dv_err = 0.0;
    let mut j_int = 0.0;
    let su0 = u[0].sqrt();
    for i in 0..n {
        if i > 0 {
            let dt = grid[i] - grid[i - 1];
            let dv = 0.5 * dt * (v[i] + v[i - 1]);
            let k = if i + 1 < n { i } else { i - 1 };
            let mid = 0.5 * (grid[i - 1] + grid[i]);
            let v_mid = quadratic_at([grid[k - 1], grid[k], grid[k + 1]], [v[k - 1], v[k], v[k + 1]], mid);
            dv_err += (dv - dt / 6.0 * (v[i - 1] + 4.0 * v_mid + v[i])).abs();
            big_v += dv;
            let decay = (-dv).exp();
            j_int = decay * j_int + 0.5 * dt * (decay * w[i - 1] + w[i]);
        }
        let bound = (-big_v).exp() * su0 + j_int;
        let gap = u[i].sqrt() - bound;
        max_raw_bound = max_raw_bound.max(gap);
        max_bound = max_bound.max(gap - bound * dv_err.exp_m1());
    }

    let inequality_ok = max_ineq <= tol;
    Ok(GronwallReport {
        inequality_ok,
        bound_ok: inequality_ok.then_some(max_bound <= tol),
        max_raw_violation: max_raw,
        max_inequality_violation: max_ineq,
        max_raw_bound_violation: max_raw_bound,
        max_bound_violation: max_bound,
    })
}

/// Samples `(t, u, v, w)` with `u = ||x - q*||^2`, `v = gamma theta`,
/// `w = theta ||f(q*) - q*||` along a trajectory.
pub fn gronwall_triple(traj: &Trajectory, q_star: &Point) -> Result<[Vec<f64>; 4]> {
    let p = &traj.problem;
    let gamma = p.gamma();
    let pull = p.f(q_star)?.distance(q_star);
    let mut out: [Vec<f64>; 4] = Default::default();
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let theta = traj.schedule.theta(*t)?;
        out[0].push(*t);
        out[1].push(x.distance(q_star).powi(2));
        out[2].push(gamma * theta);
        out[3].push(theta * pull);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub nu_claimed: f64,
    pub window: [f64; 2],
    /// Least-squares slope of `log residual` against `log(1 + t)`.
    pub fitted_slope: Option<f64>,
    /// `sup (1 + t)^nu ||x - T x||` over the window: the empirical `C_nu`.
    pub sup_scaled_residual: Option<f64>,
    pub first_half_sup: Option<f64>,
    pub second_half_sup: Option<f64>,
    pub samples: usize,
    pub excluded_below_floor: usize,
    /// `gamma K / nu` for power schedules.
    pub kappa: Option<f64>,
    /// `sup (||f(x)|| + ||T(x)||)` along the trajectory.
    pub m_bound: f64,
    pub verdict: Verdict,
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Fits the decay of `||x(t) - T(x(t))||` over the window
/// `[t_end (1 - window_fraction), t_end]`.
pub fn fit_rate(traj: &Trajectory, nu: f64, window_fraction: f64) -> Result<RateReport> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::input("window fraction must lie in (0, 1]"));
    }
    if traj.is_empty() {
        return Err(Error::input("empty trajectory"));
    }
    let (t_end, _) = traj.last();
    let t_lo = t_end * (1.0 - window_fraction);
    let idx: Vec<usize> = (0..traj.len()).filter(|&i| traj.times[i] >= t_lo).collect();
    if idx.len() < MIN_WINDOW_SAMPLES {
        return Err(Error::input(format!(
            "rate window [{t_lo}, {t_end}] holds {} samples, need {MIN_WINDOW_SAMPLES}",
            idx.len()
        )));
    }
    let p = &traj.problem;
    let mut m_bound = 0.0_f64;
    for x in &traj.states {
        m_bound = m_bound.max(p.f(x)?.norm() + p.t(x)?.norm());
    }
    let kappa = traj.schedule.is_power().map(|(k, nu_s)| p.gamma() * k / nu_s);

    let kept: Vec<usize> = idx
        .iter()
        .copied()
        .filter(|&i| traj.residuals[i] >= RESIDUAL_FLOOR)
        .collect();
    let excluded = idx.len() - kept.len();
    let mut report = RateReport {
        nu_claimed: nu,
        window: [t_lo, t_end],
        fitted_slope: None,
        sup_scaled_residual: None,
        first_half_sup: None,
        second_half_sup: None,
        samples: kept.len(),
        excluded_below_floor: excluded,
        kappa,
        m_bound,
        verdict: Verdict::Floor,
    };
    if kept.len() < MIN_WINDOW_SAMPLES {
        return Ok(report);
    }

    let xs: Vec<f64> = kept.iter().map(|&i| traj.times[i].ln_1p()).collect();
    let ys: Vec<f64> = kept.iter().map(|&i| traj.residuals[i].ln()).collect();
    let slope = least_squares_slope(&xs, &ys);

    let mid = 0.5 * (t_lo + t_end);
    let scaled = |i: usize| (1.0 + traj.times[i]).powf(nu) * traj.residuals[i];
    let sup_of = |pred: &dyn Fn(f64) -> bool| {
        idx.iter()
            .filter(|&&i| pred(traj.times[i]))
            .map(|&i| scaled(i))
            .fold(0.0_f64, f64::max)
    };
    let first = sup_of(&|t| t < mid);
    let second = sup_of(&|t| t >= mid);
    let sup = first.max(second);
    let non_increasing = second <= first * (1.0 + SCALED_SUP_REL_TOL);

    report.fitted_slope = Some(slope);
    report.sup_scaled_residual = Some(sup);
    report.first_half_sup = Some(first);
    report.second_half_sup = Some(second);
    report.verdict = Verdict::from_bool(slope <= -nu + SLOPE_TOL && sup.is_finite() && non_increasing);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub sup_distance: f64,
    /// `max(||x0 - q*||, ||f(q*) - q*|| / gamma)`
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

/// `sup_t ||x(t) - q*|| <= max(||x0 - q*||, ||f(q*) - q*|| / gamma)` up to
/// ten times the solver tolerance.
pub fn boundedness_verdict(traj: &Trajectory, vp: &VpSolution, p: &Problem) -> Result<BoundednessReport> {
    let q = &vp.q_star;
    q.check_dim(p.dim())?;
    let bound = traj.initial().distance(q).max(p.f(q)?.distance(q) / p.gamma());
    let sup_distance = traj.states.iter().map(|x| x.distance(q)).fold(0.0_f64, f64::max);
    let slack = 10.0 * traj.config.nominal_tolerance();
    Ok(BoundednessReport {
        sup_distance,
        bound,
        slack,
        pass: sup_distance <= bound + slack,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub perturbation_class: PerturbationClass,
    /// Median of `||x(t) - y(t)||` over `t ∈ [1, 10]`.
    pub median_first_decade: f64,
    /// Median over `[t_end / 10, t_end]`.
    pub median_last_decade: f64,
    pub sup_gap_tail: f64,
    pub final_gap: f64,
    pub verdict: Verdict,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Compares an unperturbed trajectory with a perturbed one from the same
/// start; the gap must shrink by a factor ten from the first to the last
/// time decade.
pub fn stability_verdict(cds: &Trajectory, pcds: &Trajectory) -> Result<StabilityReport> {
    if cds.problem != pcds.problem || cds.schedule != pcds.schedule {
        return Err(Error::input("trajectories solve different problems"));
    }
    if cds.initial() != pcds.initial() {
        return Err(Error::input("trajectories start from different points"));
    }
    let (t_end, _) = cds.last();
    if t_end < 100.0 {
        return Err(Error::input("stability check needs t_end >= 100"));
    }
    let class = pcds
        .perturbation
        .as_ref()
        .map_or(PerturbationClass::L1, |h| h.classify(&pcds.schedule));

    let mut first = Vec::new();
    let mut last = Vec::new();
    for (t, x) in cds.times.iter().zip(&cds.states) {
        let Some(y) = pcds.state_at(*t) else { continue };
        let g = x.distance(&y);
        if (1.0..=10.0).contains(t) {
            first.push(g);
        }
        if *t >= t_end / 10.0 {
            last.push(g);
        }
    }
    let sup_gap_tail = last.iter().copied().fold(0.0_f64, f64::max);
    let final_gap = last.last().copied().unwrap_or(f64::NAN);
    let median_first_decade = median(first);
    let median_last_decade = median(last);
    let floor = 10.0 * cds.config.nominal_tolerance().max(pcds.config.nominal_tolerance());
    let verdict = if class == PerturbationClass::Neither {
        Verdict::NotApplicable
    } else {
        Verdict::from_bool(median_last_decade <= median_first_decade / 10.0 || sup_gap_tail <= floor)
    };
    Ok(StabilityReport {
        perturbation_class: class,
        median_first_decade,
        median_last_decade,
        sup_gap_tail,
        final_gap,
        verdict,
    })
}
