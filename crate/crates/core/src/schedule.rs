//! Relaxation schedules `theta(t)` and `theta_n`, their derivative and
//! running integral, and checks of the convergence conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

const QUAD_REL_TOL: f64 = 1e-10;

/// Control point of a table schedule (cubic Hermite between knots).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub t: f64,
    pub value: f64,
    pub slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `k / (1 + t)^nu`
    Power {
        k: f64,
        nu: f64,
    },
    Constant {
        c: f64,
    },
    /// Cubic Hermite through the knots, constant after the last one.
    Table {
        knots: Vec<Knot>,
    },
}

fn default_clamp() -> bool {
    true
}

/// `theta : [0, ∞) -> (0, 1]`. With `clamp` on (the default) values above
/// one are cut to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaSchedule {
    #[serde(flatten)]
    pub kind: ScheduleKind,
    #[serde(default = "default_clamp")]
    pub clamp: bool,
}

/// Value of `theta'`; `one_sided` marks evaluation exactly at a clamp
/// breakpoint, where the right derivative is returned.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slope {
    pub value: f64,
    pub one_sided: bool,
}

impl ThetaSchedule {
    pub fn power(k: f64, nu: f64) -> Result<Self> {
        let s = ThetaSchedule {
            kind: ScheduleKind::Power { k, nu },
            clamp: true,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(c: f64) -> Result<Self> {
        let s = ThetaSchedule {
            kind: ScheduleKind::Constant { c },
            clamp: true,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn table(knots: Vec<Knot>) -> Result<Self> {
        let s = ThetaSchedule {
            kind: ScheduleKind::Table { knots },
            clamp: true,
        };
        s.validate()?;
        Ok(s)
    }

    /// The raw formula, allowed to exceed one.
    pub fn unclamped(mut self) -> Self {
        self.clamp = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            ScheduleKind::Power { k, nu } => {
                if !(k.is_finite() && *k > 0.0) {
                    return Err(Error::input(format!("power schedule needs K > 0, got {k}")));
                }
                if !(*nu > 0.0 && *nu <= 1.0) {
                    return Err(Error::input(format!("power schedule needs nu in (0, 1], got {nu}")));
                }
            }
            ScheduleKind::Constant { c } => {
                if !(*c > 0.0 && *c <= 1.0) {
                    return Err(Error::input(format!("constant schedule needs c in (0, 1], got {c}")));
                }
            }
            ScheduleKind::Table { knots } => {
                if knots.len() < 2 {
                    return Err(Error::input("table schedule needs at least two knots"));
                }
                if knots[0].t != 0.0 {
                    return Err(Error::input("table schedule must start at t = 0"));
                }
                if knots.windows(2).any(|w| w[1].t <= w[0].t) {
                    return Err(Error::input("table knots must be strictly increasing in t"));
                }
                for k in knots {
                    if !(k.t.is_finite() && k.value.is_finite() && k.slope.is_finite()) {
                        return Err(Error::input("table knots must be finite"));
                    }
                    if k.value <= 0.0 {
                        return Err(Error::input("table values must be positive"));
                    }
                }
            }
        }
        Ok(())
    }

    fn raw(&self, t: f64) -> f64 {
        match &self.kind {
            ScheduleKind::Power { k, nu } => k / (1.0 + t).powf(*nu),
            ScheduleKind::Constant { c } => *c,
            ScheduleKind::Table { knots } => hermite(knots, t).0,
        }
    }

    fn raw_prime(&self, t: f64) -> f64 {
        match &self.kind {
            ScheduleKind::Power { k, nu } => -k * nu * (1.0 + t).powf(-nu - 1.0),
            ScheduleKind::Constant { .. } => 0.0,
            ScheduleKind::Table { knots } => hermite(knots, t).1,
        }
    }

    pub fn theta(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.value(t))
    }

    /// [`ThetaSchedule::theta`] without the domain check.
    pub(crate) fn value(&self, t: f64) -> f64 {
        let v = self.raw(t);
        if self.clamp {
            v.min(1.0)
        } else {
            v
        }
    }

    /// `[0, t_c]` on which a power schedule with `K > 1` is clamped to one.
    pub fn clamp_interval(&self) -> Option<(f64, f64)> {
        match &self.kind {
            ScheduleKind::Power { k, nu } if self.clamp && *k > 1.0 => Some((0.0, k.powf(1.0 / nu) - 1.0)),
            _ => None,
        }
    }

    /// Human-readable note when clamping changes the schedule.
    pub fn clamp_warning(&self) -> Option<String> {
        self.clamp_interval()
            .map(|(a, b)| format!("theta exceeds 1 near t = 0 and is clamped to 1 on [{a}, {b:.6}]"))
    }

    /// Largest value taken on `[0, ∞)`.
    pub fn sup(&self) -> f64 {
        let raw_sup = match &self.kind {
            ScheduleKind::Power { k, .. } => *k,
            ScheduleKind::Constant { c } => *c,
            ScheduleKind::Table { knots } => {
                // Dense scan; Hermite overshoot between knots is bounded.
                let end = knots.last().map_or(0.0, |k| k.t);
                (0..=4096)
                    .map(|i| hermite(knots, end * i as f64 / 4096.0).0)
                    .fold(f64::MIN, f64::max)
            }
        };
        if self.clamp {
            raw_sup.min(1.0)
        } else {
            raw_sup
        }
    }

    pub fn theta_prime(&self, t: f64) -> Result<Slope> {
        check_time(t)?;
        let d = self.raw_prime(t);
        if !self.clamp {
            return Ok(Slope {
                value: d,
                one_sided: false,
            });
        }
        if let Some((_, tc)) = self.clamp_interval() {
            if (t - tc).abs() <= 1e-12 * tc.max(1.0) {
                return Ok(Slope {
                    value: d,
                    one_sided: true,
                });
            }
            if t < tc {
                return Ok(Slope {
                    value: 0.0,
                    one_sided: false,
                });
            }
        } else if self.raw(t) > 1.0 {
            return Ok(Slope {
                value: 0.0,
                one_sided: false,
            });
        }
        Ok(Slope {
            value: d,
            one_sided: false,
        })
    }

    /// `Θ(t) = ∫_0^t θ(s) ds`, closed form where available.
    pub fn big_theta(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        match &self.kind {
            ScheduleKind::Power { k, nu } => {
                let antiderivative = |s: f64| {
                    if *nu == 1.0 {
                        k * (1.0 + s).ln()
                    } else {
                        k * ((1.0 + s).powf(1.0 - nu) - 1.0) / (1.0 - nu)
                    }
                };
                match self.clamp_interval() {
                    Some((_, tc)) if t <= tc => Ok(t),
                    Some((_, tc)) => Ok(tc + antiderivative(t) - antiderivative(tc)),
                    None => Ok(antiderivative(t)),
                }
            }
            ScheduleKind::Constant { c } => Ok(c * t),
            ScheduleKind::Table { .. } => self.big_theta_quadrature(t),
        }
    }

    /// `Θ(t)` by adaptive quadrature, split at every kink of the schedule.
    pub fn big_theta_quadrature(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let breaks = self.breakpoints(t);
        Ok(quad::integrate_piecewise(|s| self.value(s), &breaks, QUAD_REL_TOL))
    }

    /// `∫_0^t |θ'(s)| ds` by quadrature.
    pub fn total_variation(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let breaks = self.breakpoints(t);
        Ok(quad::integrate_piecewise(
            |s| self.theta_prime(s).map_or(0.0, |d| d.value.abs()),
            &breaks,
            QUAD_REL_TOL,
        ))
    }

    fn breakpoints(&self, t: f64) -> Vec<f64> {
        let mut pts = vec![0.0];
        if let Some((_, tc)) = self.clamp_interval() {
            if tc > 0.0 && tc < t {
                pts.push(tc);
            }
        }
        if let ScheduleKind::Table { knots } = &self.kind {
            pts.extend(knots.iter().map(|k| k.t).filter(|&s| s > 0.0 && s < t));
            pts.sort_by(f64::total_cmp);
        }
        pts.push(t);
        pts.dedup();
        pts
    }

    pub fn is_power(&self) -> Option<(f64, f64)> {
        match self.kind {
            ScheduleKind::Power { k, nu } => Some((k, nu)),
            _ => None,
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::input(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Value and derivative of the Hermite interpolant.
fn hermite(knots: &[Knot], t: f64) -> (f64, f64) {
    let last = knots[knots.len() - 1];
    if t >= last.t {
        return (last.value, 0.0);
    }
    let i = knots.partition_point(|k| k.t <= t).saturating_sub(1);
    let (a, b) = (knots[i], knots[i + 1]);
    let h = b.t - a.t;
    let s = (t - a.t) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let value = h00 * a.value + h10 * h * a.slope + h01 * b.value + h11 * h * b.slope;
    let d00 = (6.0 * s2 - 6.0 * s) / h;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = (-6.0 * s2 + 6.0 * s) / h;
    let d11 = 3.0 * s2 - 2.0 * s;
    let deriv = d00 * a.value + d10 * a.slope + d01 * b.value + d11 * b.slope;
    (value, deriv)
}

/// `theta_n` for `n = 1, 2, ...`.
pub trait ThetaSequence {
    fn theta_n(&self, n: usize) -> f64;
}

impl<F: Fn(usize) -> f64> ThetaSequence for F {
    fn theta_n(&self, n: usize) -> f64 {
        self(n)
    }
}

/// A continuous schedule sampled at integers: `theta_n = theta(n + offset)`.
/// The default offset of zero gives `theta_n = theta(n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSchedule {
    pub schedule: ThetaSchedule,
    #[serde(default)]
    pub offset: f64,
}

impl DiscreteSchedule {
    pub fn new(schedule: ThetaSchedule, offset: f64) -> Result<Self> {
        if !(offset.is_finite() && offset >= -1.0) {
            return Err(Error::input(format!("offset must be >= -1, got {offset}")));
        }
        schedule.validate()?;
        Ok(DiscreteSchedule { schedule, offset })
    }

    pub fn sampled(schedule: ThetaSchedule) -> Self {
        DiscreteSchedule { schedule, offset: 0.0 }
    }
}

impl ThetaSequence for DiscreteSchedule {
    fn theta_n(&self, n: usize) -> f64 {
        self.schedule.value(n as f64 + self.offset)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Evidence {
    Analytic,
    Numeric { horizon: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionFlag {
    pub holds: bool,
    #[serde(flatten)]
    pub evidence: Evidence,
    /// Numeric value backing the flag (limit estimate or partial sum).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
}

impl ConditionFlag {
    fn analytic(holds: bool) -> Self {
        ConditionFlag {
            holds,
            evidence: Evidence::Analytic,
            estimate: None,
        }
    }

    fn with_estimate(mut self, v: f64) -> Self {
        self.estimate = Some(v);
        self
    }
}

/// C'1: theta -> 0; C'2: ∫theta = ∞; C'5: ∫|theta'| < ∞ or theta'/theta -> 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousConditions {
    pub c1: ConditionFlag,
    pub c2: ConditionFlag,
    pub c5: ConditionFlag,
}

impl ContinuousConditions {
    pub fn all_hold(&self) -> bool {
        self.c1.holds && self.c2.holds && self.c5.holds
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteConditions {
    pub samples: usize,
    pub c0: ConditionFlag,
    pub c1: ConditionFlag,
    pub c2: ConditionFlag,
    pub c3: ConditionFlag,
    pub c4: ConditionFlag,
    pub c5: ConditionFlag,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuous: Option<ContinuousConditions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteConditions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp_warning: Option<String>,
}

/// Heuristic for divergence of a positive series or integral: the second
/// half still contributes at least 1% of the first half.
fn tail_grows(first_half: f64, second_half: f64) -> bool {
    second_half > 1e-2 * first_half
}

/// Heuristic for a vanishing limit: the last window is at most 90% of the
/// middle window, or already negligible.
fn vanishing(mid: f64, last: f64) -> bool {
    last <= 0.9 * mid || last <= 1e-9
}

pub fn check_continuous_conditions(s: &ThetaSchedule, horizon: f64) -> Result<ContinuousConditions> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::input("horizon must be positive"));
    }
    match s.kind {
        ScheduleKind::Power { nu, .. } => Ok(ContinuousConditions {
            c1: ConditionFlag::analytic(nu > 0.0),
            c2: ConditionFlag::analytic(nu <= 1.0),
            c5: ConditionFlag::analytic(true),
        }),
        ScheduleKind::Constant { .. } => Ok(ContinuousConditions {
            c1: ConditionFlag::analytic(false),
            c2: ConditionFlag::analytic(true),
            c5: ConditionFlag::analytic(true),
        }),
        ScheduleKind::Table { .. } => {
            let numeric = |holds| ConditionFlag {
                holds,
                evidence: Evidence::Numeric { horizon },
                estimate: None,
            };
            let half = 0.5 * horizon;
            let end = s.theta(horizon)?;
            let c1 = numeric(end < 0.1 * s.sup()).with_estimate(end);

            let big_half = s.big_theta(half)?;
            let big_end = s.big_theta(horizon)?;
            let c2 = numeric(tail_grows(big_half, big_end - big_half)).with_estimate(big_end);

            let tv_half = s.total_variation(half)?;
            let tv_end = s.total_variation(horizon)?;
            let log_ratio = s.theta_prime(horizon)?.value.abs() / end;
            let log_ratio_mid = s.theta_prime(half)?.value.abs() / s.theta(half)?;
            let holds = !tail_grows(tv_half, tv_end - tv_half) || vanishing(log_ratio_mid, log_ratio);
            let c5 = numeric(holds).with_estimate(tv_end);
            Ok(ContinuousConditions { c1, c2, c5 })
        }
    }
}

/// Checks (C0)-(C5) for `theta_n`, `n = 1..=n_max`.
pub fn check_discrete_conditions(seq: &DiscreteSchedule, n_max: usize) -> Result<DiscreteConditions> {
    if n_max < 10 {
        return Err(Error::input("need at least 10 terms"));
    }
    let theta: Vec<f64> = (1..=n_max + 1).map(|n| seq.theta_n(n)).collect();
    let ratios = |g: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { theta.windows(2).map(|w| g(w[0], w[1])).collect() };
    let c3_series = ratios(&|a, b| (b - a).abs() / (a * a));
    let c4_series = ratios(&|a, b| (b - a).abs() / (a * b));
    let c5_series = ratios(&|a, b| (b - a).abs() / a);
    let window = (n_max / 10).max(1);
    let last_max = |v: &[f64]| v[v.len() - window..].iter().copied().fold(0.0, f64::max);
    let mid_max = |v: &[f64]| {
        let end = v.len() / 2;
        v[end - window.min(end)..end].iter().copied().fold(0.0, f64::max)
    };

    let numeric = |holds| ConditionFlag {
        holds,
        evidence: Evidence::Numeric { horizon: n_max as f64 },
        estimate: None,
    };

    match seq.schedule.kind {
        ScheduleKind::Power { nu, .. } => {
            let strict = nu < 1.0;
            Ok(DiscreteConditions {
                samples: n_max,
                c0: ConditionFlag::analytic(true),
                c1: ConditionFlag::analytic(true),
                c2: ConditionFlag::analytic(true),
                c3: ConditionFlag::analytic(strict).with_estimate(last_max(&c3_series)),
                c4: ConditionFlag::analytic(strict).with_estimate(last_max(&c4_series)),
                c5: ConditionFlag::analytic(true).with_estimate(last_max(&c5_series)),
            })
        }
        ScheduleKind::Constant { c } => Ok(DiscreteConditions {
            samples: n_max,
            c0: ConditionFlag::analytic(c < 1.0),
            c1: ConditionFlag::analytic(false),
            c2: ConditionFlag::analytic(true),
            c3: ConditionFlag::analytic(true).with_estimate(0.0),
            c4: ConditionFlag::analytic(true).with_estimate(0.0),
            c5: ConditionFlag::analytic(true).with_estimate(0.0),
        }),
        ScheduleKind::Table { .. } => {
            let terms = &theta[..n_max];
            let half = n_max / 2;
            let split_sum = |g: &dyn Fn(f64) -> f64| {
                let a: f64 = terms[..half].iter().map(|&x| g(x)).sum();
                let b: f64 = terms[half..].iter().map(|&x| g(x)).sum();
                (a, b)
            };
            let (c0a, c0b) = split_sum(&|x| (1.0 - x) * x);
            let (c2a, c2b) = split_sum(&|x| x);
            let max_theta = terms.iter().copied().fold(0.0, f64::max);
            let end = terms[n_max - 1];
            let variation: f64 = theta.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
            let var_half: f64 = theta[..=half].windows(2).map(|w| (w[1] - w[0]).abs()).sum();
            let flag = |series: &[f64]| {
                let last = last_max(series);
                numeric(vanishing(mid_max(series), last)).with_estimate(last)
            };
            let mut c5 = flag(&c5_series);
            c5.holds = c5.holds || !tail_grows(var_half, variation - var_half);
            Ok(DiscreteConditions {
                samples: n_max,
                c0: numeric(tail_grows(c0a, c0b)).with_estimate(c0a + c0b),
                c1: numeric(end < 0.1 * max_theta).with_estimate(end),
                c2: numeric(tail_grows(c2a, c2b)).with_estimate(c2a + c2b),
                c3: flag(&c3_series),
                c4: flag(&c4_series),
                c5,
            })
        }
    }
}
