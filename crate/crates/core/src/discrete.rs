//! Discrete anchored iterations: viscosity (Moudafi), Halpern, Lions and
//! Krasnoselskii-Mann. Sequences are 1-indexed with `x_1` given.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{anchored_average, write_table, Row};
use crate::operators::{Contraction, Operator, Problem};
use crate::schedule::ThetaSequence;
use crate::space::{ConvexSet, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `x_{n+1} = theta_n f(x_n) + (1 - theta_n) T(x_n)`
    Dds,
    /// `x_{n+1} = (1 - theta_n) T(x_n)`
    Halpern,
    /// `x_{n+1} = theta_n u + (1 - theta_n) T(x_n)`
    Lions,
    /// `x_{n+1} = theta_n x_n + (1 - theta_n) T(x_n)`
    Km,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateSequence {
    pub scheme: Scheme,
    /// `states[k]` is `x_{k+1}`.
    pub states: Vec<Point>,
    /// `||x_n - T(x_n)||`
    pub residuals: Vec<f64>,
    /// `||x_{n+1} - x_n||`
    pub increments: Vec<f64>,
    pub thetas: Vec<f64>,
    pub problem: Problem,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Point>,
}

impl IterateSequence {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `x_n` for `1 <= n <= len`.
    pub fn x(&self, n: usize) -> &Point {
        &self.states[n - 1]
    }

    pub fn last(&self) -> Option<&Point> {
        self.states.last()
    }

    /// Same layout as [`crate::flow::Trajectory::write_csv`] with `t`
    /// replaced by the index `n`.
    pub fn write_csv<W: Write>(&self, out: W, q_star: Option<&Point>) -> Result<()> {
        let rows = self.states.iter().enumerate().map(|(i, x)| Row {
            index: (i + 1).to_string(),
            state: x,
            residual: self.residuals[i],
            deriv: self.increments[i],
        });
        write_table(out, "n", self.problem.dim(), rows, q_star)
    }
}

fn check_theta(theta: f64, n: usize, closed_at_zero: bool) -> Result<()> {
    let ok = if closed_at_zero {
        (0.0..=1.0).contains(&theta)
    } else {
        theta > 0.0 && theta <= 1.0
    };
    if !ok {
        let range = if closed_at_zero { "[0, 1]" } else { "(0, 1]" };
        return Err(Error::input(format!("theta_{n} = {theta} outside {range}")));
    }
    Ok(())
}

fn run<S, U>(
    scheme: Scheme,
    p: &Problem,
    seq: &S,
    x1: &Point,
    n_max: usize,
    anchor: Option<Point>,
    update: U,
) -> Result<IterateSequence>
where
    S: ThetaSequence + ?Sized,
    U: Fn(f64, &Point) -> Result<Point>,
{
    x1.check_dim(p.dim())?;
    let mut seq_out = IterateSequence {
        scheme,
        states: Vec::with_capacity(n_max),
        residuals: Vec::with_capacity(n_max),
        increments: Vec::with_capacity(n_max),
        thetas: Vec::with_capacity(n_max),
        problem: p.clone(),
        anchor,
    };
    let closed = scheme == Scheme::Km;
    let mut x = x1.clone();
    for n in 1..=n_max {
        let theta = seq.theta_n(n);
        check_theta(theta, n, closed)?;
        let next = update(theta, &x)?;
        seq_out.residuals.push(p.residual(&x)?);
        seq_out.increments.push(next.distance(&x));
        seq_out.thetas.push(theta);
        seq_out.states.push(std::mem::replace(&mut x, next));
    }
    Ok(seq_out)
}

/// The viscosity iteration on `p`, `n_max` terms starting from `x_1 ∈ C`.
pub fn iterate_dds<S: ThetaSequence + ?Sized>(
    p: &Problem,
    seq: &S,
    x1: &Point,
    n_max: usize,
) -> Result<IterateSequence> {
    x1.check_dim(p.dim())?;
    p.domain.require_member(x1, "x1")?;
    run(Scheme::Dds, p, seq, x1, n_max, None, |theta, x| {
        anchored_average(p, theta, x)
    })
}

fn bare_problem(op: &Operator, f: Contraction) -> Result<Problem> {
    Problem::new(ConvexSet::whole(op.dim()), op.clone(), f)
}

/// Halpern's iteration: the viscosity iteration with `f = 0`.
pub fn iterate_halpern<S: ThetaSequence + ?Sized>(
    op: &Operator,
    seq: &S,
    x1: &Point,
    n_max: usize,
) -> Result<IterateSequence> {
    let p = bare_problem(op, Contraction::zero(op.dim()))?;
    let mut out = iterate_dds(&p, seq, x1, n_max)?;
    out.scheme = Scheme::Halpern;
    Ok(out)
}

/// Lions' iteration: the viscosity iteration with `f = u`.
pub fn iterate_lions<S: ThetaSequence + ?Sized>(
    op: &Operator,
    anchor: &Point,
    seq: &S,
    x1: &Point,
    n_max: usize,
) -> Result<IterateSequence> {
    anchor.check_dim(op.dim())?;
    let p = bare_problem(op, Contraction::constant(anchor.clone()))?;
    let mut out = iterate_dds(&p, seq, x1, n_max)?;
    out.scheme = Scheme::Lions;
    out.anchor = Some(anchor.clone());
    Ok(out)
}

/// Krasnoselskii-Mann; `theta_n` may be 0 or 1.
pub fn iterate_km<S: ThetaSequence + ?Sized>(
    op: &Operator,
    seq: &S,
    x1: &Point,
    n_max: usize,
) -> Result<IterateSequence> {
    let p = bare_problem(op, Contraction::zero(op.dim()))?;
    run(Scheme::Km, &p, seq, x1, n_max, None, |theta, x| {
        Ok(x.lincomb(theta, &op.apply(x)?, 1.0 - theta))
    })
}
