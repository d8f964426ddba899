//! The discrete viscosity iteration next to the Halpern, Lions and
//! Krasnoselskii-Mann schemes on a quarter-turn rotation.

use viscoflow::discrete::{iterate_dds, iterate_halpern, iterate_km, iterate_lions, IterateSequence};
use viscoflow::operators::{Contraction, LinearMap, Operator, Problem};
use viscoflow::schedule::{DiscreteSchedule, ThetaSchedule};
use viscoflow::space::{ConvexSet, Point};

fn show(label: &str, run: &IterateSequence) {
    let at = |n: usize| run.residuals.get(n - 1).copied().unwrap_or(f64::NAN);
    println!(
        "{label:<8} ||x_n - T x_n||: n=10 {:.3e}  n=100 {:.3e}  n=1000 {:.3e}  n=10000 {:.3e}",
        at(10),
        at(100),
        at(1000),
        at(10_000)
    );
}

fn main() -> viscoflow::Result<()> {
    let rot = Operator::rotation(2, std::f64::consts::FRAC_PI_2, [0, 1])?;
    let u = Point::new(vec![1.0, 0.0])?;
    let x1 = Point::new(vec![3.0, -4.0])?;
    // Offset one keeps theta_1 = 2/3 below the clamp.
    let seq = DiscreteSchedule::new(ThetaSchedule::power(2.0, 1.0)?, 1.0)?;
    let n = 10_000;
    let anchored = Problem::new(
        ConvexSet::whole(2),
        rot.clone(),
        Contraction::affine(0.5, LinearMap::Identity, u.clone())?,
    )?;
    show("dds", &iterate_dds(&anchored, &seq, &x1, n)?);
    show("halpern", &iterate_halpern(&rot, &seq, &x1, n)?);
    show("lions", &iterate_lions(&rot, &u, &seq, &x1, n)?);
    show("km", &iterate_km(&rot, &|_: usize| 0.5, &x1, n)?);
    Ok(())
}
