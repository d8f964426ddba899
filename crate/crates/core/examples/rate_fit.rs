//! Residual decay rates of the flow under power schedules, for a zero
//! anchor and a constant nonzero anchor.

use viscoflow::analysis::fit_rate;
use viscoflow::flow::{integrate, SolverConfig};
use viscoflow::operators::{Contraction, Operator, Problem};
use viscoflow::schedule::ThetaSchedule;
use viscoflow::space::{ConvexSet, Point};

fn main() -> viscoflow::Result<()> {
    let rot = Operator::rotation(2, std::f64::consts::FRAC_PI_2, [0, 1])?;
    let anchors = [
        ("f = 0", Contraction::zero(2)),
        ("f = (1, 0)", Contraction::constant(Point::new(vec![1.0, 0.0])?)),
    ];
    let x0 = Point::new(vec![1.0, 1.0])?;
    let cfg = SolverConfig::rk45(1e-9, 1e4);
    for (label, f) in anchors {
        let p = Problem::new(ConvexSet::whole(2), rot.clone(), f)?;
        for (k, nu) in [(2.0, 1.0), (1.0, 0.5)] {
            let s = ThetaSchedule::power(k, nu)?;
            let traj = integrate(&p, &s, &x0, &cfg, None)?;
            let r = fit_rate(&traj, nu, 0.5)?;
            println!(
                "{label:<11} K={k} nu={nu}: slope {:?}, sup scaled {:?}, halves {:?}/{:?}, verdict {:?}",
                r.fitted_slope, r.sup_scaled_residual, r.first_half_sup, r.second_half_sup, r.verdict
            );
        }
    }
    Ok(())
}
