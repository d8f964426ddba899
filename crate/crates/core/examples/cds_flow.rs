//! Integrates the anchored flow `x' = theta f(x) + (1 - theta) T(x) - x` and
//! its projected variant on a ball, printing the approach to `q*`.

use viscoflow::analysis::solve_vp;
use viscoflow::flow::{integrate, SolverConfig};
use viscoflow::operators::zoo_problem;
use viscoflow::schedule::ThetaSchedule;
use viscoflow::space::Point;

fn main() -> viscoflow::Result<()> {
    let p = zoo_problem("ball_reflection").expect("zoo entry");
    let s = ThetaSchedule::power(2.0, 1.0)?;
    let x0 = Point::new(vec![6.0, -7.0])?;
    let q = solve_vp(&p, &Point::zeros(2), 1e-13, 100_000)?.q_star;
    println!("q* = {:?}", q.coords());
    // C = ball(0, 10) is invariant here, so both variants coincide.
    for projected in [false, true] {
        let cfg = SolverConfig::rk45(1e-9, 1e4).with_projection(projected);
        let traj = integrate(&p, &s, &x0, &cfg, None)?;
        println!("projected = {projected}: {:?}", traj.stats);
        for i in (0..traj.len()).step_by(64).chain([traj.len() - 1]) {
            println!(
                "  t = {:>10.3}  ||x - q*|| = {:.3e}  ||x - Tx|| = {:.3e}",
                traj.times[i],
                traj.states[i].distance(&q),
                traj.residuals[i]
            );
        }
    }
    Ok(())
}
