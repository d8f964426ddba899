//! The differential inequality `u' <= -2 v u + 2 w sqrt(u)` for
//! `u = ||x - q*||^2` and its integrated bound, evaluated on a recorded run.

use viscoflow::analysis::{gronwall_check, gronwall_triple, solve_vp};
use viscoflow::flow::{integrate, SolverConfig};
use viscoflow::operators::zoo;
use viscoflow::schedule::ThetaSchedule;
use viscoflow::space::Point;

fn main() -> viscoflow::Result<()> {
    let s = ThetaSchedule::power(2.0, 1.0)?;
    let cfg = SolverConfig::rk45(1e-9, 1e3);
    let x0 = Point::new(vec![-6.0, 2.0])?;
    for e in zoo() {
        let q = solve_vp(&e.problem, &Point::zeros(2), 1e-14, 100_000)?.q_star;
        let traj = integrate(&e.problem, &s, &x0, &cfg, None)?;
        let [t, u, v, w] = gronwall_triple(&traj, &q)?;
        let r = gronwall_check(&t, &u, &v, &w, 1e-6)?;
        println!(
            "{:<22} inequality {} (raw {:.1e}, corrected {:.1e})  bound {:?} (raw {:.1e}, corrected {:.1e})",
            e.name,
            r.inequality_ok,
            r.max_raw_violation,
            r.max_inequality_violation,
            r.bound_ok,
            r.max_raw_bound_violation,
            r.max_bound_violation
        );
    }
    Ok(())
}
