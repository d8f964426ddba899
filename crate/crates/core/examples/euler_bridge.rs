//! Explicit Euler with unit step on the flow reproduces the discrete
//! viscosity iteration when theta is sampled at the integers.

use viscoflow::discrete::iterate_dds;
use viscoflow::flow::euler_dds_equivalence;
use viscoflow::operators::zoo;
use viscoflow::schedule::{DiscreteSchedule, ThetaSchedule};
use viscoflow::space::Point;

fn main() -> viscoflow::Result<()> {
    let seq = DiscreteSchedule::sampled(ThetaSchedule::power(2.0, 1.0)?);
    let x1 = Point::new(vec![5.0, -5.0])?;
    for e in zoo() {
        let r = euler_dds_equivalence(&e.problem, &seq, &x1, 1000)?;
        let last = iterate_dds(&e.problem, &seq, &x1, 1000)?;
        println!(
            "{:<22} max relative gap {:.1e} (absolute {:.1e}) over {} steps; x_1000 = {:?}",
            e.name,
            r.max_gap,
            r.max_abs_gap,
            r.steps,
            last.states.last().map(|x| x.coords().to_vec())
        );
    }
    Ok(())
}
