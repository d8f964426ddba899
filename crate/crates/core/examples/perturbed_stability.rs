//! Adds a forcing term `h(t)` to the projected flow and measures how far the
//! perturbed run drifts from the unperturbed one, per perturbation class.

use viscoflow::analysis::stability_verdict;
use viscoflow::flow::{integrate, Perturbation, PerturbationClass, SolverConfig};
use viscoflow::operators::zoo_problem;
use viscoflow::schedule::ThetaSchedule;
use viscoflow::space::Point;

fn main() -> viscoflow::Result<()> {
    let p = zoo_problem("rotation").expect("zoo entry");
    let s = ThetaSchedule::power(2.0, 1.0)?;
    let cfg = SolverConfig::rk45(1e-9, 1e4).with_projection(true);
    let x0 = Point::new(vec![3.0, -4.0])?;
    let dir = Point::new(vec![1.0, 0.0])?;
    let base = integrate(&p, &s, &x0, &cfg, None)?;
    let cases = [
        ("zero", Perturbation::zero()),
        (
            "(1+t)^-2",
            Perturbation::power_decay(1.0, 2.0, dir.clone(), PerturbationClass::L1)?,
        ),
        (
            "(1+t)^-1.5",
            Perturbation::power_decay(1.0, 1.5, dir.clone(), PerturbationClass::L1)?,
        ),
        (
            "2/(1+t)",
            Perturbation::power_decay(2.0, 1.0, dir, PerturbationClass::Neither)?,
        ),
    ];
    for (label, h) in cases {
        let claim = h.check_claim(&s, 1e4);
        let run = integrate(&p, &s, &x0, &cfg, Some(&h))?;
        let r = stability_verdict(&base, &run)?;
        println!(
            "h = {label:<11} class {:?} (claim check {:?})  median gap [1,10] {:.2e}  last decade {:.2e}  final {:.2e}  {:?}",
            r.perturbation_class,
            claim,
            r.median_first_decade,
            r.median_last_decade,
            r.final_gap,
            r.verdict
        );
    }
    Ok(())
}
