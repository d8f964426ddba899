//! Power schedules `theta(t) = K / (1 + t)^nu`: values, the integral
//! `Theta(t)`, and the continuous and discrete condition checks.

use viscoflow::schedule::{check_continuous_conditions, check_discrete_conditions, DiscreteSchedule, ThetaSchedule};

fn main() -> viscoflow::Result<()> {
    for (k, nu) in [(2.0, 1.0), (1.0, 0.5), (0.5, 1.0), (1.0, 0.3)] {
        let s = ThetaSchedule::power(k, nu)?;
        println!("K = {k}, nu = {nu}");
        if let Some(w) = s.clamp_warning() {
            println!("  {w}");
        }
        for t in [0.0, 1.0, 10.0, 100.0] {
            println!(
                "  t = {t:>5}: theta = {:.6}, theta' = {:.3e}, Theta = {:.6} (quadrature {:.6})",
                s.theta(t)?,
                s.theta_prime(t)?.value,
                s.big_theta(t)?,
                s.big_theta_quadrature(t)?
            );
        }
        let c = check_continuous_conditions(&s, 1e6)?;
        let d = check_discrete_conditions(&DiscreteSchedule::sampled(s), 10_000)?;
        println!(
            "  continuous: C'1 {} C'2 {} C'5 {}; discrete: C0 {} C1 {} C2 {} C3 {} C4 {} C5 {}",
            c.c1.holds, c.c2.holds, c.c5.holds, d.c0.holds, d.c1.holds, d.c2.holds, d.c3.holds, d.c4.holds, d.c5.holds
        );
    }
    Ok(())
}
