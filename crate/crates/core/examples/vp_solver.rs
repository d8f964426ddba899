//! Solves the variational inequality for `q* = P_Fix(T) f(q*)` by Banach
//! iteration and checks the answer against probes of `Fix(T)`.

use viscoflow::analysis::{fix_probes, solve_vp, vp_residual};
use viscoflow::operators::zoo;
use viscoflow::space::{DomainSampler, Point};

fn main() -> viscoflow::Result<()> {
    let mut sampler = DomainSampler::new(5);
    for e in zoo() {
        let p = &e.problem;
        let vp = solve_vp(p, &Point::zeros(2), 1e-13, 100_000)?;
        let cert = vp.certificate();
        let probes = fix_probes(p, &mut sampler, 100)?;
        let r = vp_residual(&vp.q_star, p, &probes, 1e-8)?;
        println!(
            "{:<22} q* = {:?}  iterations {}  contraction ratio {:.4} ({})  VI residual {:.2e} ({})",
            e.name,
            vp.q_star.coords(),
            vp.iterations,
            cert.max_ratio,
            if cert.ok { "ok" } else { "FAIL" },
            r.max_value,
            if r.pass { "ok" } else { "FAIL" }
        );
    }
    Ok(())
}
