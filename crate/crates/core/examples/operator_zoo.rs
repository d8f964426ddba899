//! The standard planar problems: invariance of the domain, nonexpansiveness
//! of `T`, and the anchored fixed point `q*` of each.

use viscoflow::analysis::solve_vp;
use viscoflow::operators::{fixed_point_defect, verify_nonexpansive, zoo};
use viscoflow::space::{DomainSampler, Point};

fn main() -> viscoflow::Result<()> {
    for (i, e) in zoo().into_iter().enumerate() {
        let p = &e.problem;
        let mut sampler = DomainSampler::with_stream(42, i as u64);
        p.certify(&mut sampler, 500)?;
        let lip = verify_nonexpansive(&p.operator, &mut sampler, &p.domain, 500, 1e-12)?;
        let defect = fixed_point_defect(&p.operator, &mut sampler, 100)?;
        let vp = solve_vp(p, &Point::zeros(2), 1e-13, 100_000)?;
        println!(
            "{:<22} Lip <= {:.6} ({}), Fix defect {:.1e}, q* = {:?} after {} steps",
            e.name,
            lip.max_ratio,
            lip.pairs_used,
            defect,
            vp.q_star.coords(),
            vp.iterations
        );
    }
    Ok(())
}
