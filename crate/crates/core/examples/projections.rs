//! Metric projections onto each supported convex set, checked against the
//! variational characterization `<P(x) - x, P(x) - y> <= 0` for `y` in the set.

use viscoflow::space::{check_projection_characterization, ConvexSet, DomainSampler, Point};

fn main() -> viscoflow::Result<()> {
    let pt = |v: &[f64]| Point::new(v.to_vec());
    let sets = [
        ConvexSet::ball(pt(&[1.0, 0.0, 0.0])?, 2.0)?,
        ConvexSet::halfspace(pt(&[1.0, 1.0, 1.0])?, 1.0)?,
        ConvexSet::boxed(pt(&[-1.0, -1.0, 0.0])?, pt(&[1.0, 2.0, 0.5])?)?,
        ConvexSet::affine(pt(&[0.0, 0.0, 1.0])?, vec![pt(&[1.0, 1.0, 0.0])?])?,
        ConvexSet::singleton(pt(&[0.5, 0.5, 0.5])?),
        ConvexSet::intersection(vec![
            ConvexSet::unit_ball(3),
            ConvexSet::halfspace(pt(&[0.0, 0.0, 1.0])?, 0.2)?,
        ])?,
    ];
    let x = pt(&[4.0, -3.0, 2.0])?;
    let mut sampler = DomainSampler::new(1);
    for set in &sets {
        let p = set.project(&x)?;
        let probes = sampler.samples_in(set, 1000)?;
        let r = check_projection_characterization(set, &x, &probes, 1e-9)?;
        println!(
            "{:<12} P(x) = {:?}  dist = {:.6}  max <P-x, P-y> = {:.2e}  {}",
            set.kind_name(),
            p.coords(),
            set.distance(&x)?,
            r.max_violation,
            if r.pass { "ok" } else { "VIOLATED" }
        );
    }
    Ok(())
}
