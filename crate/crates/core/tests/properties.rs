use proptest::prelude::*;

use viscoflow::discrete::{iterate_dds, iterate_halpern, iterate_lions};
use viscoflow::operators::{project_fix, verify_nonexpansive, zoo, Contraction, Operator, Problem};
use viscoflow::schedule::{DiscreteSchedule, ThetaSchedule};
use viscoflow::space::{ConvexSet, DomainSampler, Point};

fn point(dim: usize) -> impl Strategy<Value = Point> {
    prop::collection::vec(-20.0..20.0_f64, dim).prop_map(|v| Point::new(v).unwrap())
}

fn nonzero(dim: usize) -> impl Strategy<Value = Point> {
    point(dim).prop_filter("nonzero", |p| p.norm() > 1e-3)
}

fn convex_set(dim: usize) -> impl Strategy<Value = ConvexSet> {
    prop_oneof![
        (point(dim), 0.1..10.0_f64).prop_map(|(c, r)| ConvexSet::ball(c, r).unwrap()),
        (nonzero(dim), -5.0..5.0_f64).prop_map(|(a, b)| ConvexSet::halfspace(a, b).unwrap()),
        (point(dim), point(dim), 0.0..5.0_f64).prop_map(|(lo, d, w)| {
            let hi = Point::new(
                lo.coords()
                    .iter()
                    .zip(d.coords())
                    .map(|(l, e)| l + e.abs() + w)
                    .collect(),
            )
            .unwrap();
            ConvexSet::boxed(lo, hi).unwrap()
        }),
        (point(dim), nonzero(dim)).prop_map(|(a, b)| ConvexSet::affine(a, vec![b]).unwrap()),
    ]
}

fn dim_and_set() -> impl Strategy<Value = (ConvexSet, Point, Point)> {
    (1usize..6).prop_flat_map(|d| (convex_set(d), point(d), point(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn projection_properties((set, x, y) in dim_and_set()) {
        let px = set.project(&x).unwrap();
        let py = set.project(&y).unwrap();
        let scale = 1.0 + x.norm().max(y.norm());
        prop_assert!(set.distance(&px).unwrap() <= 1e-12 * scale);
        prop_assert!(set.project(&px).unwrap().distance(&px) <= 1e-12 * scale);
        prop_assert!(px.distance(&py) <= x.distance(&y) + 1e-12 * scale);
        // Variational characterization against a point of K.
        let k = set.project(&y).unwrap();
        let v: f64 = (&px - &x).coords().iter().zip((&px - &k).coords()).map(|(a, b)| a * b).sum();
        prop_assert!(v <= 1e-10 * scale * scale);
        prop_assert!(x.distance(&px) <= x.distance(&k) + 1e-12 * scale);
    }

    #[test]
    fn set_json_round_trip((set, _x, _y) in dim_and_set()) {
        let text = serde_json::to_string(&set).unwrap();
        let back: ConvexSet = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, set);
    }

    #[test]
    fn power_schedule_is_decreasing(k in 0.05..5.0_f64, nu in 0.05..1.0_f64, t in 0.0..1e3_f64, dt in 1e-3..10.0_f64) {
        let s = ThetaSchedule::power(k, nu).unwrap().unclamped();
        prop_assert!(s.theta(t + dt).unwrap() < s.theta(t).unwrap());
        let c = ThetaSchedule::power(k, nu).unwrap();
        let v = c.theta(t).unwrap();
        prop_assert!(v > 0.0 && v <= 1.0);
    }

    #[test]
    fn theta_prime_matches_differences(k in 0.05..5.0_f64, nu in 0.05..1.0_f64, t in 0.0..1e3_f64) {
        let s = ThetaSchedule::power(k, nu).unwrap();
        if let Some((_, hi)) = s.clamp_interval() {
            prop_assume!((t - hi).abs() > 1e-2);
        }
        let h = 1e-5 * (1.0 + t);
        let lo = (t - h).max(0.0);
        let fd = (s.theta(t + h).unwrap() - s.theta(lo).unwrap()) / (t + h - lo);
        let d = s.theta_prime(t).unwrap().value;
        prop_assert!((fd - d).abs() <= 1e-6 * d.abs().max(1e-12) + 1e-12, "fd {} vs {}", fd, d);
    }

    #[test]
    fn big_theta_matches_quadrature(k in 0.05..5.0_f64, nu in 0.05..1.0_f64, t in 0.0..1e3_f64) {
        let s = ThetaSchedule::power(k, nu).unwrap();
        let a = s.big_theta(t).unwrap();
        let b = s.big_theta_quadrature(t).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn iterates_stay_in_the_domain(idx in 0usize..9, k in 0.2..4.0_f64, nu in 0.3..1.0_f64, seed in any::<u64>()) {
        let e = &zoo()[idx];
        let mut s = DomainSampler::new(seed);
        let x1 = s.sample_in(&e.problem.domain).unwrap();
        let seq = DiscreteSchedule::sampled(ThetaSchedule::power(k, nu).unwrap());
        let run = iterate_dds(&e.problem, &seq, &x1, 200).unwrap();
        for x in &run.states {
            prop_assert!(e.problem.domain.distance(x).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn scheme_identities(angle in 0.1..3.0_f64, u in point(2), x1 in point(2)) {
        let op = Operator::rotation(2, angle, [0, 1]).unwrap();
        let seq = |n: usize| 1.0 / (n as f64 + 1.0);
        let whole = |f| Problem::new(ConvexSet::whole(2), op.clone(), f).unwrap();
        let h = iterate_halpern(&op, &seq, &x1, 50).unwrap();
        prop_assert_eq!(h.states, iterate_dds(&whole(Contraction::zero(2)), &seq, &x1, 50).unwrap().states);
        let l = iterate_lions(&op, &u, &seq, &x1, 50).unwrap();
        prop_assert_eq!(l.states, iterate_dds(&whole(Contraction::constant(u.clone())), &seq, &x1, 50).unwrap().states);
    }

    #[test]
    fn averaged_maps_share_fixed_points(lambda in 0.05..1.0_f64, idx in 0usize..9, x in point(2)) {
        let inner = zoo()[idx].problem.operator.clone();
        let avg = Operator::averaged(lambda, inner.clone()).unwrap();
        let a = project_fix(&avg, &x).unwrap();
        let b = project_fix(&inner, &x).unwrap();
        prop_assert!(a.distance(&b) <= 1e-9);
        let mut s = DomainSampler::new(idx as u64);
        prop_assert!(verify_nonexpansive(&avg, &mut s, &ConvexSet::whole(2), 50, 1e-12).unwrap().pass);
    }
}

#[test]
fn residual_trend_on_zoo_problems() {
    let seq = DiscreteSchedule::sampled(ThetaSchedule::power(2.0, 1.0).unwrap());
    let x1 = Point::new(vec![5.0, -5.0]).unwrap();
    for e in zoo() {
        let run = iterate_dds(&e.problem, &seq, &x1, 1000).unwrap();
        let early = run.residuals[9];
        let late = *run.residuals.last().unwrap();
        assert!(late < early || late <= 1e-12, "{}: {early} -> {late}", e.name);
    }
}
