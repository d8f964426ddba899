//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::fs;
use std::time::{Duration, Instant};

use viscoflow::analysis::{
    boundedness_verdict, fit_rate, fix_probes, gronwall_check, gronwall_triple, solve_vp, stability_verdict,
    vp_residual, Verdict,
};
use viscoflow::experiment::{cmd_run, ExperimentConfig};
use viscoflow::flow::{euler_dds_equivalence, integrate, Perturbation, PerturbationClass, SolverConfig};
use viscoflow::operators::{project_fix, zoo, zoo_problem, Contraction, Operator, Problem};
use viscoflow::schedule::{check_continuous_conditions, check_discrete_conditions, DiscreteSchedule, ThetaSchedule};
use viscoflow::space::{ConvexSet, DomainSampler, Point};
use viscoflow::Result;

const SEED: u64 = 20_240_611;
const FLOW_PROBLEMS: [&str; 4] = ["negation", "rotation", "ball_projection", "ball_reflection"];

struct Verdicts {
    pass: bool,
    detail: String,
}

impl Verdicts {
    fn new() -> Self {
        Verdicts {
            pass: true,
            detail: String::new(),
        }
    }

    /// Records one sub-check; failing ones are listed in the detail.
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.pass = false;
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            self.detail.push_str(&what.into());
        }
    }

    fn note(mut self, summary: impl Into<String>) -> Self {
        if self.pass {
            self.detail = summary.into();
        }
        self
    }
}

fn pt(v: &[f64]) -> Point {
    Point::new(v.to_vec()).expect("finite literal")
}

fn x0() -> Point {
    pt(&[3.0, -4.0])
}

fn flow_problem(name: &str) -> Problem {
    zoo_problem(name).expect("zoo entry")
}

fn vp_oracle() -> Result<Verdicts> {
    let mut v = Verdicts::new();
    let mut worst_ratio = 0.0_f64;
    let mut worst_residual = f64::NEG_INFINITY;
    let mut slowest = Duration::ZERO;
    for e in zoo() {
        let start = Instant::now();
        let p = &e.problem;
        let sol = solve_vp(p, &x0(), 1e-13, 10_000)?;
        let cert = sol.certificate();
        let mut sampler = DomainSampler::with_stream(SEED, 1);
        let probes = fix_probes(p, &mut sampler, 100)?;
        let r = vp_residual(&sol.q_star, p, &probes, 1e-8)?;
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        worst_ratio = worst_ratio.max(cert.max_ratio);
        worst_residual = worst_residual.max(r.max_value);
        v.check(
            cert.ok && cert.max_ratio <= p.alpha() + 1e-12,
            format!("{}: gap ratio {:.3e}", e.name, cert.max_ratio),
        );
        v.check(r.pass, format!("{}: vp residual {:.3e}", e.name, r.max_value));
        v.check(
            elapsed < Duration::from_secs(1),
            format!("{}: took {elapsed:?}", e.name),
        );

        // A point of Fix(T) moved away from f(q*) must violate the inequality.
        let pull = &p.f(&sol.q_star)? - &sol.q_star;
        if pull.norm() > 1e-9 {
            let shifted = project_fix(&p.operator, &sol.q_star.axpy(-1e-2 / pull.norm(), &pull))?;
            if shifted.distance(&sol.q_star) > 1e-6 {
                let bad = vp_residual(&shifted, p, std::slice::from_ref(&sol.q_star), 1e-8)?;
                v.check(!bad.pass, format!("{}: shifted q* not detected", e.name));
            }
        }
    }
    Ok(v.note(format!(
        "{} problems, max gap ratio {worst_ratio:.3}, max vp residual {worst_residual:.2e}, slowest {slowest:.2?}",
        zoo().len()
    )))
}

fn strong_convergence() -> Result<Verdicts> {
    let mut v = Verdicts::new();
    let s = ThetaSchedule::power(2.0, 1.0)?;
    let cfg = SolverConfig::rk45(1e-9, 1e3);
    let mut worst = 0.0_f64;
    for name in FLOW_PROBLEMS {
        let p = flow_problem(name);
        let q = solve_vp(&p, &x0(), 1e-14, 10_000)?.q_star;
        let start = Instant::now();
        let traj = integrate(&p, &s, &x0(), &cfg, None)?;
        let elapsed = start.elapsed();
        let d = traj.last().1.distance(&q);
        worst = worst.max(d);
        v.check(d <= 1e-2, format!("{name}: ||x(t_end) - q*|| = {d:.3e}"));
        v.check(elapsed < Duration::from_secs(10), format!("{name}: took {elapsed:?}"));
    }
    Ok(v.note(format!("max ||x(1e3) - q*|| = {worst:.2e}")))
}

fn boundedness() -> Result<Verdicts> {
    let mut v = Verdicts::new();
    let s = ThetaSchedule::power(2.0, 1.0)?;
    let cfg = SolverConfig::rk45(1e-9, 1e3);
    let mut margin = f64::INFINITY;
    for name in FLOW_PROBLEMS {
        let p = flow_problem(name);
        let vp = solve_vp(&p, &x0(), 1e-14, 10_000)?;
        let traj = integrate(&p, &s, &x0(), &cfg, None)?;
        let b = boundedness_verdict(&traj, &vp, &p)?;
        margin = margin.min(b.bound - b.sup_distance);
        v.check(
            b.sup_distance <= b.bound + 1e-6,
            format!("{name}: sup {:.6} > bound {:.6}", b.sup_distance, b.bound),
        );
    }
    Ok(v.note(format!("smallest margin bound - sup = {margin:.3e}")))
}

fn rate() -> Result<Verdicts> {
    let mut v = Verdicts::new();
    let rot = Operator::rotation(2, std::f64::consts::FRAC_PI_2, [0, 1])?;
    // gamma = 1 with a nonzero constant anchor; with f = 0 the state decays
    // like e^{-t} and the residual sits at the solver floor.
    let p = Problem::new(ConvexSet::whole(2), rot.clone(), Contraction::constant(pt(&[1.0, 0.0])))?;
    let cfg = SolverConfig::rk45(1e-9, 1e4);
    let start_state = pt(&[1.0, 1.0]);
    let mut summary = Vec::new();
    for (k, nu, lo, hi, check_sup) in [(2.0, 1.0, -1.15, -0.85, true), (1.0, 0.5, -0.65, -0.35, false)] {
        let start = Instant::now();
        let traj = integrate(&p, &ThetaSchedule::power(k, nu)?, &start_state, &cfg, None)?;
        let r = fit_rate(&traj, nu, 0.5)?;
        let elapsed = start.elapsed();
        let slope = r.fitted_slope.unwrap_or(f64::NAN);
        v.check(
            (lo..=hi).contains(&slope),
            format!("power({k}, {nu}): slope {slope:.4} outside [{lo}, {hi}]"),
        );
        if check_sup {
            let (a, b) = (
                r.first_half_sup.unwrap_or(f64::NAN),
                r.second_half_sup.unwrap_or(f64::NAN),
            );
            v.check(
                b <= a * (1.0 + 1e-6),
                format!("power({k}, {nu}): scaled sup grows {a:.6} -> {b:.6}"),
            );
        }
        v.check(
            elapsed < Duration::from_secs(60),
            format!("power({k}, {nu}): took {elapsed:?}"),
        );
        summary.push(format!("power({k}, {nu}) slope {slope:.4}"));
    }
    let zero = Problem::new(ConvexSet::whole(2), rot, Contraction::zero(2))?;
    let traj = integrate(&zero, &ThetaSchedule::power(2.0, 1.0)?, &start_state, &cfg, None)?;
    let floor = traj.residuals.last().copied().unwrap_or(f64::NAN);
    summary.push(format!("zero anchor final residual {floor:.1e}"));
    Ok(v.note(summary.join(", ")))
}

fn euler_bridge() -> Result<Verdicts> {
    let mut v = Verdicts::new();
    let start = Instant::now();
    let seq = DiscreteSchedule::sampled(ThetaSchedule::power(2.0, 1.0)?);
    let mut worst = 0.0_f64;
    for name in ["negation", "rotation", "ball_projection"] {
        let r = euler_dds_equivalence(&flow_problem(name), &seq, &x0(), 1000)?;
        worst = worst.max(r.max_gap);
        v.check(r.max_gap <= 1e-13, format!("{name}: gap {:.3e}", r.max_gap));
    }
    let neg = Problem::new(ConvexSet::whole(2), Operator::Negation { dim: 2 }, Contraction::zero(2))?;
    let lieder = |n: usize| 1.0 / (n as f64 + 2.0);
    let r = euler_dds_equivalence(&neg, &lieder, &pt(&[1.0, 0.0]), 100)?;
    v.check(r.max_gap <= 1e-13, format!("1/(n+2): gap {:.3e}", r.max_gap));
    let r = euler_dds_equivalence(&neg, &|_n: usize| 0.3, &pt(&[1.0, 0.0]), 50)?;
    v.check(r.max_gap <= 1e-13, format!("constant: gap {:.3e}", r.max_gap));
    let elapsed = start.elapsed();
    v.check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"));
    Ok(v.note(format!("max relative gap {worst:.1e}")))
}

fn stability() -> Result<Verdicts> {
    let mut v = Verdicts::new();
    let s = ThetaSchedule::power(2.0, 1.0)?;
    let cfg = SolverConfig::rk45(1e-9, 1e3);
    let h = Perturbation::power_decay(1.0, 2.0, pt(&[1.0, 0.0]), PerturbationClass::L1)?;
    let mut summary = Vec::new();
    for name in FLOW_PROBLEMS {
        let p = flow_problem(name);
        let q = solve_vp(&p, &x0(), 1e-14, 10_000)?.q_star;
        let x = integrate(&p, &s, &x0(), &cfg, None)?;
        let y = integrate(&p, &s, &x0(), &cfg, Some(&h))?;
        let r = stability_verdict(&x, &y)?;
        let d = y.last().1.distance(&q);
        v.check(
            r.median_last_decade <= r.median_first_decade / 10.0,
            format!(
                "{name}: median gap {:.3e} -> {:.3e}",
                r.median_first_decade, r.median_last_decade
            ),
        );
        v.check(r.verdict == Verdict::Pass, format!("{name}: verdict {:?}", r.verdict));
        v.check(d <= 2e-2, format!("{name}: ||y(t_end) - q*|| = {d:.3e}"));
        summary.push(format!("{name} {:.1e}", r.median_last_decade / r.median_first_decade));
    }
    Ok(v.note(format!("decade median ratios: {}", summary.join(", "))))
}

fn gronwall() -> Result<Verdicts> {
    let mut v = Verdicts::new();
    let n = 10_000;
    let grid: Vec<f64> = (0..n).map(|i| 5.0 * i as f64 / (n - 1) as f64).collect();
    let u: Vec<f64> = grid.iter().map(|t| (-2.0 * t).exp()).collect();
    let g = gronwall_check(&grid, &u, &vec![1.0; n], &vec![0.0; n], 1e-8)?;
    v.check(
        g.inequality_ok && g.bound_ok == Some(true) && g.max_bound_violation <= 1e-8,
        format!("equality case: bound violation {:.3e}", g.max_bound_violation),
    );
    let s = ThetaSchedule::power(2.0, 1.0)?;
    let cfg = SolverConfig::rk45(1e-9, 1e3);
    for name in FLOW_PROBLEMS {
        let p = flow_problem(name);
        let q = solve_vp(&p, &x0(), 1e-14, 10_000)?.q_star;
        let traj = integrate(&p, &s, &x0(), &cfg, None)?;
        let [t, u, vv, w] = gronwall_triple(&traj, &q)?;
        let r = gronwall_check(&t, &u, &vv, &w, 1e-6)?;
        v.check(
            r.inequality_ok && r.bound_ok == Some(true),
            format!(
                "{name}: inequality {:.3e}, bound {:.3e}",
                r.max_inequality_violation, r.max_bound_violation
            ),
        );
    }
    Ok(v.note(format!("equality case bound violation {:.1e}", g.max_bound_violation)))
}

fn projections() -> Result<Verdicts> {
    let mut v = Verdicts::new();
    let start = Instant::now();
    let sets = [
        ConvexSet::ball(pt(&[1.0, -2.0, 0.5]), 2.0)?,
        ConvexSet::halfspace(pt(&[1.0, 2.0, -1.0]), 0.5)?,
        ConvexSet::affine(pt(&[1.0, 0.0, 1.0]), vec![pt(&[1.0, 1.0, 0.0])])?,
        ConvexSet::boxed(pt(&[-1.0, 0.0, -2.0]), pt(&[1.0, 3.0, 0.5]))?,
        ConvexSet::whole(3),
        ConvexSet::intersection(vec![
            ConvexSet::unit_ball(3),
            ConvexSet::halfspace(pt(&[1.0, 1.0, 1.0]), 0.3)?,
        ])?,
    ];
    let cases = 10_000;
    let mut sampler = DomainSampler::new(SEED);
    for set in &sets {
        let tol = match set {
            ConvexSet::Intersection { .. } => 1e-9,
            _ => 1e-12,
        };
        let (mut nonexp, mut idem, mut charact, mut optim) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
        for _ in 0..cases {
            let x = sampler.point(3);
            let y = sampler.point(3);
            let k = sampler.sample_in(set)?;
            let (px, py) = (set.project(&x)?, set.project(&y)?);
            let scale = 1.0 + x.norm().max(y.norm());
            nonexp = nonexp.max((px.distance(&py) - x.distance(&y)) / scale);
            idem = idem.max(set.project(&px)?.distance(&px) / scale);
            let d = &px - &x;
            charact = charact.max(
                d.coords()
                    .iter()
                    .zip((&px - &k).coords())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / (scale * scale),
            );
            optim = optim.max((x.distance(&px) - x.distance(&k)) / scale);
        }
        let name = set.kind_name();
        v.check(nonexp <= tol, format!("{name}: nonexpansiveness {nonexp:.2e}"));
        v.check(idem <= tol, format!("{name}: idempotence {idem:.2e}"));
        v.check(charact <= tol, format!("{name}: characterization {charact:.2e}"));
        v.check(optim <= tol, format!("{name}: optimality {optim:.2e}"));
    }
    let elapsed = start.elapsed();
    v.check(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"));
    Ok(v.note(format!("{} set kinds x {cases} cases in {elapsed:.2?}", sets.len())))
}

fn conditions() -> Result<Verdicts> {
    let mut v = Verdicts::new();
    for (k, nu) in [(0.5, 1.0), (2.0, 1.0), (1.0, 0.5), (3.0, 0.25), (0.1, 0.9)] {
        let c = check_continuous_conditions(&ThetaSchedule::power(k, nu)?, 1e4)?;
        let analytic = [&c.c1, &c.c2, &c.c5]
            .iter()
            .all(|f| f.evidence == viscoflow::schedule::Evidence::Analytic);
        v.check(c.all_hold() && analytic, format!("power({k}, {nu}): {c:?}"));
    }
    let c = check_continuous_conditions(&ThetaSchedule::constant(0.5)?, 1e4)?;
    v.check(!c.c1.holds, "constant schedule passes C'1");
    let lieder = DiscreteSchedule::new(ThetaSchedule::power(1.0, 1.0)?, 1.0)?;
    let d = check_discrete_conditions(&lieder, 10_000)?;
    v.check(d.c1.holds && d.c2.holds && d.c5.holds, format!("1/(n+2): {d:?}"));
    Ok(v.note("power family C'1, C'2, C'5 analytic; constant fails C'1; 1/(n+2) meets C1, C2, C5"))
}

fn determinism() -> Result<Verdicts> {
    let mut v = Verdicts::new();
    let text = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/minimal.toml"))?;
    let dir = tempfile::tempdir()?;
    let mut outputs = Vec::new();
    for run in ["first", "second"] {
        let mut cfg = ExperimentConfig::from_toml_str(&text)?;
        cfg.output_dir = dir.path().join(run);
        let outcome = cmd_run(&cfg)?;
        v.check(
            outcome.exit_code() == 0,
            format!("{run} run exit {}", outcome.exit_code()),
        );
        let mut files = Vec::new();
        for name in ["trajectory.csv", "report.json", "plot.script"] {
            files.push(fs::read(cfg.output_dir.join(name))?);
        }
        outputs.push(files);
    }
    v.check(outputs[0] == outputs[1], "outputs differ between runs");
    let bytes: usize = outputs[0].iter().map(Vec::len).sum();
    Ok(v.note(format!("3 files, {bytes} bytes, byte-identical")))
}

type Criterion = (&'static str, fn() -> Result<Verdicts>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("VP oracle", vp_oracle),
        ("strong convergence", strong_convergence),
        ("boundedness", boundedness),
        ("rate", rate),
        ("Euler bridge", euler_bridge),
        ("stability", stability),
        ("Gronwall checker", gronwall),
        ("projection properties", projections),
        ("condition checkers", conditions),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run().unwrap_or_else(|e| Verdicts {
            pass: false,
            detail: format!("error: {e}"),
        });
        if !v.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {name}: {} ({}; {:.2?})",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed()
        );
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
