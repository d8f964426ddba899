//! Batch experiments described by a TOML file: single runs, flow versus
//! iteration comparisons, parameter sweeps and schedule checks.
//!
//! Every command computes all outputs in memory first and then writes them
//! through temporary files that are renamed on success, so a failed command
//! leaves no partial files behind.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    boundedness_verdict, fit_rate, fix_probes, gronwall_check, gronwall_triple, solve_vp, stability_verdict,
    vp_residual, BoundednessReport, ContractionCertificate, GronwallReport, RateReport, StabilityReport, Verdict,
    VpResidualReport, VpSolution,
};
use crate::discrete::iterate_dds;
use crate::error::{Error, Result};
use crate::flow::{
    euler_dds_equivalence, fmt_float, integrate, EulerBridgeReport, Perturbation, Recording, SolverConfig, SolverStats,
    Trajectory,
};
use crate::operators::Problem;
use crate::schedule::{
    check_continuous_conditions, check_discrete_conditions, ConditionReport, DiscreteSchedule, ScheduleKind,
    ThetaSchedule,
};
use crate::space::{DomainSampler, Point};

/// Stream of the root seed used for `Fix(T)` probes.
pub const STREAM_PROBES: u64 = 1;

pub const VP_TOL: f64 = 1e-13;
pub const VP_MAX_ITER: usize = 100_000;
pub const VP_PROBES: usize = 100;
pub const VP_RESIDUAL_TOL: f64 = 1e-8;
pub const GRONWALL_TOL: f64 = 1e-6;
/// Horizon for numeric discrete-condition evidence.
pub const CONDITION_TERMS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Vp,
    /// Rate fit against the claimed exponent.
    Rate(f64),
    Boundedness,
    Stability,
    Gronwall,
    Conditions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSettings {
    pub steps: usize,
}

impl Default for CompareSettings {
    fn default() -> Self {
        CompareSettings { steps: 100 }
    }
}

/// Axes of a sweep; an empty axis keeps the template value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub k: Vec<f64>,
    #[serde(default)]
    pub nu: Vec<f64>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub dim: Vec<usize>,
}

fn default_analyses() -> Vec<Analysis> {
    vec![Analysis::Vp, Analysis::Boundedness, Analysis::Gronwall]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_rate_window() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub schedule: ThetaSchedule,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    pub x0: Point,
    #[serde(default = "default_analyses")]
    pub analyses: Vec<Analysis>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Fraction of the horizon used by rate fits.
    #[serde(default = "default_rate_window")]
    pub rate_window: f64,
    #[serde(default)]
    pub compare: CompareSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepGrid>,
}

/// Command-line overrides applied on top of a loaded configuration.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub t_end: Option<f64>,
    pub steps: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(t_end) = o.t_end {
            self.solver.t_end = t_end;
        }
        if let Some(steps) = o.steps {
            self.compare.steps = steps;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.schedule.validate()?;
        self.solver.validate()?;
        if let Some(h) = &self.perturbation {
            h.validate()?;
        }
        self.x0.check_dim(self.problem.dim())?;
        self.problem.domain.require_member(&self.x0, "x0")?;
        if !(self.rate_window > 0.0 && self.rate_window <= 1.0) {
            return Err(Error::Config("rate_window must lie in (0, 1]".into()));
        }
        for a in &self.analyses {
            if let Analysis::Rate(nu) = a {
                if !(nu.is_finite() && *nu > 0.0) {
                    return Err(Error::Config(format!("rate exponent must be positive, got {nu}")));
                }
            }
        }
        if self.wants(Analysis::Stability) && self.perturbation.is_none() {
            return Err(Error::Config(
                "stability analysis needs a [perturbation] section".into(),
            ));
        }
        Ok(())
    }

    fn wants(&self, a: Analysis) -> bool {
        self.analyses.contains(&a)
    }

    fn conditions_only(&self) -> bool {
        !self.analyses.is_empty() && self.analyses.iter().all(|a| *a == Analysis::Conditions)
    }
}

/// Result of a command: the files written and whether a verdict failed.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub verdicts: BTreeMap<String, Verdict>,
}

impl Outcome {
    pub fn failed(&self) -> bool {
        self.verdicts.values().any(|v| v.is_failure())
    }

    /// 0 when every verdict holds, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failed() {
            2
        } else {
            0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VpSection {
    pub solution: VpSolution,
    pub certificate: ContractionCertificate,
    pub residual: VpResidualReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilitySection {
    pub report: StabilityReport,
    /// `||y(t_end) - q*||` for the perturbed run.
    pub final_distance_perturbed: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dim: usize,
    pub t_end: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver_stats: Option<SolverStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_star: Option<Point>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_state: Option<Point>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vp: Option<VpSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<Vec<RateReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundedness: Option<BoundednessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gronwall: Option<GronwallReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp_warning: Option<String>,
    pub verdicts: BTreeMap<String, Verdict>,
}

/// In-memory products of a run.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub report: RunReport,
    /// The unforced flow; every analysis except stability reads this run.
    pub trajectory: Option<Trajectory>,
    /// The forced flow, present iff a perturbation is configured.
    pub perturbed: Option<Trajectory>,
}

pub fn conditions_report(cfg: &ExperimentConfig) -> Result<ConditionReport> {
    let continuous = check_continuous_conditions(&cfg.schedule, cfg.solver.t_end)?;
    let seq = DiscreteSchedule::sampled(cfg.schedule.clone());
    let discrete = check_discrete_conditions(&seq, CONDITION_TERMS)?;
    Ok(ConditionReport {
        continuous: Some(continuous),
        discrete: Some(discrete),
        clamp_warning: cfg.schedule.clamp_warning(),
    })
}

fn solve_vp_for(cfg: &ExperimentConfig) -> Result<Option<VpSolution>> {
    if cfg.problem.fix_set().is_none() {
        return Ok(None);
    }
    solve_vp(&cfg.problem, &cfg.x0, VP_TOL, VP_MAX_ITER).map(Some)
}

fn require_vp<'a>(vp: &'a Option<VpSolution>, what: &str) -> Result<&'a VpSolution> {
    vp.as_ref()
        .ok_or_else(|| Error::Unsupported(format!("{what} needs q*, but Fix(T) is unknown")))
}

/// Integrates and analyses without touching the file system.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let mut verdicts = BTreeMap::new();
    let mut report = RunReport {
        dim: cfg.problem.dim(),
        t_end: cfg.solver.t_end,
        seed: cfg.seed,
        solver_stats: None,
        q_star: None,
        final_state: None,
        final_residual: None,
        final_distance: None,
        vp: None,
        rate: None,
        boundedness: None,
        gronwall: None,
        stability: None,
        conditions: None,
        clamp_warning: cfg.schedule.clamp_warning(),
        verdicts: BTreeMap::new(),
    };
    if cfg.wants(Analysis::Conditions) {
        report.conditions = Some(conditions_report(cfg)?);
    }
    if cfg.conditions_only() {
        return Ok(RunArtifacts {
            report,
            trajectory: None,
            perturbed: None,
        });
    }

    let p = &cfg.problem;
    let vp = solve_vp_for(cfg)?;
    let traj = integrate(p, &cfg.schedule, &cfg.x0, &cfg.solver, None)?;
    let perturbed = match &cfg.perturbation {
        Some(h) => Some(integrate(p, &cfg.schedule, &cfg.x0, &cfg.solver, Some(h))?),
        None => None,
    };
    let (_, last) = traj.last();
    report.solver_stats = Some(traj.stats.clone());
    report.final_state = Some(last.clone());
    report.final_residual = traj.residuals.last().copied();
    report.q_star = vp.as_ref().map(|v| v.q_star.clone());
    report.final_distance = vp.as_ref().map(|v| last.distance(&v.q_star));

    if cfg.wants(Analysis::Vp) {
        let sol = require_vp(&vp, "vp analysis")?.clone();
        let mut sampler = DomainSampler::with_stream(cfg.seed, STREAM_PROBES);
        let probes = fix_probes(p, &mut sampler, VP_PROBES)?;
        let residual = vp_residual(&sol.q_star, p, &probes, VP_RESIDUAL_TOL)?;
        let certificate = sol.certificate();
        verdicts.insert("vp".into(), Verdict::from_bool(certificate.ok && residual.pass));
        report.vp = Some(VpSection {
            solution: sol,
            certificate,
            residual,
        });
    }
    let mut rates = Vec::new();
    for a in &cfg.analyses {
        if let Analysis::Rate(nu) = a {
            let r = fit_rate(&traj, *nu, cfg.rate_window)?;
            verdicts.insert(format!("rate(nu={nu})"), r.verdict);
            rates.push(r);
        }
    }
    if !rates.is_empty() {
        report.rate = Some(rates);
    }
    if cfg.wants(Analysis::Boundedness) {
        let sol = require_vp(&vp, "boundedness analysis")?;
        let b = boundedness_verdict(&traj, sol, p)?;
        verdicts.insert("boundedness".into(), Verdict::from_bool(b.pass));
        report.boundedness = Some(b);
    }
    if cfg.wants(Analysis::Gronwall) {
        let sol = require_vp(&vp, "gronwall analysis")?;
        let [t, u, v, w] = gronwall_triple(&traj, &sol.q_star)?;
        let g = gronwall_check(&t, &u, &v, &w, GRONWALL_TOL)?;
        verdicts.insert(
            "gronwall".into(),
            Verdict::from_bool(g.inequality_ok && g.bound_ok == Some(true)),
        );
        report.gronwall = Some(g);
    }
    if cfg.wants(Analysis::Stability) {
        let forced = perturbed.as_ref().expect("validated: stability implies a perturbation");
        let s = stability_verdict(&traj, forced)?;
        verdicts.insert("stability".into(), s.verdict);
        report.stability = Some(StabilitySection {
            report: s,
            final_distance_perturbed: vp.as_ref().map(|v| forced.last().1.distance(&v.q_star)),
        });
    }
    report.verdicts = verdicts;
    Ok(RunArtifacts {
        report,
        trajectory: Some(traj),
        perturbed,
    })
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out =
        serde_json::to_vec_pretty(value).map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

/// Writes every file under a temporary name first; renames only once all
/// writes succeeded.
fn commit(dir: &Path, files: Vec<(&str, Vec<u8>)>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, bytes) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            let _ = fs::remove_file(&tmp);
            return Err(e.into());
        }
        staged.push((tmp, dir.join(name)));
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, dest) in staged {
        fs::rename(&tmp, &dest)?;
        written.push(dest);
    }
    Ok(written)
}

/// Point lists with axis and scale directives, one block per series.
pub fn plot_script(traj: &Trajectory, q_star: Option<&Point>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "title \"residual decay\"");
    let _ = writeln!(s, "xlabel \"1 + t\"");
    let _ = writeln!(s, "ylabel \"norm\"");
    let _ = writeln!(s, "xscale log");
    let _ = writeln!(s, "yscale log");
    let mut series = |name: &str, values: &mut dyn Iterator<Item = (f64, f64)>| {
        let _ = writeln!(s, "series \"{name}\"");
        for (t, v) in values {
            if v > 0.0 {
                let _ = writeln!(s, "{} {}", fmt_float(1.0 + t), fmt_float(v));
            }
        }
        let _ = writeln!(s, "end");
    };
    series(
        "residual",
        &mut traj.times.iter().copied().zip(traj.residuals.iter().copied()),
    );
    if let Some(q) = q_star {
        series(
            "distance to q*",
            &mut traj
                .times
                .iter()
                .copied()
                .zip(traj.states.iter().map(|x| x.distance(q))),
        );
    }
    s
}

/// Integrates, analyses and writes `trajectory.csv`, `report.json` and
/// `plot.script` (only `report.json` in conditions-only mode), plus
/// `trajectory_perturbed.csv` when a perturbation is configured.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let art = run_experiment(cfg)?;
    let mut files = Vec::new();
    if let Some(traj) = &art.trajectory {
        let q = art.report.q_star.as_ref();
        let mut csv = Vec::new();
        traj.write_csv(&mut csv, q)?;
        files.push(("trajectory.csv", csv));
        files.push(("plot.script", plot_script(traj, q).into_bytes()));
    }
    if let Some(forced) = &art.perturbed {
        let mut csv = Vec::new();
        forced.write_csv(&mut csv, art.report.q_star.as_ref())?;
        files.push(("trajectory_perturbed.csv", csv));
    }
    files.push(("report.json", json_bytes(&art.report)?));
    Ok(Outcome {
        files: commit(&cfg.output_dir, files)?,
        verdicts: art.report.verdicts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub steps: usize,
    pub euler_bridge: EulerBridgeReport,
    pub max_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_star: Option<Point>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuous_final_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrete_final_distance: Option<f64>,
}

/// Flow and iteration side by side. The iterate `x_n` (with `x_1 = x0` and
/// `theta_n = theta(n)`) is paired with the flow at `t = n - 1`.
pub fn compare(cfg: &ExperimentConfig) -> Result<(Trajectory, crate::discrete::IterateSequence, CompareReport)> {
    cfg.validate()?;
    let n = cfg.compare.steps;
    let p = &cfg.problem;
    let horizon = n.saturating_sub(1).max(1);
    let times: Vec<f64> = (0..=horizon).map(|k| k as f64).collect();
    let solver = SolverConfig {
        t_end: horizon as f64,
        ..cfg.solver.clone()
    }
    .with_recording(Recording::Times { times });
    let traj = integrate(p, &cfg.schedule, &cfg.x0, &solver, None)?;
    let seq = DiscreteSchedule::sampled(cfg.schedule.clone());
    let dds = iterate_dds(p, &seq, &cfg.x0, n)?;
    let euler_bridge = euler_dds_equivalence(p, &seq, &cfg.x0, n)?;
    let gaps: Vec<f64> = dds
        .states
        .iter()
        .zip(&traj.states)
        .map(|(x, y)| x.distance(y))
        .collect();
    let q_star = solve_vp_for(cfg)?.map(|v| v.q_star);
    let report = CompareReport {
        steps: n,
        euler_bridge,
        max_gap: gaps.iter().copied().fold(0.0, f64::max),
        final_gap: gaps.last().copied(),
        continuous_final_distance: q_star.as_ref().map(|q| traj.last().1.distance(q)),
        discrete_final_distance: q_star.as_ref().and_then(|q| dds.last().map(|x| x.distance(q))),
        q_star,
    };
    Ok((traj, dds, report))
}

/// Writes `continuous.csv`, `discrete.csv`, `gap.csv` and `compare.json`.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (traj, dds, report) = compare(cfg)?;
    let q = report.q_star.as_ref();
    let mut continuous = Vec::new();
    traj.write_csv(&mut continuous, q)?;
    let mut discrete = Vec::new();
    dds.write_csv(&mut discrete, q)?;
    let mut gap = String::from("n,t,gap\n");
    for (k, x) in dds.states.iter().enumerate() {
        let _ = writeln!(
            gap,
            "{},{},{}",
            k + 1,
            fmt_float(traj.times[k]),
            fmt_float(x.distance(&traj.states[k]))
        );
    }
    let files = vec![
        ("continuous.csv", continuous),
        ("discrete.csv", discrete),
        ("gap.csv", gap.into_bytes()),
        ("compare.json", json_bytes(&report)?),
    ];
    Ok(Outcome {
        files: commit(&cfg.output_dir, files)?,
        verdicts: BTreeMap::new(),
    })
}

/// One grid point of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: Option<f64>,
    pub nu: Option<f64>,
    pub alpha: f64,
    pub dim: usize,
    pub fitted_slope: Option<f64>,
    pub sup_scaled_residual: Option<f64>,
    pub final_distance: Option<f64>,
    pub kappa: Option<f64>,
    pub rate_verdict: Option<Verdict>,
    pub boundedness_verdict: Option<Verdict>,
    pub error: Option<String>,
}

fn axis<T: Copy>(values: &[T]) -> Vec<Option<T>> {
    if values.is_empty() {
        vec![None]
    } else {
        values.iter().copied().map(Some).collect()
    }
}

/// The template with one grid point applied.
fn sweep_point(
    template: &ExperimentConfig,
    k: Option<f64>,
    nu: Option<f64>,
    alpha: Option<f64>,
    dim: Option<usize>,
) -> Result<ExperimentConfig> {
    let mut cfg = template.clone();
    cfg.sweep = None;
    if k.is_some() || nu.is_some() {
        let (k0, nu0) = match template.schedule.kind {
            ScheduleKind::Power { k, nu } => (Some(k), Some(nu)),
            _ => (None, None),
        };
        let (Some(k), Some(nu)) = (k.or(k0), nu.or(nu0)) else {
            return Err(Error::Config(
                "sweeping K or nu needs both values or a power schedule template".into(),
            ));
        };
        let mut s = ThetaSchedule::power(k, nu)?;
        s.clamp = template.schedule.clamp;
        cfg.schedule = s;
    }
    if let Some(alpha) = alpha {
        cfg.problem.contraction = cfg.problem.contraction.with_alpha(alpha)?;
    }
    if let Some(d) = dim {
        cfg.problem = Problem::new(
            cfg.problem.domain.resized(d)?,
            cfg.problem.operator.resized(d)?,
            cfg.problem.contraction.resized(d)?,
        )?;
        cfg.x0 = cfg.x0.resized(d, 0.0);
    }
    Ok(cfg)
}

fn sweep_row(cfg: &ExperimentConfig) -> Result<(Option<RateReport>, Option<f64>, Option<Verdict>)> {
    let art = run_experiment(cfg)?;
    let traj = art
        .trajectory
        .as_ref()
        .ok_or_else(|| Error::Config("sweep rows need an integrating analysis".into()))?;
    let nu = match cfg.schedule.kind {
        ScheduleKind::Power { nu, .. } => Some(nu),
        _ => cfg.analyses.iter().find_map(|a| match a {
            Analysis::Rate(nu) => Some(*nu),
            _ => None,
        }),
    };
    let rate = nu.map(|nu| fit_rate(traj, nu, cfg.rate_window)).transpose()?;
    let bounded = art.report.boundedness.as_ref().map(|b| Verdict::from_bool(b.pass));
    Ok((rate, art.report.final_distance, bounded))
}

/// Runs every grid point (concurrently) and returns rows in grid order:
/// `K` outermost, then `nu`, `alpha`, `dim`.
pub fn sweep(template: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let grid = template
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a [sweep] section".into()))?;
    if grid.k.is_empty() && grid.nu.is_empty() && grid.alpha.is_empty() && grid.dim.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let mut points = Vec::new();
    for k in axis(&grid.k) {
        for nu in axis(&grid.nu) {
            for alpha in axis(&grid.alpha) {
                for dim in axis(&grid.dim) {
                    points.push((k, nu, alpha, dim));
                }
            }
        }
    }
    let template_k = match template.schedule.kind {
        ScheduleKind::Power { k, .. } => Some(k),
        _ => None,
    };
    let template_nu = match template.schedule.kind {
        ScheduleKind::Power { nu, .. } => Some(nu),
        _ => None,
    };
    Ok(points
        .into_par_iter()
        .map(|(k, nu, alpha, dim)| {
            let mut row = SweepRow {
                k: k.or(template_k),
                nu: nu.or(template_nu),
                alpha: alpha.unwrap_or_else(|| template.problem.alpha()),
                dim: dim.unwrap_or_else(|| template.problem.dim()),
                fitted_slope: None,
                sup_scaled_residual: None,
                final_distance: None,
                kappa: None,
                rate_verdict: None,
                boundedness_verdict: None,
                error: None,
            };
            match sweep_point(template, k, nu, alpha, dim).and_then(|cfg| sweep_row(&cfg)) {
                Ok((rate, dist, bounded)) => {
                    if let Some(r) = rate {
                        row.fitted_slope = r.fitted_slope;
                        row.sup_scaled_residual = r.sup_scaled_residual;
                        row.kappa = r.kappa;
                        row.rate_verdict = Some(r.verdict);
                    }
                    row.final_distance = dist;
                    row.boundedness_verdict = bounded;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect())
}

fn opt_float(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn verdict_str(v: Option<Verdict>) -> &'static str {
    match v {
        Some(Verdict::Pass) => "pass",
        Some(Verdict::Fail) => "fail",
        Some(Verdict::Floor) => "floor",
        Some(Verdict::NotApplicable) => "n/a",
        None => "",
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "k,nu,alpha,dim,fitted_slope,sup_scaled_residual,final_distance,kappa,rate_verdict,boundedness_verdict,error\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            opt_float(r.k),
            opt_float(r.nu),
            fmt_float(r.alpha),
            r.dim,
            opt_float(r.fitted_slope),
            opt_float(r.sup_scaled_residual),
            opt_float(r.final_distance),
            opt_float(r.kappa),
            verdict_str(r.rate_verdict),
            verdict_str(r.boundedness_verdict),
            csv_quote(r.error.as_deref().unwrap_or("")),
        );
    }
    out
}

/// Writes `sweep.csv`. Row-level failures are recorded, not raised.
pub fn cmd_sweep(template: &ExperimentConfig) -> Result<Outcome> {
    let rows = sweep(template)?;
    let files = vec![("sweep.csv", sweep_csv(&rows).into_bytes())];
    Ok(Outcome {
        files: commit(&template.output_dir, files)?,
        verdicts: BTreeMap::new(),
    })
}

/// The condition report as pretty JSON.
pub fn cmd_check(cfg: &ExperimentConfig) -> Result<String> {
    cfg.schedule.validate()?;
    let r = conditions_report(cfg)?;
    let mut s = serde_json::to_string_pretty(&r).map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
x0 = [1.0, 0.0]
analyses = ["vp", "boundedness", "gronwall"]
seed = 7

[problem.domain]
kind = "whole_space"
dim = 2

[problem.operator]
kind = "negation"
dim = 2

[problem.contraction]
kind = "constant"
value = [0.0, 0.0]

[schedule]
kind = "power"
k = 2.0
nu = 1.0

[solver]
t_end = 1000.0

[solver.method]
kind = "rk45"
abs_tol = 1e-9
rel_tol = 1e-9
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.problem.dim(), 2);
        assert_eq!(cfg.rate_window, 0.5);
        assert_eq!(cfg.compare.steps, 100);
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rate_analysis_syntax() {
        let text = MINIMAL.replace(
            r#"analyses = ["vp", "boundedness", "gronwall"]"#,
            r#"analyses = ["conditions", { rate = 0.5 }]"#,
        );
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.analyses, vec![Analysis::Conditions, Analysis::Rate(0.5)]);
    }

    #[test]
    fn parse_errors_are_config_errors() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("x0 = [1.0"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml_str("seed = 1"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        cfg.apply(&Overrides {
            output_dir: Some("elsewhere".into()),
            seed: Some(9),
            t_end: Some(5.0),
            steps: Some(3),
        });
        assert_eq!(cfg.output_dir, PathBuf::from("elsewhere"));
        assert_eq!((cfg.seed, cfg.solver.t_end, cfg.compare.steps), (9, 5.0, 3));
    }

    #[test]
    fn grid_order_and_axis_defaults() {
        assert_eq!(axis::<f64>(&[]), vec![None]);
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let c = sweep_point(&cfg, Some(3.0), None, None, Some(4)).unwrap();
        assert_eq!(c.schedule, ThetaSchedule::power(3.0, 1.0).unwrap());
        assert_eq!(c.problem.dim(), 4);
        assert_eq!(c.x0.coords(), &[1.0, 0.0, 0.0, 0.0]);
        assert!(sweep_point(&cfg, None, Some(1.5), None, None).is_err());
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_quote("plain"), "plain");
        assert_eq!(csv_quote("a, \"b\""), "\"a, \"\"b\"\"\"");
    }
}
