use std::f64::consts::PI;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::ScenarioConfig;
use super::studies::{
    monotone_to_floor, run_kernel_stability, run_longtime, run_memory_to_delay, run_prototype_delay_ode,
    run_vanishing_memory, PairStatus,
};
use super::sweep::SweepResult;
use crate::diagnostics::{
    apriori_bound_check, energy_inequality_report, is_completely_monotone, positive_type_test, CheckMode, POSTOL,
};
use crate::error::{Error, Result};
use crate::stepper::{l2v_distance, solve, solve_picard, ProblemSpec, DEFAULT_PICARD_TOL, DEFAULT_SAFETY};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
}

impl Assertion {
    pub fn new(name: impl Into<String>, pass: bool, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            pass,
            value,
            bound,
        }
    }

    /// `value ≤ bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value <= bound, value, bound)
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} value={} bound={}", self.name, Num(self.value), Num(self.bound))
    }
}

/// Plain decimals for moderate magnitudes, exponent form otherwise.
struct Num(f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.0.abs();
        if a == 0.0 || !a.is_finite() || (1e-3..1e6).contains(&a) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "{:e}", self.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub experiment: String,
    pub assertions: Vec<Assertion>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn all_pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    /// 0 when every assertion passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            0
        } else {
            1
        }
    }
}

impl Error {
    /// Errors caused by the input rather than by the computation.
    pub fn is_config_error(&self) -> bool {
        !matches!(
            self,
            Error::NonFiniteState { .. }
                | Error::IterationDivergence { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::Io(_)
        )
    }
}

pub const EXPERIMENTS: [&str; 8] = [
    "solve",
    "vanishing_memory",
    "memory_to_delay",
    "kernel_stability",
    "longtime",
    "prototype_ode",
    "two_path_crosscheck",
    "positive_type",
];

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn file(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path)?;
        self.files.push(path);
        Ok(BufWriter::new(f))
    }

    fn csv<F: FnOnce(&mut BufWriter<File>) -> Result<()>>(&mut self, name: &str, body: F) -> Result<()> {
        let mut w = self.file(name)?;
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Companion gnuplot script: column 1 against each of `cols`.
    fn gnuplot(&mut self, csv: &str, cols: &[(usize, &str)], logscale: bool) -> Result<()> {
        let stem = csv.trim_end_matches(".csv");
        let mut w = self.file(&format!("{stem}.gp"))?;
        writeln!(w, "set datafile separator ','")?;
        writeln!(w, "set key autotitle columnhead")?;
        if logscale {
            writeln!(w, "set logscale xy")?;
        }
        writeln!(w, "set terminal pngcairo size 900,600")?;
        writeln!(w, "set output '{stem}.png'")?;
        let series: Vec<String> = cols
            .iter()
            .map(|(c, title)| format!("'{csv}' using 1:{c} with linespoints title '{title}'"))
            .collect();
        writeln!(w, "plot {}", series.join(", \\\n     "))?;
        w.flush()?;
        Ok(())
    }

    fn trajectory(&mut self, name: &str, t: &Trajectory) -> Result<()> {
        self.csv(name, |w| t.write_csv(w))
    }

    fn sweep(&mut self, name: &str, s: &SweepResult) -> Result<()> {
        self.csv(name, |w| s.write_csv(w))?;
        self.gnuplot(name, &[(2, &s.metric)], true)
    }

    fn summary(&mut self, a: &[Assertion]) -> Result<()> {
        self.csv("summary.txt", |w| {
            for x in a {
                writeln!(w, "{x}")?;
            }
            Ok(())
        })
    }
}

/// Reads, runs and writes a scenario. Configuration problems come back as
/// errors; failed checks are recorded in the outcome.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: &Path) -> Result<Outcome> {
    let name = cfg.experiment.name.as_str();
    if !EXPERIMENTS.contains(&name) {
        return Err(Error::Config(format!(
            "unknown experiment `{name}` (expected one of {})",
            EXPERIMENTS.join(", ")
        )));
    }
    let problem = if name == "prototype_ode" { None } else { Some(cfg.problem()?) };
    fs::create_dir_all(out_dir)?;
    let mut w = Writer {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    let assertions = match (name, problem) {
        ("prototype_ode", _) => prototype_ode(cfg, &mut w)?,
        (_, None) => unreachable!(),
        ("solve", Some(p)) => solve_scenario(cfg, &p, &mut w)?,
        ("vanishing_memory", Some(p)) => vanishing_memory(cfg, &p, &mut w)?,
        ("memory_to_delay", Some(p)) => memory_to_delay(cfg, &p, &mut w)?,
        ("kernel_stability", Some(p)) => kernel_stability(cfg, &p, &mut w)?,
        ("longtime", Some(p)) => longtime(cfg, &p, &mut w)?,
        ("two_path_crosscheck", Some(p)) => two_path(cfg, &p, &mut w)?,
        ("positive_type", Some(p)) => positive_type(cfg, &p, &mut w)?,
        _ => unreachable!(),
    };
    w.summary(&assertions)?;
    Ok(Outcome {
        experiment: name.into(),
        assertions,
        files: w.files,
    })
}

fn energy_csv(p: &ProblemSpec, t: &Trajectory, w: &mut Writer) -> Result<Option<Assertion>> {
    let kernel = p.active_kernel();
    let mode = if is_completely_monotone(&kernel) {
        CheckMode::Assert
    } else {
        CheckMode::Audit
    };
    let rep = energy_inequality_report(t, &kernel, &p.fem, &p.forcing, mode)?;
    w.csv("energy.csv", |f| rep.write_csv(f))?;
    w.gnuplot("energy.csv", &[(2, "half_uH2"), (8, "slack")], false)?;
    Ok((mode == CheckMode::Assert).then(|| Assertion::at_most("energy_inequality", rep.worst_slack, rep.tolerance)))
}

fn solve_scenario(cfg: &ScenarioConfig, p: &ProblemSpec, w: &mut Writer) -> Result<Vec<Assertion>> {
    let (t, report) = solve(p)?;
    w.trajectory("trajectory.csv", &t)?;
    let r = report.max_linear_residual;
    let mut out = vec![Assertion::new("linear_solve_residual", t.all_finite() && r <= 1e-10, r, 1e-10)];
    out.extend(energy_csv(p, &t, w)?);
    let ap = apriori_bound_check(&t, p)?;
    out.push(Assertion::at_most("apriori_bound_ratio", ap.ratio(), 1.0));
    // eigenmode oracle for the memoryless, unforced problem
    if p.active_kernel().is_zero() && p.forcing.is_zero() && cfg.initial.kind == "eigenmode" {
        let l = cfg.domain.length;
        let k = cfg.initial.mode as f64 * PI / l;
        let decay = cfg.coefficients.a0 * k * k;
        let amp = cfg.initial.amplitude;
        let mut err: f64 = 0.0;
        for n in 0..=t.last_index() {
            let e = amp * (-decay * t.time(n)).exp();
            for (u, x) in t.state(n).iter().zip(p.fem.mesh().interior_nodes()) {
                err = err.max((u - e * (k * x).sin()).abs());
            }
        }
        out.push(Assertion::at_most("heat_oracle_max_nodal_error", err, 2e-2));
    }
    Ok(out)
}

fn vanishing_memory(cfg: &ScenarioConfig, p: &ProblemSpec, w: &mut Writer) -> Result<Vec<Assertion>> {
    let levels = cfg.experiment.levels.unwrap_or(6);
    let s = run_vanishing_memory(p, levels)?;
    w.sweep("vanishing_memory.csv", &s)?;
    let mut out = Vec::new();
    let errs = s.errors();
    let (mono, worst) = monotone_to_floor(&errs, 0.0);
    out.push(Assertion::new("vanishing_memory_monotone", mono, worst, 1.0));
    match s.fit {
        Some(f) => {
            out.push(Assertion::new(
                "vanishing_memory_slope",
                (0.9..=1.1).contains(&f.slope),
                f.slope,
                1.0,
            ));
            out.push(Assertion::new("vanishing_memory_r_squared", f.r_squared >= 0.98, f.r_squared, 0.98));
        }
        None => {
            // zero kernel: every error must vanish
            let max = errs.iter().cloned().fold(0.0, f64::max);
            out.push(Assertion::at_most("vanishing_memory_zero_error", max, 0.0));
        }
    }
    Ok(out)
}

fn memory_to_delay(cfg: &ScenarioConfig, p: &ProblemSpec, w: &mut Writer) -> Result<Vec<Assertion>> {
    let factors = cfg
        .experiment
        .eps_factors
        .clone()
        .unwrap_or_else(|| vec![0.2, 0.1, 0.05, 0.025]);
    let s = run_memory_to_delay(p, &factors)?;
    w.sweep("memory_to_delay.csv", &s)?;
    let floor = p.dt * p.dt;
    let (mono, worst) = monotone_to_floor(&s.errors(), floor);
    Ok(vec![Assertion::new("consistency_check_memory_to_delay_monotone", mono, worst, 1.0)])
}

fn kernel_stability(cfg: &ScenarioConfig, p: &ProblemSpec, w: &mut Writer) -> Result<Vec<Assertion>> {
    let scales = cfg
        .experiment
        .scales
        .clone()
        .unwrap_or_else(|| (0..10).map(|i| 0.5 + 0.1 * i as f64).collect());
    let pairs = run_kernel_stability(p, &scales)?;
    w.csv("kernel_stability.csv", |f| {
        writeln!(f, "label,smallness,lhs,rhs,ratio,status")?;
        for r in &pairs {
            let status = match &r.status {
                PairStatus::Asserted { pass: true } => "pass".to_string(),
                PairStatus::Asserted { pass: false } => "fail".to_string(),
                PairStatus::Skipped(why) => format!("skipped: {why}"),
            };
            writeln!(f, "{},{},{},{},{},{}", r.label, r.smallness, r.lhs, r.rhs, r.ratio(), status)?;
        }
        Ok(())
    })?;
    let mut out = Vec::new();
    for r in &pairs {
        if let PairStatus::Asserted { pass } = r.status {
            out.push(Assertion::new(
                format!("kernel_stability_{}", r.label),
                pass,
                r.ratio(),
                1.0 + p.dt,
            ));
        }
    }
    Ok(out)
}

fn longtime(cfg: &ScenarioConfig, p: &ProblemSpec, w: &mut Writer) -> Result<Vec<Assertion>> {
    let levels = cfg.experiment.levels.unwrap_or(6);
    let (t, rep) = run_longtime(p, levels)?;
    w.trajectory("trajectory.csv", &t)?;
    energy_csv(p, &t, w)?;
    w.csv("longtime.csv", |f| {
        writeln!(f, "t,cum_a0,time_average_v,half_u0_sq")?;
        for c in &rep.checkpoints {
            writeln!(f, "{},{},{},{}", c.t, c.cum_a0, c.time_average_v, rep.half_u0_sq)?;
        }
        Ok(())
    })?;
    w.gnuplot("longtime.csv", &[(2, "cum_a0"), (3, "time_average_v")], true)?;
    let mut out: Vec<Assertion> = rep
        .checkpoints
        .iter()
        .map(|c| Assertion::at_most(format!("finite_dissipation_t={}", c.t), c.cum_a0, rep.half_u0_sq))
        .collect();
    let worst = rep
        .checkpoints
        .windows(2)
        .map(|w| w[1].time_average_v / w[0].time_average_v)
        .fold(0.0, f64::max);
    out.push(Assertion::new("time_average_decreasing", rep.average_decreasing, worst, 1.0));
    Ok(out)
}

fn prototype_ode(cfg: &ScenarioConfig, w: &mut Writer) -> Result<Vec<Assertion>> {
    let e = &cfg.experiment;
    let (Some(alpha), Some(m), Some(tau)) = (e.alpha, e.mass, e.tau) else {
        return Err(Error::Config("prototype_ode needs experiment.alpha, experiment.mass and experiment.tau".into()));
    };
    let r = run_prototype_delay_ode(alpha, m, tau, cfg.time.horizon, cfg.time.dt)
        .map_err(|err| Error::Config(err.to_string()))?;
    w.csv("prototype_ode.csv", |f| {
        writeln!(f, "t,x,s")?;
        for i in 0..r.times.len() {
            writeln!(f, "{},{},{}", r.times[i], r.x[i], r.s[i])?;
        }
        Ok(())
    })?;
    w.gnuplot("prototype_ode.csv", &[(2, "x"), (3, "s")], false)?;
    let mut out = Vec::new();
    if m < 0.0 {
        out.push(Assertion::new(
            "delay_term_sign_change",
            r.sign_changes >= 1 && r.min_s < 0.0 && r.max_s > 0.0,
            r.sign_changes as f64,
            1.0,
        ));
    } else if m == 0.0 {
        let max = r.s.iter().map(|v| v.abs()).fold(0.0, f64::max);
        out.push(Assertion::at_most("delay_term_vanishes", max, 0.0));
    }
    if m > alpha {
        let rate = r.fitted_rate.unwrap_or(f64::NAN);
        out.push(Assertion::new("delay_growth_detected", rate > 0.0, rate, 0.0));
        let rel = r.rate_relative_error().unwrap_or(f64::INFINITY);
        out.push(Assertion::at_most("delay_growth_rate_vs_root", rel, 0.05));
    }
    Ok(out)
}

fn two_path(cfg: &ScenarioConfig, p: &ProblemSpec, w: &mut Writer) -> Result<Vec<Assertion>> {
    let safety = cfg.experiment.safety.unwrap_or(DEFAULT_SAFETY);
    let tol = cfg.experiment.picard_tol.unwrap_or(DEFAULT_PICARD_TOL);
    let (direct, _) = solve(p)?;
    let (picard, rep) = solve_picard(p, safety, tol)?;
    w.trajectory("trajectory.csv", &direct)?;
    w.trajectory("trajectory_picard.csv", &picard)?;
    energy_csv(p, &direct, w)?;
    let d = l2v_distance(&direct, &picard, &p.fem);
    let mut out = vec![Assertion::at_most("two_path_l2v_distance", d, 1e-10)];
    if let Some(q) = rep.q {
        out.push(Assertion::new("picard_contraction_factor", q < 0.5, q, 0.5));
    }
    Ok(out)
}

fn positive_type(cfg: &ScenarioConfig, p: &ProblemSpec, w: &mut Writer) -> Result<Vec<Assertion>> {
    let ensemble = cfg.experiment.ensemble.unwrap_or(500);
    let seed = cfg.experiment.seed.unwrap_or(0);
    let kernel = p.active_kernel();
    let grid = p.grid()?;
    let rep = positive_type_test(&kernel, &p.fem, &grid, ensemble, seed)?;
    w.csv("positive_type.csv", |f| {
        writeln!(f, "min_ratio,min_value,argmin,evaluated")?;
        writeln!(f, "{},{},{},{}", rep.min_ratio, rep.min_value, rep.argmin, rep.evaluated)?;
        Ok(())
    })?;
    Ok(if kernel.atoms().is_empty() {
        vec![Assertion::new("positive_type", rep.min_ratio >= -POSTOL, rep.min_ratio, -POSTOL)]
    } else {
        // expected-negative mode: the alternating witness must break positivity
        vec![Assertion::at_most("positive_type_negative_witness", rep.min_ratio, -1e-3)]
    })
}
