//! End-to-end driver behind `eddy-pint run`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use eddy_pint::integrators::{
    propagate_coarse_observed, propagate_fine_observed, stability_bound, ImplicitOperator, TimeGrid,
};
use eddy_pint::model::{assemble, partition, reduce_schur, SchurReducedSystem, SemiDiscreteSystem};
use eddy_pint::parareal::{self, Convergence, Level, PararealConfig};
use eddy_pint::{linalg, Error};

use crate::config::{RunConfig, SolverKind};
use crate::error::{exit_code, CliError};
use crate::observable::Observer;

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    pub dump_matrices: bool,
}

/// Summary written to `report.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub solver: SolverKind,
    pub observable: String,
    pub n_dof: usize,
    pub n_conducting: usize,
    pub n_algebraic: usize,
    pub stability_bound: f64,
    pub h_fine: f64,
    pub windows: usize,
    /// Parareal only.
    pub iterations: Option<usize>,
    pub converged: Option<Convergence>,
    pub speedup_theoretical: Option<f64>,
    /// Parareal with `compare_sequential`: `t_sequential / t_parareal`.
    pub speedup_wall_clock: Option<f64>,
    /// Parareal with `compare_sequential`: `max_n ‖X[n] − F_seq[n]‖ / ‖F_seq[n]‖`.
    pub deviation_from_sequential: Option<f64>,
    pub timings: Vec<(String, Duration)>,
}

impl Report {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let solver = match self.solver {
            SolverKind::SeqImplicit => "seq-implicit",
            SolverKind::SeqExplicit => "seq-explicit",
            SolverKind::Parareal => "parareal",
        };
        let _ = writeln!(s, "solver = {solver}");
        let _ = writeln!(s, "observable = {}", self.observable);
        let _ = writeln!(
            s,
            "dofs = {} ({} conducting, {} algebraic)",
            self.n_dof, self.n_conducting, self.n_algebraic
        );
        let _ = writeln!(s, "stability_bound = {:e}", self.stability_bound);
        let _ = writeln!(s, "h_fine = {:e}", self.h_fine);
        let _ = writeln!(s, "windows = {}", self.windows);
        if let Some(k) = self.iterations {
            let _ = writeln!(s, "iterations = {k}");
        }
        if self.solver == SolverKind::Parareal {
            let status = match self.converged {
                Some(Convergence::Tolerance) => "true (interface tolerance)",
                Some(Convergence::FiniteTermination) => "true (finite termination)",
                None => "false",
            };
            let _ = writeln!(s, "converged = {status}");
        }
        if let Some(x) = self.speedup_theoretical {
            let _ = writeln!(s, "speedup_theoretical = {x:.4}");
        }
        if let Some(x) = self.speedup_wall_clock {
            let _ = writeln!(s, "speedup_wall_clock = {x:.4}");
        }
        if let Some(x) = self.deviation_from_sequential {
            let _ = writeln!(s, "deviation_from_sequential = {x:e}");
        }
        for (phase, d) in &self.timings {
            let _ = writeln!(s, "time_{phase}_s = {:.6}", d.as_secs_f64());
        }
        s
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub output_dir: PathBuf,
    /// Configuration with every default filled in.
    pub effective: RunConfig,
    pub report: Report,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.solver == SolverKind::Parareal && self.report.converged.is_none() {
            exit_code::NOT_CONVERGED
        } else {
            exit_code::SUCCESS
        }
    }
}

pub fn run_experiment(config_path: &Path, overrides: &Overrides) -> Result<Outcome, CliError> {
    let mut cfg = RunConfig::load(config_path)?;
    if overrides.workers.is_some() {
        cfg.solver.workers = overrides.workers;
    }
    if let Some(dir) = &overrides.output {
        cfg.output.dir = dir.clone();
    }
    cfg.output.dump_matrices |= overrides.dump_matrices;
    run_config(cfg)
}

/// Default explicit step: half the stability bound, and at least 200 steps
/// per carrier period.
pub fn default_h_fine(bound: f64, f_pwm: f64) -> f64 {
    (0.5 * bound).min(1.0 / (200.0 * f_pwm))
}

struct Model {
    sys: SemiDiscreteSystem,
    red: SchurReducedSystem,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn csv_line(out: &mut String, fields: std::fmt::Arguments) {
    let _ = out.write_fmt(fields);
    out.push('\n');
}

pub fn run_config(mut cfg: RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let total = Instant::now();
    let mut timings = Vec::new();

    let clock = Instant::now();
    let grid = cfg.geometry.layout().build()?;
    let sys = assemble(&grid, &cfg.materials.materials())?;
    timings.push(("assembly".to_string(), clock.elapsed()));

    let clock = Instant::now();
    let red = reduce_schur(partition(&sys)?)?;
    timings.push(("reduction".to_string(), clock.elapsed()));

    let clock = Instant::now();
    let bound = stability_bound(&red)?;
    timings.push(("stability_bound".to_string(), clock.elapsed()));
    let model = Model { sys, red };

    // Resolve defaults and refuse unstable explicit steps before any output exists.
    let h_fine = cfg
        .time
        .h_fine
        .unwrap_or_else(|| default_h_fine(bound, cfg.excitation.f_pwm));
    cfg.time.h_fine = Some(h_fine);
    if cfg.solver.kind != SolverKind::SeqImplicit && h_fine > bound {
        return Err(Error::StabilityLimit {
            step: h_fine,
            limit: bound,
        }
        .into());
    }
    let window = (cfg.time.t_end - cfg.time.t_start) / cfg.solver.windows as f64;
    match cfg.solver.kind {
        SolverKind::Parareal => {
            cfg.solver.h_coarse.get_or_insert(window);
            cfg.solver.max_iter.get_or_insert(cfg.solver.windows);
        }
        SolverKind::SeqImplicit => {
            cfg.solver.implicit_step.get_or_insert(h_fine);
        }
        SolverKind::SeqExplicit => {}
    }
    let observer = Observer::new(&model.sys, cfg.output.observable)?;
    let pcfg = pararealconfig(&cfg)?;
    pcfg.validate()?;

    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    write_file(&dir.join("effective_config.toml"), &cfg.to_toml())?;
    if cfg.output.dump_matrices {
        model.sys.write_matrix_market(&dir).map_err(|e| CliError::io(&dir, e))?;
    }

    let mut report = Report {
        solver: cfg.solver.kind,
        observable: cfg.output.observable.label(),
        n_dof: model.sys.n_dof(),
        n_conducting: model.red.n_c(),
        n_algebraic: model.red.n_nc(),
        stability_bound: bound,
        h_fine,
        windows: cfg.solver.windows,
        iterations: None,
        converged: None,
        speedup_theoretical: None,
        speedup_wall_clock: None,
        deviation_from_sequential: None,
        timings,
    };

    let mut series = String::from("t,value\n");
    match cfg.solver.kind {
        SolverKind::Parareal => run_parareal(&cfg, &pcfg, &model, &observer, &dir, &mut series, &mut report)?,
        SolverKind::SeqExplicit => {
            let clock = Instant::now();
            sequential_explicit(&cfg, &pcfg, &model, &observer, &mut series)?;
            report.timings.push(("solve".to_string(), clock.elapsed()));
        }
        SolverKind::SeqImplicit => {
            let clock = Instant::now();
            sequential_implicit(&cfg, &pcfg, &model, &observer, &mut series)?;
            report.timings.push(("solve".to_string(), clock.elapsed()));
        }
    }
    write_file(&dir.join("observable.csv"), &series)?;
    report.timings.push(("total".to_string(), total.elapsed()));
    write_file(&dir.join("report.txt"), &report.render())?;

    Ok(Outcome {
        output_dir: dir,
        effective: cfg,
        report,
    })
}

fn pararealconfig(cfg: &RunConfig) -> Result<PararealConfig, CliError> {
    let ex = &cfg.excitation;
    let mut p = PararealConfig::new(
        cfg.solver.windows,
        cfg.time.t_start,
        cfg.time.t_end,
        cfg.time.h_fine.expect("resolved before use"),
        ex.signal(ex.fine)?,
        ex.signal(ex.coarse)?,
    );
    p.h_coarse = cfg.solver.h_coarse;
    p.reltol = cfg.solver.reltol;
    p.abstol = cfg.solver.abstol;
    p.max_iter = cfg.solver.max_iter;
    p.workers = cfg.solver.workers;
    Ok(p)
}

fn run_parareal(
    cfg: &RunConfig,
    pcfg: &PararealConfig,
    model: &Model,
    observer: &Observer,
    dir: &Path,
    series: &mut String,
    report: &mut Report,
) -> Result<(), CliError> {
    let clock = Instant::now();
    let run = parareal::run(pcfg, &model.sys, &model.red)?;
    let elapsed = clock.elapsed();
    let coarse: Duration = run.timings().iter().map(|p| p.coarse).sum();
    let fine: Duration = run.timings().iter().map(|p| p.fine).sum();
    report.timings.push(("coarse".to_string(), coarse));
    report.timings.push(("fine".to_string(), fine));
    report.timings.push(("solve".to_string(), elapsed));
    report.iterations = Some(run.iterations());
    report.converged = run.convergence();
    report.speedup_theoretical = Some(run.speedup_theoretical());

    for (t, a) in run.boundaries().iter().zip(run.final_states()) {
        csv_line(series, format_args!("{t:e},{:e}", observer.eval(a)));
    }

    let mut jumps = String::from("iteration,window,jump_norm\n");
    for k in 1..=run.iterations() {
        for (n, j) in run.jumps(k).iter().enumerate() {
            csv_line(&mut jumps, format_args!("{k},{},{j:e}", n + 1));
        }
    }
    write_file(&dir.join("jumps.csv"), &jumps)?;

    if let Some(stride) = cfg.output.trajectory_stride {
        let mut traj = String::from("iteration,window,t,value\n");
        let mut iterates = vec![1, run.iterations()];
        iterates.dedup();
        for k in iterates {
            parareal::replay_fine(pcfg, &model.red, &run, k, stride, |n, t, a| {
                csv_line(&mut traj, format_args!("{k},{n},{t:e},{:e}", observer.eval(a)));
            })?;
        }
        write_file(&dir.join("trajectory.csv"), &traj)?;
    }

    if cfg.output.compare_sequential {
        let clock = Instant::now();
        let reference = parareal::sequential_reference(pcfg, &model.sys, &model.red, Level::Fine)?;
        let seq = clock.elapsed();
        report.timings.push(("sequential_fine".to_string(), seq));
        report.speedup_wall_clock = Some(seq.as_secs_f64() / elapsed.as_secs_f64().max(1e-12));
        let dev = reference
            .iter()
            .zip(run.final_states())
            .map(|(r, x)| linalg::dist2(x, r) / linalg::norm2(r).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        report.deviation_from_sequential = Some(dev);
    }
    Ok(())
}

/// Samples every `stride`-th step (counted over the whole run) plus every
/// window boundary.
struct Sampler<'a> {
    observer: &'a Observer<'a>,
    stride: usize,
    step: usize,
}

impl Sampler<'_> {
    /// Advances the step counter; true if this interior step is sampled.
    fn due(&mut self, local: usize, grid: &TimeGrid) -> bool {
        self.step += 1;
        self.step.is_multiple_of(self.stride) && local != grid.n_steps()
    }

    fn record(&self, out: &mut String, t: f64, a: &[f64]) {
        csv_line(out, format_args!("{t:e},{:e}", self.observer.eval(a)));
    }
}

fn sequential_explicit(
    cfg: &RunConfig,
    pcfg: &PararealConfig,
    model: &Model,
    observer: &Observer,
    out: &mut String,
) -> Result<(), CliError> {
    let sig = &pcfg.fine_signal;
    let mut sampler = Sampler {
        observer,
        stride: cfg.solver.stride,
        step: 0,
    };
    let mut state = vec![0.0; model.sys.n_dof()];
    sampler.record(out, pcfg.t_start, &state);
    for grid in pcfg.fine_grids()? {
        let mut local = 0;
        let mut failure = None;
        state = propagate_fine_observed(&model.red, &state, &grid, sig, |t, a_c| {
            local += 1;
            if sampler.due(local, &grid) {
                match model.red.full_state(a_c, sig.eval(t)) {
                    Ok(full) => sampler.record(out, t, &full),
                    Err(e) => failure = Some(e),
                }
            }
        })?;
        if let Some(e) = failure {
            return Err(e.into());
        }
        sampler.record(out, grid.t_end(), &state);
    }
    Ok(())
}

fn sequential_implicit(
    cfg: &RunConfig,
    pcfg: &PararealConfig,
    model: &Model,
    observer: &Observer,
    out: &mut String,
) -> Result<(), CliError> {
    let h = cfg.solver.implicit_step.expect("resolved before use");
    let op = ImplicitOperator::new(&model.sys, h)?;
    let sig = &pcfg.fine_signal;
    let mut sampler = Sampler {
        observer,
        stride: cfg.solver.stride,
        step: 0,
    };
    let mut state = vec![0.0; model.sys.n_dof()];
    sampler.record(out, pcfg.t_start, &state);
    for w in pcfg.boundaries().windows(2) {
        let grid = TimeGrid::new(w[0], w[1], h)?;
        let mut local = 0;
        state = propagate_coarse_observed(&model.sys, &op, &state, &grid, sig, |t, a| {
            local += 1;
            if sampler.due(local, &grid) {
                sampler.record(out, t, a);
            }
        })?;
        sampler.record(out, grid.t_end(), &state);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_step_rule() {
        assert_eq!(default_h_fine(3.6e-5, 1000.0), 5e-6);
        assert_eq!(default_h_fine(4e-6, 1000.0), 2e-6);
    }

    #[test]
    fn report_lists_parareal_fields() {
        let r = Report {
            solver: SolverKind::Parareal,
            observable: "energy".into(),
            n_dof: 3,
            n_conducting: 2,
            n_algebraic: 1,
            stability_bound: 1e-3,
            h_fine: 5e-4,
            windows: 4,
            iterations: Some(2),
            converged: Some(Convergence::Tolerance),
            speedup_theoretical: Some(2.0),
            speedup_wall_clock: None,
            deviation_from_sequential: None,
            timings: vec![("fine".into(), Duration::from_millis(5))],
        };
        let text = r.render();
        for needle in [
            "solver = parareal",
            "iterations = 2",
            "converged = true",
            "speedup_theoretical = 2.0000",
            "time_fine_s",
        ] {
            assert!(text.contains(needle), "{needle} missing from\n{text}");
        }
    }
}
