//! Parareal iteration with an explicit fine propagator on the reduced ODE
//! and an implicit coarse propagator on the full DAE.
//!
//! The interval is split into `N` windows `[T_{n-1}, T_n]`. Iteration 0 is
//! a sequential coarse sweep; iteration `k ≥ 1` runs all fine solves from
//! the previous iterate concurrently and then applies the correction
//!
//! ```text
//! X[k][n] = F(X[k-1][n-1]) + G(X[k][n-1]) − G(X[k-1][n-1])
//! ```
//!
//! sequentially in window order.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::excitation::ExcitationSignal;
use crate::integrators::{
    propagate_coarse, propagate_fine, propagate_fine_observed, stability_bound, ImplicitOperator, TimeGrid,
};
use crate::linalg;
use crate::model::{SchurReducedSystem, SemiDiscreteSystem};

pub const DEFAULT_RELTOL: f64 = 1e-4;
pub const DEFAULT_ABSTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PararealConfig {
    pub n_windows: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub h_fine: f64,
    /// Implicit step; defaults to one step per window.
    pub h_coarse: Option<f64>,
    pub reltol: f64,
    pub abstol: f64,
    /// Defaults to `n_windows`.
    pub max_iter: Option<usize>,
    /// Stop as soon as the interface tolerance is met. When false the
    /// iteration always runs to `max_iter`.
    pub early_stop: bool,
    pub fine_signal: ExcitationSignal,
    pub coarse_signal: ExcitationSignal,
    /// Defaults to the zero state.
    pub initial_state: Option<Vec<f64>>,
    /// Worker threads for the fine solves; `None` uses all available cores.
    pub workers: Option<usize>,
}

impl PararealConfig {
    pub fn new(
        n_windows: usize,
        t_start: f64,
        t_end: f64,
        h_fine: f64,
        fine_signal: ExcitationSignal,
        coarse_signal: ExcitationSignal,
    ) -> Self {
        Self {
            n_windows,
            t_start,
            t_end,
            h_fine,
            h_coarse: None,
            reltol: DEFAULT_RELTOL,
            abstol: DEFAULT_ABSTOL,
            max_iter: None,
            early_stop: true,
            fine_signal,
            coarse_signal,
            initial_state: None,
            workers: None,
        }
    }

    pub fn window_length(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_windows as f64
    }

    pub fn coarse_step(&self) -> f64 {
        self.h_coarse.unwrap_or_else(|| self.window_length())
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter.unwrap_or(self.n_windows)
    }

    /// Window boundaries `T_0 .. T_N`; `T_N` is exactly `t_end`.
    pub fn boundaries(&self) -> Vec<f64> {
        let len = self.t_end - self.t_start;
        (0..=self.n_windows)
            .map(|n| {
                if n == self.n_windows {
                    self.t_end
                } else {
                    self.t_start + len * n as f64 / self.n_windows as f64
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_windows == 0 {
            return bad("at least one window is required".into());
        }
        if !(self.t_end > self.t_start) {
            return bad(format!("empty interval [{}, {}]", self.t_start, self.t_end));
        }
        if !(self.h_fine > 0.0) {
            return bad(format!("fine step must be positive, got {}", self.h_fine));
        }
        let h = self.coarse_step();
        if !(h > 0.0) {
            return bad(format!("coarse step must be positive, got {h}"));
        }
        let per_window = self.window_length() / h;
        if (per_window - per_window.round()).abs() > 1e-9 * per_window.max(1.0) || per_window.round() < 1.0 {
            return bad(format!(
                "coarse step {h} does not divide the window length {}",
                self.window_length()
            ));
        }
        if !(self.reltol > 0.0 && self.abstol > 0.0) {
            return bad("reltol and abstol must be positive".into());
        }
        if self.max_iter() == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        Ok(())
    }

    fn initial(&self, n_dof: usize) -> Result<Vec<f64>> {
        match &self.initial_state {
            Some(a0) if a0.len() != n_dof => Err(Error::Dimension(format!(
                "initial state has length {}, expected {n_dof}",
                a0.len()
            ))),
            Some(a0) => Ok(a0.clone()),
            None => Ok(vec![0.0; n_dof]),
        }
    }

    /// Per-window grids of the fine propagator.
    pub fn fine_grids(&self) -> Result<Vec<TimeGrid>> {
        self.boundaries()
            .windows(2)
            .map(|w| TimeGrid::new(w[0], w[1], self.h_fine))
            .collect()
    }

    /// Per-window grids of the coarse propagator.
    pub fn coarse_grids(&self) -> Result<Vec<TimeGrid>> {
        let h = self.coarse_step();
        self.boundaries()
            .windows(2)
            .map(|w| TimeGrid::new(w[0], w[1], h))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    /// Every interface increment met `abstol + reltol·‖X‖`.
    Tolerance,
    /// `k = N`: every window carries the sequential fine solution.
    FiniteTermination,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub coarse: Duration,
    pub fine: Duration,
}

#[derive(Debug, Clone)]
pub struct PararealRun {
    boundaries: Vec<f64>,
    states: Vec<Vec<Vec<f64>>>,
    jump_norms: Vec<Vec<f64>>,
    convergence: Option<Convergence>,
    timings: Vec<PhaseTimings>,
}

impl PararealRun {
    pub fn n_windows(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Boundary states `X[k][0..=N]` of iteration `k`.
    pub fn states(&self, k: usize) -> &[Vec<f64>] {
        &self.states[k]
    }

    /// Boundary states of the last iteration performed.
    pub fn final_states(&self) -> &[Vec<f64>] {
        self.states.last().expect("iteration 0 always exists")
    }

    /// `‖X[k][n] − X[k−1][n]‖₂` for `n = 1..=N`, `k ≥ 1`.
    pub fn jumps(&self, k: usize) -> &[f64] {
        &self.jump_norms[k - 1]
    }

    /// Number of Parareal iterations performed, `k*`.
    pub fn iterations(&self) -> usize {
        self.states.len() - 1
    }

    pub fn converged(&self) -> bool {
        self.convergence.is_some()
    }

    pub fn convergence(&self) -> Option<Convergence> {
        self.convergence
    }

    /// `N / k*`: speed-up over a sequential fine solve when coarse sweeps
    /// and communication are free.
    pub fn speedup_theoretical(&self) -> f64 {
        theoretical_speedup(self.n_windows(), self.iterations())
    }

    /// Wall-clock timings; entry 0 is the initial coarse sweep.
    pub fn timings(&self) -> &[PhaseTimings] {
        &self.timings
    }

    /// Whether iteration `k` meets the interface tolerance.
    pub fn check_convergence(&self, k: usize, reltol: f64, abstol: f64) -> bool {
        interfaces_converged(&self.states[k - 1], &self.states[k], reltol, abstol)
    }
}

pub fn theoretical_speedup(n_windows: usize, iterations: usize) -> f64 {
    n_windows as f64 / iterations as f64
}

/// `‖curr[n] − prev[n]‖₂ ≤ abstol + reltol·‖curr[n]‖₂` at every interface
/// `n ≥ 1`.
pub fn interfaces_converged(prev: &[Vec<f64>], curr: &[Vec<f64>], reltol: f64, abstol: f64) -> bool {
    prev.iter()
        .zip(curr)
        .skip(1)
        .all(|(p, c)| linalg::dist2(c, p) <= abstol + reltol * linalg::norm2(c))
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
}

pub fn run(cfg: &PararealConfig, sys: &SemiDiscreteSystem, red: &SchurReducedSystem) -> Result<PararealRun> {
    cfg.validate()?;
    let limit = stability_bound(red)?;
    if cfg.h_fine > limit {
        return Err(Error::StabilityLimit {
            step: cfg.h_fine,
            limit,
        });
    }
    let n_win = cfg.n_windows;
    let fine_grids = cfg.fine_grids()?;
    let coarse_grids = cfg.coarse_grids()?;
    let op = ImplicitOperator::new(sys, cfg.coarse_step())?;
    let pool = thread_pool(cfg.workers)?;
    let coarse = |a: &[f64], n: usize| propagate_coarse(sys, &op, a, &coarse_grids[n - 1], &cfg.coarse_signal);

    let clock = Instant::now();
    let a0 = cfg.initial(sys.n_dof())?;
    let mut current = Vec::with_capacity(n_win + 1);
    // g_prev[n-1] = G(X[k-1][n-1]), reused by the next correction.
    let mut g_prev = Vec::with_capacity(n_win);
    current.push(a0.clone());
    for n in 1..=n_win {
        let g = coarse(&current[n - 1], n)?;
        current.push(g.clone());
        g_prev.push(g);
    }
    let mut timings = vec![PhaseTimings {
        coarse: clock.elapsed(),
        fine: Duration::ZERO,
    }];
    let mut states = vec![current];
    let mut jump_norms = Vec::new();
    let mut convergence = None;

    for k in 1..=cfg.max_iter() {
        let prev = states.last().expect("iteration 0 exists");
        let clock = Instant::now();
        let fine: Vec<Vec<f64>> = pool.install(|| {
            (1..=n_win)
                .into_par_iter()
                .map(|n| propagate_fine(red, &prev[n - 1], &fine_grids[n - 1], &cfg.fine_signal))
                .collect::<Result<_>>()
        })?;
        let fine_time = clock.elapsed();

        let clock = Instant::now();
        let mut next = Vec::with_capacity(n_win + 1);
        next.push(a0.clone());
        for n in 1..=n_win {
            let g = coarse(&next[n - 1], n)?;
            let x: Vec<f64> = fine[n - 1]
                .iter()
                .zip(&g)
                .zip(&g_prev[n - 1])
                .map(|((f, gn), go)| f + (gn - go))
                .collect();
            next.push(x);
            g_prev[n - 1] = g;
        }
        timings.push(PhaseTimings {
            coarse: clock.elapsed(),
            fine: fine_time,
        });

        jump_norms.push(
            prev.iter()
                .zip(&next)
                .skip(1)
                .map(|(p, c)| linalg::dist2(c, p))
                .collect(),
        );
        let tol_met = interfaces_converged(prev, &next, cfg.reltol, cfg.abstol);
        states.push(next);
        if k >= n_win {
            convergence = Some(if tol_met {
                Convergence::Tolerance
            } else {
                Convergence::FiniteTermination
            });
            break;
        }
        if tol_met && cfg.early_stop {
            convergence = Some(Convergence::Tolerance);
            break;
        }
    }

    Ok(PararealRun {
        boundaries: cfg.boundaries(),
        states,
        jump_norms,
        convergence,
        timings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fine,
    Coarse,
}

/// Sequential sweep with one propagator over all windows in order; returns
/// the states at `T_0 .. T_N`.
pub fn sequential_reference(
    cfg: &PararealConfig,
    sys: &SemiDiscreteSystem,
    red: &SchurReducedSystem,
    level: Level,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let mut states = vec![cfg.initial(sys.n_dof())?];
    match level {
        Level::Fine => {
            for grid in cfg.fine_grids()? {
                let next = propagate_fine(red, states.last().unwrap(), &grid, &cfg.fine_signal)?;
                states.push(next);
            }
        }
        Level::Coarse => {
            let op = ImplicitOperator::new(sys, cfg.coarse_step())?;
            for grid in cfg.coarse_grids()? {
                let next = propagate_coarse(sys, &op, states.last().unwrap(), &grid, &cfg.coarse_signal)?;
                states.push(next);
            }
        }
    }
    Ok(states)
}

/// Re-runs the fine solves of iteration `k` (started from `X[k−1]`) and
/// reports every `stride`-th fine state as `observe(window, t, a_full)`.
/// Used to export the piecewise fine trajectory of an iterate, including
/// its jumps at the window interfaces.
pub fn replay_fine<O>(
    cfg: &PararealConfig,
    red: &SchurReducedSystem,
    run: &PararealRun,
    k: usize,
    stride: usize,
    mut observe: O,
) -> Result<()>
where
    O: FnMut(usize, f64, &[f64]),
{
    if k == 0 || k > run.iterations() {
        return Err(Error::InvalidConfig(format!(
            "iteration {k} outside 1..={}",
            run.iterations()
        )));
    }
    let stride = stride.max(1);
    for (n, grid) in cfg.fine_grids()?.iter().enumerate() {
        let start = &run.states(k - 1)[n];
        observe(n + 1, grid.t_start(), start);
        let mut step = 0;
        let mut failure = None;
        propagate_fine_observed(red, start, grid, &cfg.fine_signal, |t, a_c| {
            step += 1;
            if step % stride == 0 && step != grid.n_steps() {
                match red.full_state(a_c, cfg.fine_signal.eval(t)) {
                    Ok(full) => observe(n + 1, t, &full),
                    Err(e) => failure = Some(e),
                }
            }
        })
        .and_then(|end| {
            observe(n + 1, grid.t_end(), &end);
            failure.map_or(Ok(()), Err)
        })?;
    }
    Ok(())
}
