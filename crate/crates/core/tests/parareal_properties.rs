mod common;

use common::rel_err;
use eddy_pint::excitation::ExcitationSignal;
use eddy_pint::grid::TransformerLayout;
use eddy_pint::integrators::stability_bound;
use eddy_pint::model::*;
use eddy_pint::parareal::*;

fn desk() -> (SemiDiscreteSystem, SchurReducedSystem, PararealConfig) {
    let sys = assemble(&TransformerLayout::default().build().unwrap(), &Materials::default()).unwrap();
    let red = reduce_schur(partition(&sys).unwrap()).unwrap();
    let pwm = ExcitationSignal::pwm(1.0, 50.0, 1000.0, 0.8).unwrap();
    let h = (0.5 * stability_bound(&red).unwrap()).min(1.0 / (200.0 * 1000.0));
    let cfg = PararealConfig::new(10, 0.0, 0.04, h, pwm, pwm.fundamental());
    (sys, red, cfg)
}

#[test]
fn finite_termination_on_every_prefix() {
    let (sys, red, mut cfg) = desk();
    cfg.early_stop = false;
    let run = run(&cfg, &sys, &red).unwrap();
    assert_eq!(run.iterations(), 10);
    assert_eq!(run.convergence(), Some(Convergence::Tolerance));
    let reference = sequential_reference(&cfg, &sys, &red, Level::Fine).unwrap();
    for k in 0..=run.iterations() {
        assert_eq!(run.states(k)[0], reference[0]);
        for n in 1..=k.min(10) {
            assert!(rel_err(&run.states(k)[n], &reference[n]) <= 1e-10, "k={k} n={n}");
        }
    }
}

#[test]
fn converged_tail_is_below_threshold() {
    let (sys, red, cfg) = desk();
    let run = run(&cfg, &sys, &red).unwrap();
    assert_eq!(run.convergence(), Some(Convergence::Tolerance));
    let k = run.iterations();
    assert!(k < cfg.n_windows);
    assert!(run.check_convergence(k, cfg.reltol, cfg.abstol));
    for (n, jump) in run.jumps(k).iter().enumerate() {
        let norm = eddy_pint::linalg::norm2(&run.states(k)[n + 1]);
        assert!(*jump <= cfg.abstol + cfg.reltol * norm);
    }
    assert_eq!(run.speedup_theoretical(), cfg.n_windows as f64 / k as f64);
    assert_eq!(run.timings().len(), k + 1);
}

#[test]
fn worker_count_does_not_change_results() {
    let (sys, red, mut cfg) = desk();
    cfg.workers = Some(1);
    let serial = run(&cfg, &sys, &red).unwrap();
    cfg.workers = Some(8);
    let parallel = run(&cfg, &sys, &red).unwrap();
    assert_eq!(serial.iterations(), parallel.iterations());
    for k in 0..=serial.iterations() {
        let bits = |run: &PararealRun| -> Vec<u64> { run.states(k).iter().flatten().map(|v| v.to_bits()).collect() };
        assert_eq!(bits(&serial), bits(&parallel));
        if k > 0 {
            let a: Vec<u64> = serial.jumps(k).iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = parallel.jumps(k).iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn max_iter_below_windows_can_end_unconverged() {
    let (sys, red, mut cfg) = desk();
    cfg.max_iter = Some(1);
    let run = run(&cfg, &sys, &red).unwrap();
    assert_eq!(run.iterations(), 1);
    assert!(!run.converged());
}

#[test]
fn coarse_sweep_is_iteration_zero() {
    let (sys, red, cfg) = desk();
    let run = run(&cfg, &sys, &red).unwrap();
    let coarse = sequential_reference(&cfg, &sys, &red, Level::Coarse).unwrap();
    assert_eq!(run.states(0), coarse.as_slice());
}

#[test]
fn multiple_coarse_steps_per_window() {
    let (sys, red, mut cfg) = desk();
    cfg.h_coarse = Some(cfg.window_length() / 4.0);
    cfg.early_stop = false;
    let run = run(&cfg, &sys, &red).unwrap();
    let reference = sequential_reference(&cfg, &sys, &red, Level::Fine).unwrap();
    assert!(rel_err(run.final_states().last().unwrap(), reference.last().unwrap()) <= 1e-10);
}
