//! Implicit Euler on the full DAE, explicit Euler on the Schur-reduced ODE,
//! window propagators and the explicit stability bound.

use sprs::TriMat;

use crate::error::{Error, Result};
use crate::excitation::ExcitationSignal;
use crate::linalg::{self, EnvelopeCholesky, SparseMatrix};
use crate::model::{SchurReducedSystem, SemiDiscreteSystem};

/// Uniform steps over `[t_start, t_end]`; the last step is shortened so
/// that the grid ends exactly on `t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    step: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, step: f64) -> Result<Self> {
        if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidTimeGrid(format!("empty interval [{t_start}, {t_end}]")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidTimeGrid(format!("step must be positive, got {step}")));
        }
        let ratio = (t_end - t_start) / step;
        // Lengths that are an integer multiple of the step up to rounding
        // should not produce a sliver step at the end.
        let n_steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
            ratio.round().max(1.0)
        } else {
            ratio.ceil()
        } as usize;
        Ok(Self {
            t_start,
            t_end,
            step,
            n_steps,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Time of grid point `i`, `0 ≤ i ≤ n_steps`.
    pub fn time(&self, i: usize) -> f64 {
        if i >= self.n_steps {
            self.t_end
        } else {
            self.t_start + i as f64 * self.step
        }
    }

    /// `(t_i, t_{i+1})` for every step.
    pub fn steps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.n_steps).map(|i| (self.time(i), self.time(i + 1)))
    }
}

/// Factorization of `M_σ/H + K_ν` for one fixed step size `H`.
#[derive(Debug, Clone)]
pub struct ImplicitOperator {
    step: f64,
    chol: EnvelopeCholesky,
}

impl ImplicitOperator {
    pub fn new(sys: &SemiDiscreteSystem, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidTimeGrid(format!(
                "implicit step must be positive, got {step}"
            )));
        }
        let n = sys.n_dof();
        let mut tri = TriMat::new((n, n));
        for (i, row) in sys.k_nu().outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                tri.add_triplet(i, j, v);
            }
        }
        for (j, &m) in sys.m_sigma().iter().enumerate() {
            if m != 0.0 {
                tri.add_triplet(j, j, m / step);
            }
        }
        let a: SparseMatrix = tri.to_csr();
        let chol = EnvelopeCholesky::factor(&a).map_err(|e| Error::SingularImplicitOperator(e.to_string()))?;
        Ok(Self { step, chol })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// `(M_σ/H + K_ν)⁻¹ b`
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.chol.solve(b)
    }
}

fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what} has length {got}, expected {expected}"
        )))
    }
}

/// One implicit Euler step of the full DAE:
/// `(M_σ/H + K_ν) a_{i+1} = (M_σ/H) a_i + X_s i(t_{i+1})`.
pub fn implicit_euler_step(
    sys: &SemiDiscreteSystem,
    op: &ImplicitOperator,
    a_i: &[f64],
    t_next: f64,
    sig: &ExcitationSignal,
) -> Result<Vec<f64>> {
    check_len("state", a_i.len(), sys.n_dof())?;
    let current = sig.eval(t_next);
    let inv_h = 1.0 / op.step;
    let mut rhs: Vec<f64> = sys
        .m_sigma()
        .iter()
        .zip(a_i)
        .zip(sys.x_s())
        .map(|((m, a), x)| m * inv_h * a + x * current)
        .collect();
    op.chol.solve_in_place(&mut rhs);
    Ok(rhs)
}

/// One explicit Euler step of the reduced ODE, sampling the current at the
/// left end point `t_i`.
pub fn explicit_euler_step(
    r: &SchurReducedSystem,
    a_c: &[f64],
    t_i: f64,
    h: f64,
    sig: &ExcitationSignal,
) -> Result<Vec<f64>> {
    check_len("conducting state", a_c.len(), r.n_c())?;
    let mut rate = vec![0.0; a_c.len()];
    r.reduced_rhs(a_c, sig.eval(t_i), &mut rate);
    Ok(a_c.iter().zip(&rate).map(|(a, f)| a + h * f).collect())
}

const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITER: usize = 10_000;
const STABILITY_SHRINK: f64 = 0.999;

/// Largest eigenvalue of `M̄⁻¹ S` by power iteration on the symmetric
/// similarity transform `M̄^{-1/2} S M̄^{-1/2}`.
pub fn spectral_radius(r: &SchurReducedSystem) -> Result<f64> {
    let scale: Vec<f64> = r.partition().mbar().iter().map(|m| m.sqrt().recip()).collect();
    let n = scale.len();
    // Deterministic start vector with no special alignment to grid modes.
    let mut v: Vec<f64> = (0..n).map(|j| 1.0 + (j as f64 * 0.618_033_988_75).fract()).collect();
    let nv = linalg::norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut y = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut previous: Option<f64> = None;
    let mut theta = 0.0;
    for _ in 0..POWER_MAX_ITER {
        for ((yj, vj), sj) in y.iter_mut().zip(&v).zip(&scale) {
            *yj = vj * sj;
        }
        r.apply_schur(&y, &mut w);
        for (wj, sj) in w.iter_mut().zip(&scale) {
            *wj *= sj;
        }
        theta = linalg::dot(&v, &w);
        let norm = linalg::norm2(&w);
        if norm == 0.0 {
            return Ok(0.0);
        }
        if let Some(p) = previous {
            if (theta - p).abs() <= POWER_TOL * theta.abs() {
                return Ok(theta);
            }
        }
        previous = Some(theta);
        for (vj, wj) in v.iter_mut().zip(&w) {
            *vj = wj / norm;
        }
    }
    Err(Error::PowerIteration {
        iterations: POWER_MAX_ITER,
        lambda_max: theta,
    })
}

/// Largest explicit Euler step, `0.999 · 2/λ_max(M̄⁻¹ S)`.
///
/// The estimate is computed once per reduced system and cached.
pub fn stability_bound(r: &SchurReducedSystem) -> Result<f64> {
    r.stability
        .get_or_init(|| {
            spectral_radius(r).map(|lambda| {
                if lambda > 0.0 {
                    STABILITY_SHRINK * 2.0 / lambda
                } else {
                    f64::INFINITY
                }
            })
        })
        .clone()
}

/// Fine propagator: explicit Euler on the reduced ODE over `window`.
/// Returns the full state at the window end with `a_nc` reconstructed.
pub fn propagate_fine(
    r: &SchurReducedSystem,
    a0_full: &[f64],
    window: &TimeGrid,
    sig: &ExcitationSignal,
) -> Result<Vec<f64>> {
    propagate_fine_observed(r, a0_full, window, sig, |_, _| {})
}

/// [`propagate_fine`] calling `observe(t, a_c)` after every step.
pub fn propagate_fine_observed<O>(
    r: &SchurReducedSystem,
    a0_full: &[f64],
    window: &TimeGrid,
    sig: &ExcitationSignal,
    mut observe: O,
) -> Result<Vec<f64>>
where
    O: FnMut(f64, &[f64]),
{
    let limit = stability_bound(r)?;
    if window.step() > limit {
        return Err(Error::StabilityLimit {
            step: window.step(),
            limit,
        });
    }
    check_len("state", a0_full.len(), r.partition().n_dof())?;
    let mut a_c = r.partition().gather_c(a0_full);
    let mut rate = vec![0.0; a_c.len()];
    for (t, t_next) in window.steps() {
        let h = t_next - t;
        r.reduced_rhs(&a_c, sig.eval(t), &mut rate);
        for (a, f) in a_c.iter_mut().zip(&rate) {
            *a += h * f;
        }
        observe(t_next, &a_c);
    }
    r.full_state(&a_c, sig.eval(window.t_end()))
}

/// Coarse propagator: implicit Euler on the full DAE over `window`, whose
/// steps must all equal the operator's step size.
pub fn propagate_coarse(
    sys: &SemiDiscreteSystem,
    op: &ImplicitOperator,
    a0: &[f64],
    window: &TimeGrid,
    sig: &ExcitationSignal,
) -> Result<Vec<f64>> {
    propagate_coarse_observed(sys, op, a0, window, sig, |_, _| {})
}

/// [`propagate_coarse`] calling `observe(t, a)` after every step.
pub fn propagate_coarse_observed<O>(
    sys: &SemiDiscreteSystem,
    op: &ImplicitOperator,
    a0: &[f64],
    window: &TimeGrid,
    sig: &ExcitationSignal,
    mut observe: O,
) -> Result<Vec<f64>>
where
    O: FnMut(f64, &[f64]),
{
    let tol = 1e-9 * op.step;
    if (window.step() - op.step).abs() > tol {
        return Err(Error::InvalidTimeGrid(format!(
            "window step {} does not match implicit operator step {}",
            window.step(),
            op.step
        )));
    }
    let mut a = a0.to_vec();
    for (t, t_next) in window.steps() {
        if ((t_next - t) - op.step).abs() > tol {
            return Err(Error::InvalidTimeGrid(format!(
                "window length {} is not a multiple of the implicit step {}",
                window.t_end() - window.t_start(),
                op.step
            )));
        }
        a = implicit_euler_step(sys, op, &a, t_next, sig)?;
        observe(t_next, &a);
    }
    Ok(a)
}
