//! Scalar observables of a state vector.

use eddy_pint::model::SemiDiscreteSystem;
use eddy_pint::{linalg, Error};

use crate::config::ObservableKind;

/// Validated observable bound to a system.
pub struct Observer<'a> {
    sys: &'a SemiDiscreteSystem,
    kind: ObservableKind,
    scratch: std::cell::RefCell<Vec<f64>>,
}

impl<'a> Observer<'a> {
    pub fn new(sys: &'a SemiDiscreteSystem, kind: ObservableKind) -> eddy_pint::Result<Self> {
        if let ObservableKind::DofProbe(j) = kind {
            if j >= sys.n_dof() {
                return Err(Error::Dimension(format!(
                    "dof_probe index {j} out of range 0..{}",
                    sys.n_dof()
                )));
            }
        }
        Ok(Self {
            sys,
            kind,
            scratch: std::cell::RefCell::new(vec![0.0; sys.n_dof()]),
        })
    }

    /// Value for a full-length state.
    pub fn eval(&self, a: &[f64]) -> f64 {
        match self.kind {
            ObservableKind::Energy => {
                let mut ka = self.scratch.borrow_mut();
                self.sys.apply_stiffness(a, &mut ka);
                0.5 * linalg::dot(a, &ka)
            }
            ObservableKind::FluxLinkage => linalg::dot(self.sys.x_s(), a),
            ObservableKind::DofProbe(j) => a[j],
        }
    }
}

/// `energy = ½ aᵀ K_ν a`, `flux_linkage = X_sᵀ a`, `dof_probe(j) = a[j]`.
pub fn observable(sys: &SemiDiscreteSystem, a: &[f64], kind: ObservableKind) -> eddy_pint::Result<f64> {
    if a.len() != sys.n_dof() {
        return Err(Error::Dimension(format!(
            "state has length {}, expected {}",
            a.len(),
            sys.n_dof()
        )));
    }
    Ok(Observer::new(sys, kind)?.eval(a))
}
