//! Run configuration file (TOML).
//!
//! Every section and field is optional; omitted values fall back to the
//! desk-scale defaults. Cell rectangles are `[x0, y0, x1, y1]` half-open
//! cell index ranges.

use std::path::{Path, PathBuf};

use eddy_pint::excitation::{ExcitationSignal, SignalKind, DEFAULT_MODULATION_INDEX};
use eddy_pint::grid::{CellRect, TransformerLayout};
use eddy_pint::model::Materials;
use eddy_pint::parareal::{DEFAULT_ABSTOL, DEFAULT_RELTOL};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub materials: MaterialsConfig,
    pub excitation: ExcitationConfig,
    pub time: TimeConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub nx: usize,
    pub ny: usize,
    /// Domain width (m).
    pub width: f64,
    /// Domain height (m).
    pub height: f64,
    pub core_outer: [usize; 4],
    pub core_window: [usize; 4],
    pub coil_plus: [usize; 4],
    pub coil_minus: [usize; 4],
}

fn rect_array(r: CellRect) -> [usize; 4] {
    [r.x0, r.y0, r.x1, r.y1]
}

fn array_rect(a: [usize; 4]) -> CellRect {
    CellRect::new(a[0], a[1], a[2], a[3])
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let l = TransformerLayout::default();
        Self {
            nx: l.nx,
            ny: l.ny,
            width: l.width,
            height: l.height,
            core_outer: rect_array(l.core_outer),
            core_window: rect_array(l.core_window),
            coil_plus: rect_array(l.coil_plus),
            coil_minus: rect_array(l.coil_minus),
        }
    }
}

impl GeometryConfig {
    pub fn layout(&self) -> TransformerLayout {
        TransformerLayout {
            nx: self.nx,
            ny: self.ny,
            width: self.width,
            height: self.height,
            core_outer: array_rect(self.core_outer),
            core_window: array_rect(self.core_window),
            coil_plus: array_rect(self.coil_plus),
            coil_minus: array_rect(self.coil_minus),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialsConfig {
    pub sigma_core: f64,
    pub nu_air: f64,
    pub nu_core: f64,
    pub turns_per_area: f64,
}

impl Default for MaterialsConfig {
    fn default() -> Self {
        let m = Materials::default();
        Self {
            sigma_core: m.sigma_core,
            nu_air: m.nu_air,
            nu_core: m.nu_core,
            turns_per_area: m.turns_per_area,
        }
    }
}

impl MaterialsConfig {
    pub fn materials(&self) -> Materials {
        Materials {
            sigma_core: self.sigma_core,
            nu_air: self.nu_air,
            nu_core: self.nu_core,
            turns_per_area: self.turns_per_area,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalChoice {
    Pwm,
    Sine,
    Dc,
}

impl From<SignalChoice> for SignalKind {
    fn from(s: SignalChoice) -> Self {
        match s {
            SignalChoice::Pwm => SignalKind::Pwm,
            SignalChoice::Sine => SignalKind::Sine,
            SignalChoice::Dc => SignalKind::Dc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationConfig {
    /// Peak current `I0` (A).
    pub amplitude: f64,
    pub f_sin: f64,
    pub f_pwm: f64,
    pub modulation_index: f64,
    /// Signal driving the fine propagator and the sequential solvers.
    pub fine: SignalChoice,
    /// Signal driving the coarse propagator.
    pub coarse: SignalChoice,
}

impl Default for ExcitationConfig {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            f_sin: 50.0,
            f_pwm: 1000.0,
            modulation_index: DEFAULT_MODULATION_INDEX,
            fine: SignalChoice::Pwm,
            coarse: SignalChoice::Sine,
        }
    }
}

impl ExcitationConfig {
    pub fn signal(&self, kind: SignalChoice) -> eddy_pint::Result<ExcitationSignal> {
        ExcitationSignal::new(
            kind.into(),
            self.amplitude,
            self.f_sin,
            self.f_pwm,
            self.modulation_index,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub t_start: f64,
    pub t_end: f64,
    /// Explicit step; defaults to `min(0.5 · stability bound, 1/(200 f_pwm))`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_fine: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_start: 0.0,
            t_end: 0.04,
            h_fine: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    SeqImplicit,
    SeqExplicit,
    Parareal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Number of time windows `N`. Sequential solvers also report the
    /// state at every window boundary.
    pub windows: usize,
    /// Implicit step of the coarse propagator; defaults to one step per window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_coarse: Option<f64>,
    pub reltol: f64,
    pub abstol: f64,
    /// Defaults to `windows`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    /// Worker threads for the fine solves; defaults to the available cores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Step of the `seq-implicit` solver; defaults to the fine step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub implicit_step: Option<f64>,
    /// Sequential solvers write every `stride`-th step to `observable.csv`.
    pub stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::Parareal,
            windows: 10,
            h_coarse: None,
            reltol: DEFAULT_RELTOL,
            abstol: DEFAULT_ABSTOL,
            max_iter: None,
            workers: None,
            implicit_step: None,
            stride: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    /// `½ aᵀ K_ν a` (J/m).
    Energy,
    /// `X_sᵀ a` (Wb/m), the winding flux linkage.
    FluxLinkage,
    /// A single degree of freedom.
    DofProbe(usize),
}

impl ObservableKind {
    pub fn label(&self) -> String {
        match self {
            ObservableKind::Energy => "energy (J/m, 1/2 a^T K a)".into(),
            ObservableKind::FluxLinkage => "flux_linkage (Wb/m, X_s^T a; stand-in for the magnetic flux)".into(),
            ObservableKind::DofProbe(j) => format!("dof_probe({j}) (Wb/m, a[{j}])"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub observable: ObservableKind,
    /// Parareal: also write the fine trajectories of the first and final
    /// iterate to `trajectory.csv`, sampling every `trajectory_stride` steps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_stride: Option<usize>,
    /// Parareal: time a sequential fine sweep and report its deviation
    /// and the wall-clock speed-up.
    pub compare_sequential: bool,
    pub dump_matrices: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            observable: ObservableKind::FluxLinkage,
            trajectory_stride: None,
            compare_sequential: true,
            dump_matrices: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration always serializes")
    }

    /// Schema checks that do not need the assembled model.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let g = &self.geometry;
        for (name, r) in [
            ("core_outer", g.core_outer),
            ("core_window", g.core_window),
            ("coil_plus", g.coil_plus),
            ("coil_minus", g.coil_minus),
        ] {
            if r[0] >= r[2] || r[1] >= r[3] || r[2] > g.nx || r[3] > g.ny {
                return bad(format!(
                    "geometry.{name} = {r:?} is empty or outside the {}x{} grid",
                    g.nx, g.ny
                ));
            }
        }
        if !(g.width > 0.0 && g.height > 0.0) {
            return bad("geometry.width and geometry.height must be positive".into());
        }
        if !(self.time.t_end > self.time.t_start) {
            return bad(format!(
                "time interval [{}, {}] is empty",
                self.time.t_start, self.time.t_end
            ));
        }
        if let Some(h) = self.time.h_fine {
            if !(h > 0.0) {
                return bad(format!("time.h_fine must be positive, got {h}"));
            }
        }
        let s = &self.solver;
        if s.windows == 0 {
            return bad("solver.windows must be at least 1".into());
        }
        if s.stride == 0 {
            return bad("solver.stride must be at least 1".into());
        }
        if !(s.reltol > 0.0 && s.abstol > 0.0) {
            return bad("solver.reltol and solver.abstol must be positive".into());
        }
        if s.max_iter == Some(0) || s.workers == Some(0) {
            return bad("solver.max_iter and solver.workers must be at least 1".into());
        }
        if let Some(h) = s.implicit_step.into_iter().chain(s.h_coarse).find(|h| !(*h > 0.0)) {
            return bad(format!("implicit step sizes must be positive, got {h}"));
        }
        if self.output.trajectory_stride == Some(0) {
            return bad("output.trajectory_stride must be at least 1".into());
        }
        self.materials
            .materials()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        for kind in [self.excitation.fine, self.excitation.coarse] {
            self.excitation
                .signal(kind)
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }
}
