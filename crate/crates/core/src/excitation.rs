//! Source currents: a two-level PWM drive and its fundamental sine.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    /// Naturally-sampled two-level carrier comparison.
    Pwm,
    /// `m_a · I0 · sin(2π f_sin t)`, the PWM fundamental.
    Sine,
    /// Constant `I0`.
    Dc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationSignal {
    kind: SignalKind,
    amplitude: f64,
    f_sin: f64,
    f_pwm: f64,
    modulation_index: f64,
}

pub const DEFAULT_MODULATION_INDEX: f64 = 0.8;

/// Symmetric triangle of unit period: 0 at phase 0, rising to 1 at ¼,
/// −1 at ¾.
fn triangle(phase: f64) -> f64 {
    let p = phase - phase.floor();
    if p < 0.25 {
        4.0 * p
    } else if p < 0.75 {
        2.0 - 4.0 * p
    } else {
        4.0 * p - 4.0
    }
}

impl ExcitationSignal {
    pub fn new(kind: SignalKind, amplitude: f64, f_sin: f64, f_pwm: f64, modulation_index: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidExcitation(msg));
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return bad(format!("amplitude must be positive, got {amplitude}"));
        }
        if kind != SignalKind::Dc {
            if !(f_sin > 0.0 && f_sin.is_finite()) {
                return bad(format!("f_sin must be positive, got {f_sin}"));
            }
            if !(modulation_index > 0.0 && modulation_index <= 1.0) {
                return bad(format!("modulation index must lie in (0, 1], got {modulation_index}"));
            }
        }
        if kind == SignalKind::Pwm {
            let ratio = f_pwm / f_sin;
            if !(ratio > 1.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio {
                return bad(format!("f_pwm/f_sin must be an integer > 1, got {ratio}"));
            }
        }
        Ok(Self {
            kind,
            amplitude,
            f_sin,
            f_pwm,
            modulation_index,
        })
    }

    pub fn pwm(amplitude: f64, f_sin: f64, f_pwm: f64, modulation_index: f64) -> Result<Self> {
        Self::new(SignalKind::Pwm, amplitude, f_sin, f_pwm, modulation_index)
    }

    pub fn sine(amplitude: f64, f_sin: f64, modulation_index: f64) -> Result<Self> {
        Self::new(SignalKind::Sine, amplitude, f_sin, 0.0, modulation_index)
    }

    pub fn dc(amplitude: f64) -> Result<Self> {
        Self::new(SignalKind::Dc, amplitude, 0.0, 0.0, 1.0)
    }

    /// The fundamental-frequency counterpart of this signal.
    pub fn fundamental(&self) -> Self {
        match self.kind {
            SignalKind::Pwm => Self {
                kind: SignalKind::Sine,
                ..*self
            },
            _ => *self,
        }
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn f_sin(&self) -> f64 {
        self.f_sin
    }

    pub fn f_pwm(&self) -> f64 {
        self.f_pwm
    }

    pub fn modulation_index(&self) -> f64 {
        self.modulation_index
    }

    /// Modulating reference `m_a sin(2π f_sin t)`.
    fn reference(&self, t: f64) -> f64 {
        self.modulation_index * (2.0 * PI * self.f_sin * t).sin()
    }

    /// Current at time `t` (A).
    pub fn eval(&self, t: f64) -> f64 {
        match self.kind {
            SignalKind::Dc => self.amplitude,
            SignalKind::Sine => self.amplitude * self.reference(t),
            SignalKind::Pwm => {
                if self.reference(t) >= triangle(self.f_pwm * t) {
                    self.amplitude
                } else {
                    -self.amplitude
                }
            }
        }
    }

    /// Mean and `(cos, sin)` Fourier coefficients of harmonic `h` over one
    /// fundamental period, by equal-weight quadrature with
    /// `samples_per_carrier` nodes per carrier period.
    ///
    /// For a periodic integrand the trapezoidal rule reduces to equal
    /// weights; the nodes sit at cell midpoints so that none falls on
    /// `t = 0` or `t = T/2`, where reference and carrier tie.
    pub fn fourier(&self, harmonic: u32, samples_per_carrier: usize) -> (f64, f64, f64) {
        let ratio = match self.kind {
            SignalKind::Pwm => (self.f_pwm / self.f_sin).round() as usize,
            _ => 1,
        };
        let n = ratio * samples_per_carrier.max(1);
        let period = 1.0 / self.f_sin;
        let (mut mean, mut a, mut b) = (0.0, 0.0, 0.0);
        for j in 0..n {
            let t = (j as f64 + 0.5) * period / n as f64;
            let v = self.eval(t);
            let arg = 2.0 * PI * harmonic as f64 * (j as f64 + 0.5) / n as f64;
            mean += v;
            a += v * arg.cos();
            b += v * arg.sin();
        }
        let n = n as f64;
        (mean / n, 2.0 * a / n, 2.0 * b / n)
    }

    /// Magnitude of the `f_sin` component of the PWM waveform.
    pub fn fundamental_amplitude(&self) -> Result<f64> {
        if self.kind != SignalKind::Pwm {
            return Err(Error::Unsupported(
                "fundamental amplitude is defined for PWM signals only".into(),
            ));
        }
        let (_, a, b) = self.fourier(1, 256);
        Ok(a.hypot(b))
    }
}
