use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use std::ops::Mul;

/// A complex number stored as `exp(log_magnitude + i phase)`.
///
/// Zero has its own variant so that exact cancellations (for example a
/// `sin^{N-q}` factor at a pole) never masquerade as `exp(-inf)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogAmplitude {
    Zero,
    NonZero { log_magnitude: f64, phase: f64 },
}

impl LogAmplitude {
    pub const ONE: LogAmplitude = LogAmplitude::NonZero {
        log_magnitude: 0.0,
        phase: 0.0,
    };

    pub fn from_log_polar(log_magnitude: f64, phase: f64) -> Self {
        LogAmplitude::NonZero {
            log_magnitude,
            phase: phase.rem_euclid(TAU),
        }
    }

    pub fn from_real(x: f64) -> Self {
        if x == 0.0 {
            LogAmplitude::Zero
        } else {
            Self::from_log_polar(x.abs().ln(), if x < 0.0 { PI } else { 0.0 })
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z == Complex64::new(0.0, 0.0) {
            LogAmplitude::Zero
        } else {
            Self::from_log_polar(z.norm().ln(), z.arg())
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, LogAmplitude::Zero)
    }

    /// `None` for the exact zero.
    pub fn log_magnitude(&self) -> Option<f64> {
        match *self {
            LogAmplitude::Zero => None,
            LogAmplitude::NonZero { log_magnitude, .. } => Some(log_magnitude),
        }
    }

    /// Phase in `[0, 2pi)`; zero for the exact zero.
    pub fn phase(&self) -> f64 {
        match *self {
            LogAmplitude::Zero => 0.0,
            LogAmplitude::NonZero { phase, .. } => phase,
        }
    }

    pub fn conj(self) -> Self {
        match self {
            LogAmplitude::Zero => LogAmplitude::Zero,
            LogAmplitude::NonZero { log_magnitude, phase } => {
                Self::from_log_polar(log_magnitude, -phase)
            }
        }
    }

    pub fn powi(self, exponent: u64) -> Self {
        if exponent == 0 {
            return Self::ONE;
        }
        match self {
            LogAmplitude::Zero => LogAmplitude::Zero,
            LogAmplitude::NonZero { log_magnitude, phase } => {
                let e = exponent as f64;
                // reduce before multiplying so large exponents keep the phase accurate
                Self::from_log_polar(e * log_magnitude, (e * phase).rem_euclid(TAU))
            }
        }
    }

    /// Linear value divided by `exp(shift)`.
    pub fn scaled(&self, shift: f64) -> Complex64 {
        match *self {
            LogAmplitude::Zero => Complex64::new(0.0, 0.0),
            LogAmplitude::NonZero { log_magnitude, phase } => {
                Complex64::from_polar((log_magnitude - shift).exp(), phase)
            }
        }
    }

    pub fn to_complex(self) -> Complex64 {
        self.scaled(0.0)
    }

    /// Real part of [`scaled`](Self::scaled), for amplitudes known to be real.
    pub fn scaled_real(&self, shift: f64) -> f64 {
        self.scaled(shift).re
    }
}

impl Mul for LogAmplitude {
    type Output = LogAmplitude;

    fn mul(self, rhs: LogAmplitude) -> LogAmplitude {
        match (self, rhs) {
            (
                LogAmplitude::NonZero { log_magnitude: a, phase: p },
                LogAmplitude::NonZero { log_magnitude: b, phase: q },
            ) => LogAmplitude::from_log_polar(a + b, p + q),
            _ => LogAmplitude::Zero,
        }
    }
}

/// Largest log-magnitude in a collection; `None` if every entry is zero.
pub fn max_log_magnitude<'a>(values: impl IntoIterator<Item = &'a LogAmplitude>) -> Option<f64> {
    values
        .into_iter()
        .filter_map(LogAmplitude::log_magnitude)
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |m| m.max(x))))
}
