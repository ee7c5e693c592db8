//! Time-dependent control parameters of the dynamics.

use serde::{Deserialize, Serialize};

/// A scalar control `t ↦ value` over the horizon `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// `p(t) = (t/T)·p0`
    LinearPump {
        p0: f64,
        horizon: f64,
    },
    /// `p(t) = (t/T)·p0 + 1 + j0·exp(−α t/T)`; the extra `1 + j(t)`
    /// offsets cavity and measurement loss.
    MfPump {
        p0: f64,
        j0: f64,
        alpha: f64,
        horizon: f64,
    },
    /// `j(t) = j0·exp(−α t/T)`
    ExpMeasurement {
        j0: f64,
        alpha: f64,
        horizon: f64,
    },
    /// `r(t) = r0·exp(−β t/T)`
    ExpNoise {
        r0: f64,
        beta: f64,
        horizon: f64,
    },
    Constant(f64),
}

impl Schedule {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Schedule::LinearPump { p0, horizon } => t / horizon * p0,
            Schedule::MfPump {
                p0,
                j0,
                alpha,
                horizon,
            } => t / horizon * p0 + 1.0 + j0 * (-alpha * t / horizon).exp(),
            Schedule::ExpMeasurement { j0, alpha, horizon } => j0 * (-alpha * t / horizon).exp(),
            Schedule::ExpNoise { r0, beta, horizon } => r0 * (-beta * t / horizon).exp(),
            Schedule::Constant(value) => value,
        }
    }

    pub fn horizon(&self) -> Option<f64> {
        match *self {
            Schedule::LinearPump { horizon, .. }
            | Schedule::MfPump { horizon, .. }
            | Schedule::ExpMeasurement { horizon, .. }
            | Schedule::ExpNoise { horizon, .. } => Some(horizon),
            Schedule::Constant(_) => None,
        }
    }
}
