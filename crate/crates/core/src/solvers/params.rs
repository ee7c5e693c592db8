//! Solver selection and parameter bundles.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::schedule::Schedule;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "langevin")]
    Langevin,
    #[serde(rename = "pumped")]
    PumpedLangevin,
    #[serde(rename = "dl-ccvm")]
    DlCcvm,
    #[serde(rename = "mf-ccvm")]
    MfCcvm,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Langevin,
        SolverKind::PumpedLangevin,
        SolverKind::DlCcvm,
        SolverKind::MfCcvm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Langevin => "langevin",
            SolverKind::PumpedLangevin => "pumped",
            SolverKind::DlCcvm => "dl-ccvm",
            SolverKind::MfCcvm => "mf-ccvm",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "langevin" => Ok(SolverKind::Langevin),
            "pumped" | "pumped-langevin" => Ok(SolverKind::PumpedLangevin),
            "dl-ccvm" | "dl" => Ok(SolverKind::DlCcvm),
            "mf-ccvm" | "mf" => Ok(SolverKind::MfCcvm),
            other => Err(Error::invalid(format!(
                "unknown solver `{other}` (expected langevin, pumped, dl-ccvm or mf-ccvm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LangevinParams {
    pub dt: f64,
    pub n_iter: usize,
    pub sigma: f64,
    /// Report the best visited iterate instead of the last one.
    pub keep_best: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpedLangevinParams {
    pub dt: f64,
    pub n_iter: usize,
    pub sigma: f64,
    pub p0: f64,
    pub keep_best: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DlParams {
    pub dt: f64,
    pub n_iter: usize,
    pub p0: f64,
    pub r0: f64,
    pub beta: f64,
    /// Saturation parameter `A_s`.
    pub a_s: f64,
    /// Explicit saturation amplitude; `None` means `sqrt(p0 − 1)`.
    pub s_sat: Option<f64>,
    /// Coupling strength relative to the instance's largest coefficient.
    pub coupling: f64,
}

/// Which amplitude the measurement-feedback machine reads out at the end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// The in-cavity mean `μ`.
    #[default]
    Mean,
    /// The last measured mean `μ̃`, including measurement noise.
    Measured,
}

impl Readout {
    pub fn select<'a>(self, mu: &'a [f64], mu_tilde: &'a [f64]) -> &'a [f64] {
        match self {
            Readout::Mean => mu,
            Readout::Measured => mu_tilde,
        }
    }
}

impl FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" | "0" => Ok(Readout::Mean),
            "measured" | "1" => Ok(Readout::Measured),
            other => Err(Error::invalid(format!(
                "unknown readout `{other}` (expected mean or measured)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfParams {
    pub dt: f64,
    pub n_iter: usize,
    pub p0: f64,
    pub j0: f64,
    pub alpha: f64,
    /// Feedback gain.
    pub lambda: f64,
    /// Normalized second-order nonlinearity.
    pub g: f64,
    /// Encoding bound of the mean-field amplitudes.
    pub s_sat: f64,
    /// Clip `μ` into `[−s_sat, s_sat]` on every round trip.
    pub clip_mean: bool,
    pub readout: Readout,
}

impl Default for LangevinParams {
    fn default() -> Self {
        Self {
            dt: 0.0075,
            n_iter: 15_000,
            sigma: 0.26,
            keep_best: true,
        }
    }
}

impl Default for PumpedLangevinParams {
    fn default() -> Self {
        Self {
            dt: 0.0075,
            n_iter: 15_000,
            sigma: 0.26,
            p0: 1.75,
            keep_best: true,
        }
    }
}

impl Default for DlParams {
    fn default() -> Self {
        Self {
            dt: 0.0275,
            n_iter: 15_000,
            p0: 2.125,
            r0: 10.0,
            beta: 3.0,
            a_s: 10.0,
            s_sat: None,
            coupling: 1.0,
        }
    }
}

impl Default for MfParams {
    fn default() -> Self {
        Self {
            dt: 0.0025,
            n_iter: 15_000,
            p0: 0.55,
            j0: 20.0,
            alpha: 3.0,
            lambda: 15.0,
            g: 0.01,
            s_sat: 0.2,
            clip_mean: false,
            readout: Readout::Mean,
        }
    }
}

impl PumpedLangevinParams {
    pub fn pump(&self) -> Schedule {
        Schedule::LinearPump {
            p0: self.p0,
            horizon: self.dt * self.n_iter as f64,
        }
    }
}

impl DlParams {
    pub fn saturation(&self) -> f64 {
        self.s_sat.unwrap_or_else(|| (self.p0 - 1.0).abs().sqrt())
    }

    /// Factor applied to [`super::dl_drift`] inside the dynamics:
    /// `coupling / max|coefficient|`. Rescaling the objective leaves its
    /// maximizer unchanged while keeping the injected field comparable to
    /// the pump.
    pub fn coupling_gain(&self, inst: &crate::problem::BoxQpInstance) -> f64 {
        self.coupling / inst.coefficient_scale()
    }

    pub fn pump(&self) -> Schedule {
        Schedule::LinearPump {
            p0: self.p0,
            horizon: self.dt * self.n_iter as f64,
        }
    }

    pub fn noise_factor(&self) -> Schedule {
        Schedule::ExpNoise {
            r0: self.r0,
            beta: self.beta,
            horizon: self.dt * self.n_iter as f64,
        }
    }
}

impl MfParams {
    pub fn pump(&self) -> Schedule {
        Schedule::MfPump {
            p0: self.p0,
            j0: self.j0,
            alpha: self.alpha,
            horizon: self.dt * self.n_iter as f64,
        }
    }

    pub fn measurement(&self) -> Schedule {
        Schedule::ExpMeasurement {
            j0: self.j0,
            alpha: self.alpha,
            horizon: self.dt * self.n_iter as f64,
        }
    }
}

/// Parameters for one of the four solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "kebab-case")]
pub enum SolverParams {
    Langevin(LangevinParams),
    #[serde(rename = "pumped")]
    PumpedLangevin(PumpedLangevinParams),
    DlCcvm(DlParams),
    MfCcvm(MfParams),
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be positive, got {value}"
        )))
    }
}

fn non_negative(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be non-negative, got {value}"
        )))
    }
}

fn flag(name: &str, value: f64) -> Result<bool> {
    match value {
        0.0 => Ok(false),
        1.0 => Ok(true),
        v => Err(Error::invalid(format!("{name} must be 0 or 1, got {v}"))),
    }
}

fn iterations(value: f64) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 && value <= usize::MAX as f64 {
        Ok(value as usize)
    } else {
        Err(Error::invalid(format!(
            "n_iter must be a positive integer, got {value}"
        )))
    }
}

impl SolverParams {
    pub fn defaults(kind: SolverKind) -> Self {
        match kind {
            SolverKind::Langevin => SolverParams::Langevin(LangevinParams::default()),
            SolverKind::PumpedLangevin => {
                SolverParams::PumpedLangevin(PumpedLangevinParams::default())
            }
            SolverKind::DlCcvm => SolverParams::DlCcvm(DlParams::default()),
            SolverKind::MfCcvm => SolverParams::MfCcvm(MfParams::default()),
        }
    }

    pub fn kind(&self) -> SolverKind {
        match self {
            SolverParams::Langevin(_) => SolverKind::Langevin,
            SolverParams::PumpedLangevin(_) => SolverKind::PumpedLangevin,
            SolverParams::DlCcvm(_) => SolverKind::DlCcvm,
            SolverParams::MfCcvm(_) => SolverKind::MfCcvm,
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            SolverParams::Langevin(p) => p.dt,
            SolverParams::PumpedLangevin(p) => p.dt,
            SolverParams::DlCcvm(p) => p.dt,
            SolverParams::MfCcvm(p) => p.dt,
        }
    }

    pub fn n_iter(&self) -> usize {
        match self {
            SolverParams::Langevin(p) => p.n_iter,
            SolverParams::PumpedLangevin(p) => p.n_iter,
            SolverParams::DlCcvm(p) => p.n_iter,
            SolverParams::MfCcvm(p) => p.n_iter,
        }
    }

    /// Total normalized evolution time `n_iter·dt`.
    pub fn horizon(&self) -> f64 {
        self.dt() * self.n_iter() as f64
    }

    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt())?;
        if self.n_iter() == 0 {
            return Err(Error::invalid("n_iter must be positive"));
        }
        match self {
            SolverParams::Langevin(p) => non_negative("sigma", p.sigma),
            SolverParams::PumpedLangevin(p) => {
                non_negative("sigma", p.sigma)?;
                positive("p0", p.p0)
            }
            SolverParams::DlCcvm(p) => {
                positive("p0", p.p0)?;
                positive("r0", p.r0)?;
                non_negative("beta", p.beta)?;
                positive("a_s", p.a_s)?;
                positive("coupling", p.coupling)?;
                positive("s_sat", p.saturation())
            }
            SolverParams::MfCcvm(p) => {
                non_negative("p0", p.p0)?;
                positive("j0", p.j0)?;
                non_negative("alpha", p.alpha)?;
                positive("lambda", p.lambda)?;
                positive("g", p.g)?;
                positive("s_sat", p.s_sat)?;
                // Net linear gain p(t) − (1 + j(t)) peaks at p0 when t = T.
                if p.p0 > 0.0 {
                    let bound = p.p0.sqrt() / p.g;
                    if p.s_sat >= bound {
                        return Err(Error::invalid(format!(
                            "s_sat {} must stay below sqrt(p0)/g = {bound}",
                            p.s_sat
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Parameter names accepted by [`SolverParams::set`] for this solver.
    pub fn keys(&self) -> &'static [&'static str] {
        match self {
            SolverParams::Langevin(_) => &["dt", "n_iter", "sigma", "keep_best"],
            SolverParams::PumpedLangevin(_) => &["dt", "n_iter", "sigma", "p0", "keep_best"],
            SolverParams::DlCcvm(_) => &[
                "dt", "n_iter", "p0", "r0", "beta", "a_s", "s_sat", "coupling",
            ],
            SolverParams::MfCcvm(_) => &[
                "dt",
                "n_iter",
                "p0",
                "j0",
                "alpha",
                "lambda",
                "g",
                "s_sat",
                "clip_mean",
                "readout",
            ],
        }
    }

    /// Current value of every key in [`SolverParams::keys`], as accepted by
    /// [`SolverParams::set_str`]. An unset DL saturation is omitted.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let num = |v: f64| format!("{v:?}");
        let int = |v: usize| v.to_string();
        let flag = |v: bool| v.to_string();
        match self {
            SolverParams::Langevin(p) => vec![
                ("dt", num(p.dt)),
                ("n_iter", int(p.n_iter)),
                ("sigma", num(p.sigma)),
                ("keep_best", flag(p.keep_best)),
            ],
            SolverParams::PumpedLangevin(p) => vec![
                ("dt", num(p.dt)),
                ("n_iter", int(p.n_iter)),
                ("sigma", num(p.sigma)),
                ("p0", num(p.p0)),
                ("keep_best", flag(p.keep_best)),
            ],
            SolverParams::DlCcvm(p) => {
                let mut v = vec![
                    ("dt", num(p.dt)),
                    ("n_iter", int(p.n_iter)),
                    ("p0", num(p.p0)),
                    ("r0", num(p.r0)),
                    ("beta", num(p.beta)),
                    ("a_s", num(p.a_s)),
                ];
                if let Some(s) = p.s_sat {
                    v.push(("s_sat", num(s)));
                }
                v.push(("coupling", num(p.coupling)));
                v
            }
            SolverParams::MfCcvm(p) => vec![
                ("dt", num(p.dt)),
                ("n_iter", int(p.n_iter)),
                ("p0", num(p.p0)),
                ("j0", num(p.j0)),
                ("alpha", num(p.alpha)),
                ("lambda", num(p.lambda)),
                ("g", num(p.g)),
                ("s_sat", num(p.s_sat)),
                ("clip_mean", flag(p.clip_mean)),
                (
                    "readout",
                    match p.readout {
                        Readout::Mean => "mean".to_string(),
                        Readout::Measured => "measured".to_string(),
                    },
                ),
            ],
        }
    }

    /// Overrides one named parameter from its textual form. Accepts numbers,
    /// `true`/`false` for flags and `mean`/`measured` for the readout.
    pub fn set_str(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        if let (SolverParams::MfCcvm(p), "readout") = (&mut *self, key) {
            p.readout = value.parse()?;
            return Ok(());
        }
        let number = match value {
            "true" => 1.0,
            "false" => 0.0,
            v => v.parse::<f64>().map_err(|_| {
                Error::invalid(format!("parameter `{key}` needs a number, got `{v}`"))
            })?,
        };
        self.set(key, number)
    }

    /// Overrides one named parameter. Booleans are passed as 0 or 1, the
    /// readout as 0 (mean) or 1 (measured).
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let unknown = |kind: SolverKind| {
            Error::invalid(format!("unknown parameter `{key}` for solver {kind}"))
        };
        let kind = self.kind();
        match self {
            SolverParams::Langevin(p) => match key {
                "dt" => p.dt = value,
                "n_iter" => p.n_iter = iterations(value)?,
                "sigma" => p.sigma = value,
                "keep_best" => p.keep_best = flag(key, value)?,
                _ => return Err(unknown(kind)),
            },
            SolverParams::PumpedLangevin(p) => match key {
                "dt" => p.dt = value,
                "n_iter" => p.n_iter = iterations(value)?,
                "sigma" => p.sigma = value,
                "p0" => p.p0 = value,
                "keep_best" => p.keep_best = flag(key, value)?,
                _ => return Err(unknown(kind)),
            },
            SolverParams::DlCcvm(p) => match key {
                "dt" => p.dt = value,
                "n_iter" => p.n_iter = iterations(value)?,
                "p0" => p.p0 = value,
                "r0" => p.r0 = value,
                "beta" => p.beta = value,
                "a_s" => p.a_s = value,
                "s_sat" => p.s_sat = Some(value),
                "coupling" => p.coupling = value,
                _ => return Err(unknown(kind)),
            },
            SolverParams::MfCcvm(p) => match key {
                "dt" => p.dt = value,
                "n_iter" => p.n_iter = iterations(value)?,
                "p0" => p.p0 = value,
                "j0" => p.j0 = value,
                "alpha" => p.alpha = value,
                "lambda" => p.lambda = value,
                "g" => p.g = value,
                "s_sat" => p.s_sat = value,
                "clip_mean" => p.clip_mean = flag(key, value)?,
                "readout" => {
                    p.readout = match value {
                        0.0 => Readout::Mean,
                        1.0 => Readout::Measured,
                        v => {
                            return Err(Error::invalid(format!("readout must be 0 or 1, got {v}")))
                        }
                    }
                }
                _ => return Err(unknown(kind)),
            },
        }
        Ok(())
    }
}
