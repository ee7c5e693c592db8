//! Euler–Maruyama updates for the four stochastic dynamics.
//!
//! All drifts ascend the BoxQP objective `f`, so the dynamics look for its
//! maximum. Each step takes `dW = sqrt(dt)·z` with `z` drawn from the trial
//! stream in a fixed order, so a step is a pure function of the state, the
//! time and the stream position.

use rand::Rng;
use rand_distr::StandardNormal;

use super::params::{DlParams, LangevinParams, MfParams, PumpedLangevinParams};
use crate::error::{Error, Result};
use crate::problem::{BoxQpInstance, SolutionVector};

/// Largest state magnitude tolerated before a trial is aborted.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Scratch buffers reused across steps of one trial.
#[derive(Debug, Clone, Default)]
pub(crate) struct Workspace {
    grad: Vec<f64>,
    grad_aux: Vec<f64>,
    noise: Vec<f64>,
    noise_aux: Vec<f64>,
    /// Multiplier on the delay-line coupling, fixed for the whole trial.
    pub(crate) gain: f64,
    /// Objective at the state a Langevin step started from.
    pub(crate) start_objective: f64,
}

impl Workspace {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            grad: vec![0.0; n],
            grad_aux: vec![0.0; n],
            noise: vec![0.0; n],
            noise_aux: vec![0.0; n],
            gain: 1.0,
            start_objective: f64::NEG_INFINITY,
        }
    }

    pub(crate) fn for_dl(inst: &BoxQpInstance, params: &DlParams) -> Self {
        Self {
            gain: params.coupling_gain(inst),
            ..Self::new(inst.n())
        }
    }
}

fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for z in out.iter_mut() {
        *z = rng.sample(StandardNormal);
    }
}

pub(crate) fn guard(iteration: usize, name: &str, values: &[f64]) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                iteration,
                message: format!("{name}[{i}] = {v}"),
            });
        }
    }
    Ok(())
}

fn check_len(inst: &BoxQpInstance, len: usize) -> Result<()> {
    if len != inst.n() {
        return Err(Error::invalid(format!(
            "state has length {len}, instance has N = {}",
            inst.n()
        )));
    }
    Ok(())
}

/// Maps an amplitude in `[−s, s]` linearly onto `[ℓ_i, u_i]`; no clamping.
#[inline]
fn amplitude_to_box(y: f64, s_sat: f64, lo: f64, hi: f64) -> f64 {
    0.5 * (y / s_sat + 1.0) * (hi - lo) + lo
}

pub(crate) fn encoded_drift_into(
    inst: &BoxQpInstance,
    y: &[f64],
    s_sat: f64,
    x: &mut [f64],
    out: &mut [f64],
) {
    let (lower, upper) = (inst.lower(), inst.upper());
    for j in 0..inst.n() {
        x[j] = amplitude_to_box(y[j], s_sat, lower[j], upper[j]);
    }
    inst.gradient_into(x, out);
    for i in 0..inst.n() {
        out[i] *= (upper[i] - lower[i]) / (2.0 * s_sat);
    }
}

/// Gradient of `f` with respect to amplitudes under the linear box encoding:
/// `k_i·(Σ_j Q_ij·[½(y_j/s + 1)(u_j − ℓ_j) + ℓ_j] + V_i)` with `k_i = (u_i − ℓ_i)/(2s)`.
///
/// This is the coupling injected into the delay-line machine.
pub fn dl_drift(inst: &BoxQpInstance, c: &[f64], s_sat: f64) -> Result<Vec<f64>> {
    check_len(inst, c.len())?;
    if !(s_sat > 0.0) {
        return Err(Error::invalid(format!(
            "saturation amplitude must be positive, got {s_sat}"
        )));
    }
    let mut x = vec![0.0; inst.n()];
    let mut out = vec![0.0; inst.n()];
    encoded_drift_into(inst, c, s_sat, &mut x, &mut out);
    Ok(out)
}

/// Feedback drift of the measurement-feedback machine, evaluated at the
/// measured means. Same encoding as [`dl_drift`], with `s_sat` the
/// measurement-feedback encoding bound.
pub fn mf_encoded_drift(inst: &BoxQpInstance, mu_tilde: &[f64], s_sat: f64) -> Result<Vec<f64>> {
    dl_drift(inst, mu_tilde, s_sat)
}

/// Clamps amplitudes to `[−s, s]` then maps them into the box.
pub fn decode_amplitudes(y: &[f64], s_sat: f64, inst: &BoxQpInstance) -> Result<SolutionVector> {
    check_len(inst, y.len())?;
    let mut x: Vec<f64> = y
        .iter()
        .zip(inst.lower().iter().zip(inst.upper()))
        .map(|(&yi, (&lo, &hi))| amplitude_to_box(yi.clamp(-s_sat, s_sat), s_sat, lo, hi))
        .collect();
    // rounding in the affine map can land one ulp outside the box
    inst.clamp_in_place(&mut x);
    inst.solution(x)
}

pub fn decode_dl(c: &[f64], s_sat: f64, inst: &BoxQpInstance) -> Result<SolutionVector> {
    decode_amplitudes(c, s_sat, inst)
}

pub fn decode_mf(mu_tilde: &[f64], s_sat: f64, inst: &BoxQpInstance) -> Result<SolutionVector> {
    decode_amplitudes(mu_tilde, s_sat, inst)
}

/// `μ̃ = μ + sqrt(1/(4j))·dW/dt` for a given Wiener increment.
pub fn measured_mean_from_increment(mu: &[f64], j: f64, dt: f64, dw: &[f64], out: &mut [f64]) {
    let scale = (1.0 / (4.0 * j)).sqrt() / dt;
    for ((o, m), w) in out.iter_mut().zip(mu).zip(dw) {
        *o = m + scale * w;
    }
}

/// Draws one measurement record and returns the measured means.
pub fn mf_measured_mean<R: Rng + ?Sized>(
    mu: &[f64],
    j: f64,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(j > 0.0) {
        return Err(Error::invalid(format!(
            "measurement strength must be positive, got {j}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let sqrt_dt = dt.sqrt();
    let dw: Vec<f64> = (0..mu.len())
        .map(|_| sqrt_dt * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut out = vec![0.0; mu.len()];
    measured_mean_from_increment(mu, j, dt, &dw, &mut out);
    Ok(out)
}

/// `f(c) = ½·c·(Qc + V) + ½·V·c`, reusing `g = Qc + V`.
fn objective_from_gradient(inst: &BoxQpInstance, c: &[f64], g: &[f64]) -> f64 {
    c.iter()
        .zip(g.iter().zip(inst.v()))
        .map(|(ci, (gi, vi))| 0.5 * ci * (gi + vi))
        .sum()
}

pub(crate) fn langevin_step_ws<R: Rng + ?Sized>(
    c: &mut [f64],
    inst: &BoxQpInstance,
    params: &LangevinParams,
    rng: &mut R,
    iteration: usize,
    ws: &mut Workspace,
) -> Result<()> {
    let dt = params.dt;
    let amp = params.sigma * dt.sqrt();
    inst.gradient_into(c, &mut ws.grad);
    ws.start_objective = objective_from_gradient(inst, c, &ws.grad);
    fill_normal(rng, &mut ws.noise);
    for ((ci, g), z) in c.iter_mut().zip(&ws.grad).zip(&ws.noise) {
        *ci += g * dt + amp * z;
    }
    guard(iteration, "c", c)?;
    inst.clamp_in_place(c);
    Ok(())
}

/// `c_i ← clamp(c_i + ∂_i f(c)·dt + σ·sqrt(dt)·z_i)`.
pub fn step_langevin<R: Rng + ?Sized>(
    c: &mut [f64],
    inst: &BoxQpInstance,
    params: &LangevinParams,
    rng: &mut R,
    iteration: usize,
) -> Result<()> {
    check_len(inst, c.len())?;
    langevin_step_ws(
        c,
        inst,
        params,
        rng,
        iteration,
        &mut Workspace::new(inst.n()),
    )
}

pub(crate) fn pumped_step_ws<R: Rng + ?Sized>(
    c: &mut [f64],
    inst: &BoxQpInstance,
    params: &PumpedLangevinParams,
    t: f64,
    rng: &mut R,
    iteration: usize,
    ws: &mut Workspace,
) -> Result<()> {
    let dt = params.dt;
    let p = params.pump().at(t);
    let amp = params.sigma * dt.sqrt();
    inst.gradient_into(c, &mut ws.grad);
    ws.start_objective = objective_from_gradient(inst, c, &ws.grad);
    fill_normal(rng, &mut ws.noise);
    for ((ci, g), z) in c.iter_mut().zip(&ws.grad).zip(&ws.noise) {
        let gain = (-1.0 + p - *ci * *ci) * *ci;
        *ci += (gain + g) * dt + amp * z;
    }
    guard(iteration, "c", c)?;
    inst.clamp_in_place(c);
    Ok(())
}

/// Pumped Langevin: adds the gain/saturation drift `(−1 + p(t) − c_i²)·c_i`.
pub fn step_pumped_langevin<R: Rng + ?Sized>(
    c: &mut [f64],
    inst: &BoxQpInstance,
    params: &PumpedLangevinParams,
    t: f64,
    rng: &mut R,
    iteration: usize,
) -> Result<()> {
    check_len(inst, c.len())?;
    pumped_step_ws(
        c,
        inst,
        params,
        t,
        rng,
        iteration,
        &mut Workspace::new(inst.n()),
    )
}

/// Per-component noise prefactors `(r/A_s, 1/(r·A_s))` times
/// `sqrt(c² + s² + ½)` for the delay-line machine.
pub fn dl_diffusion(params: &DlParams, c: f64, s: f64, t: f64) -> (f64, f64) {
    let r = params.noise_factor().at(t);
    let amp = (c * c + s * s + 0.5).sqrt();
    (r / params.a_s * amp, amp / (r * params.a_s))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn dl_step_ws<R: Rng + ?Sized>(
    c: &mut [f64],
    s: &mut [f64],
    inst: &BoxQpInstance,
    params: &DlParams,
    t: f64,
    rng: &mut R,
    iteration: usize,
    ws: &mut Workspace,
) -> Result<()> {
    let dt = params.dt;
    let sqrt_dt = dt.sqrt();
    let s_sat = params.saturation();
    let p = params.pump().at(t);
    let r = params.noise_factor().at(t);
    let (c_scale, s_scale) = (r / params.a_s, 1.0 / (r * params.a_s));

    // drift at c lands in ws.grad, drift at s in ws.grad_aux; ws.noise is
    // borrowed as the decode scratch before the normals are drawn.
    encoded_drift_into(inst, c, s_sat, &mut ws.noise, &mut ws.grad);
    encoded_drift_into(inst, s, s_sat, &mut ws.noise, &mut ws.grad_aux);
    let gain = ws.gain;
    fill_normal(rng, &mut ws.noise);
    fill_normal(rng, &mut ws.noise_aux);

    for i in 0..c.len() {
        let (ci, si) = (c[i], s[i]);
        let energy = ci * ci + si * si;
        let amp = (energy + 0.5).sqrt() * sqrt_dt;
        c[i] =
            ci + ((-1.0 + p - energy) * ci + gain * ws.grad[i]) * dt + c_scale * amp * ws.noise[i];
        s[i] = si
            + ((-1.0 - p - energy) * si + gain * ws.grad_aux[i]) * dt
            + s_scale * amp * ws.noise_aux[i];
    }
    guard(iteration, "c", c)?;
    guard(iteration, "s", s)
}

/// One step of the delay-line machine in the in-phase (`c`) and
/// quadrature (`s`) amplitudes. Amplitudes are left unclamped. The injected
/// coupling is [`dl_drift`] scaled by [`DlParams::coupling_gain`].
pub fn step_dl_ccvm<R: Rng + ?Sized>(
    c: &mut [f64],
    s: &mut [f64],
    inst: &BoxQpInstance,
    params: &DlParams,
    t: f64,
    rng: &mut R,
    iteration: usize,
) -> Result<()> {
    check_len(inst, c.len())?;
    check_len(inst, s.len())?;
    dl_step_ws(
        c,
        s,
        inst,
        params,
        t,
        rng,
        iteration,
        &mut Workspace::for_dl(inst, params),
    )
}

/// Diffusion prefactor `sqrt(j)·(σ_i − ½)` of the mean-field update.
pub fn mf_diffusion(params: &MfParams, sigma: f64, t: f64) -> f64 {
    params.measurement().at(t).sqrt() * (sigma - 0.5)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn mf_step_ws<R: Rng + ?Sized>(
    mu: &mut [f64],
    sigma: &mut [f64],
    mu_tilde: &mut [f64],
    inst: &BoxQpInstance,
    params: &MfParams,
    t: f64,
    rng: &mut R,
    iteration: usize,
    ws: &mut Workspace,
) -> Result<()> {
    let dt = params.dt;
    let j = params.measurement().at(t);
    let p = params.pump().at(t);
    let g2 = params.g * params.g;
    let sqrt_j = j.sqrt();

    // ws.noise holds dW, shared by the measurement and the back-action
    fill_normal(rng, &mut ws.noise);
    let sqrt_dt = dt.sqrt();
    for w in ws.noise.iter_mut() {
        *w *= sqrt_dt;
    }
    measured_mean_from_increment(mu, j, dt, &ws.noise, mu_tilde);
    // the processor evaluates the gradient at the decoded, feasible point
    for (c, m) in ws.grad_aux.iter_mut().zip(mu_tilde.iter()) {
        *c = m.clamp(-params.s_sat, params.s_sat);
    }
    encoded_drift_into(
        inst,
        &ws.grad_aux,
        params.s_sat,
        &mut ws.noise_aux,
        &mut ws.grad,
    );

    let loss = 1.0 + j;
    for i in 0..mu.len() {
        let (m, v) = (mu[i], sigma[i]);
        let m2 = m * m;
        let d_mu = (-loss + p - g2 * m2) * m * dt
            + params.lambda * ws.grad[i] * dt
            + sqrt_j * (v - 0.5) * ws.noise[i];
        let d_sigma = 2.0 * (-loss + p - 3.0 * g2 * m2) * v * dt
            - 2.0 * j * (v - 0.5) * (v - 0.5) * dt
            + (loss + 2.0 * g2 * m2) * dt;
        mu[i] = m + d_mu;
        sigma[i] = v + d_sigma;
    }
    guard(iteration, "mu", mu)?;
    guard(iteration, "sigma", sigma)?;
    if params.clip_mean {
        for m in mu.iter_mut() {
            *m = m.clamp(-params.s_sat, params.s_sat);
        }
    }
    Ok(())
}

/// One step of the measurement-feedback machine. `mu_tilde` receives the
/// means measured during this step, which the feedback gradient uses.
#[allow(clippy::too_many_arguments)]
pub fn step_mf_ccvm<R: Rng + ?Sized>(
    mu: &mut [f64],
    sigma: &mut [f64],
    mu_tilde: &mut [f64],
    inst: &BoxQpInstance,
    params: &MfParams,
    t: f64,
    rng: &mut R,
    iteration: usize,
) -> Result<()> {
    check_len(inst, mu.len())?;
    check_len(inst, sigma.len())?;
    check_len(inst, mu_tilde.len())?;
    mf_step_ws(
        mu,
        sigma,
        mu_tilde,
        inst,
        params,
        t,
        rng,
        iteration,
        &mut Workspace::new(inst.n()),
    )
}
