//! Stochastic Schrödinger equation for continuous position measurement.
//!
//! Split step on the scaled state:
//!
//! * unitary part by Crank-Nicolson with the control-modified Hamiltonian,
//! * measurement part evaluated on the pre-step state,
//!   `dψ = [-κ (x - ⟨x⟩)² dt + sqrt(2ηκ dt) (x - ⟨x⟩) dW₁ + sqrt(2(1-η)κ dt) (x - ⟨x⟩) dW₂] ψ`,
//! * `ψ' = normalize(unitary + dψ)`.
//!
//! `dW₁` drives the measurement record; `dW₂` unravels the unobserved share
//! of the decoherence so the ensemble mean still follows the full Lindblad
//! term `-κ [x, [x, ρ]]`.

use super::banded::{cn_step, BandedHamiltonian, CnWorkspace};
use super::state::{QuantumState, StateError};
use super::{MeasurementParams, QuantumError};
use num_complex::Complex64;

/// Scratch buffers for [`sse_update`].
#[derive(Debug, Clone)]
pub struct SseWorkspace {
    cn: CnWorkspace,
    shifted: Vec<Complex64>,
    shifted2: Vec<Complex64>,
    sqrt_k: Vec<f64>,
}

impl SseWorkspace {
    pub fn new(n: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            cn: CnWorkspace::new(n),
            shifted: vec![z; n],
            shifted2: vec![z; n],
            sqrt_k: (0..=n).map(|k| (k as f64).sqrt()).collect(),
        }
    }
}

/// `out = (x̃ - shift) v` with `x̃ = a + a†`.
#[inline]
fn apply_shifted_x(v: &[Complex64], shift: f64, sqrt_k: &[f64], out: &mut [Complex64]) {
    let n = v.len();
    for k in 0..n {
        let mut acc = v[k] * (-shift);
        if k + 1 < n {
            acc += v[k + 1] * sqrt_k[k + 1];
        }
        if k >= 1 {
            acc += v[k - 1] * sqrt_k[k];
        }
        out[k] = acc;
    }
}

/// Advance `psi` by one step given the pre-step `⟨x̃⟩` and both Wiener draws.
///
/// Returns the norm before renormalization.
pub fn sse_update(
    psi: &mut QuantumState,
    h: &BandedHamiltonian,
    params: &MeasurementParams,
    mean_x: f64,
    dw_meas: f64,
    dw_hidden: f64,
    ws: &mut SseWorkspace,
) -> Result<f64, QuantumError> {
    let n = psi.basis_size();
    if ws.shifted.len() != n {
        *ws = SseWorkspace::new(n);
    }
    let dt = params.dt;
    let kappa = params.kappa;
    apply_shifted_x(&psi.amplitudes, mean_x, &ws.sqrt_k, &mut ws.shifted);
    apply_shifted_x(&ws.shifted, mean_x, &ws.sqrt_k, &mut ws.shifted2);
    let drift = -kappa * dt;
    let diffusion = (2.0 * params.eta * kappa * dt).sqrt() * dw_meas
        + (2.0 * (1.0 - params.eta) * kappa * dt).sqrt() * dw_hidden;

    cn_step(&mut psi.amplitudes, h, dt, &mut ws.cn)?;
    for k in 0..n {
        psi.amplitudes[k] += ws.shifted2[k] * drift + ws.shifted[k] * diffusion;
    }
    let norm = psi.normalize();
    if !norm.is_finite() || norm == 0.0 {
        return Err(StateError::NonFinite.into());
    }
    psi.check_truncation()?;
    Ok(norm)
}

/// Record `x_i = ⟨x⟩ + dW / sqrt(8 η κ dt)`.
pub fn measurement_record(mean_x: f64, dw_meas: f64, params: &MeasurementParams) -> f64 {
    mean_x + dw_meas / (8.0 * params.eta * params.kappa * params.dt).sqrt()
}

/// One complete SSE step with a fixed Hamiltonian. Returns the record.
pub fn sse_step(
    psi: &mut QuantumState,
    h: &BandedHamiltonian,
    params: &MeasurementParams,
    dw_meas: f64,
    dw_hidden: f64,
    ws: &mut SseWorkspace,
) -> Result<f64, QuantumError> {
    let mean_x = psi.mean_x();
    sse_update(psi, h, params, mean_x, dw_meas, dw_hidden, ws)?;
    Ok(measurement_record(mean_x, dw_meas, params))
}
