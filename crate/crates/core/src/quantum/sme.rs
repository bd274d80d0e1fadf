//! Stochastic master equation for continuous position measurement.
//!
//! `dρ = -i[H, ρ] dt - κ [x, [x, ρ]] dt + sqrt(2ηκ) (xρ + ρx - 2⟨x⟩ρ) sqrt(dt) dW`
//!
//! in scaled units. The free rotation `H0 = n` is applied exactly, a half
//! step either side of a Heun (second order Runge-Kutta) step for the control
//! Hamiltonian and the dissipator. Heun alone amplifies a coherence of
//! frequency `ω` by `(ω dt)⁴/4` per step, and position measurement does not
//! damp number-basis coherences, so the exact rotation is what keeps large
//! bases stable. The noise term is applied once per step on the pre-step
//! state, then the trace is renormalized.

use super::banded::BandedHamiltonian;
use super::state::{DensityState, StateError};
use super::{MeasurementParams, QuantumError};
use num_complex::Complex64;

/// Hermiticity tolerance checked after each step.
pub const HERMITICITY_TOLERANCE: f64 = 1e-10;
/// Trace tolerance before renormalization.
pub const TRACE_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct SmeWorkspace {
    dim: usize,
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    trial: Vec<Complex64>,
    xr: Vec<Complex64>,
    tmp: Vec<Complex64>,
    tmp2: Vec<Complex64>,
    innovation: Vec<Complex64>,
    x_op: BandedHamiltonian,
    /// Control part of the Hamiltonian, `H - n`.
    rest: BandedHamiltonian,
    /// `e^{-i d τ}` for `d = i - j + dim - 1`, and the `τ` it was built for.
    phases: Vec<Complex64>,
    phase_tau: f64,
}

impl SmeWorkspace {
    pub fn new(dim: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        let mut x_op = BandedHamiltonian::zeros(dim);
        for k in 0..dim.saturating_sub(1) {
            x_op.off1[k] = ((k + 1) as f64).sqrt();
        }
        Self {
            dim,
            k1: vec![z; dim * dim],
            k2: vec![z; dim * dim],
            trial: vec![z; dim * dim],
            xr: vec![z; dim * dim],
            tmp: vec![z; dim * dim],
            tmp2: vec![z; dim * dim],
            innovation: vec![z; dim * dim],
            x_op,
            rest: BandedHamiltonian::zeros(dim),
            phases: vec![z; 2 * dim.max(1) - 1],
            phase_tau: f64::NAN,
        }
    }
}

/// `out = B ρ` for a real symmetric banded `B`.
fn left_mul(b: &BandedHamiltonian, rho: &[Complex64], dim: usize, out: &mut [Complex64]) {
    for i in 0..dim {
        let row = &mut out[i * dim..(i + 1) * dim];
        let d = b.diag[i];
        let src = &rho[i * dim..(i + 1) * dim];
        for j in 0..dim {
            row[j] = src[j] * d;
        }
        let mut add = |k: usize, w: f64| {
            if w != 0.0 {
                let src = &rho[k * dim..(k + 1) * dim];
                for j in 0..dim {
                    row[j] += src[j] * w;
                }
            }
        };
        if i >= 1 {
            add(i - 1, b.off1[i - 1]);
        }
        if i + 1 < dim {
            add(i + 1, b.off1[i]);
        }
        if i >= 2 {
            add(i - 2, b.off2[i - 2]);
        }
        if i + 2 < dim {
            add(i + 2, b.off2[i]);
        }
    }
}

/// `L(ρ) = -i[H, ρ] - κ[x, [x, ρ]]`. Also leaves `xρ` in `ws.xr`.
fn lindblad(
    h: &BandedHamiltonian,
    kappa: f64,
    rho: &[Complex64],
    ws: &mut SmeWorkspace,
    out: &mut [Complex64],
) {
    let d = ws.dim;
    let minus_i = Complex64::new(0.0, -1.0);
    // [H, ρ] = Hρ - (Hρ)† since H is real symmetric and ρ Hermitian.
    left_mul(h, rho, d, &mut ws.tmp);
    left_mul(&ws.x_op, rho, d, &mut ws.xr);
    // C = [x, ρ] = xρ - (xρ)†, anti-Hermitian.
    for i in 0..d {
        for j in 0..d {
            ws.tmp2[i * d + j] = ws.xr[i * d + j] - ws.xr[j * d + i].conj();
        }
    }
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = minus_i * (ws.tmp[i * d + j] - ws.tmp[j * d + i].conj());
        }
    }
    // [x, C] = xC + (xC)†.
    left_mul(&ws.x_op, &ws.tmp2, d, &mut ws.tmp);
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] -= (ws.tmp[i * d + j] + ws.tmp[j * d + i].conj()) * kappa;
        }
    }
}

/// `ρ_ij ← e^{-i(i-j)τ} ρ_ij`, the exact free evolution over `τ`.
fn rotate(rho: &mut [Complex64], dim: usize, tau: f64, ws: &mut SmeWorkspace) {
    if ws.phase_tau != tau {
        for (k, ph) in ws.phases.iter_mut().enumerate() {
            let d = k as f64 - (dim as f64 - 1.0);
            *ph = Complex64::from_polar(1.0, -d * tau);
        }
        ws.phase_tau = tau;
    }
    for i in 0..dim {
        let row = &mut rho[i * dim..(i + 1) * dim];
        let base = i + dim - 1;
        for (j, c) in row.iter_mut().enumerate() {
            *c *= ws.phases[base - j];
        }
    }
}

/// Advance `rho` by one step given the pre-step `⟨x̃⟩` and the Wiener draw.
///
/// `h` must be a scaled Hamiltonian (`ħ = ω = 1`) whose diagonal contains `n + 1/2`.
pub fn sme_update(
    rho: &mut DensityState,
    h: &BandedHamiltonian,
    params: &MeasurementParams,
    mean_x: f64,
    dw_meas: f64,
    ws: &mut SmeWorkspace,
) -> Result<(), QuantumError> {
    let d = rho.dim;
    if ws.dim != d {
        *ws = SmeWorkspace::new(d);
    }
    let dt = params.dt;
    let mut k1 = std::mem::take(&mut ws.k1);
    let mut k2 = std::mem::take(&mut ws.k2);
    let mut trial = std::mem::take(&mut ws.trial);

    let mut rest = std::mem::take(&mut ws.rest);
    rest.clone_from(h);
    for (k, v) in rest.diag.iter_mut().enumerate() {
        *v -= k as f64 + 0.5;
    }

    // Measurement term from the pre-step state: xρ + ρx - 2⟨x⟩ρ.
    left_mul(&ws.x_op, &rho.rho, d, &mut ws.xr);
    let noise = (2.0 * params.eta * params.kappa * dt).sqrt() * dw_meas;
    for i in 0..d {
        for j in 0..d {
            let idx = i * d + j;
            ws.innovation[idx] =
                (ws.xr[idx] + ws.xr[j * d + i].conj() - rho.rho[idx] * (2.0 * mean_x)) * noise;
        }
    }

    rotate(&mut rho.rho, d, 0.5 * dt, ws);
    lindblad(&rest, params.kappa, &rho.rho, ws, &mut k1);
    for idx in 0..d * d {
        trial[idx] = rho.rho[idx] + k1[idx] * dt;
    }
    lindblad(&rest, params.kappa, &trial, ws, &mut k2);
    for idx in 0..d * d {
        rho.rho[idx] += (k1[idx] + k2[idx]) * (0.5 * dt);
    }
    rotate(&mut rho.rho, d, 0.5 * dt, ws);
    for idx in 0..d * d {
        rho.rho[idx] += ws.innovation[idx];
    }
    ws.k1 = k1;
    ws.k2 = k2;
    ws.trial = trial;
    ws.rest = rest;

    let tr = rho.trace();
    if !(tr.re.is_finite() && tr.im.is_finite()) {
        return Err(StateError::NonFinite.into());
    }
    if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > HERMITICITY_TOLERANCE {
        return Err(StateError::Trace(tr.re).into());
    }
    let inv = 1.0 / tr.re;
    rho.rho.iter_mut().for_each(|c| *c *= inv);
    let herm = rho.hermiticity_error();
    if herm > HERMITICITY_TOLERANCE {
        return Err(StateError::Hermiticity(herm).into());
    }
    let tail = rho.guard_population();
    if tail >= super::state::GUARD_TOLERANCE {
        return Err(StateError::Truncation {
            basis: d,
            levels: super::state::GUARD_LEVELS,
            tail,
        }
        .into());
    }
    Ok(())
}

/// One complete SME step with a fixed Hamiltonian. Returns the record.
pub fn sme_step(
    rho: &mut DensityState,
    h: &BandedHamiltonian,
    params: &MeasurementParams,
    dw_meas: f64,
    ws: &mut SmeWorkspace,
) -> Result<f64, QuantumError> {
    let mean_x = rho.mean_x();
    sme_update(rho, h, params, mean_x, dw_meas, ws)?;
    Ok(super::sse::measurement_record(mean_x, dw_meas, params))
}
