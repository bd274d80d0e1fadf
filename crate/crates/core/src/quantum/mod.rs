//! Conditional quantum dynamics under continuous position measurement.
//!
//! Everything here works in scaled units: energies in `ħω`, time in `1/ω`,
//! `x̃ = a + a†`. The localization rate is `κ̃ = κ a0² / ω = Δn / (4π)`, so
//! the unconditional heating is `d⟨n⟩/dt̃ = 2κ̃`, i.e. `Δn` per period.

pub mod banded;
pub mod sme;
pub mod sse;
pub mod state;

pub use banded::{cn_step, BandedHamiltonian, CnWorkspace, SolveError};
pub use sme::{sme_step, sme_update, SmeWorkspace};
pub use sse::{measurement_record, sse_step, sse_update, SseWorkspace};
pub use state::{DensityState, Observables, QuantumState, StateError};

use crate::feedback::{control, ControlSignal, FilterState};
use crate::params::Scheme;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("feedback control became non-finite")]
    Control,
}

/// Scaled measurement parameters shared by the SSE and SME steppers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementParams {
    /// `κ̃ = Δn / (4π)`.
    pub kappa: f64,
    pub eta: f64,
    /// Step in units of `1/ω`.
    pub dt: f64,
}

impl MeasurementParams {
    pub fn new(eta: f64, delta_n: f64, steps_per_period: usize) -> Self {
        Self {
            kappa: delta_n / (4.0 * PI),
            eta,
            dt: 2.0 * PI / steps_per_period as f64,
        }
    }

    pub fn delta_n(&self) -> f64 {
        4.0 * PI * self.kappa
    }
}

/// Wavefunction trajectory with its feedback loop.
#[derive(Debug, Clone)]
pub struct SseTrajectory {
    pub psi: QuantumState,
    pub filter: FilterState,
    pub scheme: Scheme,
    pub params: MeasurementParams,
    pub steps: u64,
    h: BandedHamiltonian,
    ws: SseWorkspace,
}

impl SseTrajectory {
    pub fn new(
        params: MeasurementParams,
        scheme: Scheme,
        filter: FilterState,
        psi: QuantumState,
    ) -> Self {
        let n = psi.basis_size();
        Self {
            psi,
            filter,
            scheme,
            params,
            steps: 0,
            h: BandedHamiltonian::scaled(&ControlSignal::None, n),
            ws: SseWorkspace::new(n),
        }
    }

    /// Record, filter, control, then propagate. `dw_hidden` drives the unmonitored channel.
    pub fn step_with(
        &mut self,
        dw_meas: f64,
        dw_hidden: f64,
    ) -> Result<ControlSignal, QuantumError> {
        let mean_x = self.psi.mean_x();
        let x_i = measurement_record(mean_x, dw_meas, &self.params);
        self.filter.update(x_i);
        let ctrl = control(&self.filter, self.scheme, 1.0, 1.0);
        if !ctrl.is_finite() {
            return Err(QuantumError::Control);
        }
        self.h.set_scaled(&ctrl);
        sse_update(
            &mut self.psi,
            &self.h,
            &self.params,
            mean_x,
            dw_meas,
            dw_hidden,
            &mut self.ws,
        )?;
        self.steps += 1;
        Ok(ctrl)
    }

    pub fn occupation(&self) -> f64 {
        self.psi.mean_n()
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.params.dt
    }
}

/// Density-matrix trajectory with its feedback loop.
#[derive(Debug, Clone)]
pub struct SmeTrajectory {
    pub rho: DensityState,
    pub filter: FilterState,
    pub scheme: Scheme,
    pub params: MeasurementParams,
    pub steps: u64,
    h: BandedHamiltonian,
    ws: SmeWorkspace,
}

impl SmeTrajectory {
    pub fn new(
        params: MeasurementParams,
        scheme: Scheme,
        filter: FilterState,
        rho: DensityState,
    ) -> Self {
        let n = rho.dim;
        Self {
            rho,
            filter,
            scheme,
            params,
            steps: 0,
            h: BandedHamiltonian::scaled(&ControlSignal::None, n),
            ws: SmeWorkspace::new(n),
        }
    }

    pub fn step_with(&mut self, dw_meas: f64) -> Result<ControlSignal, QuantumError> {
        let mean_x = self.rho.mean_x();
        let x_i = measurement_record(mean_x, dw_meas, &self.params);
        self.filter.update(x_i);
        let ctrl = control(&self.filter, self.scheme, 1.0, 1.0);
        if !ctrl.is_finite() {
            return Err(QuantumError::Control);
        }
        self.h.set_scaled(&ctrl);
        sme_update(
            &mut self.rho,
            &self.h,
            &self.params,
            mean_x,
            dw_meas,
            &mut self.ws,
        )?;
        self.steps += 1;
        Ok(ctrl)
    }

    pub fn occupation(&self) -> f64 {
        self.rho.observables().n
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.params.dt
    }
}
