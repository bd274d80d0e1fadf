//! Semi-classical feedback cooling.
//!
//! A point particle in a harmonic trap, measured with Gaussian record noise
//! and kicked by shot noise. Each step:
//!
//! 1. record `x_i = x + ξ Δx`,
//! 2. filter the record and compute the control,
//! 3. advance the deterministic motion by one RK4 step with the control held,
//! 4. kick `p ← p + ζ Δp`,
//!
//! with `ξ`, `ζ` independent standard normals. `Δx Δp = ħ / (2 sqrt(η))`.
//!
//! [`PhysicalSystem`] integrates in SI units; [`ScaledSystem`] integrates the
//! rescaled equations (lengths in `a0`, momenta in `m ω a0`, time in `1/ω`),
//! which depend only on `η`, the scaled strength and `Δn`.

use crate::feedback::{control, ControlSignal, FilterError, FilterState};
use crate::params::{Scheme, HBAR};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("non-finite state at t = {t}: x = {x}, p = {p}")]
    NonFinite { t: f64, x: f64, p: f64 },
}

/// Independent noise draws for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDraws {
    /// Measurement record noise.
    pub meas: f64,
    /// Shot-noise momentum kick.
    pub kick: f64,
}

impl NoiseDraws {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let meas = rng.sample(StandardNormal);
        let kick = rng.sample(StandardNormal);
        Self { meas, kick }
    }

    pub fn zero() -> Self {
        Self {
            meas: 0.0,
            kick: 0.0,
        }
    }
}

/// Phase-space point plus the feedback filter attached to it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScState {
    pub x: f64,
    pub p: f64,
    pub t: f64,
    pub steps: u64,
    pub filter: FilterState,
}

/// Advance `dx/dt = p/m`, `dp/dt = force(x)` by one classical RK4 step.
#[inline(always)]
fn rk4(x: f64, p: f64, dt: f64, inv_mass: f64, force: impl Fn(f64) -> f64) -> (f64, f64) {
    let k1x = p * inv_mass;
    let k1p = force(x);
    let k2x = (p + 0.5 * dt * k1p) * inv_mass;
    let k2p = force(x + 0.5 * dt * k1x);
    let k3x = (p + 0.5 * dt * k2p) * inv_mass;
    let k3p = force(x + 0.5 * dt * k2x);
    let k4x = (p + dt * k3p) * inv_mass;
    let k4p = force(x + dt * k3x);
    (
        x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
    )
}

/// Equations of motion in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSystem {
    pub omega: f64,
    pub mass: f64,
    /// Shot-noise heating rate, W.
    pub e_dot: f64,
    pub eta: f64,
    /// Physical scheme (`γ` in 1/s, `χ` in s/m²).
    pub scheme: Scheme,
    pub dt: f64,
}

impl PhysicalSystem {
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// `ħ / sqrt(8 η Ė dt m)`.
    pub fn measurement_sigma(&self) -> f64 {
        HBAR / (8.0 * self.eta * self.e_dot * self.dt * self.mass).sqrt()
    }

    /// `sqrt(2 Ė dt m)`.
    pub fn kick_sigma(&self) -> f64 {
        (2.0 * self.e_dot * self.dt * self.mass).sqrt()
    }

    pub fn a0(&self) -> f64 {
        (HBAR / (2.0 * self.mass * self.omega)).sqrt()
    }

    pub fn filter(&self, mu_over_period: f64) -> Result<FilterState, FilterError> {
        let period = self.period();
        FilterState::new(period, self.dt, mu_over_period * period)
    }

    /// State with occupation `n0` at oscillation phase `phase`.
    pub fn initial_state(&self, n0: f64, phase: f64, filter: FilterState) -> ScState {
        let energy = (n0 + 0.5) * HBAR * self.omega;
        let amplitude = (2.0 * energy / (self.mass * self.omega * self.omega)).sqrt();
        ScState {
            x: amplitude * phase.cos(),
            p: -self.mass * self.omega * amplitude * phase.sin(),
            t: 0.0,
            steps: 0,
            filter,
        }
    }

    /// `(p²/2m + m ω² x²/2) / ħω - 1/2`.
    pub fn occupation(&self, state: &ScState) -> f64 {
        let m = self.mass;
        let w = self.omega;
        let energy = state.p * state.p / (2.0 * m) + 0.5 * m * w * w * state.x * state.x;
        energy / (HBAR * w) - 0.5
    }

    /// One step with explicit noise; returns the control that was applied.
    pub fn step_with(
        &self,
        state: &mut ScState,
        noise: NoiseDraws,
    ) -> Result<ControlSignal, StepError> {
        let x_i = state.x + noise_term(noise.meas, self.measurement_sigma());
        state.filter.update(x_i);
        let ctrl = control(&state.filter, self.scheme, self.omega, self.mass);
        let stiffness = self.mass * self.omega * self.omega * ctrl.stiffness_factor();
        let drive = ctrl.force();
        let (x, p) = rk4(state.x, state.p, self.dt, 1.0 / self.mass, |x| {
            -stiffness * x + drive
        });
        state.x = x;
        state.p = p + noise_term(noise.kick, self.kick_sigma());
        state.steps += 1;
        state.t = state.steps as f64 * self.dt;
        check_finite(state)?;
        Ok(ctrl)
    }

    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &mut ScState,
        rng: &mut R,
    ) -> Result<ControlSignal, StepError> {
        self.step_with(state, NoiseDraws::draw(rng))
    }

    /// Map a physical state onto scaled coordinates.
    pub fn to_scaled(&self, state: &ScState) -> (f64, f64, f64) {
        let a0 = self.a0();
        (
            state.x / a0,
            state.p / (self.mass * self.omega * a0),
            state.t * self.omega,
        )
    }
}

/// Rescaled equations: `x'' = -x - γ p_m` or `x'' = -(1 + χ x_m p_m) x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledSystem {
    pub eta: f64,
    /// `2 Ė / (ħ ω²) = Δn / π`.
    pub e_dot_scaled: f64,
    /// Scaled scheme (`γ/ω` or `ħχ/(2m)`).
    pub scheme: Scheme,
    /// Step in units of `1/ω`.
    pub dt: f64,
}

impl ScaledSystem {
    /// System with `steps_per_period` steps per oscillation.
    pub fn new(eta: f64, delta_n: f64, scheme: Scheme, steps_per_period: usize) -> Self {
        Self {
            eta,
            e_dot_scaled: delta_n / PI,
            scheme,
            dt: 2.0 * PI / steps_per_period as f64,
        }
    }

    pub fn delta_n(&self) -> f64 {
        PI * self.e_dot_scaled
    }

    /// `sqrt(1 / (2 η Ẽ dt))`.
    pub fn measurement_sigma(&self) -> f64 {
        (1.0 / (2.0 * self.eta * self.e_dot_scaled * self.dt)).sqrt()
    }

    /// `sqrt(2 Ẽ dt)`.
    pub fn kick_sigma(&self) -> f64 {
        (2.0 * self.e_dot_scaled * self.dt).sqrt()
    }

    pub fn filter(&self, mu_over_period: f64) -> Result<FilterState, FilterError> {
        FilterState::new(2.0 * PI, self.dt, mu_over_period * 2.0 * PI)
    }

    pub fn initial_state(&self, n0: f64, phase: f64, filter: FilterState) -> ScState {
        let amplitude = (4.0 * (n0 + 0.5)).sqrt();
        ScState {
            x: amplitude * phase.cos(),
            p: -amplitude * phase.sin(),
            t: 0.0,
            steps: 0,
            filter,
        }
    }

    /// `(x² + p²)/4 - 1/2`.
    pub fn occupation(&self, state: &ScState) -> f64 {
        scaled_occupation(state.x, state.p)
    }

    pub fn step_with(
        &self,
        state: &mut ScState,
        noise: NoiseDraws,
    ) -> Result<ControlSignal, StepError> {
        let x_i = state.x + noise_term(noise.meas, self.measurement_sigma());
        state.filter.update(x_i);
        let ctrl = control(&state.filter, self.scheme, 1.0, 1.0);
        let stiffness = ctrl.stiffness_factor();
        let drive = ctrl.force();
        let (x, p) = rk4(state.x, state.p, self.dt, 1.0, |x| -stiffness * x + drive);
        state.x = x;
        state.p = p + noise_term(noise.kick, self.kick_sigma());
        state.steps += 1;
        state.t = state.steps as f64 * self.dt;
        check_finite(state)?;
        Ok(ctrl)
    }

    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &mut ScState,
        rng: &mut R,
    ) -> Result<ControlSignal, StepError> {
        self.step_with(state, NoiseDraws::draw(rng))
    }
}

/// Occupation from scaled coordinates.
#[inline]
pub fn scaled_occupation(x: f64, p: f64) -> f64 {
    0.25 * (x * x + p * p) - 0.5
}

/// `draw · sigma`, with a zero draw contributing nothing even when `sigma`
/// is unbounded (no shot noise means an uninformative record).
#[inline(always)]
fn noise_term(draw: f64, sigma: f64) -> f64 {
    if draw == 0.0 {
        0.0
    } else {
        draw * sigma
    }
}

fn check_finite(state: &ScState) -> Result<(), StepError> {
    if state.x.is_finite() && state.p.is_finite() {
        Ok(())
    } else {
        Err(StepError::NonFinite {
            t: state.t,
            x: state.x,
            p: state.p,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_trap, scale_params, unscale_scheme, Axis, LaserSpec, MaterialSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const MU: f64 = 0.05;

    fn physical(eta: f64, scheme_scaled: Scheme, e_dot_factor: f64) -> PhysicalSystem {
        let trap = derive_trap(&MaterialSpec::diamond(), &LaserSpec::reference()).unwrap();
        let ax = trap.x;
        PhysicalSystem {
            omega: ax.omega,
            mass: trap.mass(),
            e_dot: ax.e_dot * e_dot_factor,
            eta,
            scheme: unscale_scheme(scheme_scaled, ax.omega, trap.mass()),
            dt: ax.period() / 1000.0,
        }
    }

    #[test]
    fn occupation_definition() {
        let sys = physical(0.5, Scheme::None, 1.0);
        let f = sys.filter(MU).unwrap();
        let mut s = sys.initial_state(0.0, 0.0, f);
        s.x = 0.0;
        s.p = 0.0;
        assert_eq!(sys.occupation(&s), -0.5);
        s.x = sys.a0() * 2f64.sqrt();
        assert!(sys.occupation(&s).abs() < 1e-12);
        let s10 = sys.initial_state(10.0, PI / 2.0, s.filter.clone());
        assert!(s10.x.abs() < 1e-25);
        assert!((sys.occupation(&s10) - 10.0).abs() < 1e-12);
        assert!((scaled_occupation(2f64.sqrt(), 0.0)).abs() < 1e-15);
    }

    #[test]
    fn uncertainty_product() {
        for eta in [0.005, 0.1, 0.4, 1.0] {
            for spp in [200, 1000, 4000] {
                let mut sys = physical(eta, Scheme::None, 1.0);
                sys.dt = sys.period() / spp as f64;
                let prod = sys.measurement_sigma() * sys.kick_sigma();
                let expected = HBAR / (2.0 * eta.sqrt());
                assert!((prod / expected - 1.0).abs() < 1e-12);
                let sc = ScaledSystem::new(eta, 0.033, Scheme::None, spp);
                // Scaled ħ is 2 in these units: [x̃, p̃] = 2i.
                let prod = sc.measurement_sigma() * sc.kick_sigma();
                assert!((prod - 1.0 / eta.sqrt()).abs() < 1e-12);
            }
        }
    }

    fn energy_scaled(s: &ScState) -> f64 {
        s.x * s.x + s.p * s.p
    }

    #[test]
    fn free_oscillator_conserves_energy() {
        let sys = ScaledSystem::new(1.0, 0.0, Scheme::None, 1000);
        let mut s = sys.initial_state(10.0, 0.3, sys.filter(MU).unwrap());
        let e0 = energy_scaled(&s);
        for _ in 0..10_000 {
            sys.step_with(&mut s, NoiseDraws::zero()).unwrap();
        }
        // RK4 energy drift per period ~ (ω dt)^5 · 1000 steps.
        assert!((energy_scaled(&s) / e0 - 1.0).abs() < 1e-10);
    }

    /// Noiseless run with an ideal record (x_m = x) and force feedback.
    /// Returns the energy at the end of warm-up and after `periods` more periods.
    fn damped_energy(gamma: f64, periods: usize, spp: usize) -> (f64, f64) {
        let sys = ScaledSystem::new(1.0, 0.0, Scheme::Force { gamma }, spp);
        let filter = FilterState::ideal(2.0 * PI, sys.dt).unwrap();
        let mut s = sys.initial_state(10.0, 0.0, filter);
        for _ in 0..spp / 4 {
            sys.step_with(&mut s, NoiseDraws::zero()).unwrap();
        }
        let e0 = energy_scaled(&s);
        for _ in 0..periods * spp {
            sys.step_with(&mut s, NoiseDraws::zero()).unwrap();
        }
        (e0, energy_scaled(&s))
    }

    #[test]
    fn ideal_force_feedback_damps_energy() {
        let gamma = 0.01;
        let (e0, e) = damped_energy(gamma, 10, 1000);
        let analytic = (-gamma * 10.0 * 2.0 * PI).exp();
        assert!(
            (e / e0 / analytic - 1.0).abs() < 0.02,
            "{} vs {}",
            e / e0,
            analytic
        );
        // Sample-and-hold control is first order in dt; refining moves the ratio far less than the tolerance.
        let (e0f, ef) = damped_energy(gamma, 10, 4000);
        assert!(
            (e / e0 - ef / e0f).abs() < 2e-3,
            "{} vs {}",
            e / e0,
            ef / e0f
        );
    }

    #[test]
    fn rk4_is_fourth_order() {
        // Noiseless free oscillator; after whole periods it returns to its start.
        let run = |spp: usize| {
            let sys = ScaledSystem::new(1.0, 0.0, Scheme::None, spp);
            let mut s = sys.initial_state(3.0, 0.7, sys.filter(MU).unwrap());
            for _ in 0..spp * 3 {
                sys.step_with(&mut s, NoiseDraws::zero()).unwrap();
            }
            (s.x, s.p)
        };
        let exact = {
            let sys = ScaledSystem::new(1.0, 0.0, Scheme::None, 100);
            let s = sys.initial_state(3.0, 0.7, sys.filter(MU).unwrap());
            (s.x, s.p)
        };
        let err = |(x, p): (f64, f64)| ((x - exact.0).powi(2) + (p - exact.1).powi(2)).sqrt();
        let e1 = err(run(40));
        let e2 = err(run(80));
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn scaled_equals_physical_after_mapping() {
        let eta = 0.2;
        for scheme in [
            Scheme::Force { gamma: 0.01 },
            Scheme::Parametric { chi: 1e-3 },
            Scheme::None,
        ] {
            let phys = physical(eta, scheme, 1.0);
            let trap = derive_trap(&MaterialSpec::diamond(), &LaserSpec::reference()).unwrap();
            let sp = scale_params(&trap, Axis::X, phys.scheme);
            let sc = ScaledSystem::new(eta, sp.delta_n, sp.scheme, 1000);
            let mut ps = phys.initial_state(10.0, 1.1, phys.filter(MU).unwrap());
            let mut ss = sc.initial_state(10.0, 1.1, sc.filter(MU).unwrap());
            let mut r1 = ChaCha8Rng::seed_from_u64(7);
            let mut r2 = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..20_000 {
                phys.step(&mut ps, &mut r1).unwrap();
                sc.step(&mut ss, &mut r2).unwrap();
            }
            let (x, p, t) = phys.to_scaled(&ps);
            let norm = (ss.x.powi(2) + ss.p.powi(2)).sqrt();
            assert!(
                (x - ss.x).abs() < 1e-10 * norm,
                "{scheme:?} x {x} vs {}",
                ss.x
            );
            assert!((p - ss.p).abs() < 1e-10 * norm);
            assert!((t / ss.t - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nan_aborts() {
        let sys = ScaledSystem::new(0.5, 0.05, Scheme::None, 1000);
        let mut s = sys.initial_state(1.0, 0.0, sys.filter(MU).unwrap());
        s.x = f64::NAN;
        assert!(matches!(
            sys.step_with(&mut s, NoiseDraws::zero()),
            Err(StepError::NonFinite { .. })
        ));
    }
}
