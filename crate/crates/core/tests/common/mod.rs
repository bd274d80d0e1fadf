//! Numerical hygiene checks shared by the property tests and the acceptance run.
#![allow(dead_code)]

use levicool::feedback::{ControlSignal, FilterState};
use levicool::params::Scheme;
use levicool::quantum::sme::{HERMITICITY_TOLERANCE, TRACE_TOLERANCE};
use levicool::quantum::{
    cn_step, sme_step, BandedHamiltonian, CnWorkspace, DensityState, MeasurementParams,
    QuantumState, SmeWorkspace, SseTrajectory,
};
use levicool::semiclassical::{NoiseDraws, ScaledSystem};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

pub fn random_state(n: usize, seed: u64) -> QuantumState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Weight concentrated well below the guard levels.
    let amps: Vec<Complex64> = (0..n)
        .map(|k| {
            let w = (-(k as f64) / 3.0).exp();
            Complex64::new(
                rng.sample::<f64, _>(StandardNormal) * w,
                rng.sample::<f64, _>(StandardNormal) * w,
            )
        })
        .collect();
    let mut s = QuantumState { amplitudes: amps };
    s.normalize();
    s
}

#[derive(Debug, Clone)]
pub struct CnCase {
    pub n: usize,
    pub control: ControlSignal,
    pub spp: usize,
    pub seed: u64,
}

pub fn cn_case() -> impl Strategy<Value = CnCase> {
    (
        10usize..160,
        -20.0f64..20.0,
        0.0f64..0.5,
        -0.5f64..0.5,
        any::<bool>(),
        50usize..5000,
        any::<u64>(),
    )
        .prop_map(
            |(n, p_m, gamma, mod_factor, parametric, spp, seed)| CnCase {
                n,
                control: if parametric {
                    ControlSignal::Parametric {
                        mod_factor,
                        chi: 0.01,
                    }
                } else {
                    ControlSignal::Force { p_m, gamma }
                },
                spp,
                seed,
            },
        )
}

/// Each Crank-Nicolson step keeps the norm to 1e-12.
pub fn check_cn_norm(c: &CnCase) -> Result<(), TestCaseError> {
    let h = BandedHamiltonian::scaled(&c.control, c.n);
    let mut psi = random_state(c.n, c.seed).amplitudes;
    let mut ws = CnWorkspace::new(c.n);
    for _ in 0..20 {
        cn_step(&mut psi, &h, 2.0 * PI / c.spp as f64, &mut ws).unwrap();
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-12, "norm {}", norm);
        psi.iter_mut().for_each(|c| *c /= norm);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SmeCase {
    pub eta: f64,
    pub delta_n: f64,
    pub p_m: f64,
    pub gamma: f64,
    pub n0: f64,
    pub seed: u64,
}

pub fn sme_case() -> impl Strategy<Value = SmeCase> {
    (
        0.01f64..=1.0,
        0.0f64..0.3,
        -3.0f64..3.0,
        0.0f64..0.2,
        0.0f64..2.0,
        any::<u64>(),
    )
        .prop_map(|(eta, delta_n, p_m, gamma, n0, seed)| SmeCase {
            eta,
            delta_n,
            p_m,
            gamma,
            n0,
            seed,
        })
}

/// Every SME step leaves a Hermitian, unit-trace density matrix.
pub fn check_sme_step(c: &SmeCase) -> Result<(), TestCaseError> {
    let d = 28;
    let params = MeasurementParams::new(c.eta, c.delta_n, 1000);
    let h = BandedHamiltonian::scaled(
        &ControlSignal::Force {
            p_m: c.p_m,
            gamma: c.gamma,
        },
        d,
    );
    let mut rho = DensityState::pure(&QuantumState::coherent(c.n0, 1.0, d).unwrap());
    let mut ws = SmeWorkspace::new(d);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    for _ in 0..200 {
        sme_step(&mut rho, &h, &params, rng.sample(StandardNormal), &mut ws).unwrap();
        prop_assert!(rho.hermiticity_error() <= HERMITICITY_TOLERANCE);
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(rho.trace().im.abs() < TRACE_TOLERANCE);
    }
    Ok(())
}

pub fn rk4_case() -> impl Strategy<Value = (f64, f64, usize)> {
    (
        0.0f64..50.0,
        0.0f64..(2.0 * PI),
        (6usize..15).prop_map(|q| 4 * q),
    )
}

/// Halving the step of a noiseless run cuts the endpoint error sixteenfold.
pub fn check_rk4_order(&(n0, phase, spp): &(f64, f64, usize)) -> Result<(), TestCaseError> {
    let start = {
        let sys = ScaledSystem::new(1.0, 0.0, Scheme::None, spp);
        let s = sys.initial_state(n0, phase, sys.filter(0.05).unwrap());
        (s.x, s.p)
    };
    let endpoint = |spp: usize| {
        let sys = ScaledSystem::new(1.0, 0.0, Scheme::None, spp);
        let mut s = sys.initial_state(n0, phase, sys.filter(0.05).unwrap());
        for _ in 0..2 * spp {
            sys.step_with(&mut s, NoiseDraws::zero()).unwrap();
        }
        (s.x, s.p)
    };
    // Two whole periods bring the free oscillator back to its start.
    let err = |(x, p): (f64, f64)| ((x - start.0).powi(2) + (p - start.1).powi(2)).sqrt();
    let ratio = err(endpoint(spp)) / err(endpoint(2 * spp));
    prop_assert!((ratio - 16.0).abs() < 1.5, "ratio {}", ratio);
    Ok(())
}

pub fn basis_case() -> impl Strategy<Value = (f64, f64, f64, u64)> {
    (0.1f64..=1.0, 0.0f64..0.1, 0.0f64..3.0, any::<u64>())
}

/// Doubling the basis leaves a measured, fed-back trajectory unchanged.
pub fn check_basis_doubling(
    &(eta, gamma, n0, seed): &(f64, f64, f64, u64),
) -> Result<(), TestCaseError> {
    let spp = 500;
    let params = MeasurementParams::new(eta, 0.05, spp);
    let run = |n: usize| -> Result<Vec<f64>, TestCaseError> {
        let filter = FilterState::new(2.0 * PI, params.dt, 0.1 * PI).unwrap();
        let psi = QuantumState::coherent(n0, 0.2, n).unwrap();
        let mut traj = SseTrajectory::new(params, Scheme::Force { gamma }, filter, psi);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..3 * spp)
            .map(|_| {
                traj.step_with(rng.sample(StandardNormal), rng.sample(StandardNormal))
                    .map_err(|e| TestCaseError::fail(format!("basis {n}: {e}")))?;
                Ok(traj.occupation())
            })
            .collect()
    };
    for (a, b) in run(40)?.iter().zip(&run(80)?) {
        prop_assert!((a - b).abs() < 1e-8 * (1.0 + b), "{} vs {}", a, b);
    }
    Ok(())
}
