//! Truncated number-basis states and their observables.
//!
//! Observables are in scaled units: `x̃ = a + a†` (so `x = a0 x̃`) and
//! `p̃ = i(a† - a)` (so `p = m ω a0 p̃`).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Levels at the top of the basis watched by the truncation guard.
pub const GUARD_LEVELS: usize = 8;
/// Maximum population allowed in the guard levels.
pub const GUARD_TOLERANCE: f64 = 1e-6;
/// Maximum coherent-state weight lost beyond the basis at construction.
pub const INITIAL_TAIL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error(
        "basis of {basis} levels truncates {tail:.3e} of the initial state (limit {limit:.0e})"
    )]
    InitialTruncation { basis: usize, tail: f64, limit: f64 },
    #[error("population {tail:.3e} reached the top {levels} of {basis} levels")]
    Truncation {
        basis: usize,
        levels: usize,
        tail: f64,
    },
    #[error("basis must hold more than {GUARD_LEVELS} levels (got {0})")]
    BasisTooSmall(usize),
    #[error("state became non-finite")]
    NonFinite,
    #[error("density matrix lost Hermiticity ({0:.3e})")]
    Hermiticity(f64),
    #[error("density matrix trace drifted to {0}")]
    Trace(f64),
}

/// Expectation values in scaled units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub x: f64,
    pub p: f64,
    pub n: f64,
    pub var_x: f64,
}

impl Observables {
    /// Convert position and momentum to SI given `a0`, mass and frequency.
    pub fn physical(&self, a0: f64, mass: f64, omega: f64) -> Observables {
        Observables {
            x: self.x * a0,
            p: self.p * mass * omega * a0,
            n: self.n,
            var_x: self.var_x * a0 * a0,
        }
    }
}

/// Pure state `Σ cₙ |n⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub amplitudes: Vec<Complex64>,
}

impl QuantumState {
    pub fn basis_size(&self) -> usize {
        self.amplitudes.len()
    }

    /// Number state `|k⟩`.
    pub fn number(k: usize, basis: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis];
        amplitudes[k] = Complex64::new(1.0, 0.0);
        Self { amplitudes }
    }

    /// Coherent state `|α⟩`, `α = sqrt(n0) e^{iφ}`, with its Poisson weights.
    pub fn coherent(n0: f64, phase: f64, basis: usize) -> Result<Self, StateError> {
        if basis <= GUARD_LEVELS {
            return Err(StateError::BasisTooSmall(basis));
        }
        let alpha = Complex64::from_polar(n0.max(0.0).sqrt(), phase);
        let mut amplitudes = Vec::with_capacity(basis);
        let mut c = Complex64::new((-0.5 * n0).exp(), 0.0);
        for k in 0..basis {
            amplitudes.push(c);
            c = c * alpha / ((k + 1) as f64).sqrt();
        }
        let kept: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        let tail = (1.0 - kept).max(0.0);
        if tail > INITIAL_TAIL_TOLERANCE {
            return Err(StateError::InitialTruncation {
                basis,
                tail,
                limit: INITIAL_TAIL_TOLERANCE,
            });
        }
        let mut state = Self { amplitudes };
        state.normalize();
        Ok(state)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> f64 {
        let norm = self.norm_sqr().sqrt();
        let inv = 1.0 / norm;
        self.amplitudes.iter_mut().for_each(|c| *c *= inv);
        norm
    }

    /// Population in the top [`GUARD_LEVELS`] levels.
    pub fn guard_population(&self) -> f64 {
        let n = self.basis_size();
        self.amplitudes[n - GUARD_LEVELS..]
            .iter()
            .map(|c| c.norm_sqr())
            .sum()
    }

    pub fn check_truncation(&self) -> Result<(), StateError> {
        let tail = self.guard_population();
        if !tail.is_finite() {
            return Err(StateError::NonFinite);
        }
        if tail >= GUARD_TOLERANCE {
            return Err(StateError::Truncation {
                basis: self.basis_size(),
                levels: GUARD_LEVELS,
                tail,
            });
        }
        Ok(())
    }

    /// `⟨a⟩`.
    pub fn mean_a(&self) -> Complex64 {
        let c = &self.amplitudes;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..c.len() - 1 {
            acc += c[k].conj() * c[k + 1] * ((k + 1) as f64).sqrt();
        }
        acc
    }

    /// `⟨x̃⟩ = 2 Re⟨a⟩`.
    pub fn mean_x(&self) -> f64 {
        2.0 * self.mean_a().re
    }

    pub fn mean_n(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(k, c)| k as f64 * c.norm_sqr())
            .sum()
    }

    pub fn observables(&self) -> Observables {
        let c = &self.amplitudes;
        let n = c.len();
        let a = self.mean_a();
        // ⟨a²⟩ for ⟨x̃²⟩ = ⟨a²⟩ + ⟨a†²⟩ + 2⟨n⟩ + 1.
        let mut a2 = Complex64::new(0.0, 0.0);
        for k in 0..n.saturating_sub(2) {
            a2 += c[k].conj() * c[k + 2] * (((k + 1) * (k + 2)) as f64).sqrt();
        }
        let num = self.mean_n();
        let x = 2.0 * a.re;
        let x2 = 2.0 * a2.re + 2.0 * num + 1.0;
        Observables {
            x,
            p: 2.0 * a.im,
            n: num,
            var_x: x2 - x * x,
        }
    }
}

/// Mixed state, row-major `N × N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub dim: usize,
    pub rho: Vec<Complex64>,
}

impl DensityState {
    pub fn pure(psi: &QuantumState) -> Self {
        let dim = psi.basis_size();
        let mut rho = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                rho[i * dim + j] = psi.amplitudes[i] * psi.amplitudes[j].conj();
            }
        }
        Self { dim, rho }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.rho[i * self.dim + j]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|k| self.at(k, k)).sum()
    }

    pub fn purity(&self) -> f64 {
        // tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ.
        self.rho.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest `|ρ_ij - ρ_ji*|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.at(i, j) - self.at(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn mean_x(&self) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.dim - 1 {
            acc += 2.0 * self.at(k + 1, k).re * ((k + 1) as f64).sqrt();
        }
        acc
    }

    pub fn guard_population(&self) -> f64 {
        (self.dim - GUARD_LEVELS..self.dim)
            .map(|k| self.at(k, k).re)
            .sum()
    }

    pub fn observables(&self) -> Observables {
        let d = self.dim;
        // ⟨a⟩ = tr(ρ a) = Σ ρ_{k+1,k} sqrt(k+1)
        let mut a = Complex64::new(0.0, 0.0);
        for k in 0..d - 1 {
            a += self.at(k + 1, k) * ((k + 1) as f64).sqrt();
        }
        let mut a2 = Complex64::new(0.0, 0.0);
        for k in 0..d.saturating_sub(2) {
            a2 += self.at(k + 2, k) * (((k + 1) * (k + 2)) as f64).sqrt();
        }
        let num: f64 = (0..d).map(|k| k as f64 * self.at(k, k).re).sum();
        let x = 2.0 * a.re;
        let x2 = 2.0 * a2.re + 2.0 * num + 1.0;
        Observables {
            x,
            p: 2.0 * a.im,
            n: num,
            var_x: x2 - x * x,
        }
    }

    /// Smallest eigenvalue, via Jacobi sweeps on the real 2N × 2N embedding.
    ///
    /// Intended for spot checks on small bases.
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim;
        let m = 2 * d;
        // [[Re, -Im], [Im, Re]] is real symmetric with each eigenvalue doubled.
        let mut a = vec![0.0; m * m];
        for i in 0..d {
            for j in 0..d {
                let z = self.at(i, j);
                a[i * m + j] = z.re;
                a[(i + d) * m + (j + d)] = z.re;
                a[i * m + (j + d)] = -z.im;
                a[(i + d) * m + j] = z.im;
            }
        }
        jacobi_eigenvalues(&mut a, m)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

fn jacobi_eigenvalues(a: &mut [f64], n: usize) -> Vec<f64> {
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}
