//! Banded Hamiltonians in the number basis and the Crank-Nicolson propagator.
//!
//! With `x = a0 (a + a†)` every Hamiltonian used here is real symmetric with
//! bandwidth at most 2: `x` couples `n ↔ n±1` and `x²` couples `n ↔ n, n±2`.
//! The Cayley form `(1 + iτH/2) ψ' = (1 - iτH/2) ψ` is then a complex
//! symmetric pentadiagonal system, solved by banded elimination in `O(N)`.
//! The Hermitian part of `1 + iτH/2` is the identity, so elimination without
//! pivoting never meets a small pivot.

use crate::feedback::ControlSignal;
use crate::params::HBAR;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("banded solve hit a degenerate pivot {pivot} at row {row}")]
    Pivot { row: usize, pivot: f64 },
    #[error("dimension mismatch: Hamiltonian has {expected} levels, state has {got}")]
    Dimension { expected: usize, got: usize },
}

/// Real symmetric matrix with bandwidth ≤ 2.
///
/// `off1[n] = ⟨n|H|n+1⟩`, `off2[n] = ⟨n|H|n+2⟩`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BandedHamiltonian {
    pub diag: Vec<f64>,
    pub off1: Vec<f64>,
    pub off2: Vec<f64>,
}

impl BandedHamiltonian {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off1: vec![0.0; n.saturating_sub(1)],
            off2: vec![0.0; n.saturating_sub(2)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `H0 + control` in units of `ħω` for scaled controls
    /// (`p_m` in `m ω a0`, strengths `γ/ω` and `ħχ/2m`).
    pub fn scaled(control: &ControlSignal, n: usize) -> Self {
        let mut h = Self::zeros(n);
        h.set_scaled(control);
        h
    }

    /// Rebuild in place; see [`BandedHamiltonian::scaled`].
    pub fn set_scaled(&mut self, control: &ControlSignal) {
        // H0 = n + 1/2, x̃ = a + a†, force term (γ̃/2) p̃_m x̃, parametric (m̃/4) x̃².
        let (force, parametric) = match *control {
            ControlSignal::None => (0.0, 0.0),
            ControlSignal::Force { p_m, gamma } => (0.5 * gamma * p_m, 0.0),
            ControlSignal::Parametric { mod_factor, .. } => (0.0, 0.25 * mod_factor),
        };
        self.fill(1.0, force, parametric);
    }

    /// `H0 + control` in joules for physical controls.
    pub fn physical(omega: f64, mass: f64, control: &ControlSignal, n: usize) -> Self {
        let a0 = (HBAR / (2.0 * mass * omega)).sqrt();
        let quantum = HBAR * omega;
        // γ p_m x = γ p_m a0 x̃; (mod/2) m ω² x² = (mod/2) m ω² a0² x̃².
        let (force, parametric) = match *control {
            ControlSignal::None => (0.0, 0.0),
            ControlSignal::Force { p_m, gamma } => (gamma * p_m * a0, 0.0),
            ControlSignal::Parametric { mod_factor, .. } => {
                (0.0, 0.5 * mod_factor * mass * omega * omega * a0 * a0)
            }
        };
        let mut h = Self::zeros(n);
        h.fill(quantum, force, parametric);
        h
    }

    /// `quantum (n + 1/2) + force x̃ + parametric x̃²`.
    fn fill(&mut self, quantum: f64, force: f64, parametric: f64) {
        let n = self.dim();
        for k in 0..n {
            let kf = k as f64;
            self.diag[k] = quantum * (kf + 0.5) + parametric * (2.0 * kf + 1.0);
        }
        for k in 0..n.saturating_sub(1) {
            self.off1[k] = force * ((k + 1) as f64).sqrt();
        }
        for k in 0..n.saturating_sub(2) {
            self.off2[k] = parametric * (((k + 1) * (k + 2)) as f64).sqrt();
        }
    }

    /// `out = H v`.
    pub fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        let n = self.dim();
        for k in 0..n {
            let mut acc = v[k] * self.diag[k];
            if k + 1 < n {
                acc += v[k + 1] * self.off1[k];
            }
            if k >= 1 {
                acc += v[k - 1] * self.off1[k - 1];
            }
            if k + 2 < n {
                acc += v[k + 2] * self.off2[k];
            }
            if k >= 2 {
                acc += v[k - 2] * self.off2[k - 2];
            }
            out[k] = acc;
        }
    }

    /// Element `⟨i|H|j⟩`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        match hi - lo {
            0 => self.diag[lo],
            1 => self.off1[lo],
            2 => self.off2[lo],
            _ => 0.0,
        }
    }
}

/// Scratch space for repeated Crank-Nicolson solves at a fixed dimension.
#[derive(Debug, Clone)]
pub struct CnWorkspace {
    d: Vec<Complex64>,
    u1: Vec<Complex64>,
    u2: Vec<Complex64>,
    l1: Vec<Complex64>,
    rhs: Vec<Complex64>,
}

impl CnWorkspace {
    pub fn new(n: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            d: vec![z; n],
            u1: vec![z; n],
            u2: vec![z; n],
            l1: vec![z; n],
            rhs: vec![z; n],
        }
    }
}

/// One Crank-Nicolson step, `ψ ← (1 + iτH/2)⁻¹ (1 - iτH/2) ψ`.
///
/// `tau` is the time step divided by ħ in the units of `h`: `dt / ħ` for
/// joules, `ω dt` for `ħω` units.
pub fn cn_step(
    psi: &mut [Complex64],
    h: &BandedHamiltonian,
    tau: f64,
    ws: &mut CnWorkspace,
) -> Result<(), SolveError> {
    let n = h.dim();
    if psi.len() != n {
        return Err(SolveError::Dimension {
            expected: n,
            got: psi.len(),
        });
    }
    if ws.d.len() != n {
        *ws = CnWorkspace::new(n);
    }
    let half = Complex64::new(0.0, 0.5 * tau);

    // rhs = (1 - iτH/2) ψ, computed before ψ is overwritten.
    for k in 0..n {
        let mut hv = psi[k] * h.diag[k];
        if k + 1 < n {
            hv += psi[k + 1] * h.off1[k];
        }
        if k >= 1 {
            hv += psi[k - 1] * h.off1[k - 1];
        }
        if k + 2 < n {
            hv += psi[k + 2] * h.off2[k];
        }
        if k >= 2 {
            hv += psi[k - 2] * h.off2[k - 2];
        }
        ws.rhs[k] = psi[k] - half * hv;
    }

    // Band of A = 1 + iτH/2. Row k: l2 (k-2), l1 (k-1), d, u1 (k+1), u2 (k+2).
    // A is symmetric, so the original l1[k] = u1[k-1] and l2[k] = u2[k-2].
    for k in 0..n {
        ws.d[k] = Complex64::new(1.0, 0.0) + half * h.diag[k];
        ws.u1[k] = if k + 1 < n {
            half * h.off1[k]
        } else {
            Complex64::new(0.0, 0.0)
        };
        ws.u2[k] = if k + 2 < n {
            half * h.off2[k]
        } else {
            Complex64::new(0.0, 0.0)
        };
        ws.l1[k] = if k >= 1 {
            half * h.off1[k - 1]
        } else {
            Complex64::new(0.0, 0.0)
        };
    }

    for k in 0..n {
        let pivot = ws.d[k];
        let mag = pivot.norm();
        if !(mag.is_finite() && mag > 1e-300) {
            return Err(SolveError::Pivot { row: k, pivot: mag });
        }
        let inv = pivot.inv();
        if k + 1 < n {
            let f = ws.l1[k + 1] * inv;
            ws.d[k + 1] -= f * ws.u1[k];
            ws.u1[k + 1] -= f * ws.u2[k];
            ws.rhs[k + 1] = ws.rhs[k + 1] - f * ws.rhs[k];
        }
        if k + 2 < n {
            // Row k+2 has its (k+2, k) entry untouched by earlier rows.
            let f = ws.u2[k] * inv;
            ws.l1[k + 2] -= f * ws.u1[k];
            ws.d[k + 2] -= f * ws.u2[k];
            ws.rhs[k + 2] = ws.rhs[k + 2] - f * ws.rhs[k];
        }
        ws.d[k] = inv;
    }

    for k in (0..n).rev() {
        let mut acc = ws.rhs[k];
        if k + 1 < n {
            acc -= ws.u1[k] * psi[k + 1];
        }
        if k + 2 < n {
            acc -= ws.u2[k] * psi[k + 2];
        }
        psi[k] = acc * ws.d[k];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(v: &[Complex64]) -> f64 {
        v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    fn dense(h: &BandedHamiltonian) -> Vec<Vec<f64>> {
        let n = h.dim();
        (0..n)
            .map(|i| (0..n).map(|j| h.get(i, j)).collect())
            .collect()
    }

    #[test]
    fn zero_control_is_number_diagonal() {
        let h = BandedHamiltonian::scaled(&ControlSignal::None, 16);
        for k in 0..16 {
            assert_eq!(h.diag[k], k as f64 + 0.5);
        }
        assert!(h.off1.iter().chain(&h.off2).all(|v| *v == 0.0));
        let omega = 2.0 * std::f64::consts::PI * 454e3;
        let hp = BandedHamiltonian::physical(omega, 1.79e-18, &ControlSignal::None, 8);
        assert!((hp.diag[3] / (HBAR * omega * 3.5) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn force_matrix_element() {
        let (omega, mass) = (2.0e6, 1.79e-18);
        let a0 = (HBAR / (2.0 * mass * omega)).sqrt();
        let ctrl = ControlSignal::Force {
            p_m: 3e-22,
            gamma: 5e3,
        };
        let h = BandedHamiltonian::physical(omega, mass, &ctrl, 10);
        assert!((h.get(0, 1) / (5e3 * 3e-22 * a0) - 1.0).abs() < 1e-14);
        assert!((h.get(4, 3) / (5e3 * 3e-22 * a0 * 2.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn parametric_diagonal_has_x_squared() {
        let (omega, mass) = (2.0e6, 1.79e-18);
        let a0 = (HBAR / (2.0 * mass * omega)).sqrt();
        let m = 0.2;
        let ctrl = ControlSignal::Parametric {
            mod_factor: m,
            chi: 1.0,
        };
        let h = BandedHamiltonian::physical(omega, mass, &ctrl, 10);
        let coeff = 0.5 * m * mass * omega * omega;
        for k in 0..10 {
            let x2 = a0 * a0 * (2.0 * k as f64 + 1.0);
            let expected = HBAR * omega * (k as f64 + 0.5) + coeff * x2;
            assert!((h.diag[k] / expected - 1.0).abs() < 1e-13);
        }
        assert!(h.off1.iter().all(|v| *v == 0.0));
        assert!((h.get(2, 4) / (coeff * a0 * a0 * 12f64.sqrt()) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn scaled_and_physical_agree_in_quanta() {
        let (omega, mass) = (3.0e6, 1.13e-18);
        let a0 = (HBAR / (2.0 * mass * omega)).sqrt();
        // scaled p̃ = p / (m ω a0), γ̃ = γ/ω
        let (p_m, gamma) = (2e-21, 4e4);
        let phys =
            BandedHamiltonian::physical(omega, mass, &ControlSignal::Force { p_m, gamma }, 12);
        let sc = BandedHamiltonian::scaled(
            &ControlSignal::Force {
                p_m: p_m / (mass * omega * a0),
                gamma: gamma / omega,
            },
            12,
        );
        for (a, b) in phys.off1.iter().zip(&sc.off1) {
            assert!((a / (HBAR * omega) / b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn free_phases_match_exact_propagator() {
        let n = 32;
        let h = BandedHamiltonian::scaled(&ControlSignal::None, n);
        let tau = 1e-3;
        let mut psi: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new(1.0 / (1.0 + k as f64), 0.0))
            .collect();
        let start = psi.clone();
        let mut ws = CnWorkspace::new(n);
        cn_step(&mut psi, &h, tau, &mut ws).unwrap();
        for k in 0..n {
            let e = k as f64 + 0.5;
            let exact = start[k] * Complex64::from_polar(1.0, -e * tau);
            // Cayley phase error: (e τ)³ / 12.
            let bound = (e * tau).powi(3) / 12.0 * start[k].norm() * 1.01 + 1e-16;
            assert!((psi[k] - exact).norm() <= bound, "level {k}");
        }
    }

    #[test]
    fn matches_dense_reference_solve() {
        // Compare against explicit (1 - iτH/2)ψ after multiplying back by (1 + iτH/2).
        let n = 20;
        let mut h = BandedHamiltonian::scaled(
            &ControlSignal::Parametric {
                mod_factor: 0.3,
                chi: 1.0,
            },
            n,
        );
        for k in 0..n - 1 {
            h.off1[k] = 0.1 * (k as f64 + 1.0).sqrt();
        }
        let tau = 0.05;
        let psi0: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.3).cos()))
            .collect();
        let mut psi = psi0.clone();
        cn_step(&mut psi, &h, tau, &mut CnWorkspace::new(n)).unwrap();
        let m = dense(&h);
        let half = Complex64::new(0.0, 0.5 * tau);
        for i in 0..n {
            let mut lhs = psi[i];
            let mut rhs = psi0[i];
            for j in 0..n {
                lhs += half * m[i][j] * psi[j];
                rhs -= half * m[i][j] * psi0[j];
            }
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn number_invariant_under_free_evolution() {
        let n = 64;
        let h = BandedHamiltonian::scaled(&ControlSignal::None, n);
        let mut psi: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new((-(k as f64)).exp(), 0.1 * k as f64))
            .collect();
        let s = norm(&psi);
        psi.iter_mut().for_each(|c| *c /= s);
        let number = |v: &[Complex64]| {
            v.iter()
                .enumerate()
                .map(|(k, c)| k as f64 * c.norm_sqr())
                .sum::<f64>()
        };
        let n0 = number(&psi);
        let mut ws = CnWorkspace::new(n);
        for _ in 0..1000 {
            cn_step(&mut psi, &h, 2e-3, &mut ws).unwrap();
        }
        assert!((number(&psi) - n0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let h = BandedHamiltonian::zeros(4);
        let mut psi = vec![Complex64::new(1.0, 0.0); 3];
        assert!(matches!(
            cn_step(&mut psi, &h, 0.1, &mut CnWorkspace::new(4)),
            Err(SolveError::Dimension { .. })
        ));
    }

    proptest! {
        #[test]
        fn cayley_step_preserves_norm(
            n in 3usize..80,
            force in -5.0f64..5.0,
            para in -0.5f64..0.5,
            tau in 1e-4f64..0.1,
            seed in 0u64..10_000,
        ) {
            let mut h = BandedHamiltonian::zeros(n);
            h.fill(1.0, force, para);
            let mut psi: Vec<Complex64> = (0..n)
                .map(|k| {
                    let a = ((k as u64 * 2654435761 + seed) % 1000) as f64 / 1000.0 - 0.5;
                    let b = ((k as u64 * 40503 + seed * 7) % 1000) as f64 / 1000.0 - 0.5;
                    Complex64::new(a, b)
                })
                .collect();
            let s = norm(&psi);
            prop_assume!(s > 0.0);
            psi.iter_mut().for_each(|c| *c /= s);
            let mut ws = CnWorkspace::new(n);
            cn_step(&mut psi, &h, tau, &mut ws).unwrap();
            prop_assert!((norm(&psi) - 1.0).abs() < 1e-12);
        }
    }
}
