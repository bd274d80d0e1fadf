//! Measurement filtering and feedback control.
//!
//! The raw record `x_i` is smoothed by an exponential moving average with
//! time constant `μ`. The velocity is estimated from the filtered position a
//! quarter period earlier, `ẋ_m(t) ≈ -ω x_m(t - T/4)`, which is exact for
//! harmonic motion. The two schemes then act as
//!
//! * force: a drag `-γ p_m` with `p_m = m ẋ_m`,
//! * parametric: the trap stiffness `m ω²` multiplied by `1 + χ x_m ẋ_m`.

use crate::params::Scheme;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("filter time constant must satisfy 0 < mu < T (mu = {mu}, T = {period})")]
    TimeConstant { mu: f64, period: f64 },
    #[error("time step {dt} must be positive and finite")]
    TimeStep { dt: f64 },
    #[error("time step {dt} does not divide the quarter period {quarter} within 1% (nearest count {count})")]
    QuarterPeriod { dt: f64, quarter: f64, count: usize },
}

/// Exponential filter plus a quarter-period delay line of filtered samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterState {
    ema: f64,
    mu: f64,
    decay: f64,
    delay_line: Vec<f64>,
    head: usize,
    pushed: u64,
    delayed: f64,
}

impl FilterState {
    /// Filter for a step `dt` on an oscillator of period `period`.
    ///
    /// `dt` must divide `period / 4` to within 1% of a step count.
    pub fn new(period: f64, dt: f64, mu: f64) -> Result<Self, FilterError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(FilterError::TimeStep { dt });
        }
        if !(mu.is_finite() && mu > 0.0 && mu < period) {
            return Err(FilterError::TimeConstant { mu, period });
        }
        let quarter = period / 4.0;
        let count = (quarter / dt).round() as usize;
        if count == 0 || ((count as f64) * dt - quarter).abs() > 0.01 * quarter {
            return Err(FilterError::QuarterPeriod { dt, quarter, count });
        }
        Ok(Self {
            ema: 0.0,
            mu,
            decay: (-dt / mu).exp(),
            delay_line: vec![0.0; count],
            head: 0,
            pushed: 0,
            delayed: 0.0,
        })
    }

    /// Pass-through filter (`x_m = x_i`) with the same quarter-period delay.
    ///
    /// This is the perfect-measurement limit of the estimator.
    pub fn ideal(period: f64, dt: f64) -> Result<Self, FilterError> {
        let mut f = Self::new(period, dt, period / 20.0)?;
        f.mu = 0.0;
        f.decay = 0.0;
        Ok(f)
    }

    /// Push one raw measurement and return the updated estimate `x_m`.
    ///
    /// Uses the exact exponential update, `ema ← e^{-dt/μ} ema + (1 - e^{-dt/μ}) x_i`.
    pub fn update(&mut self, x_i: f64) -> f64 {
        self.ema = self.decay * self.ema + (1.0 - self.decay) * x_i;
        // The slot under `head` was written exactly `samples_per_quarter` pushes ago.
        self.delayed = if self.pushed >= self.delay_line.len() as u64 {
            self.delay_line[self.head]
        } else {
            0.0
        };
        self.delay_line[self.head] = self.ema;
        self.head = (self.head + 1) % self.delay_line.len();
        self.pushed += 1;
        self.ema
    }

    /// Current filtered position.
    pub fn position(&self) -> f64 {
        self.ema
    }

    /// Filtered position one quarter period ago, or 0 during warm-up.
    pub fn delayed_position(&self) -> f64 {
        self.delayed
    }

    /// True once a full quarter period of samples precedes the latest push.
    pub fn is_warm(&self) -> bool {
        self.pushed > self.delay_line.len() as u64
    }

    /// `ẋ_m ≈ -ω x_m(t - T/4)`; zero during warm-up.
    pub fn velocity_estimate(&self, omega: f64) -> f64 {
        -omega * self.delayed
    }

    pub fn samples_per_quarter(&self) -> usize {
        self.delay_line.len()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn decay_per_step(&self) -> f64 {
        self.decay
    }
}

/// Control to apply over the next step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ControlSignal {
    None,
    /// Feedback momentum `p_m = m ẋ_m` and strength `γ`.
    Force {
        p_m: f64,
        gamma: f64,
    },
    /// `mod_factor = χ x_m ẋ_m`, strength `χ`.
    Parametric {
        mod_factor: f64,
        chi: f64,
    },
}

impl ControlSignal {
    /// Force on the particle, `-γ p_m` for force feedback and 0 otherwise.
    pub fn force(&self) -> f64 {
        match *self {
            ControlSignal::Force { p_m, gamma } => -gamma * p_m,
            _ => 0.0,
        }
    }

    /// Multiplier on the trap stiffness, `1 + χ x_m ẋ_m` for parametric and 1 otherwise.
    pub fn stiffness_factor(&self) -> f64 {
        match *self {
            ControlSignal::Parametric { mod_factor, .. } => 1.0 + mod_factor,
            _ => 1.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            ControlSignal::None => true,
            ControlSignal::Force { p_m, gamma } => p_m.is_finite() && gamma.is_finite(),
            ControlSignal::Parametric { mod_factor, chi } => {
                mod_factor.is_finite() && chi.is_finite()
            }
        }
    }
}

/// Control signal from the filter state. Zero until the delay line is full.
pub fn control(filter: &FilterState, scheme: Scheme, omega: f64, mass: f64) -> ControlSignal {
    let warm = filter.is_warm();
    match scheme {
        Scheme::None => ControlSignal::None,
        Scheme::Force { gamma } => ControlSignal::Force {
            p_m: if warm {
                mass * filter.velocity_estimate(omega)
            } else {
                0.0
            },
            gamma,
        },
        Scheme::Parametric { chi } => ControlSignal::Parametric {
            mod_factor: if warm {
                chi * filter.position() * filter.velocity_estimate(omega)
            } else {
                0.0
            },
            chi,
        },
    }
}
