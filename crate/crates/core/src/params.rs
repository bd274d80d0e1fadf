//! Trap parameters derived from material and laser specifications.
//!
//! A dielectric sphere sits at the focus of a Gaussian beam polarized along
//! `z` and propagating along `y`. Everything the simulators need (trap
//! frequencies, shot-noise heating, localization rate, heating per period)
//! follows from the particle's dielectric constant, radius and mass plus the
//! laser wavelength, power and numerical aperture.
//!
//! Field conventions:
//! * peak intensity `I0 = 2P / (π w0²)`
//! * focal field `E0 = sqrt(2 I0 / (c ε0))`
//! * photon flux density `J_p = I0 / (ħ c k0)`

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Reduced Planck constant, J·s (CODATA 2018).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s (exact).
pub const C: f64 = 299_792_458.0;
/// Vacuum permittivity, F/m (CODATA 2018).
pub const EPS0: f64 = 8.854_187_812_8e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("relative dielectric constant must exceed 1 (got {0})")]
    Dielectric(f64),
    #[error("{name} must be finite and positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("numerical aperture must lie in (0, 1] (got {0})")]
    NumericalAperture(f64),
}

fn positive(name: &'static str, value: f64) -> Result<f64, ParamsError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ParamsError::NonPositive { name, value })
    }
}

/// Dielectric sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    /// Relative dielectric constant.
    pub epsilon: f64,
    /// Radius in m.
    pub radius: f64,
    /// Mass in kg.
    pub mass: f64,
}

impl MaterialSpec {
    pub fn new(epsilon: f64, radius: f64, mass: f64) -> Result<Self, ParamsError> {
        let spec = Self {
            epsilon,
            radius,
            mass,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Mass from a density in kg/m³ and the sphere volume.
    pub fn from_density(epsilon: f64, radius: f64, density: f64) -> Result<Self, ParamsError> {
        positive("density", density)?;
        Self::new(epsilon, radius, density * 4.0 / 3.0 * PI * radius.powi(3))
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if !(self.epsilon.is_finite() && self.epsilon > 1.0) {
            return Err(ParamsError::Dielectric(self.epsilon));
        }
        positive("radius", self.radius)?;
        positive("mass", self.mass)?;
        Ok(())
    }

    /// Diamond sphere used throughout the reference calculations.
    pub fn diamond() -> Self {
        Self {
            epsilon: 5.7,
            radius: 50e-9,
            mass: 1.79e-18,
        }
    }

    /// Fused silica sphere used throughout the reference calculations.
    pub fn silica() -> Self {
        Self {
            epsilon: 2.1,
            radius: 50e-9,
            mass: 1.13e-18,
        }
    }

    /// Clausius-Mossotti factor `(ε - 1) / (ε + 2)`.
    pub fn clausius_mossotti(&self) -> f64 {
        (self.epsilon - 1.0) / (self.epsilon + 2.0)
    }

    /// Polarizability `4π ε0 R³ (ε - 1)/(ε + 2)` in C·m²/V.
    pub fn polarizability(&self) -> f64 {
        4.0 * PI * EPS0 * self.radius.powi(3) * self.clausius_mossotti()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserSpec {
    /// Wavelength in m.
    pub wavelength: f64,
    /// Power in W.
    pub power: f64,
    pub numerical_aperture: f64,
}

impl LaserSpec {
    pub fn new(wavelength: f64, power: f64, numerical_aperture: f64) -> Result<Self, ParamsError> {
        let spec = Self {
            wavelength,
            power,
            numerical_aperture,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        positive("wavelength", self.wavelength)?;
        positive("power", self.power)?;
        let na = self.numerical_aperture;
        if !(na.is_finite() && na > 0.0 && na <= 1.0) {
            return Err(ParamsError::NumericalAperture(na));
        }
        Ok(())
    }

    /// 1064 nm, 70 mW, NA = 0.9.
    pub fn reference() -> Self {
        Self {
            wavelength: 1064e-9,
            power: 70e-3,
            numerical_aperture: 0.9,
        }
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Beam waist `λ / (π NA)`.
    pub fn waist(&self) -> f64 {
        self.wavelength / (PI * self.numerical_aperture)
    }

    pub fn peak_intensity(&self) -> f64 {
        2.0 * self.power / (PI * self.waist().powi(2))
    }
}

/// Oscillation axis. The beam propagates along `y` and is polarized along `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// Share of the dipole-scattered recoil that lands on this axis.
    pub fn zeta(self) -> f64 {
        match self {
            Axis::X | Axis::Y => 2.0 / 5.0,
            Axis::Z => 1.0 / 5.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// Per-axis quantities, all SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisParams {
    /// Angular trap frequency, rad/s.
    pub omega: f64,
    /// Shot-noise heating rate, W.
    pub e_dot: f64,
    /// Localization rate `Ė m / ħ²`, m⁻²·s⁻¹.
    pub kappa: f64,
    /// Quanta gained per oscillation period, `2π Ė / (ħ ω²)`.
    pub delta_n: f64,
    /// Ground-state length `sqrt(ħ / (2 m ω))`, m.
    pub a0: f64,
}

impl AxisParams {
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapDerivation {
    pub material: MaterialSpec,
    pub laser: LaserSpec,
    pub alpha: f64,
    pub w0: f64,
    pub y0: f64,
    pub e0: f64,
    pub photon_flux: f64,
    pub x: AxisParams,
    pub y: AxisParams,
    pub z: AxisParams,
}

impl TrapDerivation {
    pub fn axis(&self, axis: Axis) -> &AxisParams {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }

    pub fn mass(&self) -> f64 {
        self.material.mass
    }

    /// Power-independent form `ζ (π/3) ((ε-1)/(ε+2)) R³ L² k0⁵`, with
    /// `L² = w0²` on the transverse axes and `2 y0²` along the beam.
    ///
    /// Agrees with [`delta_n`] algebraically; the laser power cancels so
    /// this route is bit-identical across powers.
    pub fn delta_n_closed_form(&self, axis: Axis) -> f64 {
        let k0 = self.laser.wavenumber();
        let length_sq = match axis {
            Axis::X | Axis::Z => self.w0 * self.w0,
            Axis::Y => 2.0 * self.y0 * self.y0,
        };
        axis.zeta() * PI / 3.0
            * self.material.clausius_mossotti()
            * self.material.radius.powi(3)
            * length_sq
            * k0.powi(5)
    }
}

/// Derive every trap quantity from the material and laser.
pub fn derive_trap(
    material: &MaterialSpec,
    laser: &LaserSpec,
) -> Result<TrapDerivation, ParamsError> {
    material.validate()?;
    laser.validate()?;

    let m = material.mass;
    let alpha = material.polarizability();
    let w0 = laser.waist();
    let y0 = PI * w0 * w0 / laser.wavelength;
    let i0 = laser.peak_intensity();
    let e0 = (2.0 * i0 / (C * EPS0)).sqrt();
    let k0 = laser.wavenumber();
    let photon_flux = i0 / (HBAR * C * k0);

    let omega_xz = (alpha / m).sqrt() * e0 / w0;
    let omega_y = (alpha / (2.0 * m)).sqrt() * e0 / y0;

    let scattering = 8.0 * PI * photon_flux / 3.0
        * (k0 * k0 * alpha / (4.0 * PI * EPS0)).powi(2)
        * HBAR
        * HBAR
        * k0
        * k0
        / (2.0 * m);

    let per_axis = |axis: Axis, omega: f64| {
        let e_dot = axis.zeta() * scattering;
        AxisParams {
            omega,
            e_dot,
            kappa: e_dot * m / (HBAR * HBAR),
            delta_n: 2.0 * PI * e_dot / (HBAR * omega * omega),
            a0: (HBAR / (2.0 * m * omega)).sqrt(),
        }
    };

    Ok(TrapDerivation {
        material: *material,
        laser: *laser,
        alpha,
        w0,
        y0,
        e0,
        photon_flux,
        x: per_axis(Axis::X, omega_xz),
        y: per_axis(Axis::Y, omega_y),
        z: per_axis(Axis::Z, omega_xz),
    })
}

/// Shot-noise heating rate on `axis`, in W.
pub fn shot_noise_rate(trap: &TrapDerivation, axis: Axis) -> f64 {
    trap.axis(axis).e_dot
}

/// Heating quanta per oscillation period on `axis`.
pub fn delta_n(trap: &TrapDerivation, axis: Axis) -> f64 {
    trap.axis(axis).delta_n
}

/// Feedback scheme with its strength, in physical or scaled units depending on context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scheme {
    None,
    /// Force feedback with strength `γ` (1/s), or `γ/ω` when scaled.
    Force {
        gamma: f64,
    },
    /// Parametric feedback with strength `χ` (s/m²), or `ħχ/(2m)` when scaled.
    Parametric {
        chi: f64,
    },
}

impl Scheme {
    pub fn strength(&self) -> f64 {
        match *self {
            Scheme::None => 0.0,
            Scheme::Force { gamma } => gamma,
            Scheme::Parametric { chi } => chi,
        }
    }

    /// Same scheme kind with a different strength; `None` stays `None`.
    pub fn with_strength(&self, strength: f64) -> Scheme {
        match self {
            Scheme::None => Scheme::None,
            Scheme::Force { .. } => Scheme::Force { gamma: strength },
            Scheme::Parametric { .. } => Scheme::Parametric { chi: strength },
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Scheme::None => "none",
            Scheme::Force { .. } => "force",
            Scheme::Parametric { .. } => "parametric",
        }
    }
}

/// Dimensionless parameters of the rescaled equations of motion, plus the
/// physical units needed to map back.
///
/// Lengths are in units of `a0`, momenta in `m ω a0`, time in `1/ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub omega: f64,
    pub mass: f64,
    pub a0: f64,
    /// `2Ė / (ħ ω²)`.
    pub e_dot_scaled: f64,
    pub delta_n: f64,
    /// Scaled scheme: `γ/ω` for force, `ħχ/(2m)` for parametric.
    pub scheme: Scheme,
}

impl ScaledParams {
    /// Scaled parameters from `Δn` alone; physical units set to 1.
    pub fn from_delta_n(delta_n: f64, scheme: Scheme) -> Self {
        Self {
            omega: 1.0,
            mass: 1.0,
            a0: 1.0,
            e_dot_scaled: delta_n / PI,
            delta_n,
            scheme,
        }
    }
}

/// Convert a physical scheme strength on `axis` to the scaled equations.
///
/// `Δn` is taken from the power-independent closed form, so two traps that
/// differ only in laser power map to bit-identical scaled parameters.
pub fn scale_params(trap: &TrapDerivation, axis: Axis, scheme: Scheme) -> ScaledParams {
    let ax = trap.axis(axis);
    let m = trap.mass();
    let delta_n = trap.delta_n_closed_form(axis);
    ScaledParams {
        omega: ax.omega,
        mass: m,
        a0: ax.a0,
        e_dot_scaled: delta_n / PI,
        delta_n,
        scheme: scale_scheme(scheme, ax.omega, m),
    }
}

/// `γ → γ/ω`, `χ → ħχ/(2m)`.
pub fn scale_scheme(scheme: Scheme, omega: f64, mass: f64) -> Scheme {
    match scheme {
        Scheme::None => Scheme::None,
        Scheme::Force { gamma } => Scheme::Force {
            gamma: gamma / omega,
        },
        Scheme::Parametric { chi } => Scheme::Parametric {
            chi: HBAR * chi / (2.0 * mass),
        },
    }
}

/// Inverse of [`scale_scheme`].
pub fn unscale_scheme(scheme: Scheme, omega: f64, mass: f64) -> Scheme {
    match scheme {
        Scheme::None => Scheme::None,
        Scheme::Force { gamma } => Scheme::Force {
            gamma: gamma * omega,
        },
        Scheme::Parametric { chi } => Scheme::Parametric {
            chi: 2.0 * mass * chi / HBAR,
        },
    }
}
