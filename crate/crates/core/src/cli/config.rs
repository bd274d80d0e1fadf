//! JSON configuration files.
//!
//! ```json
//! {
//!   "material": { "preset": "diamond" },
//!   "laser": { "wavelength": 1.064e-6, "power": 0.07, "numerical_aperture": 0.9 },
//!   "axis": "x",
//!   "engine": "semiclassical_scaled",
//!   "scheme": { "kind": "force", "strength": 0.01 },
//!   "noise": { "eta": 0.1, "delta_n": 0.05 },
//!   "integration": { "dt_periods": 0.001, "t_total_periods": 300, "n0": 10 },
//!   "ensemble": { "trajectories": 1000, "seed": 0 },
//!   "scan": { "points_per_decade": 15, "half_decades": 0.5 },
//!   "output": { "dir": "out", "gnuplot": true }
//! }
//! ```
//!
//! Unknown keys are rejected at every level.

use crate::ensemble::{ConfigError, Engine, GridSpec, RunConfig, SystemSpec};
use crate::params::{derive_trap, scale_scheme, Axis, LaserSpec, MaterialSpec, Scheme};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<MaterialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laser: Option<LaserConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<Engine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    /// `"diamond"` or `"silica"`; explicit fields override the preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// m
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// kg
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    /// kg/m³, alternative to `mass`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserConfig {
    /// m
    pub wavelength: f64,
    /// W
    pub power: f64,
    pub numerical_aperture: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrengthUnits {
    /// `γ/ω` or `ħχ/(2m)`.
    #[default]
    Scaled,
    /// `γ` in 1/s or `χ` in s/m².
    Si,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    None,
    Force,
    Parametric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    #[serde(default)]
    pub strength: f64,
    #[serde(default)]
    pub units: StrengthUnits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub eta: f64,
    /// Heating per period; overrides the value derived from material and laser.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_n: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    /// Step as a fraction of the period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_periods: Option<f64>,
    /// Step in seconds (needs material and laser).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_total_periods: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_total_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_period: Option<usize>,
    /// Filter time constant as a fraction of the period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_window_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_extensions: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence_occupation: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    /// Explicit strengths; when absent a log grid is built around `center`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_decades: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_per_decade: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_edge_extensions: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub etas: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Also write whitespace-separated two-column `.dat` files.
    #[serde(default)]
    pub gnuplot: bool,
}

/// Failure to turn a file into a runnable configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadError {
    Io(String),
    Schema(String),
    Physical(String),
}

impl From<ConfigError> for LoadError {
    fn from(e: ConfigError) -> Self {
        if e.is_physical() {
            LoadError::Physical(e.to_string())
        } else {
            LoadError::Schema(e.to_string())
        }
    }
}

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadError::Io(m) | LoadError::Schema(m) | LoadError::Physical(m) => f.write_str(m),
        }
    }
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self, LoadError> {
        serde_json::from_str(text).map_err(|e| LoadError::Schema(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LoadError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            LoadError::Schema(m) => LoadError::Schema(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn material_spec(&self) -> Result<Option<MaterialSpec>, LoadError> {
        let Some(m) = &self.material else {
            return Ok(None);
        };
        let base = match m.preset.as_deref() {
            None => None,
            Some("diamond") => Some(MaterialSpec::diamond()),
            Some("silica") => Some(MaterialSpec::silica()),
            Some(other) => {
                return Err(LoadError::Schema(format!(
                    "material.preset: unknown preset `{other}` (expected diamond or silica)"
                )))
            }
        };
        let need = |v: Option<f64>, base: Option<f64>, name: &str| {
            v.or(base)
                .ok_or_else(|| LoadError::Schema(format!("material.{name}: missing field")))
        };
        let epsilon = need(m.epsilon, base.map(|b| b.epsilon), "epsilon")?;
        let radius = need(m.radius, base.map(|b| b.radius), "radius")?;
        let spec = match (m.mass, m.density) {
            (Some(_), Some(_)) => {
                return Err(LoadError::Schema(
                    "material: give either mass or density, not both".into(),
                ));
            }
            (Some(mass), None) => MaterialSpec::new(epsilon, radius, mass),
            (None, Some(density)) => MaterialSpec::from_density(epsilon, radius, density),
            (None, None) => {
                let mass = need(None, base.map(|b| b.mass), "mass")?;
                MaterialSpec::new(epsilon, radius, mass)
            }
        };
        spec.map(Some)
            .map_err(|e| LoadError::Physical(format!("material: {e}")))
    }

    pub fn laser_spec(&self) -> Result<Option<LaserSpec>, LoadError> {
        self.laser
            .as_ref()
            .map(|l| {
                LaserSpec::new(l.wavelength, l.power, l.numerical_aperture)
                    .map_err(|e| LoadError::Physical(format!("laser: {e}")))
            })
            .transpose()
    }

    /// Material, laser and axis when all are present.
    pub fn physical_system(&self) -> Result<Option<(MaterialSpec, LaserSpec, Axis)>, LoadError> {
        let material = self.material_spec()?;
        let laser = self.laser_spec()?;
        match (material, laser) {
            (Some(m), Some(l)) => Ok(Some((m, l, self.axis.unwrap_or(Axis::X)))),
            (None, None) => Ok(None),
            (Some(_), None) => Err(LoadError::Schema(
                "laser: required when material is given".into(),
            )),
            (None, Some(_)) => Err(LoadError::Schema(
                "material: required when laser is given".into(),
            )),
        }
    }

    /// Build the run configuration, applying defaults.
    pub fn run_config(&self) -> Result<RunConfig, LoadError> {
        let noise = self.noise.as_ref().ok_or_else(|| {
            LoadError::Schema("noise: missing section (needs at least `eta`)".into())
        })?;
        let physical = self.physical_system()?;
        let engine = self.engine.unwrap_or(Engine::SemiclassicalScaled);

        let system = match (noise.delta_n, &physical) {
            (Some(delta_n), _) if engine != Engine::Semiclassical => SystemSpec::DeltaN { delta_n },
            (_, Some((material, laser, axis))) => SystemSpec::Physical {
                material: *material,
                laser: *laser,
                axis: *axis,
            },
            (Some(delta_n), None) => SystemSpec::DeltaN { delta_n },
            (None, None) => {
                return Err(LoadError::Schema(
                    "noise.delta_n: missing (give delta_n or a material and laser)".into(),
                ))
            }
        };
        let trap = match &physical {
            Some((m, l, axis)) => {
                let trap = derive_trap(m, l).map_err(|e| LoadError::Physical(e.to_string()))?;
                Some((trap, *axis))
            }
            None => None,
        };
        let period_s = trap.as_ref().map(|(t, axis)| t.axis(*axis).period());

        let scheme = match &self.scheme {
            None => Scheme::None,
            Some(s) => {
                let raw = match s.kind {
                    SchemeKind::None => Scheme::None,
                    SchemeKind::Force => Scheme::Force { gamma: s.strength },
                    SchemeKind::Parametric => Scheme::Parametric { chi: s.strength },
                };
                match s.units {
                    StrengthUnits::Scaled => raw,
                    StrengthUnits::Si => {
                        let (t, axis) = trap.as_ref().ok_or_else(|| {
                            LoadError::Schema(
                                "scheme.units: SI strengths need a material and laser".into(),
                            )
                        })?;
                        scale_scheme(raw, t.axis(*axis).omega, t.mass())
                    }
                }
            }
        };

        let i = &self.integration;
        let dt_periods = match (i.dt_periods, i.dt_s) {
            (Some(_), Some(_)) => {
                return Err(LoadError::Schema(
                    "integration: give dt_periods or dt_s, not both".into(),
                ))
            }
            (Some(d), None) => Some(d),
            (None, Some(d)) => Some(
                d / period_s.ok_or_else(|| {
                    LoadError::Schema("integration.dt_s: needs a material and laser".into())
                })?,
            ),
            (None, None) => None,
        };
        let steps_per_period = match dt_periods {
            None => 1000,
            Some(d) => {
                if !(d.is_finite() && d > 0.0 && d < 1.0) {
                    return Err(LoadError::Schema(format!(
                        "integration.dt: step must be a positive fraction of the period (got {d} periods)"
                    )));
                }
                let spp = (1.0 / d).round();
                if ((1.0 / d) - spp).abs() > 1e-6 * spp {
                    return Err(LoadError::Schema(format!(
                        "integration.dt: the period must be a whole number of steps (1/dt = {} periods)",
                        1.0 / d
                    )));
                }
                spp as usize
            }
        };
        let periods = match (i.t_total_periods, i.t_total_s) {
            (Some(_), Some(_)) => {
                return Err(LoadError::Schema(
                    "integration: give t_total_periods or t_total_s, not both".into(),
                ))
            }
            (Some(t), None) => t,
            (None, Some(t)) => {
                t / period_s.ok_or_else(|| {
                    LoadError::Schema("integration.t_total_s: needs a material and laser".into())
                })?
            }
            (None, None) => 300.0,
        };

        let defaults = RunConfig::scaled(noise.eta, 0.0, scheme);
        let e = &self.ensemble;
        let config = RunConfig {
            engine,
            scheme,
            eta: noise.eta,
            system,
            steps_per_period,
            periods,
            n0: i.n0.unwrap_or(defaults.n0),
            basis_size: i.basis_size.unwrap_or(defaults.basis_size),
            trajectories: e.trajectories.unwrap_or(defaults.trajectories),
            master_seed: e.seed.unwrap_or(defaults.master_seed),
            steady_window_fraction: e
                .steady_window_fraction
                .unwrap_or(defaults.steady_window_fraction),
            filter_fraction: i.filter_fraction.unwrap_or(defaults.filter_fraction),
            samples_per_period: i.samples_per_period.unwrap_or(defaults.samples_per_period),
            max_extensions: e.max_extensions.unwrap_or(defaults.max_extensions),
            divergence_occupation: e
                .divergence_occupation
                .unwrap_or(defaults.divergence_occupation),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn grid_spec(&self) -> GridSpec {
        let d = GridSpec::default();
        match &self.scan {
            None => d,
            Some(s) => GridSpec {
                center: s.center.or(d.center),
                half_decades: s.half_decades.unwrap_or(d.half_decades),
                points_per_decade: s.points_per_decade.unwrap_or(d.points_per_decade),
                max_edge_extensions: s.max_edge_extensions.unwrap_or(d.max_edge_extensions),
                refine: s.refine.unwrap_or(d.refine),
            },
        }
    }

    pub fn explicit_grid(&self) -> Option<&[f64]> {
        self.scan.as_ref().and_then(|s| s.grid.as_deref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scaled_config() {
        let cfg = ConfigFile::from_json(
            r#"{"noise": {"eta": 0.1, "delta_n": 0.05}, "scheme": {"kind": "force", "strength": 0.02}}"#,
        )
        .unwrap();
        let run = cfg.run_config().unwrap();
        assert_eq!(run.scheme, Scheme::Force { gamma: 0.02 });
        assert_eq!(run.system, SystemSpec::DeltaN { delta_n: 0.05 });
        assert_eq!(run.steps_per_period, 1000);
        assert_eq!(run.trajectories, 1000);
    }

    #[test]
    fn unknown_keys_are_schema_errors() {
        for text in [
            r#"{"noise": {"eta": 0.1, "delta_n": 0.05}, "colour": 1}"#,
            r#"{"noise": {"eta": 0.1, "delta_n": 0.05, "extra": 2}}"#,
            r#"{"noise": {"eta": 0.1, "delta_n": 0.05}, "integration": {"dt": 0.001}}"#,
        ] {
            assert!(
                matches!(ConfigFile::from_json(text), Err(LoadError::Schema(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn efficiency_out_of_range_is_physical() {
        let cfg = ConfigFile::from_json(r#"{"noise": {"eta": 1.5, "delta_n": 0.05}}"#).unwrap();
        match cfg.run_config() {
            Err(LoadError::Physical(m)) => assert!(
                m.contains("measurement efficiency must lie in (0,1]"),
                "{m}"
            ),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn diamond_config_derives_delta_n() {
        let cfg = ConfigFile::from_json(
            r#"{"material": {"epsilon": 5.7, "radius": 5e-8, "mass": 1.79e-18},
                "laser": {"wavelength": 1.064e-6, "power": 0.07, "numerical_aperture": 0.9},
                "axis": "x", "noise": {"eta": 0.1}}"#,
        )
        .unwrap();
        let run = cfg.run_config().unwrap();
        let dn = run.delta_n().unwrap();
        assert!((dn / 0.033 - 1.0).abs() < 0.1, "{dn}");
    }

    #[test]
    fn si_strength_is_scaled() {
        let cfg = ConfigFile::from_json(
            r#"{"material": {"preset": "diamond"},
                "laser": {"wavelength": 1.064e-6, "power": 0.07, "numerical_aperture": 0.9},
                "noise": {"eta": 0.1},
                "scheme": {"kind": "force", "strength": 1000.0, "units": "si"}}"#,
        )
        .unwrap();
        let run = cfg.run_config().unwrap();
        let trap = derive_trap(&MaterialSpec::diamond(), &LaserSpec::reference()).unwrap();
        assert!((run.scheme.strength() - 1000.0 / trap.x.omega).abs() < 1e-15);
    }

    #[test]
    fn time_step_must_divide_the_period() {
        let cfg = ConfigFile::from_json(
            r#"{"noise": {"eta": 0.1, "delta_n": 0.05}, "integration": {"dt_periods": 0.0013}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.run_config(), Err(LoadError::Schema(_))));
    }

    #[test]
    fn bad_material_is_physical() {
        let cfg = ConfigFile::from_json(
            r#"{"material": {"epsilon": 0.5, "radius": 5e-8, "mass": 1e-18},
                "laser": {"wavelength": 1.064e-6, "power": 0.07, "numerical_aperture": 0.9},
                "noise": {"eta": 0.1}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.run_config(), Err(LoadError::Physical(_))));
    }
}
