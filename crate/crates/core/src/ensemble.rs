//! Trajectory ensembles, steady-state estimation and strength scans.
//!
//! Trajectory `i` draws from ChaCha8 stream `i` of the master seed, so the
//! noise each trajectory sees never depends on scheduling. Trajectories are
//! grouped into fixed chunks; chunk sums are combined in index order, which
//! makes every summary bit-identical for any worker count.

use crate::feedback::FilterState;
use crate::params::{
    derive_trap, scale_params, unscale_scheme, Axis, LaserSpec, MaterialSpec, ParamsError, Scheme,
};
use crate::quantum::{DensityState, MeasurementParams, QuantumState, SmeTrajectory, SseTrajectory};
use crate::semiclassical::{NoiseDraws, PhysicalSystem, ScaledSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Environment variable bounding the worker pool.
pub const THREADS_ENV: &str = "LEVICOOL_THREADS";
/// Fraction of failed trajectories above which a summary is flagged unstable.
pub const UNSTABLE_FRACTION: f64 = 0.05;
/// Minimum simulated time, in periods.
pub const MIN_PERIODS: f64 = 50.0;

/// Largest `N ω dt` for which the split-step propagation keeps the top of
/// the number basis quiet.
pub const MAX_BASIS_STEP: f64 = 0.85;

const CHUNK: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    /// Settings outside their allowed range (not a physical statement).
    #[error("{field}: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
    /// Physically meaningless inputs.
    #[error("{field}: {message}")]
    Physical {
        field: &'static str,
        message: String,
    },
    #[error(transparent)]
    Params(#[from] ParamsError),
}

impl ConfigError {
    fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field,
            message: message.into(),
        }
    }

    fn physical(field: &'static str, message: impl Into<String>) -> Self {
        ConfigError::Physical {
            field,
            message: message.into(),
        }
    }

    pub fn is_physical(&self) -> bool {
        !matches!(self, ConfigError::Invalid { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// SI-unit semi-classical equations; needs a physical system.
    Semiclassical,
    SemiclassicalScaled,
    Sse,
    Sme,
}

/// Either `Δn` directly or the material and laser it derives from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    DeltaN {
        delta_n: f64,
    },
    Physical {
        material: MaterialSpec,
        laser: LaserSpec,
        axis: Axis,
    },
}

/// One ensemble run. Scheme strengths are always scaled (`γ/ω`, `ħχ/2m`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub engine: Engine,
    pub scheme: Scheme,
    pub eta: f64,
    pub system: SystemSpec,
    /// Time step is one period divided by this.
    pub steps_per_period: usize,
    /// Total simulated time, in periods.
    pub periods: f64,
    /// Initial occupation.
    pub n0: f64,
    /// Number basis size for the quantum engines.
    pub basis_size: usize,
    pub trajectories: usize,
    pub master_seed: u64,
    /// Tail fraction of the run used for the steady state.
    pub steady_window_fraction: f64,
    /// Filter time constant over the period.
    pub filter_fraction: f64,
    pub samples_per_period: usize,
    /// How many times a run failing the drift check is lengthened by 50%.
    pub max_extensions: u32,
    /// Occupation at which a trajectory counts as diverged.
    pub divergence_occupation: f64,
}

impl RunConfig {
    /// Scaled semi-classical run with defaults for everything else.
    pub fn scaled(eta: f64, delta_n: f64, scheme: Scheme) -> Self {
        Self {
            engine: Engine::SemiclassicalScaled,
            scheme,
            eta,
            system: SystemSpec::DeltaN { delta_n },
            steps_per_period: 1000,
            periods: 300.0,
            n0: 10.0,
            basis_size: 128,
            trajectories: 1000,
            master_seed: 0,
            steady_window_fraction: 0.25,
            filter_fraction: 0.05,
            samples_per_period: 20,
            max_extensions: 2,
            divergence_occupation: 1e6,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(ConfigError::physical(
                "eta",
                format!(
                    "measurement efficiency must lie in (0,1] (got {})",
                    self.eta
                ),
            ));
        }
        let strength = self.scheme.strength();
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(ConfigError::physical(
                "scheme",
                format!("feedback strength must be finite and non-negative (got {strength})"),
            ));
        }
        match &self.system {
            SystemSpec::DeltaN { delta_n } => {
                if !(delta_n.is_finite() && *delta_n >= 0.0) {
                    return Err(ConfigError::physical(
                        "delta_n",
                        format!(
                            "heating per period must be finite and non-negative (got {delta_n})"
                        ),
                    ));
                }
                if self.engine == Engine::Semiclassical {
                    return Err(ConfigError::invalid(
                        "engine",
                        "the SI semiclassical engine needs a physical system (material, laser, axis)",
                    ));
                }
            }
            SystemSpec::Physical {
                material, laser, ..
            } => {
                material.validate()?;
                laser.validate()?;
            }
        }
        if !(self.n0.is_finite() && self.n0 >= 0.0) {
            return Err(ConfigError::physical(
                "n0",
                format!("initial occupation must be non-negative (got {})", self.n0),
            ));
        }
        if self.trajectories == 0 {
            return Err(ConfigError::invalid(
                "trajectories",
                "need at least one trajectory",
            ));
        }
        if !(self.periods.is_finite() && self.periods >= MIN_PERIODS) {
            return Err(ConfigError::invalid(
                "periods",
                format!(
                    "total time must be at least {MIN_PERIODS} periods (got {})",
                    self.periods
                ),
            ));
        }
        if self.steps_per_period < 4 {
            return Err(ConfigError::invalid(
                "steps_per_period",
                "need at least 4 steps per period",
            ));
        }
        if self.samples_per_period == 0 || !self.steps_per_period.is_multiple_of(self.samples_per_period) {
            return Err(ConfigError::invalid(
                "samples_per_period",
                format!(
                    "must divide steps_per_period ({} does not divide {})",
                    self.samples_per_period, self.steps_per_period
                ),
            ));
        }
        if !(self.steady_window_fraction > 0.0 && self.steady_window_fraction <= 1.0) {
            return Err(ConfigError::invalid(
                "steady_window_fraction",
                "must lie in (0,1]",
            ));
        }
        if !(self.filter_fraction > 0.0 && self.filter_fraction < 1.0) {
            return Err(ConfigError::invalid(
                "filter_fraction",
                "filter time constant must lie in (0,1) periods",
            ));
        }
        FilterState::new(
            2.0 * PI,
            2.0 * PI / self.steps_per_period as f64,
            2.0 * PI * self.filter_fraction,
        )
        .map_err(|e| ConfigError::invalid("steps_per_period", e.to_string()))?;
        if matches!(self.engine, Engine::Sse | Engine::Sme) {
            let stiffness = self.basis_size as f64 * 2.0 * PI / self.steps_per_period as f64;
            if stiffness > MAX_BASIS_STEP {
                return Err(ConfigError::invalid(
                    "steps_per_period",
                    format!(
                        "basis_size * omega * dt = {stiffness:.3} exceeds {MAX_BASIS_STEP}; \
                         use at least {} steps per period for {} levels",
                        (self.basis_size as f64 * 2.0 * PI / MAX_BASIS_STEP).ceil(),
                        self.basis_size
                    ),
                ));
            }
            QuantumState::coherent(self.n0, 0.0, self.basis_size)
                .map_err(|e| ConfigError::invalid("basis_size", e.to_string()))?;
        }
        if !(self.divergence_occupation > 0.0) {
            return Err(ConfigError::invalid(
                "divergence_occupation",
                "must be positive",
            ));
        }
        Ok(())
    }

    /// `Δn` of the configured system (closed form for physical systems).
    pub fn delta_n(&self) -> Result<f64, ConfigError> {
        match &self.system {
            SystemSpec::DeltaN { delta_n } => Ok(*delta_n),
            SystemSpec::Physical {
                material,
                laser,
                axis,
            } => {
                let trap = derive_trap(material, laser)?;
                Ok(trap.delta_n_closed_form(*axis))
            }
        }
    }

    pub fn with_strength(&self, strength: f64) -> Self {
        Self {
            scheme: self.scheme.with_strength(strength),
            ..self.clone()
        }
    }

    fn total_steps(&self) -> u64 {
        (self.periods * self.steps_per_period as f64).round() as u64
    }

    fn sample_stride(&self) -> u64 {
        (self.steps_per_period / self.samples_per_period) as u64
    }
}

/// Engine-specific state shared by all trajectories of one run.
#[derive(Debug, Clone)]
enum Model {
    Physical(PhysicalSystem),
    Scaled(ScaledSystem),
    Sse(MeasurementParams),
    Sme(MeasurementParams),
}

fn build_model(config: &RunConfig) -> Result<Model, ConfigError> {
    let spp = config.steps_per_period;
    Ok(match config.engine {
        Engine::Semiclassical => {
            let SystemSpec::Physical {
                material,
                laser,
                axis,
            } = &config.system
            else {
                return Err(ConfigError::invalid(
                    "engine",
                    "the SI semiclassical engine needs a physical system",
                ));
            };
            let trap = derive_trap(material, laser)?;
            let ax = trap.axis(*axis);
            Model::Physical(PhysicalSystem {
                omega: ax.omega,
                mass: trap.mass(),
                e_dot: ax.e_dot,
                eta: config.eta,
                scheme: unscale_scheme(config.scheme, ax.omega, trap.mass()),
                dt: ax.period() / spp as f64,
            })
        }
        Engine::SemiclassicalScaled => {
            let delta_n = match &config.system {
                SystemSpec::DeltaN { delta_n } => *delta_n,
                SystemSpec::Physical {
                    material,
                    laser,
                    axis,
                } => {
                    let trap = derive_trap(material, laser)?;
                    let ax = trap.axis(*axis);
                    let physical = unscale_scheme(config.scheme, ax.omega, trap.mass());
                    scale_params(&trap, *axis, physical).delta_n
                }
            };
            Model::Scaled(ScaledSystem::new(config.eta, delta_n, config.scheme, spp))
        }
        Engine::Sse => Model::Sse(MeasurementParams::new(config.eta, config.delta_n()?, spp)),
        Engine::Sme => Model::Sme(MeasurementParams::new(config.eta, config.delta_n()?, spp)),
    })
}

/// Per-trajectory result: samples up to the end or up to failure.
struct TrajectoryRun {
    samples: Vec<f64>,
    failed: bool,
}

fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

fn run_trajectory(config: &RunConfig, model: &Model, index: u64) -> TrajectoryRun {
    let mut rng = trajectory_rng(config.master_seed, index);
    let phase = rng.random::<f64>() * 2.0 * PI;
    let total = config.total_steps();
    let stride = config.sample_stride();
    let mut samples = Vec::with_capacity((total / stride + 1) as usize);
    let limit = config.divergence_occupation;
    let mu = config.filter_fraction;

    // Every engine consumes two standard normals per step, in the same order.
    macro_rules! drive {
        ($occupation:expr, $step:expr) => {{
            let n = $occupation;
            samples.push(n);
            for k in 1..=total {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                if $step(a, b).is_err() {
                    return TrajectoryRun {
                        samples,
                        failed: true,
                    };
                }
                if k % stride == 0 {
                    let n = $occupation;
                    if !(n.is_finite() && n.abs() < limit) {
                        return TrajectoryRun {
                            samples,
                            failed: true,
                        };
                    }
                    samples.push(n);
                }
            }
        }};
    }

    match model {
        Model::Physical(sys) => {
            let filter = sys.filter(mu).expect("validated filter");
            let mut s = sys.initial_state(config.n0, phase, filter);
            drive!(sys.occupation(&s), |a, b| sys
                .step_with(&mut s, NoiseDraws { meas: a, kick: b }));
        }
        Model::Scaled(sys) => {
            let filter = sys.filter(mu).expect("validated filter");
            let mut s = sys.initial_state(config.n0, phase, filter);
            drive!(sys.occupation(&s), |a, b| sys
                .step_with(&mut s, NoiseDraws { meas: a, kick: b }));
        }
        Model::Sse(params) => {
            let filter = quantum_filter(config);
            let psi = QuantumState::coherent(config.n0, phase, config.basis_size)
                .expect("validated basis");
            let mut t = SseTrajectory::new(*params, config.scheme, filter, psi);
            drive!(t.occupation(), |a, b| t.step_with(a, b));
        }
        Model::Sme(params) => {
            let filter = quantum_filter(config);
            let psi = QuantumState::coherent(config.n0, phase, config.basis_size)
                .expect("validated basis");
            let mut t =
                SmeTrajectory::new(*params, config.scheme, filter, DensityState::pure(&psi));
            drive!(t.occupation(), |a, _b| t.step_with(a));
        }
    }
    TrajectoryRun {
        samples,
        failed: false,
    }
}

fn quantum_filter(config: &RunConfig) -> FilterState {
    let dt = 2.0 * PI / config.steps_per_period as f64;
    FilterState::new(2.0 * PI, dt, 2.0 * PI * config.filter_fraction).expect("validated filter")
}

/// Partial sums over one chunk of trajectories.
struct ChunkStats {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    /// Window mean and window slope (per period) of each surviving trajectory.
    window: Vec<(f64, f64)>,
    failed: usize,
}

fn least_squares_slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, y) in ts.iter().zip(ys) {
        num += (t - tm) * (y - ym);
        den += (t - tm) * (t - tm);
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    if n == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Averaged occupation and its steady-state estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    /// Sample times, in periods.
    pub times: Vec<f64>,
    pub mean_n: Vec<f64>,
    /// Sample standard deviation over surviving trajectories, divided by their root count.
    pub stderr_n: Vec<f64>,
    pub steady_n: f64,
    pub steady_err: f64,
    /// Slope of the mean occupation over the steady window, per period.
    pub window_slope: f64,
    pub window_slope_err: f64,
    pub drift_ok: bool,
    pub extensions: u32,
    pub periods: f64,
    pub delta_n: f64,
    pub trajectories: usize,
    pub trajectories_failed: usize,
    pub unstable: bool,
}

impl EnsembleSummary {
    /// Least-squares slope of the mean occupation over the whole run, per period.
    pub fn heating_rate(&self) -> f64 {
        least_squares_slope(&self.times, &self.mean_n)
    }
}

/// Worker count from [`THREADS_ENV`], else the available parallelism.
pub fn configured_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("thread pool")
}

/// Run an ensemble with the worker count from the environment.
pub fn run_ensemble(config: &RunConfig) -> Result<EnsembleSummary, ConfigError> {
    run_ensemble_with_threads(config, configured_threads())
}

pub fn run_ensemble_with_threads(
    config: &RunConfig,
    threads: usize,
) -> Result<EnsembleSummary, ConfigError> {
    config.validate()?;
    let pool = pool(threads);
    let mut current = config.clone();
    let mut extensions = 0;
    loop {
        let mut summary = run_once(&current, &pool)?;
        summary.extensions = extensions;
        if summary.drift_ok || summary.unstable || extensions >= config.max_extensions {
            return Ok(summary);
        }
        extensions += 1;
        current.periods *= 1.5;
    }
}

fn run_once(config: &RunConfig, pool: &rayon::ThreadPool) -> Result<EnsembleSummary, ConfigError> {
    let model = build_model(config)?;
    let delta_n = config.delta_n()?;
    let samples = (config.total_steps() / config.sample_stride() + 1) as usize;
    let dt_sample = 1.0 / config.samples_per_period as f64;
    let times: Vec<f64> = (0..samples).map(|k| k as f64 * dt_sample).collect();
    let window_start =
        ((1.0 - config.steady_window_fraction) * (samples - 1) as f64).floor() as usize;
    let window_times = &times[window_start..];

    let chunks = config.trajectories.div_ceil(CHUNK);
    let stats: Vec<ChunkStats> = pool.install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut st = ChunkStats {
                    sum: vec![0.0; samples],
                    sum_sq: vec![0.0; samples],
                    window: Vec::with_capacity(CHUNK),
                    failed: 0,
                };
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(config.trajectories);
                for index in lo..hi {
                    let run = run_trajectory(config, &model, index as u64);
                    if run.failed {
                        st.failed += 1;
                        continue;
                    }
                    for (k, &n) in run.samples.iter().enumerate() {
                        st.sum[k] += n;
                        st.sum_sq[k] += n * n;
                    }
                    let w = &run.samples[window_start..];
                    let mean = w.iter().sum::<f64>() / w.len() as f64;
                    st.window.push((mean, least_squares_slope(window_times, w)));
                }
                st
            })
            .collect()
    });

    let mut sum = vec![0.0; samples];
    let mut sum_sq = vec![0.0; samples];
    let mut window = Vec::with_capacity(config.trajectories);
    let mut failed = 0;
    for st in stats {
        for k in 0..samples {
            sum[k] += st.sum[k];
            sum_sq[k] += st.sum_sq[k];
        }
        window.extend(st.window);
        failed += st.failed;
    }
    let ok = window.len() as f64;
    let mean_n: Vec<f64> = sum.iter().map(|s| s / ok).collect();
    let stderr_n: Vec<f64> = sum
        .iter()
        .zip(&sum_sq)
        .map(|(s, q)| {
            if ok < 2.0 {
                0.0
            } else {
                let mean = s / ok;
                ((q - ok * mean * mean).max(0.0) / (ok - 1.0) / ok).sqrt()
            }
        })
        .collect();
    let (steady_n, steady_err) = mean_and_stderr(window.iter().map(|w| w.0));
    let (window_slope, window_slope_err) = mean_and_stderr(window.iter().map(|w| w.1));
    let span = window_times.last().unwrap_or(&0.0) - window_times.first().unwrap_or(&0.0);
    let drift_ok = (window_slope * span).abs() < 2.0 * steady_err + 2.0 * window_slope_err * span;
    Ok(EnsembleSummary {
        times,
        mean_n,
        stderr_n,
        steady_n,
        steady_err,
        window_slope,
        window_slope_err,
        drift_ok: drift_ok || ok < 2.0,
        extensions: 0,
        periods: config.periods,
        delta_n,
        trajectories: config.trajectories,
        trajectories_failed: failed,
        unstable: failed as f64 > UNSTABLE_FRACTION * config.trajectories as f64,
    })
}

/// One grid point of a strength scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub strength: f64,
    pub steady_n: f64,
    pub steady_err: f64,
    pub unstable: bool,
    pub trajectories_failed: usize,
    pub drift_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    /// Sorted by strength.
    pub points: Vec<ScanPoint>,
    pub argmin: f64,
    pub min_n: f64,
    pub min_err: f64,
    /// True when the minimum sits on the edge of the grid.
    pub edge_minimum: bool,
}

impl ScanResult {
    fn from_points(mut points: Vec<ScanPoint>) -> Self {
        points.sort_by(|a, b| a.strength.total_cmp(&b.strength));
        points.dedup_by(|a, b| a.strength == b.strength);
        let best = points
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.unstable && p.steady_n.is_finite())
            .min_by(|a, b| a.1.steady_n.total_cmp(&b.1.steady_n));
        match best {
            Some((i, p)) => Self {
                argmin: p.strength,
                min_n: p.steady_n,
                min_err: p.steady_err,
                edge_minimum: i == 0 || i + 1 == points.len(),
                points,
            },
            None => Self {
                argmin: f64::NAN,
                min_n: f64::NAN,
                min_err: f64::NAN,
                edge_minimum: false,
                points,
            },
        }
    }

    pub fn stable_points(&self) -> impl Iterator<Item = &ScanPoint> {
        self.points.iter().filter(|p| !p.unstable)
    }
}

fn scan_point(config: &RunConfig, strength: f64, threads: usize) -> Result<ScanPoint, ConfigError> {
    let s = run_ensemble_with_threads(&config.with_strength(strength), threads)?;
    Ok(ScanPoint {
        strength,
        steady_n: s.steady_n,
        steady_err: s.steady_err,
        unstable: s.unstable,
        trajectories_failed: s.trajectories_failed,
        drift_ok: s.drift_ok,
    })
}

/// Run an ensemble at every strength in `grid`.
pub fn scan_strength(config: &RunConfig, grid: &[f64]) -> Result<ScanResult, ConfigError> {
    if grid.is_empty() {
        return Err(ConfigError::invalid("scan.grid", "strength grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(ConfigError::invalid(
            "scan.grid",
            format!("strengths must be finite and non-negative (got {bad})"),
        ));
    }
    config.validate()?;
    let threads = configured_threads();
    let points = grid
        .iter()
        .map(|&g| scan_point(config, g, threads))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScanResult::from_points(points))
}

/// `points_per_decade`-spaced grid spanning `half_decades` either side of `center`.
pub fn log_grid(center: f64, half_decades: f64, points_per_decade: usize) -> Vec<f64> {
    let steps = (half_decades * points_per_decade as f64).round() as i64;
    (-steps..=steps)
        .map(|k| center * 10f64.powf(k as f64 / points_per_decade as f64))
        .collect()
}

/// Starting guess for the optimal scaled strength.
///
/// Force: balancing measurement back-action against feedback noise gives
/// `γ̃ ≈ 2 sqrt(η) Δn / π`. Parametric: `χ̃ ≈ 0.04 η Δn`, calibrated on
/// semi-classical runs.
pub fn strength_guess(scheme: Scheme, eta: f64, delta_n: f64) -> f64 {
    match scheme {
        Scheme::None => 0.0,
        Scheme::Force { .. } => 2.0 * eta.sqrt() * delta_n / PI,
        Scheme::Parametric { .. } => 0.04 * eta * delta_n,
    }
}

/// How a strength scan is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Grid center; defaults to [`strength_guess`].
    pub center: Option<f64>,
    pub half_decades: f64,
    pub points_per_decade: usize,
    /// Times the grid is pushed outward when the minimum lands on an edge.
    pub max_edge_extensions: u32,
    /// Add log midpoints either side of the minimum.
    pub refine: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            center: None,
            half_decades: 0.5,
            points_per_decade: 15,
            max_edge_extensions: 2,
            refine: true,
        }
    }
}

/// Grid scan around the guess, pushed outward while the minimum sits on an
/// edge, then one bisection pass between the minimum and its neighbours.
pub fn optimize_strength(config: &RunConfig, grid: &GridSpec) -> Result<ScanResult, ConfigError> {
    config.validate()?;
    if grid.points_per_decade == 0 || !(grid.half_decades > 0.0) {
        return Err(ConfigError::invalid(
            "scan",
            "grid needs a positive width and point density",
        ));
    }
    if matches!(config.scheme, Scheme::None) {
        return Err(ConfigError::invalid(
            "scheme",
            "cannot scan the strength of the none scheme",
        ));
    }
    let center = grid.center.unwrap_or_else(|| {
        strength_guess(config.scheme, config.eta, config.delta_n().unwrap_or(0.0))
    });
    if !(center.is_finite() && center > 0.0) {
        return Err(ConfigError::invalid(
            "scan.center",
            format!("grid center must be positive (got {center})"),
        ));
    }
    let threads = configured_threads();
    let mut points: Vec<ScanPoint> = log_grid(center, grid.half_decades, grid.points_per_decade)
        .into_iter()
        .map(|g| scan_point(config, g, threads))
        .collect::<Result<_, _>>()?;
    let ratio = 10f64.powf(1.0 / grid.points_per_decade as f64);
    let extra = (grid.points_per_decade / 3).max(1);

    let mut result = ScanResult::from_points(points.clone());
    for _ in 0..grid.max_edge_extensions {
        if !result.edge_minimum {
            break;
        }
        let low_edge = result.argmin == result.points[0].strength;
        // An unstable region above the minimum is a real boundary, not an edge.
        let high_blocked = !low_edge && result.points.last().is_some_and(|p| p.unstable);
        if high_blocked {
            break;
        }
        let anchor = result.argmin;
        for k in 1..=extra {
            let g = if low_edge {
                anchor / ratio.powi(k as i32)
            } else {
                anchor * ratio.powi(k as i32)
            };
            points.push(scan_point(config, g, threads)?);
        }
        result = ScanResult::from_points(points.clone());
    }

    if grid.refine && result.argmin.is_finite() {
        let idx = result
            .points
            .iter()
            .position(|p| p.strength == result.argmin)
            .unwrap();
        let mut mids = Vec::new();
        if idx > 0 {
            mids.push((result.points[idx - 1].strength * result.argmin).sqrt());
        }
        if idx + 1 < result.points.len() {
            mids.push((result.points[idx + 1].strength * result.argmin).sqrt());
        }
        for g in mids {
            points.push(scan_point(config, g, threads)?);
        }
        result = ScanResult::from_points(points);
    }
    Ok(result)
}

/// Optimal cooling limit at each efficiency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaPoint {
    pub eta: f64,
    pub scan: ScanResult,
}

pub fn efficiency_sweep(
    config: &RunConfig,
    etas: &[f64],
    grid: &GridSpec,
) -> Result<Vec<EtaPoint>, ConfigError> {
    if etas.is_empty() {
        return Err(ConfigError::invalid(
            "sweep.etas",
            "efficiency grid is empty",
        ));
    }
    etas.iter()
        .map(|&eta| {
            let cfg = RunConfig {
                eta,
                ..config.clone()
            };
            Ok(EtaPoint {
                eta,
                scan: optimize_strength(&cfg, grid)?,
            })
        })
        .collect()
}

/// Fitted force-feedback cooling limit
/// `0.48/sqrt(η) - η + 0.15 η^{-1/3} Δn - 0.01 Δn`.
///
/// Extrapolates below zero near `η = 1, Δn = 0`; returned as is.
pub fn empirical_limit(eta: f64, delta_n: f64) -> f64 {
    0.48 / eta.sqrt() - eta + 0.15 * eta.powf(-1.0 / 3.0) * delta_n - 0.01 * delta_n
}
