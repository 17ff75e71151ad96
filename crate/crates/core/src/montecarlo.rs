//! Poisson-network simulator for checking the analytic multi-cell formulas.
//!
//! Station radii are generated outward from the user as the arrivals of a
//! unit-rate Poisson process in `pi lambda_B r^2`, so the first point is the
//! serving station and a larger window only appends points to the same draw.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::multicell::{beam_gain, InterferenceMode, MultiCellScenario};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("tables differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no samples")]
    Empty,
}

type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub window_radius: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub scenario: MultiCellScenario,
}

impl SimConfig {
    /// Window of radius `20 / sqrt(pi lambda_B)`.
    pub fn new(scenario: MultiCellScenario, n_samples: usize, seed: u64) -> Result<Self> {
        let window_radius = Self::default_window(scenario.bs_density);
        Self::with_window(scenario, n_samples, seed, window_radius)
    }

    pub fn with_window(scenario: MultiCellScenario, n_samples: usize, seed: u64, window_radius: f64) -> Result<Self> {
        if n_samples == 0 {
            return Err(SimError::InvalidConfig("n_samples must be at least 1".into()));
        }
        if !(window_radius >= Self::default_window(scenario.bs_density) * (1.0 - 1e-12)) {
            return Err(SimError::InvalidConfig(format!(
                "window radius {window_radius} m below 20/sqrt(pi lambda_B)"
            )));
        }
        Ok(Self {
            window_radius,
            n_samples,
            seed,
            scenario,
        })
    }

    pub fn default_window(bs_density: f64) -> f64 {
        20.0 / (PI * bs_density).sqrt()
    }

    fn rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YSamples {
    pub values: Vec<f64>,
    /// Horizontal distance to the serving station, m.
    pub serving_distances: Vec<f64>,
}

/// Per-mode interferer handling shared by the samplers.
struct Interferers {
    keep_probability: f64,
    psd: f64,
    antennas: u32,
    front_to_back_db: Option<f64>,
    beamforming: bool,
}

impl Interferers {
    fn of(scn: &MultiCellScenario) -> Self {
        let base = scn.interferer_psd();
        match scn.mode {
            InterferenceMode::Baseline => Self {
                keep_probability: 1.0,
                psd: base,
                antennas: 1,
                front_to_back_db: None,
                beamforming: false,
            },
            InterferenceMode::FrequencyReuse { factor } => Self {
                keep_probability: 1.0 / factor as f64,
                psd: base * factor as f64,
                antennas: 1,
                front_to_back_db: None,
                beamforming: false,
            },
            InterferenceMode::Beamforming {
                antennas,
                front_to_back_db,
            } => Self {
                keep_probability: 1.0,
                psd: base,
                antennas,
                front_to_back_db,
                beamforming: true,
            },
        }
    }

    /// Received interference power density from one station. The draw order
    /// is fixed so coupled runs stay aligned.
    fn contribution<R: Rng>(&self, rng: &mut R, fading: &Exp<f64>, ell: f64) -> f64 {
        let keep: f64 = rng.random();
        let orientation: f64 = rng.random::<f64>() * 2.0 * PI;
        let h = fading.sample(rng);
        if keep >= self.keep_probability {
            return 0.0;
        }
        let gain = if self.beamforming {
            beam_gain(orientation, self.antennas, self.front_to_back_db)
        } else {
            1.0
        };
        self.psd * gain * h * ell
    }
}

fn fading_law(scn: &MultiCellScenario) -> Exp<f64> {
    Exp::new(scn.cell.radio.tau).expect("tau validated positive")
}

/// One `Y` draw: returns `(Y, serving distance)`.
fn draw_y(config: &SimConfig, index: usize) -> (f64, f64) {
    let scn = &config.scenario;
    let pl = &scn.cell.path_loss;
    let interferers = Interferers::of(scn);
    let fading = fading_law(scn);
    let area_rate = PI * scn.bs_density;
    let s_max = area_rate * config.window_radius * config.window_radius;
    let mut rng = config.rng(index);
    loop {
        let mut s: f64 = Exp1.sample(&mut rng);
        if s > s_max {
            continue;
        }
        let r0 = (s / area_rate).sqrt();
        let signal = scn.mode.antennas() as f64 * fading.sample(&mut rng) * pl.attenuation(r0);
        let mut interference = 0.0;
        loop {
            s += <Exp1 as Distribution<f64>>::sample(&Exp1, &mut rng);
            if s > s_max {
                break;
            }
            let r = (s / area_rate).sqrt();
            interference += interferers.contribution(&mut rng, &fading, pl.attenuation(r));
        }
        return (signal / (scn.cell.radio.noise_psd + interference), r0);
    }
}

/// `Y` samples for a typical user at the window centre. Deterministic in the
/// seed; sample `i` uses stream `i` of the generator.
pub fn sample_y(config: &SimConfig) -> YSamples {
    let (values, serving_distances) = (0..config.n_samples).into_par_iter().map(|i| draw_y(config, i)).unzip();
    YSamples {
        values,
        serving_distances,
    }
}

/// Monte-Carlo `P[SINR > rho]` for a user whose serving station sits at
/// horizontal distance `r`, transmitting at density `psd`.
pub fn sample_coverage_given_r(config: &SimConfig, r: f64, psd: f64, rho: f64) -> Result<MeanEstimate> {
    if !(r >= 0.0 && r < config.window_radius) || !(psd > 0.0) || !(rho >= 0.0) {
        return Err(SimError::InvalidConfig(format!("r {r}, psd {psd}, rho {rho}")));
    }
    let scn = &config.scenario;
    let pl = &scn.cell.path_loss;
    let interferers = Interferers::of(scn);
    let fading = fading_law(scn);
    let area_rate = PI * scn.bs_density;
    let s_max = area_rate * config.window_radius * config.window_radius;
    let s0 = area_rate * r * r;
    let hits: Vec<f64> = (0..config.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = config.rng(i);
            let signal = scn.mode.antennas() as f64 * fading.sample(&mut rng) * pl.attenuation(r);
            let mut interference = 0.0;
            let mut s = s0;
            loop {
                s += <Exp1 as Distribution<f64>>::sample(&Exp1, &mut rng);
                if s > s_max {
                    break;
                }
                let ri = (s / area_rate).sqrt();
                interference += interferers.contribution(&mut rng, &fading, pl.attenuation(ri));
            }
            let sinr = psd * signal / (scn.cell.radio.noise_psd + interference);
            if sinr > rho {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    mean_with_error(&hits)
}

/// Fraction of samples strictly above each grid value.
pub fn empirical_ccdf(samples: &[f64], xi_grid: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(SimError::Empty);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(xi_grid
        .iter()
        .map(|&xi| (sorted.len() - sorted.partition_point(|&v| v <= xi)) as f64 / n)
        .collect())
}

/// Largest absolute pointwise gap between two tables on the same grid.
pub fn ks_distance(analytic: &[f64], empirical: &[f64]) -> Result<f64> {
    if analytic.len() != empirical.len() {
        return Err(SimError::LengthMismatch(analytic.len(), empirical.len()));
    }
    Ok(analytic
        .iter()
        .zip(empirical)
        .map(|(a, e)| (a - e).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl MeanEstimate {
    /// `|value - mean|` in standard errors.
    pub fn z_score(&self, value: f64) -> f64 {
        if self.std_error > 0.0 {
            (value - self.mean).abs() / self.std_error
        } else if value == self.mean {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

pub fn mean_with_error(samples: &[f64]) -> Result<MeanEstimate> {
    if samples.is_empty() {
        return Err(SimError::Empty);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(MeanEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples: samples.len(),
    })
}
