//! Multi-cell model on a Poisson field of base stations.
//!
//! Interfering stations transmit at full load with a constant power spectral
//! density `P_I / W_I`. The SINR of a user then factors as `(p_u / w_u) Y_u`
//! where `Y_u` does not depend on the allocation, so the single-cell solver
//! applies once `Y_u` is binned into groups.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{db_to_linear, CellScenario, ChannelError};
use crate::numerics::{
    find_root_log_monotonic, integral_ia_with, integrate, integrate_semi_infinite_scaled, NumericsError, QuadratureSpec,
};
use crate::singlecell::{water_fill, SolveError, Sweep, TradeoffCurve, TradeoffPoint, TrafficGroup};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MultiCellError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

type Result<T> = std::result::Result<T, MultiCellError>;

/// How the interfering stations share spectrum and space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InterferenceMode {
    Baseline,
    /// Each station uses one of `factor` sub-bands at `factor` times the
    /// power density.
    FrequencyReuse {
        factor: u32,
    },
    /// Uniform linear array with `antennas` elements. `front_to_back_db` sets
    /// a constant back-half gain; `None` mirrors the array factor onto the
    /// back half.
    Beamforming {
        antennas: u32,
        front_to_back_db: Option<f64>,
    },
}

impl InterferenceMode {
    pub fn reuse_factor(&self) -> u32 {
        match self {
            InterferenceMode::FrequencyReuse { factor } => *factor,
            _ => 1,
        }
    }

    pub fn antennas(&self) -> u32 {
        match self {
            InterferenceMode::Beamforming { antennas, .. } => *antennas,
            _ => 1,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            InterferenceMode::Baseline => "baseline",
            InterferenceMode::FrequencyReuse { .. } => "frequency_reuse",
            InterferenceMode::Beamforming { .. } => "beamforming",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiCellScenario {
    pub cell: CellScenario,
    /// Base-station density in points per m².
    pub bs_density: f64,
    pub interferer_power: f64,
    pub interferer_bandwidth: f64,
    pub mode: InterferenceMode,
    /// SINR below which a user is in outage, in dB.
    pub outage_sinr_db: f64,
    /// Upper tail mass of `Y` folded into the top group.
    pub tail_probability: f64,
}

pub const DEFAULT_BS_DENSITY: f64 = 1e-6;
pub const DEFAULT_INTERFERER_POWER: f64 = 20.0;
pub const DEFAULT_INTERFERER_BANDWIDTH: f64 = 10e6;
pub const DEFAULT_OUTAGE_SINR_DB: f64 = -15.0;
pub const DEFAULT_TAIL_PROBABILITY: f64 = 1e-3;

fn invalid(field: &'static str, value: f64, reason: &'static str) -> MultiCellError {
    ChannelError::InvalidParameter { field, value, reason }.into()
}

impl MultiCellScenario {
    pub fn new(
        cell: CellScenario,
        bs_density: f64,
        interferer_power: f64,
        interferer_bandwidth: f64,
        mode: InterferenceMode,
    ) -> Result<Self> {
        let s = Self {
            cell,
            bs_density,
            interferer_power,
            interferer_bandwidth,
            mode,
            outage_sinr_db: DEFAULT_OUTAGE_SINR_DB,
            tail_probability: DEFAULT_TAIL_PROBABILITY,
        };
        s.validate()?;
        Ok(s)
    }

    /// 1 station per km², 20 W over 10 MHz interferers, baseline mode.
    pub fn reference(exponent: f64) -> Result<Self> {
        let cell = CellScenario::reference(exponent, 1.0 / (PI * DEFAULT_BS_DENSITY).sqrt())?;
        Self::new(
            cell,
            DEFAULT_BS_DENSITY,
            DEFAULT_INTERFERER_POWER,
            DEFAULT_INTERFERER_BANDWIDTH,
            InterferenceMode::Baseline,
        )
    }

    pub fn with_mode(mut self, mode: InterferenceMode) -> Result<Self> {
        self.mode = mode;
        self.validate()?;
        Ok(self)
    }

    pub fn with_density(mut self, bs_density: f64) -> Result<Self> {
        self.bs_density = bs_density;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bs_density > 0.0 && self.bs_density.is_finite()) {
            return Err(invalid("bs_density", self.bs_density, "must be positive"));
        }
        if !(self.interferer_power > 0.0) {
            return Err(invalid("interferer_power", self.interferer_power, "must be positive"));
        }
        if !(self.interferer_bandwidth > 0.0) {
            return Err(invalid(
                "interferer_bandwidth",
                self.interferer_bandwidth,
                "must be positive",
            ));
        }
        if !(self.cell.path_loss.exponent > 2.0) {
            return Err(invalid("exponent", self.cell.path_loss.exponent, "must exceed 2"));
        }
        if !self.outage_sinr_db.is_finite() {
            return Err(invalid("outage_sinr_db", self.outage_sinr_db, "must be finite"));
        }
        if !(self.tail_probability > 0.0 && self.tail_probability < 1.0) {
            return Err(invalid("tail_probability", self.tail_probability, "must lie in (0, 1)"));
        }
        match self.mode {
            InterferenceMode::FrequencyReuse { factor: 0 } => Err(invalid("f_r", 0.0, "must be at least 1")),
            InterferenceMode::Beamforming { antennas: 0, .. } => Err(invalid("N_t", 0.0, "must be at least 1")),
            InterferenceMode::Beamforming {
                front_to_back_db: Some(g),
                ..
            } if !g.is_finite() => Err(invalid("G_FB_dB", g, "must be finite")),
            _ => Ok(()),
        }
    }

    pub fn interferer_psd(&self) -> f64 {
        self.interferer_power / self.interferer_bandwidth
    }

    /// Smallest `Y` that is served: the threshold SINR at the interferers'
    /// power density.
    pub fn xi_min(&self) -> f64 {
        db_to_linear(self.outage_sinr_db) / self.interferer_psd()
    }
}

fn quad_spec() -> QuadratureSpec {
    QuadratureSpec {
        relative_tolerance: 1e-9,
        absolute_tolerance: 1e-15,
        max_subdivisions: 2000,
    }
}

/// `P[R <= x] = 1 - exp(-pi lambda_B x^2)`.
pub fn nearest_bs_distance_cdf(bs_density: f64, x: f64) -> f64 {
    -(-PI * bs_density * x * x).exp_m1()
}

/// Power gain of the array towards angle `theta`, normalised so that the
/// boresight (`theta = pi/2`) gain is `n_t`.
pub fn beam_gain(theta: f64, n_t: u32, front_to_back_db: Option<f64>) -> f64 {
    let theta = theta.rem_euclid(2.0 * PI);
    if let Some(g_fb) = front_to_back_db {
        if theta > PI {
            return db_to_linear(-g_fb);
        }
    }
    let n = n_t as f64;
    let x = 0.5 * PI * theta.cos();
    let s = x.sin();
    if s.abs() < 1e-12 {
        return n;
    }
    let r = (n * x).sin() / s;
    r * r / n
}

/// Mean interference factor `J(xi)`: `I_a` at the interferers' relative
/// power, thinned or angle-averaged according to the mode.
pub fn interference_factor(scn: &MultiCellScenario, xi: f64) -> Result<f64> {
    let a = scn.cell.path_loss.exponent;
    let base = xi * scn.interferer_psd();
    let spec = quad_spec();
    match scn.mode {
        InterferenceMode::Baseline => Ok(integral_ia_with(a, base, &spec)?),
        InterferenceMode::FrequencyReuse { factor } => {
            let f = factor as f64;
            Ok(integral_ia_with(a, f * base, &spec)? / f)
        }
        InterferenceMode::Beamforming {
            antennas,
            front_to_back_db,
        } => {
            let n = antennas as f64;
            let x = base / n;
            if antennas == 1 && front_to_back_db.is_none() {
                return Ok(integral_ia_with(a, x, &spec)?);
            }
            let ia_at =
                |theta: f64| integral_ia_with(a, beam_gain(theta, antennas, None) * x, &spec).unwrap_or(f64::NAN);
            // The front half is symmetric about boresight; split at each null
            // of the array factor so every panel holds one lobe.
            let mut breaks = vec![0.0];
            for m in 1..antennas {
                let c = 2.0 * m as f64 / n;
                if c < 1.0 {
                    breaks.push(c.acos());
                }
            }
            breaks.push(0.5 * PI);
            breaks.sort_by(f64::total_cmp);
            let mut front = 0.0;
            for w in breaks.windows(2) {
                front += integrate(ia_at, w[0], w[1], &spec)?;
            }
            if !front.is_finite() {
                return Err(NumericsError::NonFinite("interference_factor").into());
            }
            // front covers [0, pi/2]; the full front half is twice that.
            let avg = match front_to_back_db {
                None => front / (0.5 * PI),
                Some(g) => {
                    let back = integral_ia_with(a, db_to_linear(-g) * x, &spec)?;
                    (2.0 * front + PI * back) / (2.0 * PI)
                }
            };
            Ok(avg)
        }
    }
}

/// `P[SINR > rho]` for a user at horizontal distance `r` from its station
/// transmitting at power spectral density `psd`.
pub fn coverage_prob_given_r(scn: &MultiCellScenario, r: f64, psd: f64, rho: f64) -> Result<f64> {
    if !(r >= 0.0) || !(psd > 0.0) || !(rho >= 0.0) {
        return Err(NumericsError::Domain {
            function: "coverage_prob_given_r",
            value: r.min(psd).min(rho),
            reason: "distance, density and threshold must be non-negative",
        }
        .into());
    }
    if rho == 0.0 {
        return Ok(1.0);
    }
    let pl = &scn.cell.path_loss;
    let radio = &scn.cell.radio;
    let xi = rho / psd;
    let d2 = pl.antenna_height * pl.antenna_height + r * r;
    let noise = radio.tau * xi * radio.noise_psd / (pl.attenuation_from_slant_sq(d2) * scn.mode.antennas() as f64);
    let interference = PI * scn.bs_density * d2 * interference_factor(scn, xi)?;
    Ok((-noise - interference).exp())
}

/// `P[Y > xi]`, averaged over the nearest-station distance.
pub fn y_ccdf(scn: &MultiCellScenario, xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(NumericsError::Domain {
            function: "y_ccdf",
            value: xi,
            reason: "xi must be positive",
        }
        .into());
    }
    let j = interference_factor(scn, xi)?;
    y_ccdf_given_factor(scn, xi, j)
}

fn y_ccdf_given_factor(scn: &MultiCellScenario, xi: f64, j: f64) -> Result<f64> {
    let pl = &scn.cell.path_loss;
    let radio = &scn.cell.radio;
    let a = pl.exponent;
    let lam = scn.bs_density;
    let x0 = lam * pl.antenna_height * pl.antenna_height;
    let k = radio.tau * xi * radio.noise_psd * pl.constant.powf(a) / scn.mode.antennas() as f64;
    let ln_k = k.ln();
    // u = lambda_B R^2 is exponential with rate pi; x = u + lambda_B L^2
    let f = |u: f64| {
        let x = u + x0;
        let noise = (ln_k + 0.5 * a * (x / lam).ln()).exp();
        (-PI * u - PI * x * j - noise).exp()
    };
    let decay = 1.0 / (PI * (1.0 + j));
    // where the noise term reaches one
    let u_noise = lam * (-ln_k * 2.0 / a).exp() - x0;
    let scale = if u_noise > 0.0 {
        decay.min(u_noise)
    } else {
        decay * 1e-3
    };
    let v = PI * integrate_semi_infinite_scaled(f, 0.0, scale.max(1e-12), &quad_spec())?;
    Ok(v.clamp(0.0, 1.0))
}

/// `Y` ccdf with a cached log-spaced table for bracketing.
#[derive(Debug, Clone, Serialize)]
pub struct YDistribution {
    #[serde(skip)]
    scenario: MultiCellScenario,
    /// `(xi, P[Y > xi])`, `xi` ascending.
    pub grid: Vec<(f64, f64)>,
    pub mode: InterferenceMode,
}

const GRID_POINTS_PER_DECADE: usize = 16;

impl YDistribution {
    pub fn build(scn: &MultiCellScenario) -> Result<Self> {
        // Span from well below the outage threshold up to where the ccdf is
        // negligible.
        let lo = scn.xi_min() * 1e-4;
        let mut hi = scn.xi_min() * 1e2;
        while y_ccdf(scn, hi)? > 1e-7 {
            hi *= 10.0;
            if hi > lo * 1e40 {
                return Err(NumericsError::NonFinite("YDistribution::build").into());
            }
        }
        let decades = (hi / lo).log10();
        let n = (decades * GRID_POINTS_PER_DECADE as f64).ceil() as usize + 1;
        let xs: Vec<f64> = (0..n)
            .map(|i| lo * 10f64.powf(decades * i as f64 / (n - 1) as f64))
            .collect();
        let values = xs.par_iter().map(|&x| y_ccdf(scn, x)).collect::<Result<Vec<_>>>()?;
        let mut grid: Vec<(f64, f64)> = xs.into_iter().zip(values).collect();
        // enforce monotonicity against quadrature jitter
        for i in 1..grid.len() {
            if grid[i].1 > grid[i - 1].1 {
                grid[i].1 = grid[i - 1].1;
            }
        }
        Ok(Self {
            scenario: scn.clone(),
            grid,
            mode: scn.mode,
        })
    }

    pub fn scenario(&self) -> &MultiCellScenario {
        &self.scenario
    }

    pub fn ccdf(&self, xi: f64) -> Result<f64> {
        y_ccdf(&self.scenario, xi)
    }

    /// The `xi` with `P[Y > xi] = p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        let (first, last) = (self.grid[0], self.grid[self.grid.len() - 1]);
        if !(p > last.1 && p < first.1) {
            return Err(NumericsError::Domain {
                function: "YDistribution::quantile",
                value: p,
                reason: "probability outside the tabulated range",
            }
            .into());
        }
        let i = self.grid.partition_point(|&(_, c)| c > p);
        let (lo, hi) = (self.grid[i - 1].0, self.grid[i].0);
        let f = |xi: f64| y_ccdf(&self.scenario, xi).map(|c| c - p).unwrap_or(f64::NAN);
        Ok(find_root_log_monotonic(f, lo, hi, 1e-11)?)
    }

    /// `int_0^inf P[Y > xi] dxi`, i.e. `E[Y]`.
    pub fn mean(&self) -> Result<f64> {
        // The integrand xi * ccdf(xi) in ln(xi) can peak many decades above
        // the median, so integrate decade by decade across the grid.
        let spec = quad_spec();
        let ccdf = |x: f64| y_ccdf(&self.scenario, x).unwrap_or(f64::NAN);
        let in_log = |s: f64| {
            let x = s.exp();
            ccdf(x) * x
        };
        let (xi_lo, xi_hi) = (self.grid[0].0, self.grid[self.grid.len() - 1].0);
        let head = integrate(|x| if x > 0.0 { ccdf(x) } else { 1.0 }, 0.0, xi_lo, &spec)?;
        let knots: Vec<f64> = self
            .grid
            .iter()
            .step_by(GRID_POINTS_PER_DECADE)
            .map(|g| g.0.ln())
            .chain([xi_hi.ln()])
            .collect();
        let body = knots
            .par_windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| integrate(in_log, w[0], w[1], &spec))
            .collect::<std::result::Result<Vec<_>, _>>()?
            .into_iter()
            .sum::<f64>();
        let tail = integrate_semi_infinite_scaled(in_log, xi_hi.ln(), 1.0, &spec)?;
        Ok(head + body + tail)
    }
}

/// `E[SINR]` at power spectral density `psd`.
pub fn mean_sinr(scn: &MultiCellScenario, psd: f64) -> Result<f64> {
    if !(psd > 0.0) {
        return Err(NumericsError::Domain {
            function: "mean_sinr",
            value: psd,
            reason: "power spectral density must be positive",
        }
        .into());
    }
    Ok(psd * YDistribution::build(scn)?.mean()?)
}

/// Groups formed from the `Y` distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YGroups {
    pub groups: Vec<TrafficGroup>,
    pub xi_min: f64,
    pub xi_max: f64,
    /// Probability mass of each equal-probability bin on `[xi_min, xi_max]`.
    pub bin_masses: Vec<f64>,
    /// `P[Y > xi_max]`, carried by the top group.
    pub tail_mass: f64,
    /// `P[Y > xi_min]`.
    pub served_fraction: f64,
}

impl YGroups {
    pub fn outage_fraction(&self) -> f64 {
        1.0 - self.served_fraction
    }

    pub fn served_traffic(&self) -> f64 {
        self.groups.iter().map(|g| g.demand).sum()
    }
}

/// Cuts `[xi_min, xi_max]` into `n_groups` equal-probability bins with
/// median representatives. `traffic_density` is in bit/s per m².
pub fn form_y_groups(scn: &MultiCellScenario, n_groups: usize, traffic_density: f64) -> Result<YGroups> {
    let dist = YDistribution::build(scn)?;
    form_y_groups_from(&dist, n_groups, traffic_density)
}

pub fn form_y_groups_from(dist: &YDistribution, n_groups: usize, traffic_density: f64) -> Result<YGroups> {
    if n_groups == 0 {
        return Err(SolveError::InvalidInput("at least one group is required".into()).into());
    }
    let scn = dist.scenario();
    let xi_min = scn.xi_min();
    let p_min = dist.ccdf(xi_min)?;
    let p_max = scn.tail_probability;
    if !(p_min > p_max) {
        return Err(SolveError::NoDemand.into());
    }
    let xi_max = dist.quantile(p_max)?;
    let cell_traffic = traffic_density / scn.bs_density;
    let n = n_groups as f64;
    let step = (p_min - p_max) / n;
    // probability levels, descending: p_min at xi_min down to p_max at xi_max
    let levels: Vec<f64> = (0..=n_groups).map(|i| p_min - step * i as f64).collect();
    let inner: Vec<f64> = levels[1..n_groups]
        .par_iter()
        .map(|&p| dist.quantile(p))
        .collect::<Result<Vec<_>>>()?;
    let mut edges = Vec::with_capacity(n_groups + 1);
    edges.push(xi_min);
    edges.extend(inner);
    edges.push(xi_max);
    let medians = (0..n_groups)
        .into_par_iter()
        .map(|i| dist.quantile(0.5 * (levels[i] + levels[i + 1])))
        .collect::<Result<Vec<_>>>()?;
    let bin_masses: Vec<f64> = levels.windows(2).map(|w| w[0] - w[1]).collect();
    let groups = (0..n_groups)
        .map(|i| {
            let mass = bin_masses[i] + if i + 1 == n_groups { p_max } else { 0.0 };
            TrafficGroup {
                quality: medians[i].clamp(edges[i], edges[i + 1]),
                demand: cell_traffic * mass,
                bin_lo: edges[i],
                bin_hi: edges[i + 1],
            }
        })
        .collect();
    Ok(YGroups {
        groups,
        xi_min,
        xi_max,
        bin_masses,
        tail_mass: p_max,
        served_fraction: p_min,
    })
}

/// SE-EE curve of a typical cell. SE is measured against the whole spectrum
/// `W`; each station allocates `W / f_r` of it.
pub fn tradeoff_curve_multicell(scn: &MultiCellScenario, n_groups: usize, sweep: &Sweep) -> Result<TradeoffCurve> {
    let groups = form_y_groups(scn, n_groups, scn.cell.traffic_density)?;
    tradeoff_curve_for_y_groups(scn, &groups, sweep)
}

pub fn tradeoff_curve_for_y_groups(scn: &MultiCellScenario, groups: &YGroups, sweep: &Sweep) -> Result<TradeoffCurve> {
    let served = groups.served_traffic();
    let bandwidths = sweep.bandwidths(served)?;
    let radio = &scn.cell.radio;
    let demands: Vec<f64> = groups.groups.iter().map(|g| g.demand).collect();
    let coefs: Vec<f64> = groups.groups.iter().map(|g| radio.snr_gap / g.quality).collect();
    let f_r = scn.mode.reuse_factor() as f64;
    let points = bandwidths
        .par_iter()
        .map(|&w| {
            let per_station = w / f_r;
            match water_fill(&demands, &coefs, per_station, radio.spectral_efficiency_cap) {
                Ok((_, shares)) => {
                    let power: f64 = shares.iter().map(|s| s.power).sum();
                    Ok(TradeoffPoint {
                        bandwidth: w,
                        spectral_efficiency: served / w,
                        energy_efficiency: served / power,
                        energy_efficiency_with_processing: served / (power + scn.cell.processing_power * per_station),
                        total_power: power,
                        feasible: power <= scn.cell.total_power && w <= scn.cell.total_bandwidth,
                    })
                }
                Err(SolveError::Channel(ChannelError::SpectralEfficiencyCap { .. })) => {
                    Ok(TradeoffPoint::unreachable(w, served))
                }
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TradeoffCurve {
        points,
        served_traffic: served,
        group_count: groups.groups.len(),
    })
}
