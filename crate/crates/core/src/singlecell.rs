//! Joint power/bandwidth allocation for one cell.
//!
//! Users with similar channel quality are pooled into [`TrafficGroup`]s. For a
//! total bandwidth `W` the transmit power
//!
//! ```text
//! sum_k  kappa_k (2^{T_k / W_k} - 1) W_k,    kappa_k = g N0 Gamma / l_k
//! ```
//!
//! is minimised subject to `sum_k W_k = W`. Stationarity of the Lagrangian
//! gives `W_k = T_k ln 2 / (1 + W0((lambda/kappa_k - 1)/e))`, so the whole
//! allocation hangs on the single multiplier `lambda`, found by a bracketed
//! search on a monotone residual.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{CellScenario, ChannelError, RadioConstants};
use crate::numerics::{find_root_log_monotonic, one_plus_w0_shifted, shifted_lambert_forward, NumericsError, LN2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("no group carries positive demand")]
    NoDemand,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// One repartition bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficGroup {
    /// Representative channel quality: attenuation `l_k` in a single cell,
    /// `Y_k` in (W/Hz)^-1 in the multi-cell model.
    pub quality: f64,
    /// Aggregated demand `T_k` in bit/s.
    pub demand: f64,
    pub bin_lo: f64,
    pub bin_hi: f64,
}

impl TrafficGroup {
    pub fn new(quality: f64, demand: f64, bin_lo: f64, bin_hi: f64) -> Result<Self, SolveError> {
        if !(demand >= 0.0) {
            return Err(SolveError::InvalidInput(format!("negative demand {demand}")));
        }
        if !(bin_lo <= bin_hi) || !(quality >= bin_lo && quality <= bin_hi) || !(quality > 0.0) {
            return Err(SolveError::InvalidInput(format!(
                "quality {quality} outside bin [{bin_lo}, {bin_hi}]"
            )));
        }
        Ok(Self {
            quality,
            demand,
            bin_lo,
            bin_hi,
        })
    }

    /// A group concentrated on a single quality value.
    pub fn point(quality: f64, demand: f64) -> Self {
        Self {
            quality,
            demand,
            bin_lo: quality,
            bin_hi: quality,
        }
    }
}

/// How the attenuation range of a disk is cut into bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinSpacing {
    /// Equal-width rings in horizontal distance.
    #[default]
    EqualRadius,
    /// Equal-width intervals in linear attenuation.
    EqualAttenuation,
    /// Equal-area rings, i.e. equal traffic under a uniform density.
    EqualTraffic,
}

/// Which attenuation stands in for a whole bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representative {
    /// Traffic-weighted geometric mean (the mean in dB).
    #[default]
    LogMean,
    /// Traffic-weighted harmonic mean; keeps `sum_u T_u / l_u` exact.
    Harmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PartitionRule {
    pub spacing: BinSpacing,
    pub representative: Representative,
}

/// Bandwidth and power granted to a group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupShare {
    pub bandwidth: f64,
    pub power: f64,
}

impl GroupShare {
    pub const ZERO: GroupShare = GroupShare {
        bandwidth: 0.0,
        power: 0.0,
    };

    pub fn power_spectral_density(&self) -> f64 {
        if self.bandwidth > 0.0 {
            self.power / self.bandwidth
        } else {
            0.0
        }
    }
}

/// Limits that decide whether an allocation is admissible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_power: f64,
    pub max_bandwidth: f64,
    /// Processing power per hertz of used bandwidth (W/Hz).
    pub processing_power: f64,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self {
            max_power: f64::INFINITY,
            max_bandwidth: f64::INFINITY,
            processing_power: 0.0,
        }
    }

    pub fn of(scenario: &CellScenario) -> Self {
        Self {
            max_power: scenario.total_power,
            max_bandwidth: scenario.total_bandwidth,
            processing_power: scenario.processing_power,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub total_bandwidth: f64,
    pub shares: Vec<GroupShare>,
    /// Lagrange multiplier in W/Hz.
    pub lambda: f64,
    pub total_power: f64,
    /// Throughput counted in the efficiencies, `c T_tot`.
    pub served_traffic: f64,
    pub spectral_efficiency: f64,
    pub energy_efficiency: f64,
    pub energy_efficiency_with_processing: f64,
    pub feasible: bool,
}

// ---------------------------------------------------------------------------
// Lagrangian solver
// ---------------------------------------------------------------------------

/// Bandwidth granted to demand `rate` with cost coefficient `coef` at
/// multiplier `lambda`.
fn bandwidth_at(rate: f64, coef: f64, lambda: f64) -> f64 {
    rate * LN2 / one_plus_w0_shifted(lambda / coef)
}

/// `W_k = T_k ln 2 / (1 + W0((lambda l_k / (g N0 Gamma) - 1)/e))`.
pub fn group_bandwidth(rate: f64, ell: f64, lambda: f64, radio: &RadioConstants) -> Result<f64, SolveError> {
    if !(lambda > 0.0) {
        return Err(NumericsError::Domain {
            function: "group_bandwidth",
            value: lambda,
            reason: "Lambert argument below -1/e (lambda must be positive)",
        }
        .into());
    }
    if !(ell > 0.0) || !(rate >= 0.0) {
        return Err(SolveError::InvalidInput(format!("rate {rate}, attenuation {ell}")));
    }
    Ok(bandwidth_at(rate, radio.power_scale() / ell, lambda))
}

/// The closed-form bracket on the multiplier: `(z e^{z+1} + 1) kappa` at the
/// cheapest and dearest coefficients, `z = ln2 T_tot / W - 1`.
fn multiplier_bracket(total_demand: f64, bandwidth: f64, coefs: &[f64]) -> (f64, f64) {
    let h = shifted_lambert_forward(LN2 * total_demand / bandwidth);
    let lo = coefs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = coefs.iter().cloned().fold(0.0, f64::max);
    (h * lo, h * hi)
}

/// Solves `sum_k W_k(lambda) = W` for positive demands and cost
/// coefficients. Returns the multiplier.
pub(crate) fn solve_multiplier(demands: &[f64], coefs: &[f64], bandwidth: f64) -> Result<f64, SolveError> {
    let total: f64 = demands.iter().sum();
    let (lo, hi) = multiplier_bracket(total, bandwidth, coefs);
    if !(lo > 0.0) || !hi.is_finite() {
        return Err(SolveError::InvalidInput(format!(
            "degenerate multiplier bracket [{lo}, {hi}]"
        )));
    }
    let residual = |lambda: f64| {
        bandwidth
            - demands
                .iter()
                .zip(coefs)
                .map(|(&t, &k)| bandwidth_at(t, k, lambda))
                .sum::<f64>()
    };
    if hi / lo - 1.0 < 1e-14 {
        return Ok(lo);
    }
    // Rounding can leave the residual a hair on the wrong side at the ends.
    let (lo_w, hi_w) = (lo * (1.0 - 1e-9), hi * (1.0 + 1e-9));
    let mut lambda = match find_root_log_monotonic(residual, lo_w, hi_w, 1e-12) {
        Ok(l) => l,
        Err(NumericsError::Bracket { f_lo, f_hi, .. }) => {
            if f_lo.abs() <= f_hi.abs() {
                lo
            } else {
                hi
            }
        }
        Err(e) => return Err(e.into()),
    };
    // One Newton polish on the monotone residual.
    let slope: f64 = demands
        .iter()
        .zip(coefs)
        .map(|(&t, &k)| {
            let v = one_plus_w0_shifted(lambda / k);
            // d/dlambda of T ln2 / v(lambda / k)
            t * LN2 / (v * v) / (v * v.exp()) / k
        })
        .sum();
    let r = residual(lambda);
    if slope > 0.0 && slope.is_finite() {
        let candidate = lambda - r / slope;
        if candidate >= lo_w && candidate <= hi_w && residual(candidate).abs() <= r.abs() {
            lambda = candidate;
        }
    }
    Ok(lambda)
}

/// Minimum-power split of `bandwidth` across groups with demands and cost
/// coefficients `kappa_k`. Zero-demand groups get `(0, 0)`.
pub(crate) fn water_fill(
    demands: &[f64],
    coefs: &[f64],
    bandwidth: f64,
    spectral_efficiency_cap: f64,
) -> Result<(f64, Vec<GroupShare>), SolveError> {
    if !(bandwidth > 0.0) {
        return Err(SolveError::InvalidInput(format!(
            "bandwidth {bandwidth} must be positive"
        )));
    }
    let active: Vec<usize> = (0..demands.len()).filter(|&i| demands[i] > 0.0).collect();
    if active.is_empty() {
        return Err(SolveError::NoDemand);
    }
    let d: Vec<f64> = active.iter().map(|&i| demands[i]).collect();
    let k: Vec<f64> = active.iter().map(|&i| coefs[i]).collect();
    let lambda = solve_multiplier(&d, &k, bandwidth)?;
    let mut shares = vec![GroupShare::ZERO; demands.len()];
    for (&i, (&t, &kappa)) in active.iter().zip(d.iter().zip(&k)) {
        let v = one_plus_w0_shifted(lambda / kappa);
        let w = t * LN2 / v;
        let se = t / w;
        if se > spectral_efficiency_cap {
            return Err(ChannelError::SpectralEfficiencyCap {
                spectral_efficiency: se,
                cap: spectral_efficiency_cap,
            }
            .into());
        }
        // 2^{T/W} = e^v
        shares[i] = GroupShare {
            bandwidth: w,
            power: kappa * v.exp_m1() * w,
        };
    }
    Ok((lambda, shares))
}

fn coefficients(groups: &[TrafficGroup], scale: f64) -> Vec<f64> {
    groups.iter().map(|g| scale / g.quality).collect()
}

fn demands(groups: &[TrafficGroup]) -> Vec<f64> {
    groups.iter().map(|g| g.demand).collect()
}

/// The multiplier `lambda*` that makes the group bandwidths sum to `bandwidth`.
pub fn solve_lambda(groups: &[TrafficGroup], bandwidth: f64, radio: &RadioConstants) -> Result<f64, SolveError> {
    solve_lambda_scaled(groups, bandwidth, radio.power_scale())
}

/// [`solve_lambda`] with an explicit power scale (`g N0 Gamma` in a single
/// cell, `Gamma` when the quality already folds in noise and interference).
pub fn solve_lambda_scaled(groups: &[TrafficGroup], bandwidth: f64, scale: f64) -> Result<f64, SolveError> {
    if !(bandwidth > 0.0) {
        return Err(SolveError::InvalidInput(format!(
            "bandwidth {bandwidth} must be positive"
        )));
    }
    let active: Vec<&TrafficGroup> = groups.iter().filter(|g| g.demand > 0.0).collect();
    if active.is_empty() {
        return Err(SolveError::NoDemand);
    }
    let d: Vec<f64> = active.iter().map(|g| g.demand).collect();
    let k: Vec<f64> = active.iter().map(|g| scale / g.quality).collect();
    solve_multiplier(&d, &k, bandwidth)
}

/// The closed-form bounds on `lambda*` for a set of groups.
pub fn lambda_bracket(groups: &[TrafficGroup], bandwidth: f64, radio: &RadioConstants) -> (f64, f64) {
    let active: Vec<&TrafficGroup> = groups.iter().filter(|g| g.demand > 0.0).collect();
    let total: f64 = active.iter().map(|g| g.demand).sum();
    let k: Vec<f64> = active.iter().map(|g| radio.power_scale() / g.quality).collect();
    multiplier_bracket(total, bandwidth, &k)
}

/// Optimal split of `bandwidth` over the groups, with the resulting
/// efficiencies and a feasibility flag against `budget`.
pub fn allocate(
    groups: &[TrafficGroup],
    bandwidth: f64,
    radio: &RadioConstants,
    budget: &Budget,
) -> Result<Allocation, SolveError> {
    let (lambda, shares) = water_fill(
        &demands(groups),
        &coefficients(groups, radio.power_scale()),
        bandwidth,
        radio.spectral_efficiency_cap,
    )?;
    let total_power: f64 = shares.iter().map(|s| s.power).sum();
    let served = radio.success_probability * groups.iter().map(|g| g.demand).sum::<f64>();
    Ok(Allocation {
        total_bandwidth: bandwidth,
        lambda,
        total_power,
        served_traffic: served,
        spectral_efficiency: served / bandwidth,
        energy_efficiency: served / total_power,
        energy_efficiency_with_processing: served / (total_power + budget.processing_power * bandwidth),
        feasible: total_power <= budget.max_power && bandwidth <= budget.max_bandwidth,
        shares,
    })
}

/// Per-user share inside a solved group: bandwidth proportional to demand at
/// the group's common power spectral density.
pub fn per_user_split(group: &TrafficGroup, share: &GroupShare, rate: f64) -> Result<GroupShare, SolveError> {
    if !(rate >= 0.0 && rate <= group.demand) {
        return Err(SolveError::InvalidInput(format!(
            "user rate {rate} outside [0, {}]",
            group.demand
        )));
    }
    if group.demand == 0.0 {
        return Ok(GroupShare::ZERO);
    }
    let bandwidth = share.bandwidth * rate / group.demand;
    Ok(GroupShare {
        bandwidth,
        power: share.power_spectral_density() * bandwidth,
    })
}

// ---------------------------------------------------------------------------
// Uniform disk repartition
// ---------------------------------------------------------------------------

/// Mean of `ln u` for `u` uniform on `[u1, u2]`, `0 < u1 <= u2`.
fn mean_log_uniform(u1: f64, u2: f64) -> f64 {
    let delta = 1.0 - u1 / u2;
    if delta < 1e-9 {
        return u2.ln() - 0.5 * delta;
    }
    // ln u2 - 1 + r (-ln r) / (1 - r),  r = u1/u2
    let r = 1.0 - delta;
    u2.ln() - 1.0 + r * (-(-delta).ln_1p()) / delta
}

/// Cuts the disk into `n_groups` bins with the default rule
/// (equal-width rings, log-mean representative).
pub fn partition_uniform_disk(scenario: &CellScenario, n_groups: usize) -> Result<Vec<TrafficGroup>, SolveError> {
    partition_uniform_disk_with(scenario, n_groups, PartitionRule::default())
}

pub fn partition_uniform_disk_with(
    scenario: &CellScenario,
    n_groups: usize,
    rule: PartitionRule,
) -> Result<Vec<TrafficGroup>, SolveError> {
    if n_groups == 0 {
        return Err(SolveError::InvalidInput("at least one group is required".into()));
    }
    let pl = &scenario.path_loss;
    let rc = scenario.cell_radius;
    let n = n_groups as f64;
    // Ring radii, outermost (cell edge) first.
    let radii: Vec<f64> = (0..=n_groups)
        .map(|i| {
            let frac = 1.0 - i as f64 / n;
            match rule.spacing {
                BinSpacing::EqualRadius => rc * frac,
                BinSpacing::EqualTraffic => rc * frac.sqrt(),
                BinSpacing::EqualAttenuation => {
                    let (edge, top) = (pl.attenuation(rc), pl.attenuation(0.0));
                    if i == 0 {
                        rc
                    } else if i == n_groups {
                        0.0
                    } else {
                        pl.distance_for_attenuation(edge + (top - edge) * i as f64 / n)
                    }
                }
            }
        })
        .collect();

    let a = pl.exponent;
    let l2 = pl.antenna_height * pl.antenna_height;
    let mut groups = Vec::with_capacity(n_groups);
    for w in radii.windows(2) {
        let (r_out, r_in) = (w[0], w[1]);
        let (s_out, s_in) = (r_out * r_out, r_in * r_in);
        let demand = scenario.traffic_density * std::f64::consts::PI * (s_out - s_in);
        let (bin_lo, bin_hi) = (pl.attenuation(r_out), pl.attenuation(r_in));
        let (u_in, u_out) = (l2 + s_in, l2 + s_out);
        let quality = if s_out - s_in <= 0.0 {
            bin_hi
        } else {
            match rule.representative {
                Representative::LogMean => {
                    let mean_ln_u = mean_log_uniform(u_in, u_out);
                    (-a * pl.constant.ln() - 0.5 * a * mean_ln_u).exp()
                }
                Representative::Harmonic => {
                    // (s_out - s_in) / int_{s_in}^{s_out} A^a u^{a/2} ds
                    let p = 0.5 * a + 1.0;
                    let diff = u_out.powf(p) * -(p * (u_in / u_out).ln()).exp_m1();
                    (s_out - s_in) * p / (pl.constant.powf(a) * diff)
                }
            }
        };
        groups.push(TrafficGroup {
            quality: quality.clamp(bin_lo, bin_hi),
            demand,
            bin_lo,
            bin_hi,
        });
    }
    Ok(groups)
}

// ---------------------------------------------------------------------------
// Sweeps and trade-off curves
// ---------------------------------------------------------------------------

/// The abscissa of a trade-off sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// Target spectral efficiencies in bit/s/Hz; `W = served / SE`.
    SpectralEfficiency(Vec<f64>),
    /// Total bandwidths in Hz.
    Bandwidth(Vec<f64>),
}

impl Sweep {
    pub fn log_spaced_se(min: f64, max: f64, points: usize) -> Self {
        let values = match points {
            0 => Vec::new(),
            1 => vec![min],
            _ => {
                let (a, b) = (min.ln(), max.ln());
                (0..points)
                    .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
                    .collect()
            }
        };
        Sweep::SpectralEfficiency(values)
    }

    /// 60 log-spaced points over 0.1..12 bit/s/Hz.
    pub fn default_se_grid() -> Self {
        Self::log_spaced_se(0.1, 12.0, 60)
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Sweep::SpectralEfficiency(v) | Sweep::Bandwidth(v) => v.is_empty(),
        }
    }

    /// Bandwidths in ascending order for a given served throughput.
    pub fn bandwidths(&self, served_traffic: f64) -> Result<Vec<f64>, SolveError> {
        let mut w: Vec<f64> = match self {
            Sweep::SpectralEfficiency(se) => se.iter().map(|&s| served_traffic / s).collect(),
            Sweep::Bandwidth(w) => w.clone(),
        };
        if w.is_empty() {
            return Err(SolveError::InvalidInput("empty sweep".into()));
        }
        if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(SolveError::InvalidInput(format!("sweep produces bandwidth {bad}")));
        }
        w.sort_by(f64::total_cmp);
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    /// Total spectrum `W` in Hz.
    pub bandwidth: f64,
    pub spectral_efficiency: f64,
    pub energy_efficiency: f64,
    pub energy_efficiency_with_processing: f64,
    pub total_power: f64,
    pub feasible: bool,
}

impl TradeoffPoint {
    /// A point whose allocation could not be formed (e.g. it needs a spectral
    /// efficiency beyond the cap). Kept in the curve, flagged.
    pub fn unreachable(bandwidth: f64, served_traffic: f64) -> Self {
        Self {
            bandwidth,
            spectral_efficiency: served_traffic / bandwidth,
            energy_efficiency: 0.0,
            energy_efficiency_with_processing: 0.0,
            total_power: f64::INFINITY,
            feasible: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    /// Ordered by bandwidth, ascending.
    pub points: Vec<TradeoffPoint>,
    pub served_traffic: f64,
    pub group_count: usize,
}

impl TradeoffCurve {
    pub fn any_feasible(&self) -> bool {
        self.points.iter().any(|p| p.feasible)
    }
}

/// SE-EE curve of the uniform-disk cell with `n_groups` groups.
pub fn tradeoff_curve(scenario: &CellScenario, n_groups: usize, sweep: &Sweep) -> Result<TradeoffCurve, SolveError> {
    let groups = partition_uniform_disk(scenario, n_groups)?;
    tradeoff_curve_for_groups(&groups, &scenario.radio, &Budget::of(scenario), sweep)
}

pub fn tradeoff_curve_for_groups(
    groups: &[TrafficGroup],
    radio: &RadioConstants,
    budget: &Budget,
    sweep: &Sweep,
) -> Result<TradeoffCurve, SolveError> {
    let served = radio.success_probability * groups.iter().map(|g| g.demand).sum::<f64>();
    if !(served > 0.0) {
        return Err(SolveError::NoDemand);
    }
    let bandwidths = sweep.bandwidths(served)?;
    let points = bandwidths
        .par_iter()
        .map(|&w| match allocate(groups, w, radio, budget) {
            Ok(a) => Ok(TradeoffPoint {
                bandwidth: w,
                spectral_efficiency: a.spectral_efficiency,
                energy_efficiency: a.energy_efficiency,
                energy_efficiency_with_processing: a.energy_efficiency_with_processing,
                total_power: a.total_power,
                feasible: a.feasible,
            }),
            Err(SolveError::Channel(ChannelError::SpectralEfficiencyCap { .. })) => {
                Ok(TradeoffPoint::unreachable(w, served))
            }
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TradeoffCurve {
        points,
        served_traffic: served,
        group_count: groups.len(),
    })
}

// ---------------------------------------------------------------------------
// Low-SNR bounds
// ---------------------------------------------------------------------------

/// Infinite-bandwidth EE limit `c T_tot / (g N0 Gamma ln2 sum_k T_k / l_k)`.
pub fn low_snr_bound(groups: &[TrafficGroup], radio: &RadioConstants) -> Result<f64, SolveError> {
    if let Some(g) = groups.iter().find(|g| !(g.quality > 0.0)) {
        return Err(SolveError::InvalidInput(format!("non-positive quality {}", g.quality)));
    }
    let total: f64 = groups.iter().map(|g| g.demand).sum();
    if !(total > 0.0) {
        return Err(SolveError::NoDemand);
    }
    let weighted: f64 = groups.iter().map(|g| g.demand / g.quality).sum();
    Ok(radio.success_probability * total / (radio.power_scale() * LN2 * weighted))
}

/// Closed form of [`low_snr_bound`] for uniform traffic on a disk; independent
/// of the traffic density.
pub fn low_snr_bound_uniform_disk(scenario: &CellScenario) -> f64 {
    let pl = &scenario.path_loss;
    let a = pl.exponent;
    let rc2 = scenario.cell_radius * scenario.cell_radius;
    let l2 = pl.antenna_height * pl.antenna_height;
    let p = 0.5 * a + 1.0;
    // (L^2 + R_C^2)^p - L^{2p}, written to avoid cancellation for small cells
    let bracket = l2.powf(p) * (p * (rc2 / l2).ln_1p()).exp_m1();
    let r = &scenario.radio;
    r.success_probability * (a + 2.0) * rc2
        / (2.0 * r.fading_margin * r.noise_psd * r.snr_gap * pl.constant.powf(a) * LN2 * bracket)
}
