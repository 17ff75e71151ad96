//! Physical-layer model: path loss, Rayleigh outage statistics and the
//! minimum transmit power needed to carry a rate over a bandwidth share.
//!
//! All quantities are SI: metres, hertz, watts, bits per second.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("invalid {field}: {value} ({reason})")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("spectral efficiency {spectral_efficiency} bit/s/Hz exceeds the cap of {cap}")]
    SpectralEfficiencyCap { spectral_efficiency: f64, cap: f64 },
}

fn require(cond: bool, field: &'static str, value: f64, reason: &'static str) -> Result<(), ChannelError> {
    if cond {
        Ok(())
    } else {
        Err(ChannelError::InvalidParameter { field, value, reason })
    }
}

/// Converts a power spectral density in dBm/Hz to W/Hz.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Power-law attenuation `l(R) = (A sqrt(L^2 + R^2))^{-a}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    /// Path-loss constant `A` in 1/m.
    pub constant: f64,
    /// Path-loss exponent `a`, strictly above 2.
    pub exponent: f64,
    /// Base-station antenna height `L` in metres.
    pub antenna_height: f64,
}

impl PathLossModel {
    pub fn new(constant: f64, exponent: f64, antenna_height: f64) -> Result<Self, ChannelError> {
        require(constant > 0.0, "path-loss constant", constant, "must be positive")?;
        require(exponent > 2.0, "path-loss exponent", exponent, "must exceed 2")?;
        require(
            antenna_height > 0.0,
            "antenna height",
            antenna_height,
            "must be positive",
        )?;
        Ok(Self {
            constant,
            exponent,
            antenna_height,
        })
    }

    /// Calibration used throughout: `A = 8.38 /m`, `L = 30 m`.
    pub fn reference(exponent: f64) -> Result<Self, ChannelError> {
        Self::new(8.38, exponent, 30.0)
    }

    pub fn with_exponent(self, exponent: f64) -> Result<Self, ChannelError> {
        Self::new(self.constant, exponent, self.antenna_height)
    }

    /// Slant distance `D = sqrt(L^2 + R^2)`.
    pub fn slant_distance(&self, horizontal: f64) -> f64 {
        self.antenna_height.hypot(horizontal)
    }

    pub fn attenuation(&self, horizontal: f64) -> f64 {
        (self.constant * self.slant_distance(horizontal)).powf(-self.exponent)
    }

    /// Attenuation from a squared slant distance `D^2`.
    pub fn attenuation_from_slant_sq(&self, slant_sq: f64) -> f64 {
        (self.constant * self.constant * slant_sq).powf(-0.5 * self.exponent)
    }

    /// Horizontal distance at which the attenuation equals `ell`; zero when
    /// `ell` is at or above the on-site value `l(0)`.
    pub fn distance_for_attenuation(&self, ell: f64) -> f64 {
        let slant = ell.powf(-1.0 / self.exponent) / self.constant;
        let r2 = slant * slant - self.antenna_height * self.antenna_height;
        r2.max(0.0).sqrt()
    }
}

/// Receiver and fading constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConstants {
    /// Noise power spectral density `N0` in W/Hz.
    pub noise_psd: f64,
    /// SNR gap `Gamma >= 1`.
    pub snr_gap: f64,
    /// `tau = 1 / E[h]`.
    pub tau: f64,
    /// Success probability `c` in (0, 1] that sizes the power margin.
    pub success_probability: f64,
    /// Fading margin `g`.
    pub fading_margin: f64,
    /// Largest admissible `T / w` in bit/s/Hz.
    pub spectral_efficiency_cap: f64,
}

pub const DEFAULT_NOISE_DBM_PER_HZ: f64 = -174.0;
pub const DEFAULT_SPECTRAL_EFFICIENCY_CAP: f64 = 60.0;

impl Default for RadioConstants {
    fn default() -> Self {
        Self::no_fading(dbm_to_watts(DEFAULT_NOISE_DBM_PER_HZ), 1.0, 1.0).expect("defaults are valid")
    }
}

impl RadioConstants {
    /// No-fading convention: `g = 1` and every served bit counts (`c = 1`).
    pub fn no_fading(noise_psd: f64, snr_gap: f64, tau: f64) -> Result<Self, ChannelError> {
        require(noise_psd > 0.0, "noise psd", noise_psd, "must be positive")?;
        require(snr_gap >= 1.0, "snr gap", snr_gap, "must be at least 1")?;
        require(tau > 0.0, "tau", tau, "must be positive")?;
        Ok(Self {
            noise_psd,
            snr_gap,
            tau,
            success_probability: 1.0,
            fading_margin: 1.0,
            spectral_efficiency_cap: DEFAULT_SPECTRAL_EFFICIENCY_CAP,
        })
    }

    /// Rayleigh outage sizing: power chosen so that `P(C >= T) = c`, which
    /// gives the margin `g = tau / ln(1/c)`.
    pub fn with_outage(noise_psd: f64, snr_gap: f64, tau: f64, success_probability: f64) -> Result<Self, ChannelError> {
        require(
            success_probability > 0.0 && success_probability < 1.0,
            "success probability",
            success_probability,
            "must lie in (0, 1) for outage sizing",
        )?;
        let mut radio = Self::no_fading(noise_psd, snr_gap, tau)?;
        radio.success_probability = success_probability;
        radio.fading_margin = tau / (1.0 / success_probability).ln();
        Ok(radio)
    }

    /// Picks [`Self::no_fading`] for `c = 1` and [`Self::with_outage`] otherwise.
    pub fn from_success_probability(
        noise_psd: f64,
        snr_gap: f64,
        tau: f64,
        success_probability: f64,
    ) -> Result<Self, ChannelError> {
        if success_probability == 1.0 {
            Self::no_fading(noise_psd, snr_gap, tau)
        } else {
            Self::with_outage(noise_psd, snr_gap, tau, success_probability)
        }
    }

    /// `g N0 Gamma`, the watts per hertz needed per unit of `(2^{T/w} - 1) / l`.
    pub fn power_scale(&self) -> f64 {
        self.fading_margin * self.noise_psd * self.snr_gap
    }
}

/// Minimum transmit power carrying `rate` over `bandwidth` on a link with
/// attenuation `ell`: `p = (g N0 Gamma / l)(2^{T/w} - 1) w`.
pub fn min_link_power(rate: f64, bandwidth: f64, ell: f64, radio: &RadioConstants) -> Result<f64, ChannelError> {
    require(rate >= 0.0, "rate", rate, "must be non-negative")?;
    require(bandwidth > 0.0, "bandwidth", bandwidth, "must be positive")?;
    require(ell > 0.0, "attenuation", ell, "must be positive")?;
    let se = rate / bandwidth;
    if se > radio.spectral_efficiency_cap {
        return Err(ChannelError::SpectralEfficiencyCap {
            spectral_efficiency: se,
            cap: radio.spectral_efficiency_cap,
        });
    }
    Ok(radio.power_scale() / ell * (se * std::f64::consts::LN_2).exp_m1() * bandwidth)
}

/// Probability that a Rayleigh link of capacity `w log2(1 + p h l / (w N0 Gamma))`
/// carries `rate`: `exp(-tau w N0 Gamma (2^{T/w} - 1) / (p l))`.
pub fn outage_success_prob(
    rate: f64,
    bandwidth: f64,
    power: f64,
    ell: f64,
    radio: &RadioConstants,
) -> Result<f64, ChannelError> {
    require(bandwidth > 0.0, "bandwidth", bandwidth, "must be positive")?;
    require(power > 0.0, "power", power, "must be positive")?;
    require(ell > 0.0, "attenuation", ell, "must be positive")?;
    let growth = (rate / bandwidth * std::f64::consts::LN_2).exp_m1();
    Ok((-radio.tau * bandwidth * radio.noise_psd * radio.snr_gap * growth / (power * ell)).exp())
}

/// Single-cell deployment with uniform traffic over a disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScenario {
    pub path_loss: PathLossModel,
    pub radio: RadioConstants,
    /// Cell radius `R_C` in metres.
    pub cell_radius: f64,
    /// Traffic density `T0` in bit/s/m^2.
    pub traffic_density: f64,
    /// Transmit-power budget `P_tot` in watts.
    pub total_power: f64,
    /// Bandwidth budget `W_tot` in hertz.
    pub total_bandwidth: f64,
    /// Processing power per hertz of used bandwidth, W/Hz.
    pub processing_power: f64,
}

/// 10 Mbit/s per km^2 in bit/s/m^2.
pub const DEFAULT_TRAFFIC_DENSITY: f64 = 10.0;
pub const DEFAULT_TOTAL_POWER: f64 = 40.0;
pub const DEFAULT_TOTAL_BANDWIDTH: f64 = 100e6;

impl CellScenario {
    pub fn new(
        path_loss: PathLossModel,
        radio: RadioConstants,
        cell_radius: f64,
        traffic_density: f64,
        total_power: f64,
        total_bandwidth: f64,
        processing_power: f64,
    ) -> Result<Self, ChannelError> {
        require(cell_radius > 0.0, "cell radius", cell_radius, "must be positive")?;
        require(
            traffic_density > 0.0,
            "traffic density",
            traffic_density,
            "must be positive",
        )?;
        require(total_power > 0.0, "total power", total_power, "must be positive")?;
        require(
            total_bandwidth > 0.0,
            "total bandwidth",
            total_bandwidth,
            "must be positive",
        )?;
        require(
            processing_power >= 0.0,
            "processing power",
            processing_power,
            "must be non-negative",
        )?;
        Ok(Self {
            path_loss,
            radio,
            cell_radius,
            traffic_density,
            total_power,
            total_bandwidth,
            processing_power,
        })
    }

    /// Reference scenario for a given exponent and radius with the default
    /// constants (N0 = -174 dBm/Hz, Gamma = g = 1, A = 8.38 /m, L = 30 m,
    /// T0 = 10 Mbit/s/km^2).
    pub fn reference(exponent: f64, cell_radius: f64) -> Result<Self, ChannelError> {
        Self::new(
            PathLossModel::reference(exponent)?,
            RadioConstants::default(),
            cell_radius,
            DEFAULT_TRAFFIC_DENSITY,
            DEFAULT_TOTAL_POWER,
            DEFAULT_TOTAL_BANDWIDTH,
            0.0,
        )
    }

    /// Total offered traffic `T0 pi R_C^2` in bit/s.
    pub fn total_traffic(&self) -> f64 {
        self.traffic_density * std::f64::consts::PI * self.cell_radius * self.cell_radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_radio() -> RadioConstants {
        RadioConstants::no_fading(3.981e-21, 1.0, 1.0).unwrap()
    }

    #[test]
    fn attenuation_examples() {
        let m = PathLossModel::new(8.38, 3.5, 30.0).unwrap();
        let at0 = m.attenuation(0.0);
        assert!((at0 - (8.38f64 * 30.0).powf(-3.5)).abs() <= 1e-15 * at0);
        let hand = (-3.5 * 251.4f64.ln()).exp();
        assert!((at0 / hand - 1.0).abs() < 1e-12);
        assert!(m.attenuation(100.0) > m.attenuation(500.0));
    }

    #[test]
    fn attenuation_scale_consistency() {
        let m = PathLossModel::new(8.38, 3.7, 30.0).unwrap();
        for &k in &[0.1, 2.0, 17.0] {
            let scaled = PathLossModel::new(8.38 / k, 3.7, 30.0 * k).unwrap();
            for &r in &[0.0, 50.0, 800.0] {
                let a = m.attenuation(r);
                let b = scaled.attenuation(k * r);
                assert!((a / b - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn distance_inverts_attenuation() {
        let m = PathLossModel::reference(4.2).unwrap();
        for &r in &[0.0, 1.0, 120.0, 999.0] {
            let back = m.distance_for_attenuation(m.attenuation(r));
            assert!((back - r).abs() < 1e-6 * r.max(1.0));
        }
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(PathLossModel::new(0.0, 3.0, 30.0).is_err());
        assert!(PathLossModel::new(8.0, 2.0, 30.0).is_err());
        assert!(PathLossModel::new(8.0, 3.0, 0.0).is_err());
        assert!(RadioConstants::with_outage(1e-20, 1.0, 1.0, 1.0).is_err());
        assert!(RadioConstants::no_fading(1e-20, 0.5, 1.0).is_err());
    }

    #[test]
    fn min_power_examples() {
        let radio = unit_radio();
        assert_eq!(min_link_power(0.0, 1e6, 1.0, &radio).unwrap(), 0.0);
        let p = min_link_power(1e6, 1e6, 1.0, &radio).unwrap();
        assert!((p / (3.981e-21 * 1e6) - 1.0).abs() < 1e-12);
        let p = min_link_power(2e6, 1e6, 1e-10, &radio).unwrap();
        assert!((p / 1.1943e-4 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_power_rejects_runaway_spectral_efficiency() {
        let radio = unit_radio();
        let err = min_link_power(61.0, 1.0, 1.0, &radio).unwrap_err();
        assert!(matches!(err, ChannelError::SpectralEfficiencyCap { .. }));
    }

    #[test]
    fn outage_examples() {
        let radio = RadioConstants::with_outage(4e-21, 1.0, 1.0, 0.9).unwrap();
        assert_eq!(outage_success_prob(0.0, 1e6, 1.0, 1e-10, &radio).unwrap(), 1.0);
        let p = min_link_power(3e6, 1e6, 1e-10, &radio).unwrap();
        let c = outage_success_prob(3e6, 1e6, p, 1e-10, &radio).unwrap();
        assert!((c - 0.9).abs() < 1e-12);
        let c2 = outage_success_prob(3e6, 1e6, 2.0 * p, 1e-10, &radio).unwrap();
        assert!(c2 > c);
    }

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watts(-174.0) / 3.981_071_705_534_97e-21 - 1.0).abs() < 1e-12);
        assert!((db_to_linear(-15.0) - 0.031_622_776_601_683_79).abs() < 1e-15);
        assert!((linear_to_db(100.0) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn total_traffic_of_reference_disk() {
        let s = CellScenario::reference(3.5, 1000.0).unwrap();
        assert!((s.total_traffic() - 10.0 * std::f64::consts::PI * 1e6).abs() < 1e-6);
    }
}
