//! Scenario files: TOML with unit-suffixed keys.

use anyhow::{bail, Context, Result};
use ofdma_ee::channel::{db_to_linear, dbm_to_watts, CellScenario, PathLossModel, RadioConstants};
use ofdma_ee::multicell::{InterferenceMode, MultiCellScenario};
use ofdma_ee::singlecell::{BinSpacing, PartitionRule, Representative, Sweep};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Radio {
    #[serde(rename = "N0_dBm_per_Hz")]
    pub n0_dbm_per_hz: f64,
    #[serde(rename = "snr_gap_dB")]
    pub snr_gap_db: f64,
    /// Rate of the exponential fading law (`1 / E[h]`).
    pub tau: f64,
    /// Outage-success probability `c`; 1 disables the fading margin.
    pub success_probability: f64,
}

impl Default for Radio {
    fn default() -> Self {
        Self {
            n0_dbm_per_hz: -174.0,
            snr_gap_db: 0.0,
            tau: 1.0,
            success_probability: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLoss {
    #[serde(rename = "A_per_m")]
    pub a_per_m: f64,
    pub a: f64,
    #[serde(rename = "L_m")]
    pub l_m: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self {
            a_per_m: 8.38,
            a: 3.5,
            l_m: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Cell {
    #[serde(rename = "R_C_m")]
    pub r_c_m: f64,
    #[serde(rename = "T0_Mbps_per_km2")]
    pub t0_mbps_per_km2: f64,
    #[serde(rename = "P_tot_W")]
    pub p_tot_w: f64,
    #[serde(rename = "W_tot_MHz")]
    pub w_tot_mhz: f64,
    #[serde(rename = "P_SP_W_per_MHz")]
    pub p_sp_w_per_mhz: f64,
    #[serde(rename = "N_K")]
    pub n_k: usize,
    pub bin_spacing: BinSpacing,
    pub representative: Representative,
}

impl Default for Cell {
    fn default() -> Self {
        Self {
            r_c_m: 500.0,
            t0_mbps_per_km2: 10.0,
            p_tot_w: 40.0,
            w_tot_mhz: 100.0,
            p_sp_w_per_mhz: 0.0,
            n_k: 10,
            bin_spacing: BinSpacing::default(),
            representative: Representative::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Baseline,
    FrequencyReuse,
    Beamforming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiCell {
    #[serde(rename = "lambdaB_per_km2")]
    pub lambda_b_per_km2: f64,
    #[serde(rename = "P_I_W")]
    pub p_i_w: f64,
    #[serde(rename = "W_I_MHz")]
    pub w_i_mhz: f64,
    pub mode: ModeName,
    pub f_r: u32,
    #[serde(rename = "N_t")]
    pub n_t: u32,
    /// Constant back-half gain; absent mirrors the array factor.
    #[serde(rename = "G_FB_dB", skip_serializing_if = "Option::is_none")]
    pub g_fb_db: Option<f64>,
    #[serde(rename = "outage_SINR_dB")]
    pub outage_sinr_db: f64,
    pub tail_probability: f64,
}

impl Default for MultiCell {
    fn default() -> Self {
        Self {
            lambda_b_per_km2: 1.0,
            p_i_w: 20.0,
            w_i_mhz: 10.0,
            mode: ModeName::Baseline,
            f_r: 1,
            n_t: 1,
            g_fb_db: None,
            outage_sinr_db: -15.0,
            tail_probability: 1e-3,
        }
    }
}

/// Sweep axes. Lists here override the matching scalar of the other
/// sections.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    #[serde(rename = "SE_bps_per_Hz", skip_serializing_if = "Option::is_none")]
    pub se_bps_per_hz: Option<Vec<f64>>,
    #[serde(rename = "SE_min_bps_per_Hz", skip_serializing_if = "Option::is_none")]
    pub se_min_bps_per_hz: Option<f64>,
    #[serde(rename = "SE_max_bps_per_Hz", skip_serializing_if = "Option::is_none")]
    pub se_max_bps_per_hz: Option<f64>,
    #[serde(rename = "SE_points", skip_serializing_if = "Option::is_none")]
    pub se_points: Option<usize>,
    #[serde(rename = "W_MHz", skip_serializing_if = "Option::is_none")]
    pub w_mhz: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(rename = "R_C_m", skip_serializing_if = "Option::is_none")]
    pub r_c_m: Option<Vec<f64>>,
    #[serde(rename = "P_SP_W_per_MHz", skip_serializing_if = "Option::is_none")]
    pub p_sp_w_per_mhz: Option<Vec<f64>>,
    #[serde(rename = "N_K", skip_serializing_if = "Option::is_none")]
    pub n_k: Option<Vec<usize>>,
    #[serde(rename = "lambdaB_per_km2", skip_serializing_if = "Option::is_none")]
    pub lambda_b_per_km2: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_r: Option<Vec<u32>>,
    #[serde(rename = "N_t", skip_serializing_if = "Option::is_none")]
    pub n_t: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarlo {
    pub samples: usize,
    /// Transmit density used for the mean-SINR comparison.
    #[serde(rename = "psd_W_per_MHz")]
    pub psd_w_per_mhz: f64,
    /// Window radius in units of `1 / sqrt(pi lambda_B)`; at least 20.
    pub window_factor: f64,
    pub ks_tolerance: f64,
    /// Standard errors allowed between simulated and analytic mean SINR.
    pub mean_sigma_tolerance: f64,
    /// Multiplies the density seen by the analytic side only. Diagnostic
    /// for checking that validation detects a mismatch.
    pub analytic_density_scale: f64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        Self {
            samples: 100_000,
            psd_w_per_mhz: 2.0,
            window_factor: 20.0,
            ks_tolerance: 0.01,
            mean_sigma_tolerance: 3.0,
            analytic_density_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub radio: Radio,
    pub pathloss: PathLoss,
    pub cell: Cell,
    pub multicell: MultiCell,
    pub sweep: SweepSection,
    pub montecarlo: MonteCarlo,
}

/// Parses the right-hand side of `--set`: a TOML value, or a bare string.
fn parse_override_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl ScenarioFile {
    /// Reads a file (or the defaults when `path` is `None`) and applies
    /// `section.key=value` overrides.
    pub fn load(path: Option<&std::path::Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().context("parsing scenario file")?;
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .with_context(|| format!("override `{o}` is not of the form section.key=value"))?;
            let (section, field) = key
                .trim()
                .split_once('.')
                .with_context(|| format!("override key `{key}` needs a section"))?;
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let Some(sub) = entry.as_table_mut() else {
                bail!("`{section}` is not a section");
            };
            sub.insert(field.to_string(), parse_override_value(value.trim()));
        }
        let file: ScenarioFile = toml::Value::Table(table).try_into().context("invalid scenario")?;
        Ok(file)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn radio_constants(&self) -> Result<RadioConstants> {
        Ok(RadioConstants::from_success_probability(
            dbm_to_watts(self.radio.n0_dbm_per_hz),
            db_to_linear(self.radio.snr_gap_db),
            self.radio.tau,
            self.radio.success_probability,
        )?)
    }

    pub fn partition_rule(&self) -> PartitionRule {
        PartitionRule {
            spacing: self.cell.bin_spacing,
            representative: self.cell.representative,
        }
    }

    pub fn cell_scenario(&self, a: f64, r_c_m: f64, p_sp_w_per_mhz: f64) -> Result<CellScenario> {
        let pl = PathLossModel::new(self.pathloss.a_per_m, a, self.pathloss.l_m)?;
        Ok(CellScenario::new(
            pl,
            self.radio_constants()?,
            r_c_m,
            // 1 Mbit/s per km^2 is 1 bit/s per m^2
            self.cell.t0_mbps_per_km2,
            self.cell.p_tot_w,
            self.cell.w_tot_mhz * 1e6,
            p_sp_w_per_mhz * 1e-6,
        )?)
    }

    pub fn interference_mode(&self, f_r: u32, n_t: u32) -> InterferenceMode {
        match self.multicell.mode {
            ModeName::Baseline => InterferenceMode::Baseline,
            ModeName::FrequencyReuse => InterferenceMode::FrequencyReuse { factor: f_r },
            ModeName::Beamforming => InterferenceMode::Beamforming {
                antennas: n_t,
                front_to_back_db: self.multicell.g_fb_db,
            },
        }
    }

    pub fn multicell_scenario(
        &self,
        a: f64,
        lambda_b_per_km2: f64,
        f_r: u32,
        n_t: u32,
        p_sp_w_per_mhz: f64,
    ) -> Result<MultiCellScenario> {
        let density = lambda_b_per_km2 * 1e-6;
        let cell = self.cell_scenario(a, 1.0 / (std::f64::consts::PI * density).sqrt(), p_sp_w_per_mhz)?;
        let mut s = MultiCellScenario::new(
            cell,
            density,
            self.multicell.p_i_w,
            self.multicell.w_i_mhz * 1e6,
            self.interference_mode(f_r, n_t),
        )?;
        s.outage_sinr_db = self.multicell.outage_sinr_db;
        s.tail_probability = self.multicell.tail_probability;
        s.validate()?;
        Ok(s)
    }

    pub fn sweep(&self) -> Result<Sweep> {
        let s = &self.sweep;
        let sweep = if let Some(list) = &s.se_bps_per_hz {
            Sweep::SpectralEfficiency(list.clone())
        } else if let Some(list) = &s.w_mhz {
            Sweep::Bandwidth(list.iter().map(|w| w * 1e6).collect())
        } else if s.se_min_bps_per_hz.is_some() || s.se_max_bps_per_hz.is_some() || s.se_points.is_some() {
            Sweep::log_spaced_se(
                s.se_min_bps_per_hz.unwrap_or(0.1),
                s.se_max_bps_per_hz.unwrap_or(12.0),
                s.se_points.unwrap_or(60),
            )
        } else {
            Sweep::default_se_grid()
        };
        if sweep.is_empty() {
            bail!("sweep is empty");
        }
        let values = match &sweep {
            Sweep::SpectralEfficiency(v) | Sweep::Bandwidth(v) => v,
        };
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            bail!("sweep value {bad} must be positive");
        }
        Ok(sweep)
    }

    pub fn exponents(&self) -> Vec<f64> {
        self.sweep.a.clone().unwrap_or_else(|| vec![self.pathloss.a])
    }

    pub fn radii(&self) -> Vec<f64> {
        self.sweep.r_c_m.clone().unwrap_or_else(|| vec![self.cell.r_c_m])
    }

    pub fn processing_powers(&self) -> Vec<f64> {
        self.sweep
            .p_sp_w_per_mhz
            .clone()
            .unwrap_or_else(|| vec![self.cell.p_sp_w_per_mhz])
    }

    pub fn group_counts(&self) -> Vec<usize> {
        self.sweep.n_k.clone().unwrap_or_else(|| vec![self.cell.n_k])
    }

    pub fn densities(&self) -> Vec<f64> {
        self.sweep
            .lambda_b_per_km2
            .clone()
            .unwrap_or_else(|| vec![self.multicell.lambda_b_per_km2])
    }

    /// Reuse factors, or `[1]` outside frequency-reuse mode.
    pub fn reuse_factors(&self) -> Vec<u32> {
        match self.multicell.mode {
            ModeName::FrequencyReuse => self.sweep.f_r.clone().unwrap_or_else(|| vec![self.multicell.f_r]),
            _ => vec![1],
        }
    }

    /// Antenna counts, or `[1]` outside beamforming mode.
    pub fn antenna_counts(&self) -> Vec<u32> {
        match self.multicell.mode {
            ModeName::Beamforming => self.sweep.n_t.clone().unwrap_or_else(|| vec![self.multicell.n_t]),
            _ => vec![1],
        }
    }
}
