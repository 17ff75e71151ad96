use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ofdma_ee::montecarlo::{empirical_ccdf, ks_distance, mean_with_error, sample_y, SimConfig};
use ofdma_ee::multicell::{form_y_groups_from, nearest_bs_distance_cdf, tradeoff_curve_for_y_groups, YDistribution};
use ofdma_ee::singlecell::{
    low_snr_bound_uniform_disk, partition_uniform_disk_with, tradeoff_curve_for_groups, Budget, TradeoffCurve,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::scenario::ScenarioFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Infeasible,
    ValidationFailed,
}

/// One row of a curve table. Field names are the column headers.
#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub scenario_id: String,
    pub mode: &'static str,
    pub a: f64,
    #[serde(rename = "R_C_m")]
    pub r_c_m: Option<f64>,
    #[serde(rename = "lambdaB_per_km2")]
    pub lambda_b_per_km2: Option<f64>,
    pub f_r: u32,
    #[serde(rename = "N_t")]
    pub n_t: u32,
    #[serde(rename = "N_K")]
    pub n_k: usize,
    #[serde(rename = "W_Hz")]
    pub w_hz: f64,
    #[serde(rename = "SE_bps_per_Hz")]
    pub se_bps_per_hz: f64,
    #[serde(rename = "EE_bps_per_W")]
    pub ee_bps_per_w: f64,
    #[serde(rename = "EE_proc_bps_per_W")]
    pub ee_proc_bps_per_w: f64,
    #[serde(rename = "total_power_W")]
    pub total_power_w: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub scenario_id: String,
    pub a: f64,
    #[serde(rename = "R_C_m")]
    pub r_c_m: f64,
    #[serde(rename = "EE_star_bps_per_W")]
    pub ee_star_bps_per_w: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    files: Vec<String>,
    feasible_rows: usize,
    total_rows: usize,
    scenario: &'a ScenarioFile,
}

pub struct Run<'a> {
    pub scenario: &'a ScenarioFile,
    pub out: &'a Path,
    pub format: Format,
}

fn write_table<T: Serialize>(path: &Path, rows: &[T], format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut text = serde_json::to_string_pretty(rows)?;
            text.push('\n');
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

impl Run<'_> {
    fn prepare(&self) -> Result<()> {
        fs::create_dir_all(self.out).with_context(|| format!("creating {}", self.out.display()))
    }

    fn path(&self, stem: &str) -> PathBuf {
        self.out.join(format!("{stem}.{}", self.format.extension()))
    }

    fn write_manifest(
        &self,
        command: &str,
        mut files: Vec<String>,
        feasible: usize,
        total: usize,
        seed: Option<(u64, usize)>,
    ) -> Result<()> {
        files.push("scenario.toml".into());
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            format: self.format,
            seed: seed.map(|s| s.0),
            samples: seed.map(|s| s.1),
            files,
            feasible_rows: feasible,
            total_rows: total,
            scenario: self.scenario,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.out.join("manifest.json"), text)?;
        fs::write(self.out.join("scenario.toml"), self.scenario.to_toml()?)?;
        Ok(())
    }

    /// Writes one table per curve plus the manifest. Infeasible everywhere
    /// maps to [`Status::Infeasible`].
    fn finish_curves(&self, command: &str, tables: Vec<(String, Vec<CurveRow>)>) -> Result<Status> {
        let mut files = Vec::new();
        let (mut feasible, mut total) = (0, 0);
        for (id, rows) in &tables {
            let path = self.path(id);
            write_table(&path, rows, self.format)?;
            files.push(path.file_name().unwrap().to_string_lossy().into_owned());
            feasible += rows.iter().filter(|r| r.feasible).count();
            total += rows.len();
        }
        self.write_manifest(command, files, feasible, total, None)?;
        println!(
            "{command}: {} curves, {feasible}/{total} feasible points, written to {}",
            tables.len(),
            self.out.display()
        );
        Ok(if feasible == 0 { Status::Infeasible } else { Status::Ok })
    }

    pub fn single_cell(&self) -> Result<Status> {
        let s = self.scenario;
        let sweep = s.sweep()?;
        let mut combos = Vec::new();
        for a in s.exponents() {
            for r in s.radii() {
                for p_sp in s.processing_powers() {
                    for n_k in s.group_counts() {
                        combos.push((a, r, p_sp, n_k));
                    }
                }
            }
        }
        if combos.is_empty() {
            bail!("sweep has no combinations");
        }
        let tables = combos
            .par_iter()
            .map(|&(a, r, p_sp, n_k)| {
                let cell = s.cell_scenario(a, r, p_sp)?;
                let groups = partition_uniform_disk_with(&cell, n_k, s.partition_rule())?;
                let curve = tradeoff_curve_for_groups(&groups, &cell.radio, &Budget::of(&cell), &sweep)?;
                let id = format!("single_cell_a{a}_R{r}_psp{p_sp}_nk{n_k}");
                Ok((
                    id.clone(),
                    rows(&curve, &id, "single_cell", a, Some(r), None, 1, 1, n_k),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        self.finish_curves("single-cell", tables)
    }

    pub fn multi_cell(&self) -> Result<Status> {
        let s = self.scenario;
        let sweep = s.sweep()?;
        let mut combos = Vec::new();
        for a in s.exponents() {
            for lam in s.densities() {
                for f_r in s.reuse_factors() {
                    for n_t in s.antenna_counts() {
                        for p_sp in s.processing_powers() {
                            combos.push((a, lam, f_r, n_t, p_sp));
                        }
                    }
                }
            }
        }
        if combos.is_empty() {
            bail!("sweep has no combinations");
        }
        let counts = s.group_counts();
        let tables = combos
            .par_iter()
            .map(|&(a, lam, f_r, n_t, p_sp)| {
                let scn = s.multicell_scenario(a, lam, f_r, n_t, p_sp)?;
                let dist = YDistribution::build(&scn)?;
                let mode = scn.mode.label();
                counts
                    .iter()
                    .map(|&n_k| {
                        let groups = form_y_groups_from(&dist, n_k, scn.cell.traffic_density)?;
                        let curve = tradeoff_curve_for_y_groups(&scn, &groups, &sweep)?;
                        let id = format!("multi_cell_{mode}_a{a}_lam{lam}_fr{f_r}_nt{n_t}_psp{p_sp}_nk{n_k}");
                        Ok((id.clone(), rows(&curve, &id, mode, a, None, Some(lam), f_r, n_t, n_k)))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        self.finish_curves("multi-cell", tables)
    }

    pub fn bound(&self) -> Result<Status> {
        let s = self.scenario;
        let mut rows = Vec::new();
        for a in s.exponents() {
            for r in s.radii() {
                let cell = s.cell_scenario(a, r, 0.0)?;
                rows.push(BoundRow {
                    scenario_id: format!("bound_a{a}_R{r}"),
                    a,
                    r_c_m: r,
                    ee_star_bps_per_w: low_snr_bound_uniform_disk(&cell),
                });
            }
        }
        if rows.is_empty() {
            bail!("sweep has no combinations");
        }
        let path = self.path("bound");
        write_table(&path, &rows, self.format)?;
        let n = rows.len();
        self.write_manifest(
            "bound",
            vec![path.file_name().unwrap().to_string_lossy().into_owned()],
            n,
            n,
            None,
        )?;
        println!("bound: {n} rows written to {}", self.out.display());
        Ok(Status::Ok)
    }

    pub fn validate(&self, seed: u64, samples: usize) -> Result<Status> {
        if samples < 1000 {
            bail!("validation needs at least 1000 samples, got {samples}");
        }
        let s = self.scenario;
        let mc = &s.montecarlo;
        let a = s.pathloss.a;
        let lam = s.multicell.lambda_b_per_km2;
        let truth = s.multicell_scenario(a, lam, s.multicell.f_r, s.multicell.n_t, 0.0)?;
        let analytic = truth
            .clone()
            .with_density(truth.bs_density * mc.analytic_density_scale)?;
        let window = mc.window_factor / (std::f64::consts::PI * truth.bs_density).sqrt();
        let cfg = SimConfig::with_window(truth.clone(), samples, seed, window)?;
        let sim = sample_y(&cfg);
        let dist = YDistribution::build(&analytic)?;

        let grid: Vec<f64> = dist.grid.iter().map(|g| g.0).collect();
        let ccdf: Vec<f64> = dist.grid.iter().map(|g| g.1).collect();
        let ks_y = ks_distance(&ccdf, &empirical_ccdf(&sim.values, &grid)?)?;

        let r_max = 3.0 / (std::f64::consts::PI * truth.bs_density).sqrt();
        let r_grid: Vec<f64> = (1..=500).map(|i| r_max * i as f64 / 500.0).collect();
        let r_ccdf: Vec<f64> = r_grid
            .iter()
            .map(|&x| 1.0 - nearest_bs_distance_cdf(analytic.bs_density, x))
            .collect();
        let ks_r = ks_distance(&r_ccdf, &empirical_ccdf(&sim.serving_distances, &r_grid)?)?;

        let psd = mc.psd_w_per_mhz * 1e-6;
        let sinr: Vec<f64> = sim.values.iter().map(|y| psd * y).collect();
        let simulated = mean_with_error(&sinr)?;
        let analytic_mean = psd * dist.mean()?;
        let z = simulated.z_score(analytic_mean);

        let checks = vec![
            Check::new("ks_y_ccdf", ks_y, mc.ks_tolerance),
            Check::new("ks_nearest_distance", ks_r, mc.ks_tolerance),
            Check::new("mean_sinr_standard_errors", z, mc.mean_sigma_tolerance),
        ];
        let pass = checks.iter().all(|c| c.pass);
        let report = ValidationReport {
            mode: truth.mode.label(),
            a,
            lambda_b_per_km2: lam,
            samples,
            seed,
            mean_sinr_simulated: simulated.mean,
            mean_sinr_standard_error: simulated.std_error,
            mean_sinr_analytic: analytic_mean,
            checks,
            pass,
        };
        self.prepare()?;
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        fs::write(self.out.join("validation.json"), &text)?;
        self.write_manifest("validate", vec!["validation.json".into()], 0, 0, Some((seed, samples)))?;
        for c in &report.checks {
            println!(
                "{} {} = {:.6} (tolerance {})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.tolerance
            );
        }
        Ok(if pass { Status::Ok } else { Status::ValidationFailed })
    }

    pub fn run(&self, f: impl Fn(&Self) -> Result<Status>) -> Result<Status> {
        self.prepare()?;
        f(self)
    }
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
    pass: bool,
}

impl Check {
    fn new(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            tolerance,
            pass: value < tolerance,
        }
    }
}

#[derive(Serialize)]
struct ValidationReport {
    mode: &'static str,
    a: f64,
    #[serde(rename = "lambdaB_per_km2")]
    lambda_b_per_km2: f64,
    samples: usize,
    seed: u64,
    mean_sinr_simulated: f64,
    mean_sinr_standard_error: f64,
    mean_sinr_analytic: f64,
    checks: Vec<Check>,
    pass: bool,
}

#[allow(clippy::too_many_arguments)]
fn rows(
    curve: &TradeoffCurve,
    id: &str,
    mode: &'static str,
    a: f64,
    r_c_m: Option<f64>,
    lambda_b_per_km2: Option<f64>,
    f_r: u32,
    n_t: u32,
    n_k: usize,
) -> Vec<CurveRow> {
    curve
        .points
        .iter()
        .map(|p| CurveRow {
            scenario_id: id.to_string(),
            mode,
            a,
            r_c_m,
            lambda_b_per_km2,
            f_r,
            n_t,
            n_k,
            w_hz: p.bandwidth,
            se_bps_per_hz: p.spectral_efficiency,
            ee_bps_per_w: p.energy_efficiency,
            ee_proc_bps_per_w: p.energy_efficiency_with_processing,
            total_power_w: p.total_power,
            feasible: p.feasible,
        })
        .collect()
}
