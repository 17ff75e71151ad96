//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use ofdma_ee::channel::{CellScenario, RadioConstants};
use ofdma_ee::montecarlo::{empirical_ccdf, ks_distance, mean_with_error, sample_y, SimConfig};
use ofdma_ee::multicell::{
    nearest_bs_distance_cdf, tradeoff_curve_multicell, InterferenceMode, MultiCellScenario, YDistribution,
};
use ofdma_ee::numerics::{integral_ia, lambert_w0};
use ofdma_ee::singlecell::{
    allocate, lambda_bracket, low_snr_bound, low_snr_bound_uniform_disk, per_user_split, tradeoff_curve, Budget, Sweep,
    TrafficGroup,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MONTE_CARLO_SEED: u64 = 20_240_611;
const MONTE_CARLO_SAMPLES: usize = 100_000;

struct Outcome {
    pass: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.lines
            .push(format!("    [{}] {line}", if ok { "ok" } else { "MISS" }));
    }

    fn close(&mut self, label: &str, ok: bool, line: String) {
        self.check(ok, format!("{label}: {line}"));
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got / want - 1.0).abs()
}

fn within(out: &mut Outcome, label: &str, got: f64, want: f64, tol: f64, unit: f64, unit_name: &str) {
    let e = rel_err(got, want);
    out.check(
        e <= tol,
        format!(
            "{label}: {:.4} {unit_name} vs {:.4} (err {:.2}%, tol {:.0}%)",
            got / unit,
            want / unit,
            100.0 * e,
            100.0 * tol
        ),
    );
}

fn se_at(curve: &ofdma_ee::singlecell::TradeoffCurve, se: f64) -> &ofdma_ee::singlecell::TradeoffPoint {
    curve
        .points
        .iter()
        .min_by(|a, b| {
            (a.spectral_efficiency - se)
                .abs()
                .total_cmp(&(b.spectral_efficiency - se).abs())
        })
        .unwrap()
}

fn criterion_1() -> Outcome {
    let mut out = Outcome::new();
    let b35 = low_snr_bound_uniform_disk(&CellScenario::reference(3.5, 500.0).unwrap());
    let b45 = low_snr_bound_uniform_disk(&CellScenario::reference(4.5, 500.0).unwrap());
    within(&mut out, "EE*(a=3.5, R=500 m)", b35, 206.1e6, 0.02, 1e6, "Mbps/W");
    within(&mut out, "EE*(a=4.5, R=500 m)", b45, 58e3, 0.03, 1e3, "Kbps/W");
    within(&mut out, "ratio", b35 / b45, 3553.0, 0.05, 1.0, "");
    out
}

fn criterion_2() -> Outcome {
    let mut out = Outcome::new();
    for (r, want) in [(500.0, 19e6), (1000.0, 1.7e6)] {
        let s = CellScenario::reference(3.5, r).unwrap();
        let t = Instant::now();
        let curve = tradeoff_curve(&s, 10, &Sweep::default_se_grid()).unwrap();
        let elapsed = t.elapsed().as_secs_f64();
        let point = tradeoff_curve(&s, 10, &Sweep::SpectralEfficiency(vec![6.0]))
            .unwrap()
            .points[0];
        within(
            &mut out,
            &format!("EE(SE=6, R={r} m)"),
            point.energy_efficiency,
            want,
            0.10,
            1e6,
            "Mbps/W",
        );
        out.check(
            elapsed < 1.0,
            format!("60-point curve at R={r} m in {elapsed:.3} s (limit 1 s)"),
        );
        let monotone = curve
            .points
            .windows(2)
            .all(|w| w[1].energy_efficiency >= w[0].energy_efficiency);
        out.check(monotone, format!("EE decreasing in SE at R={r} m"));
    }
    out
}

fn criterion_3() -> Outcome {
    let mut out = Outcome::new();
    let mut s = CellScenario::reference(3.5, 500.0).unwrap();
    s.processing_power = 1e-6;
    let ses = [10.0, 6.0, 2.0, 1.0];
    let want = [1.8e6, 4.6e6, 2.0e6, 0.93e6];
    let curve = tradeoff_curve(&s, 10, &Sweep::SpectralEfficiency(ses.to_vec())).unwrap();
    for (se, w) in ses.iter().zip(want) {
        let p = se_at(&curve, *se);
        within(
            &mut out,
            &format!("EE_proc(SE={se})"),
            p.energy_efficiency_with_processing,
            w,
            0.10,
            1e6,
            "Mbps/W",
        );
    }
    let dense = tradeoff_curve(&s, 10, &Sweep::log_spaced_se(0.05, 14.0, 300)).unwrap();
    let ee: Vec<f64> = dense
        .points
        .iter()
        .map(|p| p.energy_efficiency_with_processing)
        .collect();
    let peak = (0..ee.len()).max_by(|&a, &b| ee[a].total_cmp(&ee[b])).unwrap();
    let unimodal = peak > 0
        && peak + 1 < ee.len()
        && ee[..=peak].windows(2).all(|w| w[1] >= w[0])
        && ee[peak..].windows(2).all(|w| w[1] <= w[0]);
    out.check(
        unimodal,
        format!(
            "unimodal in W, peak {:.3} Mbps/W at SE {:.2}",
            ee[peak] / 1e6,
            dense.points[peak].spectral_efficiency
        ),
    );
    out
}

fn criterion_4() -> Outcome {
    let mut out = Outcome::new();
    let sweep = Sweep::log_spaced_se(1.0, 10.0, 46);
    for r in [500.0, 1000.0] {
        let s = CellScenario::reference(3.5, r).unwrap();
        let c10 = tradeoff_curve(&s, 10, &sweep).unwrap();
        let c40 = tradeoff_curve(&s, 40, &sweep).unwrap();
        let worst = c10
            .points
            .iter()
            .zip(&c40.points)
            .map(|(a, b)| rel_err(a.energy_efficiency, b.energy_efficiency))
            .fold(0.0, f64::max);
        out.check(
            worst < 0.01,
            format!("R={r} m: max |EE(10)-EE(40)|/EE(40) = {:.3}% (tol 1%)", 100.0 * worst),
        );
    }
    out
}

fn criterion_5() -> Outcome {
    let mut out = Outcome::new();
    let base = MultiCellScenario::reference(3.8).unwrap();
    let at_se2 = Sweep::SpectralEfficiency(vec![2.0]);
    let ee = |mode: InterferenceMode| {
        let s = base.clone().with_mode(mode).unwrap();
        tradeoff_curve_multicell(&s, 10, &at_se2).unwrap().points[0].energy_efficiency
    };

    let t = Instant::now();
    let baseline = ee(InterferenceMode::Baseline);
    within(
        &mut out,
        "baseline EE(SE=2, a=3.8)",
        baseline,
        147.6e3,
        0.15,
        1e3,
        "Kbps/W",
    );

    let reuse_want = [147.6e3, 113.8e3, 100e3];
    let reuse: Vec<f64> = [1, 3, 7]
        .iter()
        .map(|&f| ee(InterferenceMode::FrequencyReuse { factor: f }))
        .collect();
    for ((f, got), want) in [1, 3, 7].iter().zip(&reuse).zip(reuse_want) {
        within(&mut out, &format!("f_r={f}"), *got, want, 0.15, 1e3, "Kbps/W");
    }
    out.check(
        reuse.windows(2).all(|w| w[1] < w[0]),
        "EE strictly decreasing in f_r".into(),
    );
    let reuse_time = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let beam_want = [147.6e3, 421.1e3, 740.5e3, 1329e3];
    let beam: Vec<f64> = [1, 2, 4, 8]
        .iter()
        .map(|&n| {
            ee(InterferenceMode::Beamforming {
                antennas: n,
                front_to_back_db: None,
            })
        })
        .collect();
    for ((n, got), want) in [1, 2, 4, 8].iter().zip(&beam).zip(beam_want) {
        within(&mut out, &format!("N_t={n}"), *got, want, 0.15, 1e3, "Kbps/W");
    }
    out.check(
        beam.windows(2).all(|w| w[1] > w[0]),
        "EE strictly increasing in N_t".into(),
    );
    let beam_time = t.elapsed().as_secs_f64();
    out.check(
        reuse_time < 60.0 && beam_time < 60.0,
        format!("curve sets in {reuse_time:.1} s and {beam_time:.1} s (limit 60 s each)"),
    );
    out
}

fn criterion_6() -> Outcome {
    let mut out = Outcome::new();
    let psd = 2e-6;
    let exps = [2.5, 3.0, 3.8, 4.5, 5.0];
    let values: Vec<f64> = exps
        .iter()
        .map(|&a| ofdma_ee::multicell::mean_sinr(&MultiCellScenario::reference(a).unwrap(), psd).unwrap())
        .collect();
    let best = (0..exps.len())
        .max_by(|&i, &j| values[i].total_cmp(&values[j]))
        .unwrap();
    let listing: Vec<String> = exps
        .iter()
        .zip(&values)
        .map(|(a, v)| format!("a={a}: {v:.2}"))
        .collect();
    out.check(
        exps[best] == 3.8,
        format!("mean SINR at 2 W/MHz [{}], max at a={}", listing.join(", "), exps[best]),
    );
    out
}

fn criterion_7() -> Outcome {
    let mut out = Outcome::new();
    let t = Instant::now();
    let s = MultiCellScenario::reference(3.8).unwrap();
    let cfg = SimConfig::new(s.clone(), MONTE_CARLO_SAMPLES, MONTE_CARLO_SEED).unwrap();
    let samples = sample_y(&cfg);
    let dist = YDistribution::build(&s).unwrap();

    let grid: Vec<f64> = dist.grid.iter().map(|g| g.0).collect();
    let analytic: Vec<f64> = dist.grid.iter().map(|g| g.1).collect();
    let ks_y = ks_distance(&analytic, &empirical_ccdf(&samples.values, &grid).unwrap()).unwrap();
    out.check(ks_y < 0.01, format!("KS(Y ccdf) = {ks_y:.5} (tol 0.01)"));

    let r_grid: Vec<f64> = (1..=500).map(|i| i as f64 * 4.0).collect();
    let r_analytic: Vec<f64> = r_grid
        .iter()
        .map(|&x| 1.0 - nearest_bs_distance_cdf(s.bs_density, x))
        .collect();
    let ks_r = ks_distance(
        &r_analytic,
        &empirical_ccdf(&samples.serving_distances, &r_grid).unwrap(),
    )
    .unwrap();
    out.check(ks_r < 0.01, format!("KS(nearest distance) = {ks_r:.5} (tol 0.01)"));

    let psd = 2e-6;
    let sinr: Vec<f64> = samples.values.iter().map(|y| psd * y).collect();
    let mc = mean_with_error(&sinr).unwrap();
    let analytic_mean = psd * dist.mean().unwrap();
    let z = mc.z_score(analytic_mean);
    out.check(
        z < 3.0,
        format!(
            "mean SINR: Monte Carlo {:.3} +/- {:.3}, analytic {:.3} ({z:.2} standard errors, tol 3)",
            mc.mean, mc.std_error, analytic_mean
        ),
    );
    let elapsed = t.elapsed().as_secs_f64();
    out.check(elapsed < 300.0, format!("runtime {elapsed:.1} s (limit 300 s)"));
    out
}

fn random_groups(rng: &mut ChaCha8Rng) -> Vec<TrafficGroup> {
    let n = rng.random_range(1..=8);
    (0..n)
        .map(|_| {
            let ell = 10f64.powf(rng.random_range(-14.0..-8.0));
            TrafficGroup::point(ell, rng.random_range(1e5..1e7))
        })
        .collect()
}

fn criterion_8() -> Outcome {
    let mut out = Outcome::new();
    let radio = RadioConstants::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut in_bracket, mut worst_residual, mut worst_psd) = (true, 0.0f64, 0.0f64);
    let (mut below_bound, mut worst_gap) = (true, 0.0f64);
    let instances = 500;
    for _ in 0..instances {
        let groups = random_groups(&mut rng);
        let total: f64 = groups.iter().map(|g| g.demand).sum();
        let w = total / rng.random_range(0.05..10.0);
        let a = allocate(&groups, w, &radio, &Budget::unlimited()).unwrap();
        let (lo, hi) = lambda_bracket(&groups, w, &radio);
        in_bracket &= a.lambda >= lo * (1.0 - 1e-9) && a.lambda <= hi * (1.0 + 1e-9);
        let sum: f64 = a.shares.iter().map(|s| s.bandwidth).sum();
        worst_residual = worst_residual.max((sum - w).abs() / w);
        for (g, s) in groups.iter().zip(&a.shares) {
            for frac in [0.1, 0.37, 0.8] {
                let u = per_user_split(g, s, g.demand * frac).unwrap();
                worst_psd = worst_psd.max(rel_err(u.power / u.bandwidth, s.power_spectral_density()));
            }
        }
        let bound = low_snr_bound(&groups, &radio).unwrap();
        below_bound &= a.energy_efficiency <= bound * (1.0 + 1e-12);
        let far = allocate(
            &groups,
            100.0 * radio.success_probability * total,
            &radio,
            &Budget::unlimited(),
        )
        .unwrap();
        below_bound &= far.energy_efficiency <= bound * (1.0 + 1e-12);
        worst_gap = worst_gap.max(1.0 - far.energy_efficiency / bound);
    }
    out.close(
        "multiplier bracket",
        in_bracket,
        format!("{instances} random instances"),
    );
    out.close(
        "bandwidth residual",
        worst_residual < 1e-9,
        format!("max {worst_residual:.2e} (tol 1e-9)"),
    );
    out.close(
        "within-group power density",
        worst_psd < 1e-12,
        format!("max deviation {worst_psd:.2e}"),
    );
    out.close(
        "low-SNR bound",
        below_bound && worst_gap < 0.01,
        format!(
            "EE <= EE* everywhere, max gap at W = 100 c T_tot {:.3}% (tol 1%)",
            100.0 * worst_gap
        ),
    );

    // two groups against a dense scan of the single free split
    let groups = [TrafficGroup::point(1e-9, 5e6), TrafficGroup::point(1e-11, 5e6)];
    let w = 10e6;
    let solved = allocate(&groups, w, &radio, &Budget::unlimited()).unwrap().total_power;
    let power =
        |g: &TrafficGroup, wk: f64| radio.power_scale() / g.quality * ((g.demand / wk * 2f64.ln()).exp() - 1.0) * wk;
    let n = 1_000_000;
    let scanned = (1..n)
        .map(|i| {
            let w1 = w * i as f64 / n as f64;
            power(&groups[0], w1) + power(&groups[1], w - w1)
        })
        .fold(f64::INFINITY, f64::min);
    let gap = rel_err(solved, scanned);
    out.close(
        "two-group brute force",
        gap < 1e-3,
        format!("total power gap {:.2e} (tol 1e-3)", gap),
    );

    // Lambert W against Newton on w e^w = y
    let mut lambert_err = 0.0f64;
    for &y in &[-0.36f64, -0.2, 1e-6, 0.5, 1.0, 10.0, 1e3, 1e8] {
        let mut x: f64 = if y > 1.0 { y.ln() } else { 0.0 };
        for _ in 0..200 {
            x -= (x * x.exp() - y) / (x.exp() * (x + 1.0));
        }
        lambert_err = lambert_err.max((lambert_w0(y).unwrap() - x).abs() / x.abs().max(1e-300));
    }
    out.close(
        "Lambert W",
        lambert_err < 1e-9,
        format!("max rel err {lambert_err:.1e}"),
    );

    // I_a against the closed form at a = 4 and a hypergeometric series
    let mut ia_err = 0.0f64;
    for &x in &[0.01f64, 1.0, 4.0, 100.0, 1e6] {
        let closed = x.sqrt() * x.sqrt().atan();
        ia_err = ia_err.max(rel_err(integral_ia(4.0, x).unwrap(), closed));
    }
    for &a in &[2.5, 3.5, 5.0] {
        for &x in &[0.01, 1.0, 50.0] {
            let b = 1.0 - 2.0 / a;
            let z = x / (1.0 + x);
            let (mut term, mut sum, mut k) = (1.0f64, 1.0f64, 0.0);
            while term > 1e-18 * sum {
                term *= (k + 1.0) / (b + 1.0 + k) * z;
                sum += term;
                k += 1.0;
            }
            let series = 2.0 * x / (a - 2.0) * sum / (1.0 + x);
            ia_err = ia_err.max(rel_err(integral_ia(a, x).unwrap(), series));
        }
    }
    out.close("I_a", ia_err < 1e-9, format!("max rel err {ia_err:.1e}"));
    out
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("1 low-SNR bound golden numbers", criterion_1),
        ("2 single-cell EE at SE = 6", criterion_2),
        ("3 processing-power curve", criterion_3),
        ("4 repartition convergence", criterion_4),
        ("5 multi-cell golden numbers", criterion_5),
        ("6 mean-SINR optimum in a", criterion_6),
        ("7 Monte Carlo oracle equivalence", criterion_7),
        ("8 property suites", criterion_8),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t = Instant::now();
        let outcome = run();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {name} ({:.2} s)", t.elapsed().as_secs_f64());
        for line in &outcome.lines {
            println!("{line}");
        }
        if !outcome.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
