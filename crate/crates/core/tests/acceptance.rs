//! Acceptance suite: one PASS/FAIL line per top-level criterion.
//!
//! Runs as a plain binary (no libtest harness) so the report is always shown.
//! Exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use fris_core::channel::{build_coupling, spectral_group, CorrelationModel, EigenGroup, PhaseConfig, SpectralModel};
use fris_core::exec::Execution;
use fris_core::golden;
use fris_core::linalg::{CMatrix, HermitianMatrix};
use fris_core::metrics::{asymptotic_reference_snr, diversity_slope, outage_asymptotic, LinkBudget};
use fris_core::mixture::{coefficients, coefficients_general, MixtureModel, MixtureTerm, Regime};
use fris_core::montecarlo::{sample_g0, validate_distribution, validate_metrics, wilson_interval, MetricPoint};
use fris_core::scenario::{analytic_sweep, analyze, Analysis, AnalyticPoint, Scenario, PRESETS};
use fris_core::selection::{select, ActiveSet, SelectionMode, SelectionPolicy};
use fris_core::specfun::{bessel_k, ln_gamma};
use fris_core::FrisError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn add(&mut self, id: usize, title: &str, pass: bool, detail: String) {
        let line = format!("[{}] {id}. {title}: {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((pass, line));
    }
}

struct Run {
    name: &'static str,
    analysis: Analysis,
    analytic: Vec<AnalyticPoint>,
    mc: Vec<MetricPoint>,
    ks: f64,
    ks_negative: f64,
    mean_z: f64,
    mc_time: Duration,
}

fn simulate(name: &'static str) -> Run {
    let s = Scenario::preset(name).unwrap();
    let analysis = analyze(&s).unwrap();
    let grid = s.snr_db.points();
    let exec = Execution::default();
    let analytic = analytic_sweep(&analysis.mixture, &s.link, &grid, exec).unwrap();
    let t0 = Instant::now();
    let samples = sample_g0(&analysis.coupling.a, &s.mc, exec).unwrap();
    let dist = validate_distribution(&samples, &analysis.mixture, 50, exec).unwrap();
    let mc_time = t0.elapsed();
    let wrong = scaled(&analysis.mixture, 2.0);
    let ks_negative = validate_distribution(&samples, &wrong, 5, exec).unwrap().ks_distance;
    let mc = validate_metrics(&samples, &analysis.mixture, &s.link, &grid, exec).unwrap();
    Run { name, analysis, analytic, mc, ks: dist.ks_distance, ks_negative, mean_z: dist.mean_z, mc_time }
}

fn scaled(m: &MixtureModel, f: f64) -> MixtureModel {
    let terms = m.terms.iter().map(|t| MixtureTerm { lambda: t.lambda * f, ..*t }).collect();
    MixtureModel::from_terms(terms, m.regime).unwrap()
}

fn model(groups: &[(f64, usize)]) -> MixtureModel {
    coefficients(&spectrum(groups)).unwrap()
}

fn spectrum(groups: &[(f64, usize)]) -> SpectralModel {
    SpectralModel::from_groups(
        groups.iter().map(|&(lambda, multiplicity)| EigenGroup { lambda, multiplicity }).collect(),
    )
    .unwrap()
}

fn mean_identity_error(m: &MixtureModel, trace: f64) -> f64 {
    (m.mean() - trace).abs() / trace
}

fn random_spectrum(rng: &mut ChaCha8Rng) -> SpectralModel {
    let n = rng.random_range(1..=8usize);
    let mut groups: Vec<EigenGroup> = Vec::new();
    while groups.len() < n {
        let lambda = 10f64.powf(rng.random_range(-2.0..1.3));
        if groups.iter().all(|g| (g.lambda - lambda).abs() > 1e-3 * lambda) {
            groups.push(EigenGroup { lambda, multiplicity: rng.random_range(1..=5) });
        }
    }
    SpectralModel::from_groups(groups).unwrap()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn selection(report: &mut Report) {
    let t0 = Instant::now();
    let geom = Scenario::default().geometry;
    let fluid: ActiveSet = select(&geom, &SelectionPolicy::default()).unwrap();
    let block =
        select(&geom, &SelectionPolicy { mode: SelectionMode::Contiguous, ..SelectionPolicy::default() }).unwrap();
    let elapsed = t0.elapsed();
    let pass = (fluid.tau_used - 0.421).abs() <= 1e-3
        && (fluid.max_corr - 0.402).abs() <= 2e-3
        && (block.max_corr - 0.790).abs() <= 2e-3
        && fluid.len() == 25
        && block.len() == 25
        && elapsed < Duration::from_secs(1);
    report.add(
        1,
        "active-set selection",
        pass,
        format!(
            "fluid tau_used {:.4} (0.421±0.001), max|J0| {:.4} (0.402±0.002); contiguous max|J0| {:.4} (0.790±0.002); {:.1} ms (<1 s)",
            fluid.tau_used,
            fluid.max_corr,
            block.max_corr,
            elapsed.as_secs_f64() * 1e3
        ),
    );
}

fn distribution(report: &mut Report, runs: &[Run]) {
    let pass = runs.iter().all(|r| r.ks < 0.005 && r.ks_negative > 0.05 && r.mc_time < Duration::from_secs(120));
    let detail = runs
        .iter()
        .map(|r| {
            format!("{} KS {:.2e} ({:.1} s, λ×2 control {:.3})", r.name, r.ks, r.mc_time.as_secs_f64(), r.ks_negative)
        })
        .collect::<Vec<_>>()
        .join("; ");
    report.add(2, "distribution vs 1e6-trial empirical CDF (KS < 0.005, < 2 min)", pass, detail);
}

fn moments(report: &mut Report, runs: &[Run]) {
    let mut worst_scen = 0.0f64;
    for r in runs {
        worst_scen = worst_scen.max(mean_identity_error(&r.analysis.mixture, r.analysis.spectral.trace_c));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut accepted, mut rejected, mut aborted, mut worst_rand, mut worst_cond) = (0, 0, 0, 0.0f64, 0.0f64);
    while accepted < 200 {
        let s = random_spectrum(&mut rng);
        let m = match coefficients(&s) {
            Ok(m) if m.condition_estimate < 1e8 => m,
            Ok(_) => {
                rejected += 1;
                continue;
            }
            Err(FrisError::Conditioning(_)) => {
                aborted += 1;
                continue;
            }
            Err(e) => panic!("{e}"),
        };
        accepted += 1;
        worst_cond = worst_cond.max(m.condition_estimate);
        worst_rand = worst_rand.max(mean_identity_error(&m, s.trace_c));
    }
    report.add(
        3,
        "moment identity Σ c·k·λ = tr C (< 1e-8 rel)",
        worst_scen < 1e-8 && worst_rand < 1e-8,
        format!(
            "scenarios max {worst_scen:.1e}; 200 random spectra max {worst_rand:.1e} (cond up to {worst_cond:.1e}, {rejected} with cond ≥ 1e8 skipped, {aborted} refused by the engine's conditioning guard)"
        ),
    );
}

fn regimes(report: &mut Report, runs: &[Run]) {
    // distinct eigenvalues: general path against the closed product
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut spectra: Vec<SpectralModel> = runs.iter().map(|r| r.analysis.spectral.clone()).collect();
    spectra.retain(|s| s.groups.iter().all(|g| g.multiplicity == 1));
    let from_runs = spectra.len();
    while spectra.len() < from_runs + 100 {
        let n = rng.random_range(2..=10);
        let mut g: Vec<(f64, usize)> = Vec::new();
        while g.len() < n {
            let l = 10f64.powf(rng.random_range(-1.0..1.0));
            if g.iter().all(|&(x, _)| (x - l).abs() > 0.05 * l) {
                g.push((l, 1));
            }
        }
        spectra.push(spectrum(&g));
    }
    let mut simple_err = 0.0f64;
    for s in &spectra {
        let general = coefficients_general(s).unwrap();
        for (i, gi) in s.groups.iter().enumerate() {
            let product: f64 = s
                .groups
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, gj)| gi.lambda / (gi.lambda - gj.lambda))
                .product();
            let c = general.terms.iter().find(|t| t.lambda == gi.lambda && t.k == 1).map_or(0.0, |t| t.c);
            simple_err = simple_err.max((c - product).abs() / product.abs());
        }
    }

    // one repeated eigenvalue: a single unit-weight term
    let mut equal_exact = true;
    for &(l, m) in &[(0.8, 4usize), (2.5, 1), (1.0, 36), (7.25, 9)] {
        let g = coefficients_general(&spectrum(&[(l, m)])).unwrap();
        equal_exact &= g.terms.len() == 1 && g.terms[0] == MixtureTerm { lambda: l, k: m, c: 1.0 };
    }

    // identity correlation: the uncorrelated closed forms
    let n = 25;
    let corr = CorrelationModel {
        active_set: ActiveSet { indices: (1..=n).collect(), stride_used: 1, tau_used: 0.0, max_corr: 0.0 },
        matrix: HermitianMatrix::new(CMatrix::identity(n)).unwrap(),
    };
    let coupling = build_coupling(&corr, &PhaseConfig::sample(n, 7)).unwrap();
    let spec = spectral_group(&coupling.c, 1e-6, 1e-10).unwrap();
    let m = coefficients(&spec).unwrap();
    let mut unc_err = 0.0f64;
    for &g in &[1e-6, 1e-3, 0.1, 1.0, 10.0, 25.0, 60.0] {
        let z = 2.0 * f64::sqrt(g);
        let ln_pdf = f64::ln(2.0) + 0.5 * (n - 1) as f64 * g.ln() + bessel_k(n - 1, z).unwrap().ln()
            - ln_gamma(n as f64).unwrap();
        unc_err = unc_err.max((m.pdf(g).unwrap() - ln_pdf.exp()).abs() / ln_pdf.exp());
        // 1 − Q cancels for small F, so the closed-form CDF is only an oracle where F ≳ 1e-3
        if g >= 0.1 {
            let ln_q =
                f64::ln(2.0) + 0.5 * n as f64 * g.ln() + bessel_k(n, z).unwrap().ln() - ln_gamma(n as f64).unwrap();
            let cdf = -ln_q.exp_m1();
            unc_err = unc_err.max((m.cdf(g).unwrap() - cdf).abs() / cdf);
        }
    }
    let unc_ok = m.regime == Regime::Uncorrelated && m.terms.len() == 1 && m.terms[0].k == n;

    report.add(
        4,
        "regime collapse of the general coefficients",
        simple_err < 1e-10 && equal_exact && unc_ok && unc_err < 1e-10,
        format!(
            "distinct-eigenvalue product max rel {simple_err:.1e} over {} spectra (< 1e-10); single repeated eigenvalue exact: {equal_exact}; identity correlation → {} with k = {}, pdf/cdf max rel {unc_err:.1e} (< 1e-10)",
            spectra.len(),
            m.regime,
            m.terms[0].k
        ),
    );
}

fn regime_models(runs: &[Run]) -> Vec<(&'static str, MixtureModel)> {
    vec![
        ("general", model(&[(2.0, 2), (0.7, 1), (0.3, 3)])),
        ("simple", runs[0].analysis.mixture.clone()),
        ("equal", model(&[(0.8, 4)])),
        ("uncorrelated", model(&[(1.0, 25)])),
    ]
}

fn outage(report: &mut Report, runs: &[Run]) {
    let mut checked = 0;
    let mut outside = Vec::new();
    let mut bonferroni_outside = 0;
    for r in runs {
        // family-wise 95% over the checked points of this scenario
        let fam = r.mc.iter().filter(|m| m.op_exact > 1e-3).count().max(1);
        let z_fw = Normal::standard().inverse_cdf(1.0 - 0.025 / fam as f64);
        for m in r.mc.iter().filter(|m| m.op_exact > 1e-3) {
            checked += 1;
            if !m.op_inside {
                outside.push(format!("{} {} dB", r.name, m.snr_db));
            }
            let k = (m.op_mc * 1e6).round() as usize;
            let (lo, hi) = wilson_interval(k, 1_000_000, z_fw);
            if !(m.op_exact >= lo && m.op_exact <= hi) {
                bonferroni_outside += 1;
            }
        }
    }
    let budget = LinkBudget::default();
    let mut ratios = Vec::new();
    let mut ratio_ok = true;
    for (name, m) in regime_models(runs) {
        let snr = asymptotic_reference_snr(&budget, m.mean());
        let o = outage_asymptotic(&m, &budget.with_snr(snr)).unwrap();
        ratio_ok &= (0.97..=1.03).contains(&o.ratio) && m.regime.to_string() == name;
        ratios.push(format!("{name} {:.6}", o.ratio));
    }
    let wilson_ok = outside.is_empty();
    report.add(
        5,
        "outage vs Wilson 95% intervals where OP > 1e-3; exact/asymptotic ratio in [0.97, 1.03]",
        wilson_ok && ratio_ok,
        format!(
            "{} of {checked} points outside{}; ratios at R̃ = 1e-14·tr C: {}. Note: with a correct model each 95% interval misses 5% of the time, so a clean sweep over {checked} correlated points is not guaranteed (family-wise Bonferroni 95% intervals: {bonferroni_outside} outside)",
            outside.len(),
            if outside.is_empty() { String::new() } else { format!(" ({})", outside.join(", ")) },
            ratios.join(", ")
        ),
    );
}

fn diversity(report: &mut Report, runs: &[Run]) {
    let budget = LinkBudget::default();
    let grid = log_grid(1e6, 1e10, 9);
    let mut pass = true;
    let mut parts = Vec::new();
    let mut models = regime_models(runs);
    for r in &runs[1..] {
        models.push((r.name, r.analysis.mixture.clone()));
    }
    for (name, m) in &models {
        let slope = diversity_slope(m, &budget, &grid).unwrap();
        let band = match m.regime {
            Regime::Equal | Regime::Uncorrelated => 0.99..=1.01,
            Regime::General | Regime::Simple => 0.90..=1.00,
        };
        pass &= band.contains(&slope);
        parts.push(format!("{name} ({}) {slope:.5}", m.regime));
    }
    report.add(
        6,
        "diversity slope on γ̄ ∈ [1e6, 1e10] (equal/uncorrelated [0.99, 1.01], general/simple [0.90, 1.00])",
        pass,
        parts.join(", "),
    );
}

fn capacity(report: &mut Report, runs: &[Run]) {
    let mut outside = Vec::new();
    let mut points = 0;
    let mut worst_gap = 0.0f64;
    for r in runs {
        for m in &r.mc {
            points += 1;
            if !m.ec_inside {
                outside.push(format!("{} {} dB", r.name, m.snr_db));
            }
        }
        for a in &r.analytic {
            worst_gap = worst_gap.max(a.ec_relative_gap());
        }
    }
    let g = golden::check(std::fs::File::open(concat!(env!("CARGO_MANIFEST_DIR"), "/golden/vectors.csv")).unwrap())
        .unwrap();
    let meijer = g.max_error("meijer_g_ec").unwrap();
    report.add(
        7,
        "ergodic capacity (MC 99% CI, contour agreement < 1e-6, reference Meijer-G < 1e-8)",
        outside.is_empty() && worst_gap < 1e-6 && meijer < 1e-8,
        format!(
            "{} of {points} points outside the 99% CI{}; quadrature vs contour max rel {worst_gap:.1e}; Meijer-G reference max rel {meijer:.1e} over {} values",
            outside.len(),
            if outside.is_empty() { String::new() } else { format!(" ({})", outside.join(", ")) },
            g.outcomes.iter().filter(|o| o.row.function == "meijer_g_ec").count()
        ),
    );
}

fn ordering(report: &mut Report, runs: &[Run]) {
    let f = &runs[0];
    let r = &runs[1];
    let op_bad: Vec<f64> =
        f.analytic.iter().zip(&r.analytic).filter(|(a, b)| a.op_exact > b.op_exact).map(|(a, _)| a.snr_db).collect();
    let ec_bad: Vec<f64> =
        f.analytic.iter().zip(&r.analytic).filter(|(a, b)| a.ec_exact < b.ec_exact).map(|(a, _)| a.snr_db).collect();
    let detail = if op_bad.is_empty() {
        "OP ordering holds at every grid point".to_string()
    } else {
        let worst = f
            .analytic
            .iter()
            .zip(&r.analytic)
            .filter(|(a, b)| a.op_exact > b.op_exact)
            .map(|(a, b)| format!("{} dB: {:.6} vs {:.6}", a.snr_db, a.op_exact, b.op_exact))
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "fluid OP exceeds contiguous OP at {op_bad:?} dB ({worst}); the contiguous block has the larger top eigenvalue ({:.2} vs {:.2}), so it crosses thresholds far above the mean more often while both OPs are near 1; the ordering holds from {} dB upward",
            r.analysis.spectral.lambda_max(),
            f.analysis.spectral.lambda_max(),
            op_bad.last().unwrap() + Scenario::default().snr_db.step_db
        )
    };
    report.add(
        8,
        "fluid(25) OP ≤ contiguous(25) OP and EC ≥ pointwise on 0..100 dB",
        op_bad.is_empty() && ec_bad.is_empty(),
        format!(
            "{detail}; EC ordering {}",
            if ec_bad.is_empty() { "holds at every grid point".to_string() } else { format!("fails at {ec_bad:?} dB") }
        ),
    );
}

fn special_functions(report: &mut Report) {
    let g = golden::check(std::fs::File::open(concat!(env!("CARGO_MANIFEST_DIR"), "/golden/vectors.csv")).unwrap())
        .unwrap();
    let fns = ["bessel_j0", "bessel_k", "ln_gamma", "gamma"];
    let rows: Vec<_> = g.outcomes.iter().filter(|o| fns.contains(&o.row.function.as_str())).collect();
    let failed = rows.iter().filter(|o| o.error > 1e-10).count();
    let detail = fns.iter().map(|f| format!("{f} max {:.1e}", g.max_error(f).unwrap())).collect::<Vec<_>>().join(", ");
    let other_failed = g.failures().count() - failed;
    report.add(
        9,
        "special functions vs reference values (< 1e-10 rel)",
        failed == 0,
        format!("{} rows, {failed} outside; {detail}; remaining reference rows (K-law, mixture, coefficients) failing: {other_failed}", rows.len()),
    );
}

fn main() {
    // cargo passes libtest flags (e.g. --nocapture, filters); this binary takes none
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let t0 = Instant::now();
    println!("acceptance: {} Monte Carlo scenarios × 1e6 trials", PRESETS.len());
    let runs: Vec<Run> = PRESETS.iter().map(|p| simulate(p)).collect();
    for r in &runs {
        println!("  {}: mean z {:+.2}, simulation + KS {:.1} s", r.name, r.mean_z, r.mc_time.as_secs_f64());
    }

    let mut report = Report { lines: Vec::new() };
    selection(&mut report);
    distribution(&mut report, &runs);
    moments(&mut report, &runs);
    regimes(&mut report, &runs);
    outage(&mut report, &runs);
    diversity(&mut report, &runs);
    capacity(&mut report, &runs);
    ordering(&mut report, &runs);
    special_functions(&mut report);

    let failed = report.lines.iter().filter(|(p, _)| !p).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        report.lines.len() - failed,
        t0.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
