use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fris_core::exec::Execution;
use fris_core::golden::{self, GoldenReport};
use fris_core::montecarlo::{sample_g0, validate_distribution, validate_metrics, DistributionReport};
use fris_core::scenario::{
    analytic_sweep, analyze, join_rows, pdf_curve, Analysis, PdfPoint, Provenance, ReportRow, Scenario,
};
use fris_core::FrisError;
use serde::Serialize;

const CDF_GRID_POINTS: usize = 100;

/// Everything computed for one scenario.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub scenario: Scenario,
    pub analysis: Analysis,
    pub rows: Vec<ReportRow>,
    pub pdf: Vec<PdfPoint>,
    pub distribution: Option<DistributionReport>,
}

pub fn execute(scenario: &Scenario, exec: Execution) -> Result<RunResult> {
    let analysis = analyze(scenario)?;
    let grid = scenario.snr_db.points();
    let analytic = analytic_sweep(&analysis.mixture, &scenario.link, &grid, exec)?;
    let (rows, pdf, distribution) = if scenario.mc_enabled() {
        let samples = sample_g0(&analysis.coupling.a, &scenario.mc, exec)?;
        let dist = validate_distribution(&samples, &analysis.mixture, CDF_GRID_POINTS, exec)?;
        let mc = validate_metrics(&samples, &analysis.mixture, &scenario.link, &grid, exec)?;
        let pdf = pdf_curve(&analysis.mixture, scenario.pdf_points, Some(&samples))?;
        (join_rows(&analytic, Some(&mc))?, pdf, Some(dist))
    } else {
        (join_rows(&analytic, None)?, pdf_curve(&analysis.mixture, scenario.pdf_points, None)?, None)
    };
    Ok(RunResult { scenario: scenario.clone(), analysis, rows, pdf, distribution })
}

fn e(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(e).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[derive(Serialize)]
struct PatternJson<'a> {
    m_x: usize,
    m_z: usize,
    /// 1-based linear indices `i + j·m_x + 1`.
    indices: &'a [usize],
    stride_used: usize,
    tau_used: f64,
    max_corr: f64,
}

/// Writes all artifacts of a run into `dir` and returns their paths.
pub fn write_run(result: &RunResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let s = &result.scenario;
    let a = &result.analysis;
    let mut files = Vec::new();
    let mut out = |name: &str| {
        let p = dir.join(name);
        files.push(p.clone());
        p
    };

    fs::write(out("pattern.txt"), a.active_set.text_grid(&s.geometry))?;
    write_json(
        &out("pattern.json"),
        &PatternJson {
            m_x: s.geometry.m_x,
            m_z: s.geometry.m_z,
            indices: &a.active_set.indices,
            stride_used: a.active_set.stride_used,
            tau_used: a.active_set.tau_used,
            max_corr: a.active_set.max_corr,
        },
    )?;
    write_json(&out("spectral.json"), &a.spectral)?;
    write_json(&out("mixture.json"), &a.mixture)?;

    let mc = result.distribution.is_some();
    let mut header = strings(&["g", "pdf", "cdf"]);
    if mc {
        header.push("mc_density".into());
    }
    write_csv(
        &out("pdf.csv"),
        &header,
        result.pdf.iter().map(|p| {
            let mut r = vec![e(p.g), e(p.pdf), e(p.cdf)];
            if mc {
                r.push(opt(p.mc_density));
            }
            r
        }),
    )?;

    let mut header = strings(&[
        "scenario",
        "snr_db",
        "gain_threshold",
        "op_exact",
        "op_asymptotic",
        "op_ratio",
        "ec_exact",
        "ec_quad_error",
        "ec_mellin_barnes",
        "ec_rel_gap",
    ]);
    if mc {
        header.extend(strings(&[
            "op_mc",
            "op_lo",
            "op_hi",
            "op_one_sided",
            "op_inside",
            "ec_mc",
            "ec_lo",
            "ec_hi",
            "ec_inside",
        ]));
    }
    write_csv(
        &out("metrics.csv"),
        &header,
        result.rows.iter().map(|row| {
            let p = &row.analytic;
            let mut r = vec![
                s.name.clone(),
                p.snr_db.to_string(),
                e(p.gain_threshold),
                e(p.op_exact),
                opt(p.op_asymptotic),
                opt(p.op_ratio),
                e(p.ec_exact),
                e(p.ec_error),
                e(p.ec_mellin_barnes),
                e(p.ec_relative_gap()),
            ];
            if let Some(m) = &row.mc {
                r.extend([
                    e(m.op_mc),
                    e(m.op_lo),
                    e(m.op_hi),
                    m.op_one_sided.to_string(),
                    m.op_inside.to_string(),
                    e(m.ec_mc),
                    e(m.ec_lo),
                    e(m.ec_hi),
                    m.ec_inside.to_string(),
                ]);
            }
            r
        }),
    )?;

    if let Some(d) = &result.distribution {
        #[derive(Serialize)]
        struct Summary<'a> {
            trials: usize,
            sample_mean: f64,
            sample_variance: f64,
            analytic_mean: f64,
            analytic_variance: f64,
            mean_z: f64,
            mean_ok: bool,
            mean_flagged: bool,
            variance_rel_delta: f64,
            ks_distance: f64,
            ks_critical_95: f64,
            scenario: &'a str,
        }
        let n = d.summary.count as f64;
        write_json(
            &out("mc_summary.json"),
            &Summary {
                trials: d.summary.count,
                sample_mean: d.summary.mean,
                sample_variance: d.summary.variance,
                analytic_mean: d.analytic_mean,
                analytic_variance: d.analytic_variance,
                mean_z: d.mean_z,
                mean_ok: d.mean_ok,
                mean_flagged: d.mean_flagged,
                variance_rel_delta: d.variance_rel_delta,
                ks_distance: d.ks_distance,
                ks_critical_95: 1.358 / n.sqrt(),
                scenario: &s.name,
            },
        )?;
        write_csv(
            &out("mc_cdf.csv"),
            &strings(&["g", "empirical", "analytic", "delta"]),
            d.cdf_grid.iter().map(|p| vec![e(p.g), e(p.empirical), e(p.analytic), e(p.empirical - p.analytic)]),
        )?;
    }

    write_json(&out("provenance.json"), &Provenance::new(s, a))?;
    Ok(files)
}

/// One-paragraph human summary of a run.
pub fn summary(result: &RunResult) -> String {
    let a = &result.analysis;
    let mut s = format!(
        "{}: {} active, stride {}, tau {:.4}, max |J0| {:.4}; regime {}, rank {}, {} groups, tr C {:.6}, condition {:.3e}",
        result.scenario.name,
        a.active_set.len(),
        a.active_set.stride_used,
        a.active_set.tau_used,
        a.active_set.max_corr,
        a.mixture.regime,
        a.spectral.rank,
        a.spectral.groups.len(),
        a.spectral.trace_c,
        a.mixture.condition_estimate,
    );
    if let Some(d) = &result.distribution {
        let op_in = result.rows.iter().filter_map(|r| r.mc).filter(|m| m.op_inside).count();
        let ec_in = result.rows.iter().filter_map(|r| r.mc).filter(|m| m.ec_inside).count();
        s += &format!(
            "\n  MC {} trials: KS {:.2e}, mean z {:+.2}, OP inside CI {}/{}, EC inside CI {}/{}",
            d.summary.count,
            d.ks_distance,
            d.mean_z,
            op_in,
            result.rows.len(),
            ec_in,
            result.rows.len()
        );
    }
    s
}

/// Runs several scenarios on a shared SNR grid and writes one combined table.
pub fn compare(results: &[RunResult], path: &Path) -> Result<()> {
    if results.len() < 2 {
        return Err(FrisError::Config(format!("compare needs at least 2 scenarios, got {}", results.len())).into());
    }
    let grid: Vec<f64> = results[0].rows.iter().map(|r| r.analytic.snr_db).collect();
    for r in &results[1..] {
        let g: Vec<f64> = r.rows.iter().map(|x| x.analytic.snr_db).collect();
        if g != grid {
            return Err(FrisError::Config(format!(
                "SNR grids differ: '{}' uses {} but '{}' uses {}",
                results[0].scenario.name, results[0].scenario.snr_db, r.scenario.name, r.scenario.snr_db
            ))
            .into());
        }
    }
    for (i, r) in results.iter().enumerate() {
        if results[..i].iter().any(|p| p.scenario.name == r.scenario.name) {
            return Err(FrisError::Config(format!("duplicate scenario name '{}'", r.scenario.name)).into());
        }
    }
    let mut header = vec!["snr_db".to_string()];
    for r in results {
        let n = &r.scenario.name;
        header.extend(["op_exact", "op_asymptotic", "ec_exact"].map(|c| format!("{n}_{c}")));
        if r.distribution.is_some() {
            header.extend(["op_mc", "ec_mc"].map(|c| format!("{n}_{c}")));
        }
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    write_csv(
        path,
        &header,
        grid.iter().enumerate().map(|(i, db)| {
            let mut row = vec![db.to_string()];
            for r in results {
                let p = &r.rows[i];
                row.extend([e(p.analytic.op_exact), opt(p.analytic.op_asymptotic), e(p.analytic.ec_exact)]);
                if let Some(m) = &p.mc {
                    row.extend([e(m.op_mc), e(m.ec_mc)]);
                }
            }
            row
        }),
    )
}

pub fn golden_check(path: &Path) -> Result<GoldenReport> {
    let f = fs::File::open(path).map_err(|err| FrisError::Config(format!("cannot open {}: {err}", path.display())))?;
    Ok(golden::check(f)?)
}

pub fn golden_summary(report: &GoldenReport) -> String {
    let mut names: Vec<&str> = report.outcomes.iter().map(|o| o.row.function.as_str()).collect();
    names.dedup();
    let mut lines = Vec::new();
    for n in names {
        let rows: Vec<_> = report.outcomes.iter().filter(|o| o.row.function == n).collect();
        let failed = rows.iter().filter(|o| !o.passed).count();
        lines.push(format!(
            "{n:<12} {:>4} rows  max err {:.2e}  tol {:.0e}  {}",
            rows.len(),
            report.max_error(n).unwrap_or(0.0),
            rows[0].tolerance,
            if failed == 0 { "ok".to_string() } else { format!("{failed} FAILED") }
        ));
    }
    for f in report.failures() {
        lines.push(format!(
            "  line {}: {}({}; {}) = {:e}, reference {}, error {:.2e}",
            f.line, f.row.function, f.row.params, f.row.argument, f.computed, f.row.value, f.error
        ));
    }
    lines.join("\n")
}

/// Fails with a plain error when any golden row misses its tolerance.
pub fn require_golden(report: &GoldenReport) -> Result<()> {
    let n = report.failures().count();
    if n > 0 {
        bail!("{n} of {} golden values outside tolerance", report.outcomes.len());
    }
    Ok(())
}
