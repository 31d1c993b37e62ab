//! File-producing subcommands. Each one is a [`Job`]: validated parameters
//! that execute into named artifacts plus a manifest.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ccwm_core::optimizer::{solve_frontier, TradeoffPoint};
use ccwm_core::simulator::{
    run_one_shot, run_sequence, ExperimentConfig, OneShotReport, Scheme, SequenceReport,
    SourceSpec,
};
use ccwm_core::theory::{approx_error_bound, maxmin_rd, maxmin_rd_approx};
use serde::Serialize;
use serde_json::Value;

use crate::config::{CurveParams, ExperimentFile, TradeoffFile};
use crate::error::{invalid, CliError, CliResult};
use crate::manifest::{RunManifest, MANIFEST_FILE, MANIFEST_VERSION};
use crate::output::{csv_bytes, json_bytes, line_plot, write_atomic, Series};

#[derive(Debug, Clone)]
pub enum Job {
    MaxminCurve(CurveParams),
    OneShot(ExperimentFile),
    Roc(ExperimentFile),
    Tradeoff(TradeoffFile),
}

pub struct Executed {
    pub manifest: RunManifest,
    pub summary: Value,
    /// Frontier points that are best-found rather than proven optimal.
    pub uncertified: usize,
}

struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    summary: Value,
    uncertified: usize,
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::MaxminCurve(_) => "maxmin-curve",
            Job::OneShot(_) => "one-shot",
            Job::Roc(_) => "roc",
            Job::Tradeoff(_) => "tradeoff",
        }
    }

    fn parameters(&self) -> Value {
        let v = match self {
            Job::MaxminCurve(p) => serde_json::to_value(p),
            Job::OneShot(c) | Job::Roc(c) => serde_json::to_value(c),
            Job::Tradeoff(c) => serde_json::to_value(c),
        };
        v.expect("parameters serialise")
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Job::MaxminCurve(_) => None,
            Job::OneShot(c) | Job::Roc(c) => c.experiments.first().map(|e| e.seed),
            Job::Tradeoff(c) => Some(c.solver.seed),
        }
    }

    /// Rebuilds a job from a manifest's recorded parameters.
    pub fn from_manifest(m: &RunManifest) -> CliResult<Self> {
        let p = m.parameters.clone();
        let bad = |e: serde_json::Error| invalid(format!("manifest parameters: {e}"));
        Ok(match m.subcommand.as_str() {
            "maxmin-curve" => Job::MaxminCurve(serde_json::from_value(p).map_err(bad)?),
            "one-shot" => Job::OneShot(serde_json::from_value(p).map_err(bad)?),
            "roc" => Job::Roc(serde_json::from_value(p).map_err(bad)?),
            "tradeoff" => Job::Tradeoff(serde_json::from_value(p).map_err(bad)?),
            other => return Err(invalid(format!("manifest names unknown subcommand '{other}'"))),
        })
    }

    fn build(&self) -> CliResult<Artifacts> {
        match self {
            Job::MaxminCurve(p) => maxmin_curve(p),
            Job::OneShot(c) => one_shot(c),
            Job::Roc(c) => roc(c),
            Job::Tradeoff(c) => tradeoff(c),
        }
    }

    /// Computes everything first, then writes the artifacts and finally the
    /// manifest, each atomically.
    pub fn run(&self, out: &Path) -> CliResult<Executed> {
        let start = Instant::now();
        let built = self.build()?;
        std::fs::create_dir_all(out)
            .map_err(|e| CliError::Other(anyhow::anyhow!("creating {}: {e}", out.display())))?;
        let mut names = Vec::new();
        for (name, bytes) in &built.files {
            write_atomic(&out.join(name), bytes)?;
            names.push(name.clone());
        }
        let manifest = RunManifest {
            manifest_version: MANIFEST_VERSION,
            subcommand: self.name().to_string(),
            parameters: self.parameters(),
            seed: self.seed(),
            artifacts: names,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        write_atomic(&out.join(MANIFEST_FILE), &json_bytes(&manifest)?)?;
        Ok(Executed {
            manifest,
            summary: built.summary,
            uncertified: built.uncertified,
        })
    }
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CurveRow {
    lambda: f64,
    exact: Option<f64>,
    approx: f64,
    error_bound: f64,
}

pub fn validate_curve(p: &CurveParams) -> CliResult<()> {
    if p.k < 2 || p.m < p.k {
        return Err(invalid(format!("need m >= k >= 2 (m={}, k={})", p.m, p.k)));
    }
    if p.lambda_grid.is_empty() {
        return Err(invalid("lambda grid is empty"));
    }
    if let Some(l) = p.lambda_grid.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
        return Err(invalid(format!("lambda {l} outside (0, 1]")));
    }
    Ok(())
}

fn maxmin_curve(p: &CurveParams) -> CliResult<Artifacts> {
    validate_curve(p)?;
    let divisible = p.m.is_multiple_of(p.k);
    let mut rows = Vec::with_capacity(p.lambda_grid.len());
    for &lambda in &p.lambda_grid {
        // The exact column needs k | m and a feasible constraint (lambda m >= 1).
        let exact = if divisible && lambda * p.m as f64 >= 1.0 - 1e-12 {
            Some(maxmin_rd(lambda, p.m, p.k)?)
        } else {
            None
        };
        rows.push(CurveRow {
            lambda,
            exact,
            approx: maxmin_rd_approx(lambda, p.k)?,
            error_bound: approx_error_bound(lambda, p.m, p.k),
        });
    }
    let svg = line_plot(
        &format!("max-min detection, k={}, m={}", p.k, p.m),
        "lambda",
        "detection rate",
        &[
            Series {
                label: "exact".into(),
                points: rows.iter().filter_map(|r| r.exact.map(|e| (r.lambda, e))).collect(),
            },
            Series {
                label: "approximation".into(),
                points: rows.iter().map(|r| (r.lambda, r.approx)).collect(),
            },
        ],
    );
    let summary = serde_json::json!({
        "rows": rows.len(),
        "exact_available": divisible,
        "max_exact": rows.iter().filter_map(|r| r.exact).fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v)))),
    });
    Ok(Artifacts {
        files: vec![
            ("maxmin_curve.csv".into(), csv_bytes(&rows)?),
            ("maxmin_curve.svg".into(), svg.into_bytes()),
        ],
        summary,
        uncertified: 0,
    })
}

// ---------------------------------------------------------------------------

pub fn source_label(s: &SourceSpec) -> String {
    match s {
        SourceSpec::Uniform => "uniform".into(),
        SourceSpec::WorstCase { lambda } => format!("worst_case(lambda={lambda})"),
        SourceSpec::SpikeUniform { lambda } => format!("spike_uniform(lambda={lambda})"),
        SourceSpec::Explicit { .. } => "explicit".into(),
    }
}

pub fn scheme_label(s: &Scheme) -> String {
    match s {
        Scheme::Cc => "cc".into(),
        Scheme::RedGreen { delta } => format!("red_green(delta={delta})"),
    }
}

#[derive(Serialize)]
struct OneShotRow {
    index: usize,
    m: usize,
    k: usize,
    source: String,
    partition_strategy: &'static str,
    scheme: String,
    trials: u64,
    correct: u64,
    rd: f64,
    stderr: f64,
    theory: Option<f64>,
}

#[derive(Serialize)]
struct Run<'a, R> {
    config: &'a ExperimentConfig,
    report: R,
}

fn one_shot(c: &ExperimentFile) -> CliResult<Artifacts> {
    let reports: Vec<OneShotReport> =
        c.experiments.iter().map(run_one_shot).collect::<Result<_, _>>()?;
    let rows: Vec<OneShotRow> = c
        .experiments
        .iter()
        .zip(&reports)
        .enumerate()
        .map(|(index, (e, r))| OneShotRow {
            index,
            m: e.m,
            k: e.k,
            source: source_label(&e.source),
            partition_strategy: e.partition_strategy.as_str(),
            scheme: scheme_label(&e.scheme),
            trials: r.trials,
            correct: r.correct,
            rd: r.rd,
            stderr: r.stderr,
            theory: r.theory,
        })
        .collect();
    let runs: Vec<_> = c
        .experiments
        .iter()
        .zip(&reports)
        .map(|(config, report)| Run { config, report })
        .collect();
    let summary = serde_json::json!({
        "rd": reports.iter().map(|r| r.rd).collect::<Vec<_>>(),
        "stderr": reports.iter().map(|r| r.stderr).collect::<Vec<_>>(),
    });
    Ok(Artifacts {
        files: vec![
            ("one_shot.csv".into(), csv_bytes(&rows)?),
            ("one_shot.json".into(), json_bytes(&runs)?),
        ],
        summary,
        uncertified: 0,
    })
}

#[derive(Serialize)]
struct RocSummaryRow {
    index: usize,
    m: usize,
    k: usize,
    n: usize,
    source: String,
    partition_strategy: &'static str,
    scheme: String,
    trials: u64,
    auc: f64,
    watermarked_match_rate: f64,
    null_match_rate: f64,
    tpr_at_fpr_0_01: f64,
}

#[derive(Serialize)]
struct RocPointRow {
    index: usize,
    threshold: f64,
    fpr: f64,
    tpr: f64,
}

fn roc(c: &ExperimentFile) -> CliResult<Artifacts> {
    let reports: Vec<SequenceReport> =
        c.experiments.iter().map(run_sequence).collect::<Result<_, _>>()?;
    let mut summary_rows = Vec::new();
    let mut points = Vec::new();
    let mut series = Vec::new();
    for (index, (e, r)) in c.experiments.iter().zip(&reports).enumerate() {
        summary_rows.push(RocSummaryRow {
            index,
            m: e.m,
            k: e.k,
            n: e.n,
            source: source_label(&e.source),
            partition_strategy: e.partition_strategy.as_str(),
            scheme: scheme_label(&e.scheme),
            trials: e.trials,
            auc: r.roc.auc,
            watermarked_match_rate: r.watermarked_match_rate,
            null_match_rate: r.null_match_rate,
            tpr_at_fpr_0_01: r.roc.tpr_at_fpr(0.01),
        });
        for i in 0..r.roc.thresholds.len() {
            points.push(RocPointRow {
                index,
                threshold: r.roc.thresholds[i],
                fpr: r.roc.fpr[i],
                tpr: r.roc.tpr[i],
            });
        }
        let mut xy: Vec<(f64, f64)> = r.roc.fpr.iter().copied().zip(r.roc.tpr.iter().copied()).collect();
        xy.push((0.0, 0.0));
        xy.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        series.push(Series {
            label: format!("{} k={} (AUC {:.3})", scheme_label(&e.scheme), e.k, r.roc.auc),
            points: xy,
        });
    }
    let runs: Vec<_> = c
        .experiments
        .iter()
        .zip(&reports)
        .map(|(config, report)| Run { config, report })
        .collect();
    let summary = serde_json::json!({
        "auc": reports.iter().map(|r| r.roc.auc).collect::<Vec<_>>(),
    });
    Ok(Artifacts {
        files: vec![
            ("roc_summary.csv".into(), csv_bytes(&summary_rows)?),
            ("roc.csv".into(), csv_bytes(&points)?),
            ("roc.json".into(), json_bytes(&runs)?),
            ("roc.svg".into(), line_plot("ROC", "false positive rate", "true positive rate", &series).into_bytes()),
        ],
        summary,
        uncertified: 0,
    })
}

#[derive(Serialize)]
struct TradeoffRow {
    alpha_p: f64,
    rd: f64,
    rp: f64,
    certified: bool,
}

#[derive(Serialize)]
struct TradeoffDoc<'a> {
    config: &'a TradeoffFile,
    points: &'a [TradeoffPoint],
}

fn tradeoff(c: &TradeoffFile) -> CliResult<Artifacts> {
    let points = solve_frontier(&c.q, c.k, c.gamma, &c.alpha_grid, &c.solver)?;
    let rows: Vec<TradeoffRow> = points
        .iter()
        .map(|p| TradeoffRow {
            alpha_p: p.alpha_p,
            rd: p.rd,
            rp: p.rp,
            certified: p.certified,
        })
        .collect();
    let mut xy: Vec<(f64, f64)> = rows.iter().map(|r| (r.alpha_p, r.rd)).collect();
    xy.sort_by(|a, b| a.0.total_cmp(&b.0));
    let svg = line_plot(
        &format!("detection vs perception budget, k={}", c.k),
        "alpha_p",
        "detection rate",
        &[Series {
            label: "frontier".into(),
            points: xy,
        }],
    );
    let uncertified = points.iter().filter(|p| !p.certified).count();
    let summary = serde_json::json!({
        "rd": rows.iter().map(|r| r.rd).collect::<Vec<_>>(),
        "uncertified": uncertified,
    });
    Ok(Artifacts {
        files: vec![
            ("tradeoff.csv".into(), csv_bytes(&rows)?),
            ("tradeoff.json".into(), json_bytes(&TradeoffDoc { config: c, points: &points })?),
            ("tradeoff.svg".into(), svg.into_bytes()),
        ],
        summary,
        uncertified,
    })
}
