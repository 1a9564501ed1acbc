//! Pareto aggregation of run records and export of tables and plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mofjsp::instance::Instance;
use mofjsp::pareto::{c_metric, hvr, nondominated, reference_point, Front, Point};
use mofjsp::samplers::SamplerKind;
use mofjsp::schedule::Schedule;
use serde::{Deserialize, Serialize};

use crate::config::ObjectiveSet;
use crate::error::{CliError, Result};
use crate::sweep::{schedule_path, write_csv, RunRecord};

/// Reference point = worst observed value per objective times this factor.
pub const REFERENCE_SCALE: f64 = 1.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmMetrics {
    pub algorithm: SamplerKind,
    pub runs: usize,
    pub feasible_runs: usize,
    pub front_size: usize,
    /// Hypervolume relative to the combined reference front.
    pub hvr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub a: SamplerKind,
    pub b: SamplerKind,
    /// Share of `b`'s front dominated by `a`'s front.
    pub value: f64,
}

/// Everything in `metrics.json`; recomputable from `fronts.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub objectives: ObjectiveSet,
    pub labels: Vec<String>,
    pub reference_point: Vec<f64>,
    pub reference_front: Vec<Vec<f64>>,
    pub algorithms: Vec<AlgorithmMetrics>,
    pub coverage: Vec<Coverage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

impl TimeStats {
    /// Mean and sample standard deviation; `None` without data.
    pub fn of(values: &[f64]) -> Option<TimeStats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(TimeStats { count: values.len(), mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmTimes {
    pub algorithm: SamplerKind,
    /// Runs whose objective vector lies on the algorithm's front.
    pub front_runs: Option<TimeStats>,
    pub all_runs: Option<TimeStats>,
}

/// One row of `fronts.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub algorithm: SamplerKind,
    pub run_id: usize,
    pub params_hash: String,
    pub e_f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_f2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_f3: Option<f64>,
    pub dominated_flag: bool,
}

#[derive(Debug, Clone)]
pub struct Aggregate {
    pub fronts: BTreeMap<SamplerKind, Front>,
    /// Every feasible run with its dominance flag within its algorithm.
    pub rows: Vec<FrontRow>,
    pub table: MetricTable,
    pub times: Vec<AlgorithmTimes>,
}

fn row_vector(row: &FrontRow) -> Vec<f64> {
    std::iter::once(row.e_f1).chain(row.e_f2).chain(row.e_f3).collect()
}

/// Fronts and metrics from front rows alone; `aggregate` and the check
/// that `metrics.json` recomputes from `fronts.csv` both go through here.
pub fn metrics_from_rows(
    rows: &[FrontRow],
    objectives: ObjectiveSet,
    run_counts: &BTreeMap<SamplerKind, usize>,
) -> Result<(BTreeMap<SamplerKind, Front>, MetricTable)> {
    if rows.is_empty() {
        return Err(CliError::NoFeasibleRuns);
    }
    let pareto_err = |e: mofjsp::pareto::ParetoError| CliError::Format {
        path: PathBuf::from("fronts"),
        message: e.to_string(),
    };
    let mut by_alg: BTreeMap<SamplerKind, Vec<Point>> = BTreeMap::new();
    for row in rows {
        by_alg
            .entry(row.algorithm)
            .or_default()
            .push(Point::with_run(row_vector(row), row.run_id));
    }
    let all: Vec<Point> = by_alg.values().flatten().cloned().collect();
    let reference = reference_point(&all, REFERENCE_SCALE).map_err(pareto_err)?;
    let reference_front = nondominated(&all).map_err(pareto_err)?;
    let mut fronts = BTreeMap::new();
    for (alg, points) in &by_alg {
        fronts.insert(*alg, nondominated(points).map_err(pareto_err)?);
    }
    let mut algorithms = Vec::new();
    for (alg, count) in run_counts {
        let feasible = by_alg.get(alg).map_or(0, Vec::len);
        let front = fronts.get(alg);
        algorithms.push(AlgorithmMetrics {
            algorithm: *alg,
            runs: *count,
            feasible_runs: feasible,
            front_size: front.map_or(0, Front::len),
            hvr: front.and_then(|f| hvr(&f.points, &reference_front.points, &reference).ok()),
        });
    }
    let mut coverage = Vec::new();
    for (a, fa) in &fronts {
        for (b, fb) in &fronts {
            if a != b {
                coverage.push(Coverage {
                    a: *a,
                    b: *b,
                    value: c_metric(&fa.points, &fb.points).map_err(pareto_err)?,
                });
            }
        }
    }
    let table = MetricTable {
        objectives,
        labels: objectives.labels().into_iter().map(String::from).collect(),
        reference_point: reference,
        reference_front: reference_front.points.iter().map(|p| p.values.clone()).collect(),
        algorithms,
        coverage,
    };
    Ok((fronts, table))
}

pub fn aggregate(records: &[RunRecord], objectives: ObjectiveSet) -> Result<Aggregate> {
    let mut run_counts: BTreeMap<SamplerKind, usize> = BTreeMap::new();
    for r in records {
        *run_counts.entry(r.algorithm).or_default() += 1;
    }
    let feasible: Vec<(&RunRecord, Vec<f64>)> = records
        .iter()
        .filter_map(|r| r.objective_vector(objectives).map(|v| (r, v)))
        .collect();
    let mut rows: Vec<FrontRow> = feasible
        .iter()
        .map(|(r, v)| {
            let dominated = feasible.iter().any(|(q, w)| {
                q.algorithm == r.algorithm && mofjsp::pareto::dominates(w, v).unwrap_or(false)
            });
            FrontRow {
                algorithm: r.algorithm,
                run_id: r.run_id,
                params_hash: r.params_hash.clone(),
                e_f1: v[0],
                e_f2: objectives.uses_workload().then(|| v[1]),
                e_f3: objectives.uses_priority().then(|| v[v.len() - 1]),
                dominated_flag: dominated,
            }
        })
        .collect();
    rows.sort_by_key(|r| (r.algorithm, r.run_id));
    let (fronts, table) = metrics_from_rows(&rows, objectives, &run_counts)?;

    let mut times = Vec::new();
    for alg in run_counts.keys() {
        let wall = |pred: &dyn Fn(&RunRecord) -> bool| -> Vec<f64> {
            records
                .iter()
                .filter(|r| r.algorithm == *alg && pred(r))
                .filter_map(|r| r.wall_time)
                .collect()
        };
        let on_front: std::collections::BTreeSet<usize> = rows
            .iter()
            .filter(|row| row.algorithm == *alg && !row.dominated_flag)
            .map(|row| row.run_id)
            .collect();
        times.push(AlgorithmTimes {
            algorithm: *alg,
            front_runs: TimeStats::of(&wall(&|r| on_front.contains(&r.run_id))),
            all_runs: TimeStats::of(&wall(&|_| true)),
        });
    }
    Ok(Aggregate { fronts, rows, table, times })
}

pub fn read_fronts(path: &Path) -> Result<Vec<FrontRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| crate::sweep::csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| crate::sweep::csv_error(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(alg), Some(run), Some(hash), Some(f1), Some(flag)) =
        (col("algorithm"), col("run_id"), col("params_hash"), col("e_f1"), col("dominated_flag"))
    else {
        return Err(CliError::Format { path: path.into(), message: "missing fronts.csv columns".into() });
    };
    let (f2, f3) = (col("e_f2"), col("e_f3"));
    let bad = |m: String| CliError::Format { path: path.into(), message: m };
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| crate::sweep::csv_error(path, e))?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(format!("{e}: {:?}", &rec[i])));
        out.push(FrontRow {
            algorithm: SamplerKind::parse(&rec[alg]).ok_or_else(|| bad(format!("unknown algorithm {}", &rec[alg])))?,
            run_id: rec[run].parse().map_err(|e| bad(format!("{e}")))?,
            params_hash: rec[hash].to_string(),
            e_f1: num(f1)?,
            e_f2: f2.map(num).transpose()?,
            e_f3: f3.map(num).transpose()?,
            dominated_flag: rec[flag].parse().map_err(|e| bad(format!("{e}")))?,
        });
    }
    Ok(out)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Scatter of front points in one objective pair, both axes normalized to
/// [0, 1] over the plotted points. One `<circle>` per point.
pub fn scatter_svg(
    fronts: &BTreeMap<SamplerKind, Front>,
    axes: (usize, usize),
    labels: (&str, &str),
    title: &str,
) -> String {
    const SIZE: f64 = 360.0;
    const PAD: f64 = 50.0;
    let all: Vec<&Point> = fronts.values().flat_map(|f| &f.points).collect();
    let range = |d: usize| {
        let lo = all.iter().map(|p| p.values[d]).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(|p| p.values[d]).fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi > lo { hi - lo } else { 1.0 })
    };
    let (x0, xs) = range(axes.0);
    let (y0, ys) = range(axes.1);
    let mut svg = String::new();
    let w = SIZE + 2.0 * PAD + 100.0;
    let h = SIZE + 2.0 * PAD;
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<text x="{PAD}" y="20" font-size="13">{title}</text>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{f:.2}</text>"#, PAD + f * SIZE - 8.0, PAD + SIZE + 15.0);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{f:.2}</text>"#, PAD - 32.0, PAD + (1.0 - f) * SIZE + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{} (normalized)</text>"#, PAD + SIZE / 2.0 - 40.0, h - 8.0, labels.0);
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})">{} (normalized)</text>"#,
        PAD + SIZE / 2.0 + 40.0,
        PAD + SIZE / 2.0 + 40.0,
        labels.1
    );
    for (n, (alg, front)) in fronts.iter().enumerate() {
        let color = PALETTE[n % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{alg}</text>"#,
            PAD + SIZE + 12.0,
            PAD + 14.0 * (n as f64 + 1.0)
        );
        for p in &front.points {
            let x = PAD + (p.values[axes.0] - x0) / xs * SIZE;
            let y = PAD + (1.0 - (p.values[axes.1] - y0) / ys) * SIZE;
            let _ = writeln!(
                svg,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}" fill-opacity="0.7"><title>run {} ({}, {})</title></circle>"#,
                p.run_id, p.values[axes.0], p.values[axes.1]
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// What to draw besides tables.
pub struct PlotOptions<'a> {
    /// Needed for Gantt charts of front schedules; scatter plots need nothing.
    pub instance: Option<&'a Instance>,
}

/// Writes `fronts.csv`, `metrics.json`, `timings.json` and, with plot
/// options, scatter SVGs per objective pair plus Gantt SVGs of front runs.
pub fn export(agg: &Aggregate, outdir: &Path, plots: Option<PlotOptions>) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let fronts = outdir.join("fronts.csv");
    write_csv(&fronts, &agg.rows)?;
    written.push(fronts);
    let metrics = outdir.join("metrics.json");
    write_text(&metrics, &to_json(&agg.table))?;
    written.push(metrics);
    let times = outdir.join("timings.json");
    write_text(&times, &to_json(&agg.times))?;
    written.push(times);

    let Some(plots) = plots else {
        return Ok(written);
    };
    let labels = &agg.table.labels;
    for a in 0..labels.len() {
        for b in a + 1..labels.len() {
            let path = outdir.join(format!("plots/scatter_{}_{}.svg", labels[a], labels[b]));
            let title = format!("{} fronts: {} vs {}", agg.table.objectives, labels[a], labels[b]);
            write_text(&path, &scatter_svg(&agg.fronts, (a, b), (&labels[a], &labels[b]), &title))?;
            written.push(path);
        }
    }
    if let Some(instance) = plots.instance {
        for front in agg.fronts.values() {
            for p in &front.points {
                let source = outdir.join(schedule_path(p.run_id));
                let Ok(text) = fs::read_to_string(&source) else { continue };
                let schedule = Schedule::from_csv(&text, instance).map_err(|e| CliError::Format {
                    path: source.clone(),
                    message: e.to_string(),
                })?;
                let path = outdir.join(format!("plots/gantt_run_{:06}.svg", p.run_id));
                let title = format!("{} run {}", instance.name, p.run_id);
                write_text(&path, &schedule.gantt_svg(instance, &title))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
