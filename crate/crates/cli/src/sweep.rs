//! Full-factorial sweeps: one iterative solve per grid point, algorithm and
//! repetition, run on a worker pool and collected in run-id order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use mofjsp::decompose::{run_iterative, IterativeConfig, LoopTrace};
use mofjsp::instance::{parse_named, Instance};
use mofjsp::samplers::{derive_seed, Sampler, SamplerKind, SubproblemSolver};
use mofjsp::schedule::{evaluate, Schedule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{GridPoint, ObjectiveSet, SweepConfig};
use crate::error::{CliError, Result};

pub const RUNS_FILE: &str = "runs.csv";
pub const TIMINGS_FILE: &str = "timings.csv";

/// One row of `runs.csv`. Wall time lives in `timings.csv` so that reruns
/// reproduce this file byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub algorithm: SamplerKind,
    pub objectives: ObjectiveSet,
    pub rep: usize,
    pub seed: u64,
    pub params_hash: String,
    pub t_est: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub zeta: f64,
    pub j_s: usize,
    pub o_s: usize,
    pub feasible: bool,
    pub e_f1: Option<u32>,
    pub e_f2: Option<u32>,
    pub e_f3: Option<f64>,
    pub loops: usize,
    /// Path of the loop log, relative to the output directory.
    pub trace: String,
    pub error: String,
    #[serde(skip)]
    pub wall_time: Option<f64>,
}

impl RunRecord {
    /// Objective vector for `set`; `None` for infeasible runs.
    pub fn objective_vector(&self, set: ObjectiveSet) -> Option<Vec<f64>> {
        if !self.feasible {
            return None;
        }
        Some(set.vector_of(self.e_f1? as f64, self.e_f2? as f64, self.e_f3?))
    }

    fn key(&self) -> (SamplerKind, String, usize) {
        (self.algorithm, self.params_hash.clone(), self.rep)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TimingRow {
    run_id: usize,
    params_hash: String,
    wall_time_s: f64,
}

/// Everything a run produced besides its record.
#[derive(Debug, Clone, Default)]
pub struct RunArtifacts {
    pub schedule: Option<Schedule>,
    pub trace: Vec<LoopTrace>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    /// Sorted by `run_id`.
    pub records: Vec<RunRecord>,
    pub artifacts: BTreeMap<usize, RunArtifacts>,
    /// Runs taken over from a previous `runs.csv`.
    pub resumed: usize,
}

#[derive(Clone, Default)]
pub struct SweepOptions {
    /// Skip runs already present in the output directory's `runs.csv`.
    pub resume: bool,
    /// Backend for `qasa` runs; without one they are recorded as failed.
    pub external: Option<Arc<dyn SubproblemSolver>>,
}

pub fn load_instance(cfg: &SweepConfig) -> Result<Instance> {
    let text = fs::read_to_string(&cfg.instance).map_err(|e| CliError::io(&cfg.instance, e))?;
    let name = cfg
        .instance
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    let instance = parse_named(&text, &name).map_err(|e| CliError::Format {
        path: cfg.instance.clone(),
        message: e.to_string(),
    })?;
    match &cfg.priorities {
        Some(p) => instance
            .assign_priorities(p.seed, p.lo, p.hi)
            .map_err(|e| CliError::Config(e.to_string())),
        None => Ok(instance),
    }
}

pub fn trace_path(run_id: usize) -> String {
    format!("traces/run_{run_id:06}.log")
}

pub fn schedule_path(run_id: usize) -> String {
    format!("schedules/run_{run_id:06}.csv")
}

struct Task {
    run_id: usize,
    algorithm: SamplerKind,
    point: GridPoint,
    rep: usize,
    seed: u64,
}

fn plan(cfg: &SweepConfig, points: &[GridPoint]) -> Vec<Task> {
    let reps = cfg.repetitions;
    let mut tasks = Vec::new();
    for (a, &algorithm) in cfg.algorithms.iter().enumerate() {
        for (p, point) in points.iter().enumerate() {
            for rep in 0..reps {
                tasks.push(Task {
                    run_id: (a * points.len() + p) * reps + rep,
                    algorithm,
                    point: *point,
                    rep,
                    // every algorithm sees the same seed for the same point and repetition
                    seed: derive_seed(cfg.seed, (p * reps + rep) as u64),
                });
            }
        }
    }
    tasks
}

/// Solves one configuration; failures become part of the record.
pub fn run_once(
    instance: &Instance,
    cfg: &SweepConfig,
    algorithm: SamplerKind,
    point: &GridPoint,
    seed: u64,
    external: Option<&Arc<dyn SubproblemSolver>>,
) -> (RunRecord, RunArtifacts) {
    let mut sampler = Sampler::new(algorithm, cfg.sampler.clone());
    if let Some(solver) = external {
        sampler = sampler.with_external(solver.clone());
    }
    let icfg = IterativeConfig {
        params: cfg.objectives.mask(point.params),
        weights: cfg.weights(),
        j_s: point.j_s,
        o_s: point.o_s,
        t_est: point.t_est,
        retries: cfg.retries,
    };
    let p = icfg.params;
    let mut record = RunRecord {
        run_id: 0,
        algorithm,
        objectives: cfg.objectives,
        rep: 0,
        seed,
        params_hash: point.hash(),
        t_est: point.t_est,
        alpha: p.alpha,
        beta: p.beta,
        gamma: p.gamma,
        delta: p.delta,
        epsilon: p.epsilon,
        zeta: p.zeta,
        j_s: point.j_s,
        o_s: point.o_s,
        feasible: false,
        e_f1: None,
        e_f2: None,
        e_f3: None,
        loops: 0,
        trace: String::new(),
        error: String::new(),
        wall_time: None,
    };
    let started = Instant::now();
    let outcome = run_iterative(instance, &icfg, &sampler, seed);
    record.wall_time = Some(started.elapsed().as_secs_f64());
    let mut artifacts = RunArtifacts::default();
    match outcome {
        Ok(result) => {
            record.loops = result.trace.len();
            artifacts.trace = result.trace;
            match evaluate(&result.schedule, instance) {
                Ok(obj) => {
                    record.feasible = true;
                    record.e_f1 = Some(obj.makespan);
                    record.e_f2 = Some(obj.workload);
                    record.e_f3 = Some(obj.priority);
                }
                Err(e) => record.error = e.to_string(),
            }
            artifacts.schedule = Some(result.schedule);
        }
        Err(e) => record.error = e.to_string(),
    }
    (record, artifacts)
}

pub fn read_runs(path: &Path) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row.map_err(|e| csv_error(path, e))?);
    }
    Ok(out)
}

/// Wall times by run id; missing file means no timings.
pub fn read_timings(path: &Path) -> Result<BTreeMap<usize, f64>> {
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = BTreeMap::new();
    for row in reader.deserialize() {
        let row: TimingRow = row.map_err(|e| csv_error(path, e))?;
        out.insert(row.run_id, row.wall_time_s);
    }
    Ok(out)
}

/// `runs.csv` plus wall times from the sibling `timings.csv`.
pub fn read_runs_with_timings(runs: &Path) -> Result<Vec<RunRecord>> {
    let mut records = read_runs(runs)?;
    let timings = read_timings(&runs.with_file_name(TIMINGS_FILE))?;
    for r in &mut records {
        r.wall_time = timings.get(&r.run_id).copied();
    }
    Ok(records)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Runs every planned configuration not already recorded.
pub fn run_sweep(cfg: &SweepConfig, opts: &SweepOptions) -> Result<SweepResult> {
    cfg.validate()?;
    let instance = load_instance(cfg)?;
    let points = cfg.grid_points()?;
    let tasks = plan(cfg, &points);

    let mut done: BTreeMap<(SamplerKind, String, usize), RunRecord> = BTreeMap::new();
    let runs_file = cfg.output.join(RUNS_FILE);
    if opts.resume && runs_file.exists() {
        for r in read_runs_with_timings(&runs_file)? {
            done.insert(r.key(), r);
        }
    }

    let mut resumed = Vec::new();
    let mut todo = Vec::new();
    for t in tasks {
        let key = (t.algorithm, t.point.hash(), t.rep);
        match done.remove(&key) {
            Some(prev) if prev.run_id == t.run_id && prev.seed == t.seed => resumed.push(prev),
            _ => todo.push(t),
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let fresh: Vec<(RunRecord, RunArtifacts)> = pool.install(|| {
        todo.par_iter()
            .map(|t| {
                let (mut record, artifacts) =
                    run_once(&instance, cfg, t.algorithm, &t.point, t.seed, opts.external.as_ref());
                record.run_id = t.run_id;
                record.rep = t.rep;
                record.trace = trace_path(t.run_id);
                (record, artifacts)
            })
            .collect()
    });

    let mut result = SweepResult {
        resumed: resumed.len(),
        ..Default::default()
    };
    result.records = resumed;
    for (record, artifacts) in fresh {
        result.artifacts.insert(record.run_id, artifacts);
        result.records.push(record);
    }
    result.records.sort_by_key(|r| r.run_id);
    Ok(result)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_file(path, &String::from_utf8_lossy(&bytes))
}

/// Writes `runs.csv`, `timings.csv`, loop logs and schedules of new runs.
pub fn write_sweep(result: &SweepResult, outdir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let runs = outdir.join(RUNS_FILE);
    write_csv(&runs, &result.records)?;
    written.push(runs);
    let timings = outdir.join(TIMINGS_FILE);
    write_csv(
        &timings,
        result.records.iter().filter_map(|r| {
            Some(TimingRow {
                run_id: r.run_id,
                params_hash: r.params_hash.clone(),
                wall_time_s: r.wall_time?,
            })
        }),
    )?;
    written.push(timings);
    for (run_id, artifacts) in &result.artifacts {
        let lines: String = artifacts.trace.iter().map(|t| format!("{t}\n")).collect();
        let path = outdir.join(trace_path(*run_id));
        write_file(&path, &lines)?;
        if let Some(s) = &artifacts.schedule {
            let path = outdir.join(schedule_path(*run_id));
            write_file(&path, &s.to_csv())?;
        }
    }
    Ok(written)
}

/// Distinct parameter hashes among the records.
pub fn distinct_points(records: &[RunRecord]) -> usize {
    records.iter().map(|r| &r.params_hash).collect::<BTreeSet<_>>().len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GridSpec;

    const TOY: &str = "2 2 1.5\n2  2 1 2 2 3  1 2 1\n1  2 1 1 2 2\n#priorities\n2 1\n";

    fn toy_config(dir: &Path) -> SweepConfig {
        let path = dir.join("toy.fjs");
        fs::write(&path, TOY).unwrap();
        let mut cfg = SweepConfig::new(path, ObjectiveSet::MakespanWorkload);
        cfg.output = dir.join("out");
        cfg.workers = 2;
        cfg
    }

    #[test]
    fn factorial_count() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = toy_config(dir.path());
        cfg.grid.alpha = GridSpec::Values { values: vec![1.0, 2.0] };
        cfg.grid.j_s = GridSpec::Values { values: vec![1.0, 2.0] };
        cfg.repetitions = 3;
        let result = run_sweep(&cfg, &SweepOptions::default()).unwrap();
        assert_eq!(result.records.len(), 12);
        assert_eq!(distinct_points(&result.records), 4);
        let ids: Vec<usize> = result.records.iter().map(|r| r.run_id).collect();
        assert_eq!(ids, (0..12).collect::<Vec<_>>());
        assert!(result.records.iter().all(|r| r.feasible));
    }

    #[test]
    fn single_point_single_record() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = toy_config(dir.path());
        let result = run_sweep(&cfg, &SweepOptions::default()).unwrap();
        assert_eq!(result.records.len(), 1);
        assert_eq!(result.records[0].trace, "traces/run_000000.log");
    }

    #[test]
    fn qasa_without_backend_is_recorded_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = toy_config(dir.path());
        cfg.algorithms = vec![SamplerKind::Csa, SamplerKind::Qasa];
        let result = run_sweep(&cfg, &SweepOptions::default()).unwrap();
        assert_eq!(result.records.len(), 2);
        assert!(result.records[0].feasible);
        assert!(!result.records[1].feasible);
        assert!(result.records[1].e_f1.is_none());
        assert!(!result.records[1].error.is_empty());
    }

    #[test]
    fn resume_skips_completed_runs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = toy_config(dir.path());
        cfg.repetitions = 2;
        let first = run_sweep(&cfg, &SweepOptions::default()).unwrap();
        write_sweep(&first, &cfg.output).unwrap();
        cfg.repetitions = 3;
        let opts = SweepOptions { resume: true, ..Default::default() };
        let second = run_sweep(&cfg, &opts).unwrap();
        // a single grid point keeps ids and seeds when repetitions grow
        assert_eq!((second.resumed, second.records.len()), (2, 3));
        assert_eq!(second.artifacts.len(), 1);
        let third = run_sweep(&{ let mut c = cfg.clone(); c.repetitions = 2; c }, &opts).unwrap();
        assert_eq!(third.resumed, 2);
        assert!(third.artifacts.is_empty());
        assert_eq!(third.records, first.records);
    }

    #[test]
    fn runs_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = toy_config(dir.path());
        let result = run_sweep(&cfg, &SweepOptions::default()).unwrap();
        write_sweep(&result, &cfg.output).unwrap();
        let back = read_runs_with_timings(&cfg.output.join(RUNS_FILE)).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].e_f1, result.records[0].e_f1);
        assert_eq!(back[0].e_f3, result.records[0].e_f3);
        assert!(back[0].wall_time.is_some());
        assert!(cfg.output.join(trace_path(0)).exists());
        assert!(cfg.output.join(schedule_path(0)).exists());
    }
}
