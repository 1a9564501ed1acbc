//! Iterative decomposition: rank the unscheduled jobs by bottleneck scores,
//! model the most critical ones, solve, commit and repeat.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, Time};
use crate::qubo::{
    count_variables, estimate_tmax, full_windows, build_windows, successor_time_until, Floors, JobSlice,
    LagrangeParams, MachineBlocks, QuboError, SubproblemModel, Subset,
};
use crate::samplers::{derive_seed, Sampler, SamplerError};
use crate::schedule::{check_partial, decode, Entry, Schedule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecomposeError {
    #[error("invalid bottleneck weights: {0}")]
    InvalidWeights(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("loop {loop_index}: no feasible sample after {attempts} attempt(s), last t_max {t_max}")]
    SolveFailed { loop_index: usize, attempts: usize, t_max: Time },
}

/// Weights of the three bottleneck factors in the combined job score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BottleneckWeights {
    pub alpha_l: f64,
    pub beta_l: f64,
    pub gamma_l: f64,
}

impl Default for BottleneckWeights {
    fn default() -> Self {
        BottleneckWeights { alpha_l: 1.0, beta_l: 1.0, gamma_l: 1.0 }
    }
}

impl BottleneckWeights {
    pub fn validate(&self) -> Result<(), DecomposeError> {
        let w = [self.alpha_l, self.beta_l, self.gamma_l];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(DecomposeError::InvalidWeights(format!("{w:?} must be finite and nonnegative")));
        }
        if w.iter().all(|x| *x == 0.0) {
            return Err(DecomposeError::InvalidWeights("all weights are zero".into()));
        }
        Ok(())
    }
}

/// Commitments so far and what is still to be scheduled.
#[derive(Debug, Clone)]
pub struct LoopState<'a> {
    instance: &'a Instance,
    /// Index of the first unscheduled operation of each job.
    next_op: Vec<usize>,
    committed: Schedule,
    machine_release: Vec<Time>,
    horizon: Time,
}

impl<'a> LoopState<'a> {
    pub fn new(instance: &'a Instance) -> Self {
        LoopState {
            instance,
            next_op: vec![0; instance.num_jobs()],
            committed: Schedule::default(),
            machine_release: vec![0; instance.num_machines],
            horizon: 0,
        }
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    pub fn committed(&self) -> &Schedule {
        &self.committed
    }

    pub fn machine_release(&self) -> &[Time] {
        &self.machine_release
    }

    pub fn horizon(&self) -> Time {
        self.horizon
    }

    pub fn remaining_ops(&self, job: usize) -> Range<usize> {
        self.next_op[job]..self.instance.jobs[job].operations.len()
    }

    /// Jobs with at least one unscheduled operation, in id order.
    pub fn remaining_jobs(&self) -> Vec<usize> {
        (0..self.instance.num_jobs())
            .filter(|&i| !self.remaining_ops(i).is_empty())
            .collect()
    }

    pub fn is_done(&self) -> bool {
        self.remaining_jobs().is_empty()
    }

    fn remaining_operation_count(&self) -> usize {
        (0..self.instance.num_jobs()).map(|i| self.remaining_ops(i).len()).sum()
    }

    /// Finish time of the last committed operation of `job`, 0 if none.
    pub fn job_release(&self, job: usize) -> Time {
        self.committed.job_finish(job).unwrap_or(0)
    }

    /// Earliest-start floors for the subset: the job's committed finish plus
    /// the minimum durations of the remaining operations in between.
    pub fn floors(&self, subset: &Subset) -> Floors {
        let mut floors = Floors::new();
        for s in &subset.slices {
            let job = &self.instance.jobs[s.job];
            let mut t = self.job_release(s.job);
            for j in self.next_op[s.job]..s.ops.end {
                if j >= s.ops.start {
                    floors.insert((s.job, j), t);
                }
                t += job.operations[j].min_duration();
            }
        }
        floors
    }

    /// Committed intervals, which new variables must avoid.
    pub fn blocks(&self) -> MachineBlocks {
        let mut blocks = MachineBlocks::new();
        for e in &self.committed.entries {
            blocks.block(e.machine, e.start, e.end());
        }
        blocks
    }

    /// Records finished entries. Entries must continue each job's sequence
    /// and respect committed machine intervals; this is not re-checked.
    pub fn commit(&mut self, entries: &[Entry]) {
        self.committed = Schedule::from_entries(
            self.committed.entries.iter().chain(entries).copied().collect(),
            self.instance,
        );
        for e in entries {
            self.next_op[e.job] = self.next_op[e.job].max(e.op + 1);
            self.machine_release[e.machine] = self.machine_release[e.machine].max(e.end());
            self.horizon = self.horizon.max(e.end());
        }
    }
}

/// Range-normalized total minimum processing time of the job's remaining
/// operations; 0 for every job when all totals are equal.
pub fn bottleneck_makespan(state: &LoopState, job: usize) -> f64 {
    let total = |i: usize| -> Time {
        state.instance.jobs[i].operations[state.remaining_ops(i)]
            .iter()
            .map(|o| o.min_duration())
            .sum()
    };
    let totals: Vec<Time> = state.remaining_jobs().into_iter().map(total).collect();
    let (Some(&lo), Some(&hi)) = (totals.iter().min(), totals.iter().max()) else {
        return 0.0;
    };
    if hi == lo {
        0.0
    } else {
        (total(job) as f64 - lo as f64) / (hi - lo) as f64
    }
}

fn congestion(state: &LoopState, job: usize) -> f64 {
    let n_remaining = state.remaining_operation_count().max(1) as f64;
    let mut load = vec![0usize; state.instance.num_machines];
    for i in state.remaining_jobs() {
        for o in &state.instance.jobs[i].operations[state.remaining_ops(i)] {
            for opt in &o.options {
                load[opt.machine] += 1;
            }
        }
    }
    state.instance.jobs[job].operations[state.remaining_ops(job)]
        .iter()
        .map(|o| {
            let sharing: usize = o.options.iter().map(|opt| load[opt.machine]).sum();
            1.0 / o.options.len() as f64 + sharing as f64 / n_remaining
        })
        .sum()
}

/// Machine congestion of the job's remaining operations, relative to the
/// most congested remaining job. Each operation scores its inflexibility
/// `1/|M|` plus, for every machine it may use, the share of all remaining
/// operations that could also run there (itself included).
pub fn bottleneck_workload(state: &LoopState, job: usize) -> f64 {
    let max = state
        .remaining_jobs()
        .into_iter()
        .map(|i| congestion(state, i))
        .fold(0.0, f64::max);
    if max <= 0.0 {
        0.0
    } else {
        congestion(state, job) / max
    }
}

/// Priority relative to the highest priority in the instance.
pub fn bottleneck_priority(state: &LoopState, job: usize) -> f64 {
    let max = state.instance.max_priority().max(1) as f64;
    state.instance.jobs[job].priority as f64 / max
}

/// `sqrt(α·δ₁² + β·δ₂² + γ·δ₃²)`; factors with zero weight are skipped.
pub fn bottleneck_combined(state: &LoopState, job: usize, w: &BottleneckWeights) -> f64 {
    let mut sum = 0.0;
    if w.alpha_l > 0.0 {
        sum += w.alpha_l * bottleneck_makespan(state, job).powi(2);
    }
    if w.beta_l > 0.0 {
        sum += w.beta_l * bottleneck_workload(state, job).powi(2);
    }
    if w.gamma_l > 0.0 {
        sum += w.gamma_l * bottleneck_priority(state, job).powi(2);
    }
    sum.sqrt()
}

/// The `j_s` highest-scoring remaining jobs (ties to the lower id), each
/// with up to its next `o_s` operations. Slices are in job-id order.
pub fn select_subset(state: &LoopState, w: &BottleneckWeights, j_s: usize, o_s: usize) -> Subset {
    let mut scored: Vec<(usize, f64)> = state
        .remaining_jobs()
        .into_iter()
        .map(|i| (i, bottleneck_combined(state, i, w)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut jobs: Vec<usize> = scored.into_iter().take(j_s).map(|(i, _)| i).collect();
    jobs.sort_unstable();
    Subset {
        slices: jobs
            .into_iter()
            .map(|i| {
                let r = state.remaining_ops(i);
                JobSlice { job: i, ops: r.start..(r.start + o_s).min(r.end) }
            })
            .collect(),
    }
}

/// Settings for [`run_iterative`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterativeConfig {
    pub params: LagrangeParams,
    pub weights: BottleneckWeights,
    /// Jobs per loop.
    pub j_s: usize,
    /// Operations per selected job per loop.
    pub o_s: usize,
    pub t_est: f64,
    /// Extra attempts with a larger horizon when a loop has no feasible sample.
    pub retries: usize,
}

impl IterativeConfig {
    pub fn validate(&self) -> Result<(), DecomposeError> {
        self.params.validate_for_solve()?;
        self.weights.validate()?;
        if self.j_s == 0 || self.o_s == 0 {
            return Err(DecomposeError::InvalidConfig("j_s and o_s must be at least 1".into()));
        }
        if !self.t_est.is_finite() || self.t_est < 0.0 {
            return Err(DecomposeError::InvalidConfig(format!("t_est must be finite and >= 0, got {}", self.t_est)));
        }
        Ok(())
    }
}

/// One line of the loop log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopTrace {
    pub loop_index: usize,
    pub jobs: Vec<usize>,
    pub operations: usize,
    /// Variables with every start in `[0, t_max]` allowed.
    pub variables_full: usize,
    /// Variables after window pruning and blocking.
    pub variables: usize,
    pub t_max: Time,
    pub attempts: usize,
    pub energy: Option<f64>,
    pub feasible: bool,
}

impl fmt::Display for LoopTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let jobs: Vec<String> = self.jobs.iter().map(|j| (j + 1).to_string()).collect();
        write!(
            f,
            "loop={} jobs={} ops={} vars_full={} vars={} t_max={} attempts={} energy={} feasible={}",
            self.loop_index,
            jobs.join(","),
            self.operations,
            self.variables_full,
            self.variables,
            self.t_max,
            self.attempts,
            self.energy.map_or("none".to_string(), |e| format!("{e}")),
            self.feasible
        )
    }
}

#[derive(Debug, Clone)]
pub struct IterativeResult {
    pub schedule: Schedule,
    pub trace: Vec<LoopTrace>,
}

/// Smallest horizon that leaves every subset operation a nonempty window.
fn horizon_floor(instance: &Instance, subset: &Subset, floors: &Floors) -> Time {
    subset
        .operations()
        .map(|(i, j)| {
            let job = &instance.jobs[i];
            let end = subset.slices.iter().find(|s| s.job == i).map_or(j + 1, |s| s.ops.end);
            crate::qubo::predecessor_time(job, j, floors.get(&(i, j)).copied()) + successor_time_until(job, j, end)
        })
        .max()
        .unwrap_or(0)
}

/// Best feasible entries among the samples: lowest energy, then the
/// smallest finish time within the loop, then sample order.
fn pick_feasible(
    state: &LoopState,
    subset: &Subset,
    samples: &crate::samplers::SampleSet,
) -> Option<(Vec<Entry>, f64)> {
    let wanted: Vec<_> = subset.operations().collect();
    let mut best: Option<(Vec<Entry>, f64, Time)> = None;
    for sample in &samples.samples {
        if let Some((_, e, _)) = &best {
            if sample.energy > e + 1e-9 * e.abs().max(1.0) {
                break;
            }
        }
        let decoded = decode(&sample.assignment, state.instance);
        let ops: Vec<_> = decoded.entries.iter().map(Entry::operation).collect();
        if ops != wanted {
            continue;
        }
        let merged = state.committed.merged(&decoded, state.instance);
        if !check_partial(&merged, state.instance).is_empty() {
            continue;
        }
        let finish = decoded.horizon();
        if best.as_ref().is_none_or(|(_, _, f)| finish < *f) {
            best = Some((decoded.entries, sample.energy, finish));
        }
    }
    best.map(|(entries, e, _)| (entries, e))
}

/// Schedules the whole instance loop by loop. Each loop's seed is derived
/// from `seed`, the loop index and the attempt number.
pub fn run_iterative(
    instance: &Instance,
    cfg: &IterativeConfig,
    sampler: &Sampler,
    seed: u64,
) -> Result<IterativeResult, DecomposeError> {
    cfg.validate()?;
    let mut state = LoopState::new(instance);
    let mut trace = Vec::new();
    let mut loop_index = 0;
    while !state.is_done() {
        let subset = select_subset(&state, &cfg.weights, cfg.j_s, cfg.o_s);
        let floors = state.floors(&subset);
        let blocks = state.blocks();
        let estimate = estimate_tmax(instance, &subset, cfg.t_est, state.horizon)?;
        let base = estimate.t_max.max(horizon_floor(instance, &subset, &floors));
        let step = (estimate.slack.ceil() as Time).max(1);
        let mut entry = LoopTrace {
            loop_index,
            jobs: subset.jobs().collect(),
            operations: subset.num_operations(),
            variables_full: 0,
            variables: 0,
            t_max: base,
            attempts: 0,
            energy: None,
            feasible: false,
        };
        let mut chosen = None;
        for attempt in 0..=cfg.retries {
            let t_max = base + step * ((1 << attempt.min(20)) - 1);
            entry.t_max = t_max;
            entry.attempts = attempt + 1;
            let windows = match build_windows(instance, &subset, t_max, &floors) {
                Ok(w) => w,
                Err(QuboError::InfeasibleHorizon { .. }) => continue,
                Err(e) => return Err(e.into()),
            };
            entry.variables_full = count_variables(instance, &full_windows(&subset, t_max));
            let model = SubproblemModel::build(instance, windows, &blocks, &cfg.params);
            entry.variables = model.variables.len();
            if !model.uncovered_operations().is_empty() {
                continue;
            }
            let loop_seed = derive_seed(seed, ((loop_index as u64) << 8) | attempt as u64);
            let samples = sampler.sample(&model.bqm, loop_seed)?;
            entry.energy = samples.lowest_energy();
            if let Some((entries, energy)) = pick_feasible(&state, &subset, &samples) {
                entry.energy = Some(energy);
                chosen = Some(entries);
                break;
            }
        }
        let Some(entries) = chosen else {
            return Err(DecomposeError::SolveFailed {
                loop_index,
                attempts: entry.attempts,
                t_max: entry.t_max,
            });
        };
        entry.feasible = true;
        state.commit(&entries);
        trace.push(entry);
        loop_index += 1;
    }
    Ok(IterativeResult {
        schedule: state.committed,
        trace,
    })
}
