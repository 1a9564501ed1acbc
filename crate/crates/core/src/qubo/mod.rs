//! Encoding of a scheduling subproblem as a binary quadratic model.
//!
//! A variable `x(i,j,k,t)` is one when operation `j` of job `i` starts at
//! time `t` on machine `k`. Start times are restricted to a window bounded
//! below by the predecessor time and above by `t_max` minus the successor
//! time. Six term groups are built over the same variable set: three linear
//! objectives (makespan, workload, priority) and three penalty groups
//! (processing, precedence, overlap), then combined with Lagrange weights.

mod bqm;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, Job, Time};

pub use bqm::{Assignment, Bqm, VarKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuboError {
    #[error("assignment does not cover model variable {0:?}")]
    MissingVariable(VarKey),
    #[error("empty subset")]
    EmptySubset,
    #[error("horizon {t_max} leaves operation ({job},{op}) an empty window [{earliest}, {latest}]")]
    InfeasibleHorizon {
        job: usize,
        op: usize,
        earliest: i64,
        latest: i64,
        t_max: Time,
    },
    #[error("invalid Lagrange parameters: {0}")]
    InvalidParams(String),
    #[error("subset references unknown operation ({0},{1})")]
    UnknownOperation(usize, usize),
}

/// `(job, operation index)`.
pub type OpId = (usize, usize);

/// Per-operation earliest-start overrides carried over from earlier loops.
pub type Floors = BTreeMap<OpId, Time>;

/// A contiguous run of operations of one job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobSlice {
    pub job: usize,
    pub ops: Range<usize>,
}

/// The jobs and operations handled by one model.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Subset {
    pub slices: Vec<JobSlice>,
}

impl Subset {
    /// Every operation of every job.
    pub fn whole(instance: &Instance) -> Self {
        Subset {
            slices: instance
                .jobs
                .iter()
                .map(|j| JobSlice {
                    job: j.id,
                    ops: 0..j.operations.len(),
                })
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.slices.iter().all(|s| s.ops.is_empty())
    }

    pub fn num_jobs(&self) -> usize {
        self.slices.iter().filter(|s| !s.ops.is_empty()).count()
    }

    pub fn num_operations(&self) -> usize {
        self.slices.iter().map(|s| s.ops.len()).sum()
    }

    pub fn jobs(&self) -> impl Iterator<Item = usize> + '_ {
        self.slices.iter().map(|s| s.job)
    }

    pub fn operations(&self) -> impl Iterator<Item = OpId> + '_ {
        self.slices
            .iter()
            .flat_map(|s| s.ops.clone().map(move |j| (s.job, j)))
    }

    fn check(&self, instance: &Instance) -> Result<(), QuboError> {
        if self.is_empty() {
            return Err(QuboError::EmptySubset);
        }
        for s in &self.slices {
            let len = instance
                .jobs
                .get(s.job)
                .map(|j| j.operations.len())
                .ok_or(QuboError::UnknownOperation(s.job, s.ops.start))?;
            if s.ops.end > len {
                return Err(QuboError::UnknownOperation(s.job, s.ops.end - 1));
            }
        }
        Ok(())
    }
}

/// Inclusive start-time range of one operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeWindow {
    pub earliest: Time,
    pub latest: Time,
}

impl TimeWindow {
    pub fn width(&self) -> usize {
        (self.latest - self.earliest) as usize + 1
    }

    pub fn contains(&self, t: Time) -> bool {
        self.earliest <= t && t <= self.latest
    }
}

pub type Windows = BTreeMap<OpId, TimeWindow>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangeParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub zeta: f64,
}

impl LagrangeParams {
    pub const ZERO: LagrangeParams = LagrangeParams {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
        delta: 0.0,
        epsilon: 0.0,
        zeta: 0.0,
    };

    fn as_array(&self) -> [f64; 6] {
        [self.alpha, self.beta, self.gamma, self.delta, self.epsilon, self.zeta]
    }

    pub fn scaled(&self, factor: f64) -> LagrangeParams {
        let [alpha, beta, gamma, delta, epsilon, zeta] = self.as_array().map(|w| w * factor);
        LagrangeParams { alpha, beta, gamma, delta, epsilon, zeta }
    }

    /// All weights finite and non-negative.
    pub fn validate(&self) -> Result<(), QuboError> {
        if self.as_array().iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(QuboError::InvalidParams(format!("weights must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }

    /// Additionally requires every constraint weight to be positive.
    pub fn validate_for_solve(&self) -> Result<(), QuboError> {
        self.validate()?;
        if self.delta <= 0.0 || self.epsilon <= 0.0 || self.zeta <= 0.0 {
            return Err(QuboError::InvalidParams("constraint weights delta, epsilon, zeta must be > 0".into()));
        }
        Ok(())
    }
}

/// Earliest start of operation `j`: the sum of minimum durations of the
/// preceding operations, raised to `floor` when one is given.
pub fn predecessor_time(job: &Job, j: usize, floor: Option<Time>) -> Time {
    let base: Time = job.operations[..j].iter().map(|o| o.min_duration()).sum();
    floor.map_or(base, |f| base.max(f))
}

/// Sum of minimum durations from operation `j` to the end of the job.
pub fn successor_time(job: &Job, j: usize) -> Time {
    successor_time_until(job, j, job.operations.len())
}

/// Like [`successor_time`], but only counts operations before `end`.
pub fn successor_time_until(job: &Job, j: usize, end: usize) -> Time {
    job.operations[j..end].iter().map(|o| o.min_duration()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonEstimate {
    pub t_max: Time,
    /// Sum over subset jobs of the largest single processing time.
    pub base: Time,
    pub a1: f64,
    pub a2: f64,
    /// `t_est·a1·a2` before rounding.
    pub slack: f64,
}

/// Horizon estimate for a subset: committed horizon, plus the per-job
/// maximum processing time summed over jobs, plus `t_est·a1·a2`, rounded up.
///
/// `a1` is jobs per operation in the subset. `a2` counts ordered pairs of
/// distinct subset operations that share a machine option, divided by the
/// number of (operation, machine option) pairs.
pub fn estimate_tmax(
    instance: &Instance,
    subset: &Subset,
    t_est: f64,
    committed_horizon: Time,
) -> Result<HorizonEstimate, QuboError> {
    subset.check(instance)?;
    let ops: Vec<_> = subset
        .operations()
        .map(|(i, j)| &instance.jobs[i].operations[j])
        .collect();
    let base: Time = subset
        .slices
        .iter()
        .filter(|s| !s.ops.is_empty())
        .map(|s| {
            instance.jobs[s.job].operations[s.ops.clone()]
                .iter()
                .map(|o| o.max_duration())
                .max()
                .unwrap_or(0)
        })
        .sum();
    let a1 = subset.num_jobs() as f64 / ops.len() as f64;
    let option_count: usize = ops.iter().map(|o| o.options.len()).sum();
    let mut sharing_pairs = 0usize;
    for (x, a) in ops.iter().enumerate() {
        for (y, b) in ops.iter().enumerate() {
            if x != y && a.options.iter().any(|o| b.can_use(o.machine)) {
                sharing_pairs += 1;
            }
        }
    }
    let a2 = sharing_pairs as f64 / option_count as f64;
    let slack = t_est.max(0.0) * a1 * a2;
    let raw = committed_horizon as f64 + base as f64 + slack;
    let t_max = (raw - 1e-9).ceil().max(0.0) as Time;
    Ok(HorizonEstimate {
        t_max,
        base,
        a1,
        a2,
        slack,
    })
}

/// Start windows `[predecessor time, t_max − successor time]` for every
/// subset operation. Successor times only count operations inside the
/// subset's slice of each job.
pub fn build_windows(
    instance: &Instance,
    subset: &Subset,
    t_max: Time,
    floors: &Floors,
) -> Result<Windows, QuboError> {
    subset.check(instance)?;
    let mut windows = Windows::new();
    for s in &subset.slices {
        let job = &instance.jobs[s.job];
        for j in s.ops.clone() {
            let earliest = predecessor_time(job, j, floors.get(&(s.job, j)).copied());
            let latest = t_max as i64 - successor_time_until(job, j, s.ops.end) as i64;
            if latest < earliest as i64 {
                return Err(QuboError::InfeasibleHorizon {
                    job: s.job,
                    op: j,
                    earliest: earliest as i64,
                    latest,
                    t_max,
                });
            }
            windows.insert((s.job, j), TimeWindow { earliest, latest: latest as Time });
        }
    }
    Ok(windows)
}

/// Unpruned windows `[0, t_max]` for every subset operation.
pub fn full_windows(subset: &Subset, t_max: Time) -> Windows {
    subset
        .operations()
        .map(|op| (op, TimeWindow { earliest: 0, latest: t_max }))
        .collect()
}

/// Number of variables the windows would produce before any blocking.
pub fn count_variables(instance: &Instance, windows: &Windows) -> usize {
    windows
        .iter()
        .map(|(&(i, j), w)| instance.jobs[i].operations[j].options.len() * w.width())
        .sum()
}

/// Half-open intervals `[start, end)` already occupied on each machine.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MachineBlocks {
    intervals: BTreeMap<usize, Vec<(Time, Time)>>,
}

impl MachineBlocks {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn block(&mut self, machine: usize, start: Time, end: Time) {
        self.intervals.entry(machine).or_default().push((start, end));
    }

    pub fn overlaps(&self, machine: usize, start: Time, end: Time) -> bool {
        self.intervals
            .get(&machine)
            .is_some_and(|v| v.iter().any(|&(s, e)| start < e && s < end))
    }
}

/// Enumerates the model variables: every machine option at every start in
/// the window, minus starts that collide with blocked intervals.
pub fn build_variables(instance: &Instance, windows: &Windows, blocks: &MachineBlocks) -> BTreeSet<VarKey> {
    let mut vars = BTreeSet::new();
    for (&(i, j), w) in windows {
        for opt in &instance.jobs[i].operations[j].options {
            for t in w.earliest..=w.latest {
                if !blocks.overlaps(opt.machine, t, t + opt.duration) {
                    vars.insert(VarKey::new(i, j, opt.machine, t));
                }
            }
        }
    }
    vars
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveTerm {
    Makespan,
    Workload,
    Priority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintTerm {
    Processing,
    Precedence,
    Overlap,
}

fn duration(instance: &Instance, v: &VarKey) -> Time {
    instance.jobs[v.job].operations[v.op]
        .duration_on(v.machine)
        .expect("variable on a machine the operation cannot use")
}

/// Linear objective weights. The offset `P` is the window's earliest start.
pub fn build_objective_terms(
    which: ObjectiveTerm,
    instance: &Instance,
    vars: &BTreeSet<VarKey>,
    windows: &Windows,
) -> Bqm {
    let mut bqm = Bqm::with_variables(vars.iter().copied());
    for v in vars {
        let op = &instance.jobs[v.job].operations[v.op];
        let p = duration(instance, v) as f64;
        let pred = windows[&v.operation()].earliest as f64;
        let w = match which {
            ObjectiveTerm::Makespan => v.start as f64 + p - pred,
            ObjectiveTerm::Workload => p - op.min_duration() as f64,
            ObjectiveTerm::Priority => (v.start as f64 + p - pred) * instance.jobs[v.job].priority as f64,
        };
        bqm.add_linear(*v, w);
    }
    bqm
}

/// Penalty groups over `vars`; each is zero exactly when its constraint holds.
pub fn build_constraint_terms(which: ConstraintTerm, instance: &Instance, vars: &BTreeSet<VarKey>) -> Bqm {
    let mut bqm = Bqm::with_variables(vars.iter().copied());
    let mut by_op: BTreeMap<OpId, Vec<VarKey>> = BTreeMap::new();
    for v in vars {
        by_op.entry(v.operation()).or_default().push(*v);
    }
    match which {
        ConstraintTerm::Processing => {
            // (1 − Σx)² = 1 − Σx + 2·Σ_{a<b} x_a·x_b for binary x
            for group in by_op.values() {
                bqm.add_offset(1.0);
                for (a, va) in group.iter().enumerate() {
                    bqm.add_linear(*va, -1.0);
                    for vb in &group[a + 1..] {
                        bqm.add_quadratic(*va, *vb, 2.0);
                    }
                }
            }
        }
        ConstraintTerm::Precedence => {
            for (&(i, j), first) in &by_op {
                for (_, second) in by_op.range((i, j + 1)..(i + 1, 0)) {
                    for a in first {
                        let p = duration(instance, a) as i64;
                        for b in second {
                            if (b.start as i64) - (a.start as i64) < p {
                                bqm.add_quadratic(*a, *b, 1.0);
                            }
                        }
                    }
                }
            }
        }
        ConstraintTerm::Overlap => {
            let mut by_machine: BTreeMap<usize, Vec<(VarKey, Time)>> = BTreeMap::new();
            for v in vars {
                by_machine.entry(v.machine).or_default().push((*v, duration(instance, v)));
            }
            for list in by_machine.values_mut() {
                list.sort_by_key(|(v, _)| (v.start, *v));
                for (x, &(a, pa)) in list.iter().enumerate() {
                    // later entries start at or after `a`; they collide while a runs
                    for &(b, _) in list[x + 1..].iter().take_while(|(b, _)| b.start < a.start + pa) {
                        if a.job != b.job {
                            bqm.add_quadratic(a, b, 1.0);
                        }
                    }
                }
            }
        }
    }
    bqm
}

/// The six term groups of one subproblem over a shared variable set.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianParts {
    pub makespan: Bqm,
    pub workload: Bqm,
    pub priority: Bqm,
    pub processing: Bqm,
    pub precedence: Bqm,
    pub overlap: Bqm,
}

impl HamiltonianParts {
    pub fn build(instance: &Instance, vars: &BTreeSet<VarKey>, windows: &Windows) -> Self {
        HamiltonianParts {
            makespan: build_objective_terms(ObjectiveTerm::Makespan, instance, vars, windows),
            workload: build_objective_terms(ObjectiveTerm::Workload, instance, vars, windows),
            priority: build_objective_terms(ObjectiveTerm::Priority, instance, vars, windows),
            processing: build_constraint_terms(ConstraintTerm::Processing, instance, vars),
            precedence: build_constraint_terms(ConstraintTerm::Precedence, instance, vars),
            overlap: build_constraint_terms(ConstraintTerm::Overlap, instance, vars),
        }
    }

    /// Groups in weight order: makespan, workload, priority, processing,
    /// precedence, overlap.
    pub fn groups(&self) -> [&Bqm; 6] {
        [
            &self.makespan,
            &self.workload,
            &self.priority,
            &self.processing,
            &self.precedence,
            &self.overlap,
        ]
    }
}

/// Weighted sum of the six groups. A zero weight removes its group entirely.
pub fn assemble(parts: &HamiltonianParts, params: &LagrangeParams) -> Bqm {
    let mut out = Bqm::with_variables(parts.processing.variables().copied());
    for (group, w) in parts.groups().into_iter().zip(params.as_array()) {
        out.add_scaled(group, w);
    }
    out
}

/// A fully built subproblem model.
#[derive(Debug, Clone)]
pub struct SubproblemModel {
    pub windows: Windows,
    pub variables: BTreeSet<VarKey>,
    pub parts: HamiltonianParts,
    pub bqm: Bqm,
}

impl SubproblemModel {
    pub fn build(
        instance: &Instance,
        windows: Windows,
        blocks: &MachineBlocks,
        params: &LagrangeParams,
    ) -> Self {
        let variables = build_variables(instance, &windows, blocks);
        let parts = HamiltonianParts::build(instance, &variables, &windows);
        let bqm = assemble(&parts, params);
        SubproblemModel {
            windows,
            variables,
            parts,
            bqm,
        }
    }

    /// Operations in the model that ended up with no variable at all.
    pub fn uncovered_operations(&self) -> Vec<OpId> {
        self.windows
            .keys()
            .filter(|op| {
                self.variables
                    .range(VarKey::new(op.0, op.1, 0, 0)..)
                    .next()
                    .is_none_or(|v| v.operation() != **op)
            })
            .copied()
            .collect()
    }
}
