//! Decoding samples into schedules, feasibility checks and objective values.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::instance::{Instance, Time};
use crate::qubo::{Assignment, Bqm, OpId, VarKey};

/// One placed operation. Intervals are half-open: `[start, start + duration)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Entry {
    pub job: usize,
    pub op: usize,
    pub machine: usize,
    pub start: Time,
    pub duration: Time,
}

impl Entry {
    pub fn end(&self) -> Time {
        self.start + self.duration
    }

    pub fn operation(&self) -> OpId {
        (self.job, self.op)
    }

    fn overlaps(&self, other: &Entry) -> bool {
        self.start < other.end() && other.start < self.end()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schedule {
    /// Sorted by (job, op, machine, start).
    pub entries: Vec<Entry>,
    /// Every instance operation appears exactly once.
    pub complete: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    MissingOp,
    DuplicateOp,
    PrecedenceBreak,
    MachineOverlap,
    IllegalMachine,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.detail)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("schedule is infeasible ({} violation(s), first: {})", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Infeasible(Vec<Violation>),
    #[error("makespan is zero")]
    ZeroMakespan,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn op_label(job: usize, op: usize) -> String {
    format!("O{},{}", job + 1, op + 1)
}

impl Schedule {
    pub fn from_entries(mut entries: Vec<Entry>, instance: &Instance) -> Self {
        entries.sort();
        let mut counts: BTreeMap<OpId, usize> = BTreeMap::new();
        for e in &entries {
            *counts.entry(e.operation()).or_default() += 1;
        }
        let complete = instance
            .operations()
            .all(|o| counts.get(&(o.job, o.index)) == Some(&1))
            && counts.len() == instance.num_operations();
        Schedule { entries, complete }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, job: usize, op: usize) -> Option<&Entry> {
        self.entries.iter().find(|e| e.job == job && e.op == op)
    }

    /// Latest end over all entries, 0 when empty.
    pub fn horizon(&self) -> Time {
        self.entries.iter().map(Entry::end).max().unwrap_or(0)
    }

    /// Latest end among the entries of `job`.
    pub fn job_finish(&self, job: usize) -> Option<Time> {
        self.entries.iter().filter(|e| e.job == job).map(Entry::end).max()
    }

    /// Earliest time after which `machine` is free for good.
    pub fn machine_release(&self, machine: usize) -> Time {
        self.entries
            .iter()
            .filter(|e| e.machine == machine)
            .map(Entry::end)
            .max()
            .unwrap_or(0)
    }

    /// Union of two schedules over the same instance.
    pub fn merged(&self, other: &Schedule, instance: &Instance) -> Schedule {
        let entries = self.entries.iter().chain(&other.entries).copied().collect();
        Schedule::from_entries(entries, instance)
    }

    /// Ones-assignment over `bqm`'s variables; entries without a matching
    /// variable are dropped.
    pub fn to_assignment(&self, bqm: &Bqm) -> Assignment {
        let keys: Vec<VarKey> = self
            .entries
            .iter()
            .map(|e| VarKey::new(e.job, e.op, e.machine, e.start))
            .filter(|k| bqm.contains(k))
            .collect();
        Assignment::with_ones(bqm, keys.iter())
    }

    /// `job,op,machine,start,duration` rows with a header; indices are 0-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("job,op,machine,start,duration\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{},{},{}", e.job, e.op, e.machine, e.start, e.duration);
        }
        out
    }

    pub fn from_csv(text: &str, instance: &Instance) -> Result<Schedule, ScheduleError> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.starts_with("job")) {
                continue;
            }
            let fields: Result<Vec<u64>, _> = line.split(',').map(|f| f.trim().parse::<u64>()).collect();
            let fields = fields.map_err(|e| ScheduleError::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
            let [job, op, machine, start, duration] = fields[..] else {
                return Err(ScheduleError::Parse {
                    line: n + 1,
                    message: format!("expected 5 fields, found {}", fields.len()),
                });
            };
            let to_time = |v: u64| {
                Time::try_from(v).map_err(|_| ScheduleError::Parse {
                    line: n + 1,
                    message: format!("{v} out of range"),
                })
            };
            entries.push(Entry {
                job: job as usize,
                op: op as usize,
                machine: machine as usize,
                start: to_time(start)?,
                duration: to_time(duration)?,
            });
        }
        Ok(Schedule::from_entries(entries, instance))
    }

    /// Gantt chart: machines as rows, one labeled bar per entry, colored by job.
    pub fn gantt_svg(&self, instance: &Instance, title: &str) -> String {
        const ROW: f64 = 28.0;
        const LEFT: f64 = 60.0;
        const TOP: f64 = 34.0;
        let horizon = self.horizon().max(1) as f64;
        let scale = (800.0 / horizon).clamp(4.0, 60.0);
        let width = LEFT + horizon * scale + 20.0;
        let height = TOP + instance.num_machines as f64 * ROW + 30.0;
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(svg, r#"<text x="{LEFT}" y="18" font-size="13">{}</text>"#, xml_escape(title));
        for m in 0..instance.num_machines {
            let y = TOP + m as f64 * ROW;
            let _ = writeln!(svg, r#"<text x="6" y="{:.1}">M{}</text>"#, y + ROW * 0.6, m + 1);
            let _ = writeln!(
                svg,
                r##"<line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#ddd"/>"##,
                y + ROW,
                width - 10.0,
                y + ROW
            );
        }
        for e in &self.entries {
            let x = LEFT + e.start as f64 * scale;
            let y = TOP + e.machine as f64 * ROW + 3.0;
            let w = (e.duration as f64 * scale).max(1.0);
            let hue = (e.job * 137) % 360;
            let priority = instance.jobs.get(e.job).map_or(1, |j| j.priority);
            let _ = writeln!(
                svg,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{w:.1}" height="{:.1}" fill="hsl({hue},60%,70%)" stroke="black" stroke-width="0.5"><title>{} job {} pr {} [{}, {})</title></rect>"#,
                ROW - 6.0,
                op_label(e.job, e.op),
                e.job + 1,
                priority,
                e.start,
                e.end()
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}">{} p{}</text>"#,
                x + 2.0,
                y + ROW * 0.55,
                op_label(e.job, e.op),
                priority
            );
        }
        let axis_y = TOP + instance.num_machines as f64 * ROW + 16.0;
        let step = ((horizon / 10.0).ceil() as u32).max(1);
        let mut t = 0;
        while t as f64 <= horizon {
            let _ = writeln!(svg, r#"<text x="{:.1}" y="{axis_y:.1}">{t}</text>"#, LEFT + t as f64 * scale);
            t += step;
        }
        svg.push_str("</svg>\n");
        svg
    }
}

pub(crate) fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One entry per variable set to 1. Durations come from the instance; an
/// entry on a machine its operation cannot use gets duration 0 and is
/// reported by [`check_feasible`].
pub fn decode(sample: &Assignment, instance: &Instance) -> Schedule {
    let entries = sample
        .ones()
        .map(|k| Entry {
            job: k.job,
            op: k.op,
            machine: k.machine,
            start: k.start,
            duration: instance
                .operation(k.job, k.op)
                .and_then(|o| o.duration_on(k.machine))
                .unwrap_or(0),
        })
        .collect();
    Schedule::from_entries(entries, instance)
}

fn violations(s: &Schedule, instance: &Instance, require_all: bool) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut by_op: BTreeMap<OpId, Vec<&Entry>> = BTreeMap::new();
    for e in &s.entries {
        by_op.entry(e.operation()).or_default().push(e);
    }
    for e in &s.entries {
        match instance.operation(e.job, e.op) {
            None => out.push(Violation {
                kind: ViolationKind::IllegalMachine,
                detail: format!("{} is not an operation of the instance", op_label(e.job, e.op)),
            }),
            Some(o) => match o.duration_on(e.machine) {
                None => out.push(Violation {
                    kind: ViolationKind::IllegalMachine,
                    detail: format!("{} cannot run on M{}", op_label(e.job, e.op), e.machine + 1),
                }),
                Some(p) if p != e.duration => out.push(Violation {
                    kind: ViolationKind::IllegalMachine,
                    detail: format!(
                        "{} on M{} takes {p}, entry says {}",
                        op_label(e.job, e.op),
                        e.machine + 1,
                        e.duration
                    ),
                }),
                Some(_) => {}
            },
        }
    }
    for (op, list) in &by_op {
        if list.len() > 1 {
            out.push(Violation {
                kind: ViolationKind::DuplicateOp,
                detail: format!("{} scheduled {} times", op_label(op.0, op.1), list.len()),
            });
        }
    }
    if require_all {
        for o in instance.operations() {
            if !by_op.contains_key(&(o.job, o.index)) {
                out.push(Violation {
                    kind: ViolationKind::MissingOp,
                    detail: format!("{} not scheduled", op_label(o.job, o.index)),
                });
            }
        }
    }
    // precedence: every entry of a later operation starts after every entry
    // of an earlier operation of the same job has finished
    for (a, ea) in s.entries.iter().enumerate() {
        for eb in &s.entries[a + 1..] {
            if eb.job != ea.job {
                break;
            }
            if eb.op > ea.op && eb.start < ea.end() {
                out.push(Violation {
                    kind: ViolationKind::PrecedenceBreak,
                    detail: format!(
                        "{} starts at {} before {} finishes at {}",
                        op_label(eb.job, eb.op),
                        eb.start,
                        op_label(ea.job, ea.op),
                        ea.end()
                    ),
                });
            }
        }
    }
    let mut by_machine: BTreeMap<usize, Vec<&Entry>> = BTreeMap::new();
    for e in &s.entries {
        by_machine.entry(e.machine).or_default().push(e);
    }
    for (m, list) in by_machine {
        for (a, ea) in list.iter().enumerate() {
            for eb in &list[a + 1..] {
                if ea.operation() != eb.operation() && ea.overlaps(eb) {
                    out.push(Violation {
                        kind: ViolationKind::MachineOverlap,
                        detail: format!(
                            "{} [{}, {}) and {} [{}, {}) on M{}",
                            op_label(ea.job, ea.op),
                            ea.start,
                            ea.end(),
                            op_label(eb.job, eb.op),
                            eb.start,
                            eb.end(),
                            m + 1
                        ),
                    });
                }
            }
        }
    }
    out
}

/// All constraint violations; empty iff the schedule is complete and feasible.
pub fn check_feasible(s: &Schedule, instance: &Instance) -> Vec<Violation> {
    violations(s, instance, true)
}

/// Like [`check_feasible`] but tolerates operations not yet scheduled.
pub fn check_partial(s: &Schedule, instance: &Instance) -> Vec<Violation> {
    violations(s, instance, false)
}

fn require_feasible(s: &Schedule, instance: &Instance) -> Result<(), ScheduleError> {
    let v = check_feasible(s, instance);
    if v.is_empty() {
        Ok(())
    } else {
        Err(ScheduleError::Infeasible(v))
    }
}

/// Makespan `e_f1`: latest completion time.
pub fn eval_makespan(s: &Schedule, instance: &Instance) -> Result<Time, ScheduleError> {
    require_feasible(s, instance)?;
    Ok(s.horizon())
}

/// Total workload `e_f2`: sum of the chosen processing times.
pub fn eval_workload(s: &Schedule, instance: &Instance) -> Result<Time, ScheduleError> {
    require_feasible(s, instance)?;
    Ok(s.entries.iter().map(|e| e.duration).sum())
}

/// Priority objective `e_f3`: job completion times relative to the makespan,
/// weighted by priority relative to the highest priority.
pub fn eval_priority(s: &Schedule, instance: &Instance) -> Result<f64, ScheduleError> {
    require_feasible(s, instance)?;
    let makespan = s.horizon();
    if makespan == 0 {
        return Err(ScheduleError::ZeroMakespan);
    }
    let max_pr = instance.max_priority().max(1) as f64;
    Ok(instance
        .jobs
        .iter()
        .filter_map(|job| {
            let finish = s.job_finish(job.id)?;
            Some(finish as f64 / makespan as f64 * (job.priority as f64 / max_pr))
        })
        .sum())
}

/// The three objective values of a feasible schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objectives {
    pub makespan: Time,
    pub workload: Time,
    pub priority: f64,
}

pub fn evaluate(s: &Schedule, instance: &Instance) -> Result<Objectives, ScheduleError> {
    Ok(Objectives {
        makespan: eval_makespan(s, instance)?,
        workload: eval_workload(s, instance)?,
        priority: eval_priority(s, instance)?,
    })
}
