//! Flexible job shop problem data and the benchmark file format.
//!
//! Files follow the Brandimarte layout: a header `A B F` (jobs, machines,
//! average flexibility), then one line per job listing its operations as
//! `q (machine duration){q}` groups with 1-based machines. An optional
//! trailing `#priorities` line is followed by one priority per job.

use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Discrete time and durations share one unit.
pub type Time = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("machine index {machine} out of range (instance has {num_machines} machines) at line {line}")]
    Index {
        line: usize,
        machine: usize,
        num_machines: usize,
    },
    #[error("empty instance: {0}")]
    Empty(String),
    #[error("invalid priority range [{lo}, {hi}]")]
    Range { lo: u32, hi: u32 },
    #[error("invalid instance: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MachineOption {
    pub machine: usize,
    pub duration: Time,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operation {
    pub job: usize,
    pub index: usize,
    pub options: Vec<MachineOption>,
}

impl Operation {
    /// Shortest processing time over the machines able to run this operation.
    pub fn min_duration(&self) -> Time {
        self.options
            .iter()
            .map(|o| o.duration)
            .min()
            .expect("operation without machine options")
    }

    pub fn max_duration(&self) -> Time {
        self.options.iter().map(|o| o.duration).max().unwrap_or(0)
    }

    /// Processing time on `machine`, if the machine is an option.
    pub fn duration_on(&self, machine: usize) -> Option<Time> {
        self.options
            .iter()
            .find(|o| o.machine == machine)
            .map(|o| o.duration)
    }

    pub fn can_use(&self, machine: usize) -> bool {
        self.options.iter().any(|o| o.machine == machine)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub id: usize,
    pub priority: u32,
    pub operations: Vec<Operation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    pub num_machines: usize,
    pub jobs: Vec<Job>,
}

impl Instance {
    /// Builds an instance from per-job operation option lists and validates it.
    pub fn new(
        name: impl Into<String>,
        num_machines: usize,
        jobs: Vec<(u32, Vec<Vec<MachineOption>>)>,
    ) -> Result<Self, InstanceError> {
        let jobs = jobs
            .into_iter()
            .enumerate()
            .map(|(i, (priority, ops))| Job {
                id: i,
                priority,
                operations: ops
                    .into_iter()
                    .enumerate()
                    .map(|(j, options)| Operation {
                        job: i,
                        index: j,
                        options,
                    })
                    .collect(),
            })
            .collect();
        let instance = Instance {
            name: name.into(),
            num_machines,
            jobs,
        };
        instance.validate()?;
        Ok(instance)
    }

    /// Checks every structural invariant of the data model.
    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.jobs.is_empty() {
            return Err(InstanceError::Empty("zero jobs".into()));
        }
        if self.num_machines == 0 {
            return Err(InstanceError::Empty("zero machines".into()));
        }
        for (i, job) in self.jobs.iter().enumerate() {
            if job.id != i {
                return Err(InstanceError::Invalid(format!("job {i} carries id {}", job.id)));
            }
            if job.priority < 1 {
                return Err(InstanceError::Invalid(format!("job {i} has priority 0")));
            }
            if job.operations.is_empty() {
                return Err(InstanceError::Empty(format!("job {} has no operations", i + 1)));
            }
            for (j, op) in job.operations.iter().enumerate() {
                if op.job != i || op.index != j {
                    return Err(InstanceError::Invalid(format!(
                        "operation ({i},{j}) carries index ({},{})",
                        op.job, op.index
                    )));
                }
                if op.options.is_empty() {
                    return Err(InstanceError::Empty(format!(
                        "operation {} of job {} has no machine options",
                        j + 1,
                        i + 1
                    )));
                }
                for (a, opt) in op.options.iter().enumerate() {
                    if opt.machine >= self.num_machines {
                        return Err(InstanceError::Invalid(format!(
                            "operation ({i},{j}) uses machine {} of {}",
                            opt.machine, self.num_machines
                        )));
                    }
                    if opt.duration < 1 {
                        return Err(InstanceError::Invalid(format!(
                            "operation ({i},{j}) has zero duration on machine {}",
                            opt.machine
                        )));
                    }
                    if op.options[..a].iter().any(|o| o.machine == opt.machine) {
                        return Err(InstanceError::Invalid(format!(
                            "operation ({i},{j}) lists machine {} twice",
                            opt.machine
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn num_jobs(&self) -> usize {
        self.jobs.len()
    }

    pub fn num_operations(&self) -> usize {
        self.jobs.iter().map(|j| j.operations.len()).sum()
    }

    pub fn operation(&self, job: usize, op: usize) -> Option<&Operation> {
        self.jobs.get(job).and_then(|j| j.operations.get(op))
    }

    pub fn operations(&self) -> impl Iterator<Item = &Operation> {
        self.jobs.iter().flat_map(|j| j.operations.iter())
    }

    pub fn max_priority(&self) -> u32 {
        self.jobs.iter().map(|j| j.priority).max().unwrap_or(1)
    }

    pub fn priorities(&self) -> Vec<u32> {
        self.jobs.iter().map(|j| j.priority).collect()
    }

    /// Sum of the per-operation minimum durations over the whole instance.
    pub fn total_min_duration(&self) -> Time {
        self.operations().map(Operation::min_duration).sum()
    }

    /// Average number of machine options per operation (the header's third field).
    pub fn average_flexibility(&self) -> f64 {
        let options: usize = self.operations().map(|o| o.options.len()).sum();
        options as f64 / self.num_operations() as f64
    }

    /// Returns a copy with every job priority drawn uniformly from `[lo, hi]`.
    pub fn assign_priorities(&self, seed: u64, lo: u32, hi: u32) -> Result<Instance, InstanceError> {
        if lo < 1 || lo > hi {
            return Err(InstanceError::Range { lo, hi });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for job in &mut out.jobs {
            job.priority = rng.random_range(lo..=hi);
        }
        Ok(out)
    }

    /// Serializes to the benchmark file format; `parse_instance` reads it back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let flex = self.average_flexibility();
        let _ = writeln!(s, "{} {} {}", self.num_jobs(), self.num_machines, format_flex(flex));
        for job in &self.jobs {
            let _ = write!(s, "{}", job.operations.len());
            for op in &job.operations {
                let _ = write!(s, "  {}", op.options.len());
                for opt in &op.options {
                    let _ = write!(s, " {} {}", opt.machine + 1, opt.duration);
                }
            }
            s.push('\n');
        }
        if self.jobs.iter().any(|j| j.priority != 1) {
            s.push_str("#priorities\n");
            let prs: Vec<String> = self.jobs.iter().map(|j| j.priority.to_string()).collect();
            s.push_str(&prs.join(" "));
            s.push('\n');
        }
        s
    }
}

fn format_flex(flex: f64) -> String {
    let rounded = (flex * 100.0).round() / 100.0;
    if rounded.fract() == 0.0 {
        format!("{}", rounded as u64)
    } else {
        format!("{rounded}")
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} jobs, {} machines, {} operations)",
            self.name,
            self.num_jobs(),
            self.num_machines,
            self.num_operations()
        )
    }
}

struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

fn tokenize(line_no: usize, line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (pos, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token {
                    text: &line[s..pos],
                    line: line_no,
                    column: s + 1,
                });
            }
        } else if start.is_none() {
            start = Some(pos);
        }
    }
    if let Some(s) = start {
        tokens.push(Token {
            text: &line[s..],
            line: line_no,
            column: s + 1,
        });
    }
    tokens
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> InstanceError {
    InstanceError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn parse_uint(tok: &Token<'_>, what: &str) -> Result<u64, InstanceError> {
    tok.text.parse::<u64>().map_err(|_| {
        syntax(
            tok.line,
            tok.column,
            format!("expected non-negative integer {what}, found `{}`", tok.text),
        )
    })
}

/// Cursor over the tokens of one line.
struct LineReader<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    line: usize,
    line_len: usize,
}

impl<'a> LineReader<'a> {
    fn next(&mut self, what: &str) -> Result<&Token<'a>, InstanceError> {
        let tok = self
            .tokens
            .get(self.pos)
            .ok_or_else(|| syntax(self.line, self.line_len + 1, format!("unexpected end of line, expected {what}")))?;
        self.pos += 1;
        Ok(tok)
    }

    fn finish(&self) -> Result<(), InstanceError> {
        match self.tokens.get(self.pos) {
            Some(tok) => Err(syntax(tok.line, tok.column, format!("unexpected trailing token `{}`", tok.text))),
            None => Ok(()),
        }
    }
}

/// Parses the benchmark file format. Machines are converted to 0-based
/// indices; missing priorities default to 1.
pub fn parse_instance(text: &str) -> Result<Instance, InstanceError> {
    parse_named(text, "instance")
}

pub fn parse_named(text: &str, name: &str) -> Result<Instance, InstanceError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let (hline, header) = lines.next().ok_or_else(|| InstanceError::Empty("empty file".into()))?;
    let htoks = tokenize(hline, header);
    if htoks.len() < 2 || htoks.len() > 3 {
        return Err(syntax(hline, 1, "header must be `jobs machines [flexibility]`"));
    }
    let num_jobs = parse_uint(&htoks[0], "job count")? as usize;
    let num_machines = parse_uint(&htoks[1], "machine count")? as usize;
    if num_jobs == 0 {
        return Err(InstanceError::Empty("zero jobs".into()));
    }
    if num_machines == 0 {
        return Err(InstanceError::Empty("zero machines".into()));
    }

    let mut jobs = Vec::with_capacity(num_jobs);
    for i in 0..num_jobs {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| syntax(hline, 1, format!("expected {num_jobs} job lines, found {i}")))?;
        if line.trim_start().starts_with('#') {
            return Err(syntax(line_no, 1, format!("expected {num_jobs} job lines, found {i}")));
        }
        let mut reader = LineReader {
            tokens: tokenize(line_no, line),
            pos: 0,
            line: line_no,
            line_len: line.len(),
        };
        let n = parse_uint(reader.next("operation count")?, "operation count")? as usize;
        if n == 0 {
            return Err(InstanceError::Empty(format!("job {} has no operations", i + 1)));
        }
        let mut ops = Vec::with_capacity(n);
        for j in 0..n {
            let q = parse_uint(reader.next("machine option count")?, "machine option count")? as usize;
            if q == 0 {
                return Err(InstanceError::Empty(format!(
                    "operation {} of job {} has no machine options",
                    j + 1,
                    i + 1
                )));
            }
            let mut options: Vec<MachineOption> = Vec::with_capacity(q);
            for _ in 0..q {
                let m_tok = reader.next("machine index")?;
                let (m_line, m_col) = (m_tok.line, m_tok.column);
                let m = parse_uint(m_tok, "machine index")? as usize;
                if m == 0 {
                    return Err(syntax(m_line, m_col, "machine indices are 1-based"));
                }
                if m > num_machines {
                    return Err(InstanceError::Index {
                        line: m_line,
                        machine: m,
                        num_machines,
                    });
                }
                let d_tok = reader.next("duration")?;
                let (d_line, d_col) = (d_tok.line, d_tok.column);
                let d = parse_uint(d_tok, "duration")?;
                if d == 0 {
                    return Err(syntax(d_line, d_col, "duration must be at least 1"));
                }
                let d = Time::try_from(d).map_err(|_| syntax(d_line, d_col, "duration too large"))?;
                if options.iter().any(|o| o.machine == m - 1) {
                    return Err(syntax(m_line, m_col, format!("machine {m} listed twice for one operation")));
                }
                options.push(MachineOption {
                    machine: m - 1,
                    duration: d,
                });
            }
            ops.push(options);
        }
        reader.finish()?;
        jobs.push((1u32, ops));
    }

    if let Some((line_no, line)) = lines.next() {
        if line.trim() != "#priorities" {
            let col = line.len() - line.trim_start().len() + 1;
            return Err(syntax(line_no, col, "expected `#priorities` or end of file"));
        }
        let mut values = Vec::with_capacity(num_jobs);
        for (pl, pline) in lines.by_ref() {
            for tok in tokenize(pl, pline) {
                let p = parse_uint(&tok, "priority")?;
                if p == 0 {
                    return Err(syntax(tok.line, tok.column, "priority must be at least 1"));
                }
                if values.len() == num_jobs {
                    return Err(syntax(tok.line, tok.column, "more priorities than jobs"));
                }
                values.push(u32::try_from(p).map_err(|_| syntax(tok.line, tok.column, "priority too large"))?);
            }
        }
        if values.len() != num_jobs {
            return Err(syntax(line_no, 1, format!("expected {num_jobs} priorities, found {}", values.len())));
        }
        for (job, p) in jobs.iter_mut().zip(values) {
            job.0 = p;
        }
    }

    Instance::new(name, num_machines, jobs)
}
