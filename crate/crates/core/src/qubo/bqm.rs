use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::instance::Time;

use super::QuboError;

/// One binary decision: operation `(job, op)` starts at `start` on `machine`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarKey {
    pub job: usize,
    pub op: usize,
    pub machine: usize,
    pub start: Time,
}

impl VarKey {
    pub const fn new(job: usize, op: usize, machine: usize, start: Time) -> Self {
        VarKey { job, op, machine, start }
    }

    pub fn operation(&self) -> (usize, usize) {
        (self.job, self.op)
    }
}

/// A 0/1 valuation of model variables. Ordering is lexicographic over the
/// sorted `(variable, bit)` pairs, which makes it a stable tie-breaker.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment(BTreeMap<VarKey, bool>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// All variables of `bqm` set to zero.
    pub fn zeros(bqm: &Bqm) -> Self {
        Assignment(bqm.variables().map(|v| (*v, false)).collect())
    }

    /// All variables of `bqm` set to zero except the listed ones.
    pub fn with_ones<'a>(bqm: &Bqm, ones: impl IntoIterator<Item = &'a VarKey>) -> Self {
        let mut a = Self::zeros(bqm);
        for v in ones {
            a.set(*v, true);
        }
        a
    }

    pub fn set(&mut self, var: VarKey, bit: bool) {
        self.0.insert(var, bit);
    }

    pub fn get(&self, var: &VarKey) -> Option<bool> {
        self.0.get(var).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarKey, bool)> {
        self.0.iter().map(|(k, b)| (k, *b))
    }

    pub fn ones(&self) -> impl Iterator<Item = &VarKey> {
        self.0.iter().filter(|(_, b)| **b).map(|(k, _)| k)
    }
}

impl FromIterator<(VarKey, bool)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (VarKey, bool)>>(iter: I) -> Self {
        Assignment(iter.into_iter().collect())
    }
}

/// Binary quadratic model: `offset + Σ linear·x + Σ quadratic·x·x'`.
///
/// Quadratic keys are stored as ordered pairs `(a, b)` with `a < b`; adding
/// the same pair twice accumulates. Entries whose weight becomes exactly zero
/// are dropped, while the variable itself stays part of the model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bqm {
    variables: BTreeSet<VarKey>,
    linear: BTreeMap<VarKey, f64>,
    quadratic: BTreeMap<(VarKey, VarKey), f64>,
    offset: f64,
}

impl Bqm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_variables(vars: impl IntoIterator<Item = VarKey>) -> Self {
        Bqm {
            variables: vars.into_iter().collect(),
            ..Self::default()
        }
    }

    pub fn add_variable(&mut self, v: VarKey) {
        self.variables.insert(v);
    }

    pub fn add_linear(&mut self, v: VarKey, w: f64) {
        self.variables.insert(v);
        if w == 0.0 {
            return;
        }
        let e = self.linear.entry(v).or_insert(0.0);
        *e += w;
        if *e == 0.0 {
            self.linear.remove(&v);
        }
    }

    /// Adds `w·x_a·x_b`. Panics when `a == b`; use `add_linear` for diagonal terms.
    pub fn add_quadratic(&mut self, a: VarKey, b: VarKey, w: f64) {
        assert_ne!(a, b, "quadratic term needs distinct endpoints");
        self.variables.insert(a);
        self.variables.insert(b);
        if w == 0.0 {
            return;
        }
        let key = if a < b { (a, b) } else { (b, a) };
        let e = self.quadratic.entry(key).or_insert(0.0);
        *e += w;
        if *e == 0.0 {
            self.quadratic.remove(&key);
        }
    }

    pub fn add_offset(&mut self, w: f64) {
        self.offset += w;
    }

    /// Adds `factor·other` term by term. A zero factor contributes nothing.
    pub fn add_scaled(&mut self, other: &Bqm, factor: f64) {
        self.variables.extend(other.variables.iter().copied());
        if factor == 0.0 {
            return;
        }
        for (v, w) in &other.linear {
            self.add_linear(*v, w * factor);
        }
        for ((a, b), w) in &other.quadratic {
            self.add_quadratic(*a, *b, w * factor);
        }
        self.offset += other.offset * factor;
    }

    pub fn variables(&self) -> impl ExactSizeIterator<Item = &VarKey> {
        self.variables.iter()
    }

    pub fn contains(&self, v: &VarKey) -> bool {
        self.variables.contains(v)
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn linear(&self) -> &BTreeMap<VarKey, f64> {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(VarKey, VarKey), f64> {
        &self.quadratic
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn linear_weight(&self, v: &VarKey) -> f64 {
        self.linear.get(v).copied().unwrap_or(0.0)
    }

    pub fn quadratic_weight(&self, a: &VarKey, b: &VarKey) -> f64 {
        let key = if a < b { (*a, *b) } else { (*b, *a) };
        self.quadratic.get(&key).copied().unwrap_or(0.0)
    }

    /// True when no linear or quadratic term is stored and the offset is zero.
    pub fn is_trivial(&self) -> bool {
        self.linear.is_empty() && self.quadratic.is_empty() && self.offset == 0.0
    }

    /// Largest absolute linear or quadratic weight.
    pub fn max_abs_weight(&self) -> f64 {
        self.linear
            .values()
            .chain(self.quadratic.values())
            .fold(0.0, |m, w| m.max(w.abs()))
    }

    /// Energy of `x`; every model variable must be assigned.
    pub fn energy(&self, x: &Assignment) -> Result<f64, QuboError> {
        if let Some(missing) = self.variables.iter().find(|v| x.get(v).is_none()) {
            return Err(QuboError::MissingVariable(*missing));
        }
        let on = |v: &VarKey| x.get(v).unwrap_or(false);
        let mut e = self.offset;
        for (v, w) in &self.linear {
            if on(v) {
                e += w;
            }
        }
        for ((a, b), w) in &self.quadratic {
            if on(a) && on(b) {
                e += w;
            }
        }
        Ok(e)
    }

    /// Line-oriented text dump: `VAR`, `LIN`, `QUAD` and `OFFSET` records.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for v in &self.variables {
            let _ = writeln!(s, "VAR {} {} {} {}", v.job, v.op, v.machine, v.start);
        }
        for (v, w) in &self.linear {
            let _ = writeln!(s, "LIN {} {} {} {} {}", v.job, v.op, v.machine, v.start, w);
        }
        for ((a, b), w) in &self.quadratic {
            let _ = writeln!(
                s,
                "QUAD {} {} {} {} {} {} {} {} {}",
                a.job, a.op, a.machine, a.start, b.job, b.op, b.machine, b.start, w
            );
        }
        let _ = writeln!(s, "OFFSET {}", self.offset);
        s
    }
}
