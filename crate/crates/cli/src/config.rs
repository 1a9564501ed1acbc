//! Sweep configuration: a TOML file with parameter grids.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mofjsp::decompose::BottleneckWeights;
use mofjsp::samplers::{SamplerConfig, SamplerKind};
use mofjsp::schedule::Objectives;
use mofjsp::LagrangeParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Which objectives are optimized; inactive ones get zero weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectiveSet {
    #[serde(rename = "f1+f2")]
    MakespanWorkload,
    #[serde(rename = "f1+f3")]
    MakespanPriority,
    #[serde(rename = "f1+f2+f3")]
    All,
}

impl ObjectiveSet {
    pub const ALL: [ObjectiveSet; 3] = [ObjectiveSet::MakespanWorkload, ObjectiveSet::MakespanPriority, ObjectiveSet::All];

    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveSet::MakespanWorkload => "f1+f2",
            ObjectiveSet::MakespanPriority => "f1+f3",
            ObjectiveSet::All => "f1+f2+f3",
        }
    }

    pub fn uses_workload(&self) -> bool {
        matches!(self, ObjectiveSet::MakespanWorkload | ObjectiveSet::All)
    }

    pub fn uses_priority(&self) -> bool {
        matches!(self, ObjectiveSet::MakespanPriority | ObjectiveSet::All)
    }

    /// Column names of the objective vector.
    pub fn labels(&self) -> Vec<&'static str> {
        let mut v = vec!["e_f1"];
        if self.uses_workload() {
            v.push("e_f2");
        }
        if self.uses_priority() {
            v.push("e_f3");
        }
        v
    }

    pub fn vector(&self, o: &Objectives) -> Vec<f64> {
        self.vector_of(o.makespan as f64, o.workload as f64, o.priority)
    }

    pub fn vector_of(&self, f1: f64, f2: f64, f3: f64) -> Vec<f64> {
        let mut v = vec![f1];
        if self.uses_workload() {
            v.push(f2);
        }
        if self.uses_priority() {
            v.push(f3);
        }
        v
    }

    /// Zeroes the weights of inactive objectives.
    pub fn mask(&self, mut p: LagrangeParams) -> LagrangeParams {
        if !self.uses_workload() {
            p.beta = 0.0;
        }
        if !self.uses_priority() {
            p.gamma = 0.0;
        }
        p
    }

    /// Bottleneck weights: 1 for each active objective, 0 otherwise.
    pub fn default_weights(&self) -> BottleneckWeights {
        BottleneckWeights {
            alpha_l: 1.0,
            beta_l: if self.uses_workload() { 1.0 } else { 0.0 },
            gamma_l: if self.uses_priority() { 1.0 } else { 0.0 },
        }
    }
}

impl fmt::Display for ObjectiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectiveSet {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        ObjectiveSet::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown objective set {s:?} (expected f1+f2, f1+f3 or f1+f2+f3)")))
    }
}

fn default_points() -> usize {
    3
}

/// A scalar, an endpoint-inclusive range with `points` values, or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Scalar(f64),
    Range {
        range: [f64; 2],
        #[serde(default = "default_points")]
        points: usize,
    },
    Values {
        values: Vec<f64>,
    },
}

impl GridSpec {
    pub fn expand(&self) -> Result<Vec<f64>> {
        let out = match self {
            GridSpec::Scalar(v) => vec![*v],
            GridSpec::Range { range: [lo, hi], points } => match points {
                0 => return Err(CliError::Config("range needs at least one point".into())),
                1 => vec![*lo],
                n => (0..*n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
            },
            GridSpec::Values { values } => values.clone(),
        };
        if out.is_empty() {
            return Err(CliError::Config("empty value list".into()));
        }
        if let Some(v) = out.iter().find(|v| !v.is_finite()) {
            return Err(CliError::Config(format!("non-finite grid value {v}")));
        }
        Ok(out)
    }
}

impl From<f64> for GridSpec {
    fn from(v: f64) -> Self {
        GridSpec::Scalar(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub t_est: GridSpec,
    pub alpha: GridSpec,
    pub beta: GridSpec,
    pub gamma: GridSpec,
    pub delta: GridSpec,
    pub epsilon: GridSpec,
    pub zeta: GridSpec,
    pub j_s: GridSpec,
    pub o_s: GridSpec,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            t_est: 10.0.into(),
            alpha: 1.0.into(),
            beta: 1.0.into(),
            gamma: 1.0.into(),
            delta: 100.0.into(),
            epsilon: 100.0.into(),
            zeta: 100.0.into(),
            j_s: 3.0.into(),
            o_s: 3.0.into(),
        }
    }
}

pub const PARAMETER_NAMES: [&str; 9] = ["t_est", "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "j_s", "o_s"];

impl GridConfig {
    fn specs(&self) -> [&GridSpec; 9] {
        [
            &self.t_est,
            &self.alpha,
            &self.beta,
            &self.gamma,
            &self.delta,
            &self.epsilon,
            &self.zeta,
            &self.j_s,
            &self.o_s,
        ]
    }
}

/// Random priorities for instances that carry none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorityConfig {
    pub seed: u64,
    pub lo: u32,
    pub hi: u32,
}

fn default_algorithms() -> Vec<SamplerKind> {
    vec![SamplerKind::Csa]
}

fn default_repetitions() -> usize {
    1
}

fn default_retries() -> usize {
    4
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub instance: PathBuf,
    pub objectives: ObjectiveSet,
    #[serde(default)]
    pub grid: GridConfig,
    /// Optional `[lo, hi]` limits per parameter name; grid values outside are rejected.
    #[serde(default)]
    pub bounds: BTreeMap<String, [f64; 2]>,
    /// Defaults to 1 for active objectives and 0 otherwise.
    #[serde(default)]
    pub weights: Option<BottleneckWeights>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<SamplerKind>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_retries")]
    pub retries: usize,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub plots: bool,
    #[serde(default)]
    pub priorities: Option<PriorityConfig>,
}

impl SweepConfig {
    /// Minimal config with every optional field at its default.
    pub fn new(instance: impl Into<PathBuf>, objectives: ObjectiveSet) -> Self {
        SweepConfig {
            instance: instance.into(),
            objectives,
            grid: GridConfig::default(),
            bounds: BTreeMap::new(),
            weights: None,
            algorithms: default_algorithms(),
            sampler: SamplerConfig::default(),
            repetitions: default_repetitions(),
            seed: 0,
            retries: default_retries(),
            workers: 0,
            output: default_output(),
            plots: false,
            priorities: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; relative instance and output paths resolve against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = SweepConfig::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.instance.is_relative() {
            cfg.instance = base.join(&cfg.instance);
        }
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        Ok(cfg)
    }

    pub fn weights(&self) -> BottleneckWeights {
        self.weights.unwrap_or_else(|| self.objectives.default_weights())
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(CliError::Config("repetitions must be >= 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(CliError::Config("at least one algorithm is required".into()));
        }
        self.sampler.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.weights().validate().map_err(|e| CliError::Config(e.to_string()))?;
        for name in self.bounds.keys() {
            if !PARAMETER_NAMES.contains(&name.as_str()) {
                return Err(CliError::Config(format!("bounds for unknown parameter {name:?}")));
            }
        }
        self.grid_points().map(|_| ())
    }

    fn axis(&self, index: usize) -> Result<Vec<f64>> {
        let name = PARAMETER_NAMES[index];
        let mut values = self.grid.specs()[index].expand().map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("grid.{name}: {m}")),
            other => other,
        })?;
        // inactive objectives contribute nothing, whatever the grid says
        if (name == "beta" && !self.objectives.uses_workload()) || (name == "gamma" && !self.objectives.uses_priority()) {
            values = vec![0.0];
        }
        if let Some([lo, hi]) = self.bounds.get(name) {
            if let Some(v) = values.iter().find(|v| **v < *lo || **v > *hi) {
                return Err(CliError::Config(format!("grid.{name} value {v} outside bounds [{lo}, {hi}]")));
            }
        }
        if values.iter().any(|v| *v < 0.0) {
            return Err(CliError::Config(format!("grid.{name} values must be >= 0")));
        }
        if matches!(name, "j_s" | "o_s") && values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(CliError::Config(format!("grid.{name} values must be integers >= 1")));
        }
        if matches!(name, "delta" | "epsilon" | "zeta") && values.iter().any(|v| *v <= 0.0) {
            return Err(CliError::Config(format!("grid.{name} values must be > 0")));
        }
        let mut seen = Vec::new();
        for v in values {
            if !seen.contains(&v) {
                seen.push(v);
            }
        }
        Ok(seen)
    }

    /// Full factorial over the grid, last parameter varying fastest.
    pub fn grid_points(&self) -> Result<Vec<GridPoint>> {
        let axes: Vec<Vec<f64>> = (0..PARAMETER_NAMES.len()).map(|i| self.axis(i)).collect::<Result<_>>()?;
        let mut points = Vec::new();
        let mut idx = [0usize; 9];
        loop {
            let v: Vec<f64> = (0..9).map(|i| axes[i][idx[i]]).collect();
            points.push(GridPoint {
                t_est: v[0],
                params: LagrangeParams {
                    alpha: v[1],
                    beta: v[2],
                    gamma: v[3],
                    delta: v[4],
                    epsilon: v[5],
                    zeta: v[6],
                },
                j_s: v[7] as usize,
                o_s: v[8] as usize,
            });
            let mut d = 9;
            loop {
                if d == 0 {
                    return Ok(points);
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
}

/// One parameter tuple of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub t_est: f64,
    pub params: LagrangeParams,
    pub j_s: usize,
    pub o_s: usize,
}

impl GridPoint {
    /// Canonical text form; exact float bits make it injective.
    pub fn canonical(&self) -> String {
        let p = &self.params;
        format!(
            "t_est={:016x};alpha={:016x};beta={:016x};gamma={:016x};delta={:016x};epsilon={:016x};zeta={:016x};j_s={};o_s={}",
            self.t_est.to_bits(),
            p.alpha.to_bits(),
            p.beta.to_bits(),
            p.gamma.to_bits(),
            p.delta.to_bits(),
            p.epsilon.to_bits(),
            p.zeta.to_bits(),
            self.j_s,
            self.o_s
        )
    }

    /// First 16 hex digits of the SHA-256 of [`GridPoint::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_expansion() {
        assert_eq!(GridSpec::Scalar(2.0).expand().unwrap(), vec![2.0]);
        let r = GridSpec::Range { range: [10.0, 50.0], points: 3 };
        assert_eq!(r.expand().unwrap(), vec![10.0, 30.0, 50.0]);
        let v = GridSpec::Values { values: vec![1.0, 4.0] };
        assert_eq!(v.expand().unwrap(), vec![1.0, 4.0]);
        assert!(GridSpec::Values { values: vec![] }.expand().is_err());
    }

    #[test]
    fn parses_toml_forms() {
        let cfg = SweepConfig::parse(
            r#"
            instance = "mk01.fjs"
            objectives = "f1+f3"
            repetitions = 3
            algorithms = ["csa", "qasa"]
            [grid]
            alpha = { values = [1, 2] }
            beta = { range = [0.1, 100] }
            j_s = { values = [2, 3] }
            [sampler.sa]
            sweeps = 10
            "#,
        )
        .unwrap();
        assert_eq!(cfg.sampler.sa.sweeps, 10);
        let points = cfg.grid_points().unwrap();
        // beta is inactive for f1+f3, so only alpha and j_s vary
        assert_eq!(points.len(), 4);
        assert!(points.iter().all(|p| p.params.beta == 0.0));
        assert_eq!(cfg.weights(), BottleneckWeights { alpha_l: 1.0, beta_l: 0.0, gamma_l: 1.0 });
    }

    #[test]
    fn rejects_bad_values() {
        let base = "instance = \"x\"\nobjectives = \"f1+f2\"\n";
        assert!(SweepConfig::parse(&format!("{base}[grid]\nj_s = 1.5\n")).is_err());
        assert!(SweepConfig::parse(&format!("{base}[grid]\ndelta = 0\n")).is_err());
        assert!(SweepConfig::parse(&format!("{base}[bounds]\nalpha = [0.1, 100]\n[grid]\nalpha = 200\n")).is_err());
        assert!(SweepConfig::parse(&format!("{base}repetitions = 0\n")).is_err());
        assert!(SweepConfig::parse(&format!("{base}unknown = 1\n")).is_err());
        assert!(SweepConfig::parse("instance = \"x\"\nobjectives = \"f2\"\n").is_err());
    }

    #[test]
    fn hash_is_injective_over_grid() {
        let mut cfg = SweepConfig::new("x", ObjectiveSet::All);
        cfg.grid.alpha = GridSpec::Range { range: [0.1, 100.0], points: 4 };
        cfg.grid.delta = GridSpec::Values { values: vec![100.0, 1500.0] };
        cfg.grid.j_s = GridSpec::Values { values: vec![2.0, 5.0, 10.0] };
        let points = cfg.grid_points().unwrap();
        assert_eq!(points.len(), 24);
        let hashes: std::collections::BTreeSet<_> = points.iter().map(GridPoint::hash).collect();
        assert_eq!(hashes.len(), 24);
    }
}
