//! Exact ground states by depth-first branch and bound.
//!
//! Variables are fixed in key order. The bound adds, for each group of
//! still-free variables that are pairwise penalized (a clique of positive
//! couplings, such as all start options of one operation), the cheapest way
//! of switching on `s` of them given their current local fields, plus all
//! remaining negative couplings. For models without such cliques it reduces
//! to the usual sum of negative local fields.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::qubo::Bqm;

use super::compiled::Compiled;
use super::tabu::{effective_tenure, tabu_walk};
use super::{BranchBoundConfig, SampleInfo, SampleSet, SamplerError};

struct Group {
    start: usize,
    end: usize,
    min_coupling: f64,
}

fn coupling(model: &Compiled, i: usize, j: usize) -> f64 {
    model.adj[i]
        .binary_search_by_key(&j, |(k, _)| *k)
        .map(|pos| model.adj[i][pos].1)
        .unwrap_or(0.0)
}

fn cliques(model: &Compiled) -> Vec<Group> {
    let mut groups: Vec<Group> = Vec::new();
    for i in 0..model.len() {
        if let Some(g) = groups.last_mut() {
            let weights: Vec<f64> = (g.start..g.end).map(|m| coupling(model, i, m)).collect();
            if weights.iter().all(|w| *w > 0.0) {
                g.end = i + 1;
                g.min_coupling = weights.iter().copied().fold(g.min_coupling, f64::min);
                continue;
            }
        }
        groups.push(Group {
            start: i,
            end: i + 1,
            min_coupling: f64::INFINITY,
        });
    }
    groups
}

struct Search<'a> {
    model: &'a Compiled,
    groups: Vec<Group>,
    group_of: Vec<usize>,
    neg_suffix: Vec<f64>,
    x: Vec<u8>,
    field: Vec<f64>,
    best: f64,
    ties: Vec<Vec<u8>>,
    max_ties: usize,
    nodes: u64,
    max_nodes: u64,
    scratch: Vec<f64>,
}

impl Search<'_> {
    fn tolerance(&self) -> f64 {
        1e-9 * self.best.abs().max(1.0)
    }

    fn bound(&mut self, depth: usize, current: f64) -> f64 {
        let mut lb = current + self.neg_suffix[depth];
        if depth == self.model.len() {
            return lb;
        }
        let mut g = self.group_of[depth];
        while g < self.groups.len() {
            let group = &self.groups[g];
            let from = group.start.max(depth);
            if group.end - from == 1 || !group.min_coupling.is_finite() {
                lb += (from..group.end).map(|i| self.field[i].min(0.0)).sum::<f64>();
            } else {
                self.scratch.clear();
                self.scratch
                    .extend((from..group.end).map(|i| self.field[i]).filter(|h| *h < 0.0));
                self.scratch.sort_by(f64::total_cmp);
                let mut best = 0.0f64;
                let mut prefix = 0.0;
                for (s, h) in self.scratch.iter().enumerate() {
                    prefix += h;
                    let chosen = (s + 1) as f64;
                    best = best.min(prefix + group.min_coupling * chosen * (chosen - 1.0) / 2.0);
                }
                lb += best;
            }
            g += 1;
        }
        lb
    }

    fn assign(&mut self, i: usize, sign: f64) {
        for &(j, w) in &self.model.adj[i] {
            self.field[j] += sign * w;
        }
    }

    fn visit(&mut self, depth: usize, current: f64) -> Result<(), SamplerError> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(SamplerError::NodeBudget(self.max_nodes));
        }
        let n = self.model.len();
        if depth == n {
            let tol = self.tolerance();
            if current < self.best - tol {
                self.best = current;
                self.ties.clear();
                self.ties.push(self.x.clone());
            } else if current <= self.best + tol && self.ties.len() < self.max_ties {
                self.ties.push(self.x.clone());
            }
            return Ok(());
        }
        if self.bound(depth, current) > self.best + self.tolerance() {
            return Ok(());
        }
        let h = self.field[depth];
        let order: [u8; 2] = if h < 0.0 { [1, 0] } else { [0, 1] };
        for bit in order {
            if bit == 1 {
                self.x[depth] = 1;
                self.assign(depth, 1.0);
                let r = self.visit(depth + 1, current + h);
                self.assign(depth, -1.0);
                self.x[depth] = 0;
                r?;
            } else {
                self.visit(depth + 1, current)?;
            }
        }
        Ok(())
    }
}

/// Exact minimization. Returns every ground state found (up to
/// `max_ties`), sorted like any other sample set.
pub fn sample_branch_bound(bqm: &Bqm, cfg: &BranchBoundConfig) -> Result<SampleSet, SamplerError> {
    let n = bqm.num_variables();
    if n > cfg.max_variables {
        return Err(SamplerError::TooLarge {
            variables: n,
            limit: cfg.max_variables,
        });
    }
    let started = Instant::now();
    let model = Compiled::new(bqm);

    let groups = cliques(&model);
    let mut group_of = vec![0; n];
    for (g, group) in groups.iter().enumerate() {
        group_of[group.start..group.end].fill(g);
    }
    let mut neg_suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        let neg: f64 = model.adj[i]
            .iter()
            .filter(|(j, w)| *j > i && *w < 0.0)
            .map(|(_, w)| w)
            .sum();
        neg_suffix[i] = neg_suffix[i + 1] + neg;
    }

    // a good incumbent up front lets the bound prune from the start
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let warm = tabu_walk(&model, vec![0; n], effective_tenure(0, n), 200, &mut rng);
    let warm_energy = model.energy(&warm);

    let mut search = Search {
        model: &model,
        groups,
        group_of,
        neg_suffix,
        x: vec![0; n],
        field: model.linear.clone(),
        best: warm_energy,
        ties: Vec::new(),
        max_ties: cfg.max_ties,
        nodes: 0,
        max_nodes: cfg.max_nodes,
        scratch: Vec::new(),
    };
    search.visit(0, model.offset)?;
    let ties = if search.ties.is_empty() { vec![warm] } else { search.ties };
    let nodes = search.nodes;

    let info = SampleInfo {
        sampler: "branch-bound".into(),
        wall_time: started.elapsed(),
        sweeps: nodes as usize,
        restarts: 0,
    };
    let mut set = SampleSet::from_assignments(bqm, ties.iter().map(|x| model.assignment(x)), info);
    set.info.wall_time = started.elapsed();
    Ok(set)
}
