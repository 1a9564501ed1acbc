//! Hybrid solver: annealing and tabu branches followed by rounds of
//! subproblem refinement around the incumbent.
//!
//! Each round ranks variables by the magnitude of their flip energy at the
//! incumbent, takes the next `subproblem_size` of them in that ranking,
//! clamps all others to their incumbent values and hands the resulting
//! sub-model to a backend. A backend answer replaces the incumbent only when
//! it strictly lowers the full energy. The classical backend solves the
//! sub-model exactly when it fits the enumeration limit and anneals it
//! otherwise; an external backend receives the sub-model as a [`Bqm`].

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use crate::qubo::Bqm;

use super::anneal::{anneal_once, temperatures};
use super::compiled::{Compiled, FlipState};
use super::exact::ground_state;
use super::{derive_seed, sample_sa, sample_tabu, SampleInfo, SampleSet, SamplerConfig, SamplerError};

/// Callback contract for an external subproblem solver: sub-model in,
/// samples over exactly its variables out.
pub trait SubproblemSolver: Send + Sync {
    fn solve(&self, sub: &Bqm) -> Result<SampleSet, String>;
}

impl<F> SubproblemSolver for F
where
    F: Fn(&Bqm) -> Result<SampleSet, String> + Send + Sync,
{
    fn solve(&self, sub: &Bqm) -> Result<SampleSet, String> {
        self(sub)
    }
}

#[derive(Clone)]
pub enum Backend {
    Classical,
    External(Arc<dyn SubproblemSolver>),
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Classical => f.write_str("Classical"),
            Backend::External(_) => f.write_str("External"),
        }
    }
}

const IMPROVEMENT_EPS: f64 = 1e-9;

/// Sub-model over `chosen` with every other variable clamped to `x`.
/// Its energy equals the full energy of the spliced assignment.
fn clamp_submodel(model: &Compiled, x: &[u8], chosen: &[usize]) -> Bqm {
    let mut inside = vec![false; model.len()];
    for &i in chosen {
        inside[i] = true;
    }
    let mut outside = x.to_vec();
    for &i in chosen {
        outside[i] = 0;
    }
    let mut sub = Bqm::with_variables(chosen.iter().map(|&i| model.vars[i]));
    sub.add_offset(model.energy(&outside));
    for &i in chosen {
        let mut lin = model.linear[i];
        for &(j, w) in &model.adj[i] {
            if !inside[j] && x[j] == 1 {
                lin += w;
            } else if inside[j] && j > i {
                sub.add_quadratic(model.vars[i], model.vars[j], w);
            }
        }
        sub.add_linear(model.vars[i], lin);
    }
    sub
}

fn solve_classical(sub: &Bqm, cfg: &SamplerConfig, seed: u64) -> Vec<u8> {
    let model = Compiled::new(sub);
    if model.len() <= cfg.exact.max_variables.min(20) {
        ground_state(&model).0
    } else {
        let (hot, cold) = temperatures(cfg, sub.max_abs_weight());
        let mut best: Option<(f64, Vec<u8>)> = None;
        for r in 0..cfg.sa.restarts {
            let x = anneal_once(&model, cfg.sa.sweeps, hot, cold, derive_seed(seed, r as u64));
            let e = model.energy(&x);
            if best.as_ref().is_none_or(|(be, _)| e < *be) {
                best = Some((e, x));
            }
        }
        best.map(|(_, x)| x).unwrap_or_default()
    }
}

/// Runs SA and tabu on the full model, then refines the better result with
/// subproblem rounds. The returned set holds both branches' samples plus
/// the refined incumbent, so its best energy never exceeds either branch.
pub fn solve_hybrid(bqm: &Bqm, cfg: &SamplerConfig, backend: &Backend) -> Result<SampleSet, SamplerError> {
    cfg.validate()?;
    let started = Instant::now();
    let (sa, tabu) = rayon::join(|| sample_sa(bqm, cfg), || sample_tabu(bqm, cfg));
    let (sa, tabu) = (sa?, tabu?);

    let model = Compiled::new(bqm);
    let n = model.len();
    let incumbent = [sa.best(), tabu.best()]
        .into_iter()
        .flatten()
        .min_by(|a, b| a.energy.total_cmp(&b.energy).then_with(|| a.assignment.cmp(&b.assignment)))
        .map(|s| model.bits(&s.assignment))
        .unwrap_or_else(|| vec![0; n]);
    let mut state = FlipState::new(&model, incumbent);

    let size = cfg.hybrid.subproblem_size.min(n);
    let mut cursor = 0usize;
    let mut rounds_used = 0;
    if size > 0 {
        for round in 0..cfg.hybrid.rounds {
            rounds_used = round + 1;
            let mut ranked: Vec<usize> = (0..n).collect();
            ranked.sort_by(|&a, &b| {
                state.delta(b).abs().total_cmp(&state.delta(a).abs()).then(a.cmp(&b))
            });
            let mut chosen: Vec<usize> = (0..size).map(|k| ranked[(cursor + k) % n]).collect();
            // sub-model variables come back in key order, which is index order
            chosen.sort_unstable();
            let sub = clamp_submodel(&model, &state.x, &chosen);
            let sub_x: Vec<u8> = match backend {
                Backend::Classical => solve_classical(&sub, cfg, derive_seed(cfg.seed ^ 0x4B1D, round as u64)),
                Backend::External(solver) => {
                    let answer = solver.solve(&sub).map_err(SamplerError::BackendFailed)?;
                    match answer.best() {
                        Some(best) => {
                            let sub_model = Compiled::new(&sub);
                            if sub.variables().any(|v| best.assignment.get(v).is_none()) {
                                return Err(SamplerError::BackendFailed(
                                    "answer does not cover the subproblem variables".into(),
                                ));
                            }
                            sub_model.bits(&best.assignment)
                        }
                        None => Vec::new(),
                    }
                }
            };
            let mut candidate = state.x.clone();
            if sub_x.len() == chosen.len() {
                for (k, &i) in chosen.iter().enumerate() {
                    candidate[i] = sub_x[k];
                }
            }
            let energy = model.energy(&candidate);
            if energy < state.energy - IMPROVEMENT_EPS {
                state = FlipState::new(&model, candidate);
                cursor = 0;
            } else {
                cursor += size;
                if cursor >= n {
                    break;
                }
            }
        }
    }

    let refined = model.assignment(&state.x);
    let assignments = sa
        .samples
        .iter()
        .chain(tabu.samples.iter())
        .map(|s| s.assignment.clone())
        .chain(std::iter::once(refined));
    let name = match backend {
        Backend::Classical => "hybrid-classical",
        Backend::External(_) => "hybrid-external",
    };
    let info = SampleInfo {
        sampler: name.into(),
        wall_time: started.elapsed(),
        sweeps: rounds_used,
        restarts: sa.info.restarts + tabu.info.restarts,
    };
    let mut set = SampleSet::from_assignments(bqm, assignments, info);
    set.info.wall_time = started.elapsed();
    Ok(set)
}
