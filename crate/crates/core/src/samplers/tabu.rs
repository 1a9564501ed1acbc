//! Single-flip tabu search with aspiration.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::qubo::Bqm;

use super::compiled::{Compiled, FlipState};
use super::{derive_seed, SampleInfo, SampleSet, SamplerConfig, SamplerError};

const IMPROVEMENT_EPS: f64 = 1e-9;

pub(crate) fn effective_tenure(requested: usize, n: usize) -> usize {
    let t = if requested == 0 { (n / 10).clamp(1, 20) } else { requested };
    t.min(n.saturating_sub(1))
}

/// Steepest-descent tabu walk from `start`; stops after `max_stagnation`
/// iterations without a new best. Returns the best state found.
pub(crate) fn tabu_walk(
    model: &Compiled,
    start: Vec<u8>,
    tenure: usize,
    max_stagnation: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<u8> {
    let n = model.len();
    let mut state = FlipState::new(model, start);
    let mut best = state.x.clone();
    let mut best_energy = state.energy;
    let mut tabu_until = vec![0usize; n];
    let mut stagnation = 0;
    let mut iter = 0usize;
    while stagnation < max_stagnation && n > 0 {
        iter += 1;
        let mut chosen: Option<usize> = None;
        let mut chosen_delta = f64::INFINITY;
        let mut ties = 0u32;
        for i in 0..n {
            let d = state.delta(i);
            let allowed = tabu_until[i] < iter || state.energy + d < best_energy - IMPROVEMENT_EPS;
            if !allowed {
                continue;
            }
            if d < chosen_delta {
                chosen = Some(i);
                chosen_delta = d;
                ties = 1;
            } else if d == chosen_delta {
                // reservoir choice among equal moves
                ties += 1;
                if rng.random_range(0..ties) == 0 {
                    chosen = Some(i);
                }
            }
        }
        let Some(i) = chosen else { break };
        state.flip(model, i);
        tabu_until[i] = iter + tenure;
        if state.energy < best_energy - IMPROVEMENT_EPS {
            best_energy = state.energy;
            best.copy_from_slice(&state.x);
            stagnation = 0;
        } else {
            stagnation += 1;
        }
    }
    best
}

/// Tabu search; restart 0 starts from all zeros, later restarts from random
/// assignments. One returned sample per restart.
pub fn sample_tabu(bqm: &Bqm, cfg: &SamplerConfig) -> Result<SampleSet, SamplerError> {
    cfg.validate()?;
    let started = Instant::now();
    let model = Compiled::new(bqm);
    let n = model.len();
    let tenure = effective_tenure(cfg.tabu.tenure, n);
    let states: Vec<Vec<u8>> = (0..cfg.tabu.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed ^ 0x7AB0, r as u64));
            let start = if r == 0 {
                vec![0; n]
            } else {
                (0..n).map(|_| u8::from(rng.random::<bool>())).collect()
            };
            tabu_walk(&model, start, tenure, cfg.tabu.max_stagnation, &mut rng)
        })
        .collect();
    let info = SampleInfo {
        sampler: "tabu".into(),
        wall_time: started.elapsed(),
        sweeps: 0,
        restarts: cfg.tabu.restarts,
    };
    let mut set = SampleSet::from_assignments(bqm, states.iter().map(|x| model.assignment(x)), info);
    set.info.wall_time = started.elapsed();
    Ok(set)
}
