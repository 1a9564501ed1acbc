//! Metropolis simulated annealing with a geometric temperature schedule.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::qubo::Bqm;

use super::compiled::{Compiled, FlipState};
use super::{derive_seed, SampleInfo, SampleSet, SamplerConfig, SamplerError};

pub(crate) fn temperatures(cfg: &SamplerConfig, model_scale: f64) -> (f64, f64) {
    let cold = cfg.sa.t_cold;
    let hot = cfg.sa.t_hot.unwrap_or(model_scale).max(2.0 * cold);
    (hot, cold)
}

/// One annealing run from a random start; returns the best state seen at
/// the end of any sweep.
pub(crate) fn anneal_once(model: &Compiled, sweeps: usize, hot: f64, cold: f64, seed: u64) -> Vec<u8> {
    let n = model.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
    let mut state = FlipState::new(model, x);
    let mut best = state.x.clone();
    let mut best_energy = state.energy;
    let ratio = cold / hot;
    for sweep in 0..sweeps {
        let temp = if sweeps == 1 {
            cold
        } else {
            hot * ratio.powf(sweep as f64 / (sweeps - 1) as f64)
        };
        for i in 0..n {
            let d = state.delta(i);
            if d <= 0.0 || rng.random::<f64>() < (-d / temp).exp() {
                state.flip(model, i);
            }
        }
        if state.energy < best_energy {
            best_energy = state.energy;
            best.copy_from_slice(&state.x);
        }
    }
    best
}

/// Simulated annealing; one returned sample per restart.
pub fn sample_sa(bqm: &Bqm, cfg: &SamplerConfig) -> Result<SampleSet, SamplerError> {
    cfg.validate()?;
    let started = Instant::now();
    let model = Compiled::new(bqm);
    let (hot, cold) = temperatures(cfg, bqm.max_abs_weight());
    let states: Vec<Vec<u8>> = (0..cfg.sa.restarts)
        .into_par_iter()
        .map(|r| anneal_once(&model, cfg.sa.sweeps, hot, cold, derive_seed(cfg.seed, r as u64)))
        .collect();
    let info = SampleInfo {
        sampler: "sa".into(),
        wall_time: started.elapsed(),
        sweeps: cfg.sa.sweeps,
        restarts: cfg.sa.restarts,
    };
    let mut set = SampleSet::from_assignments(bqm, states.iter().map(|x| model.assignment(x)), info);
    set.info.wall_time = started.elapsed();
    Ok(set)
}
