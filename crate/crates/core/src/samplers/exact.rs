use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::qubo::Bqm;

use super::compiled::{Compiled, FlipState};
use super::{ExactConfig, SampleInfo, SampleSet, SamplerError};

/// Hard ceiling independent of configuration: masks are `u64`.
const ENUMERATION_LIMIT: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ranked {
    energy: f64,
    /// Mask with variable 0 in the most significant position, so integer
    /// order equals lexicographic assignment order.
    lex: u64,
}

impl Eq for Ranked {}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.energy
            .total_cmp(&other.energy)
            .then(self.lex.cmp(&other.lex))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn lex_key(mask: u64, n: usize) -> u64 {
    if n == 0 {
        0
    } else {
        mask.reverse_bits() >> (64 - n)
    }
}

fn bits_from_lex(lex: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((lex >> (n - 1 - i)) & 1) as u8).collect()
}

/// Visits all `2^n` assignments in Gray-code order, keeping the best `keep`.
fn enumerate(model: &Compiled, keep: Option<usize>) -> Vec<Ranked> {
    let n = model.len();
    let mut state = FlipState::new(model, vec![0; n]);
    let mut mask = 0u64;
    let total: u64 = 1u64 << n;
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::new();
    let mut all = Vec::new();
    let mut push = |r: Ranked| match keep {
        None => all.push(r),
        Some(k) => {
            if heap.len() < k {
                heap.push(r);
            } else if heap.peek().is_some_and(|worst| r < *worst) {
                heap.pop();
                heap.push(r);
            }
        }
    };
    push(Ranked { energy: state.energy, lex: 0 });
    for step in 1..total {
        let i = step.trailing_zeros() as usize;
        state.flip(model, i);
        mask ^= 1 << i;
        push(Ranked {
            energy: state.energy,
            lex: lex_key(mask, n),
        });
    }
    let mut out = if keep.is_some() { heap.into_vec() } else { all };
    out.sort();
    out
}

/// Lowest-energy assignment by exhaustive search; ties go to the
/// lexicographically smallest assignment.
pub(crate) fn ground_state(model: &Compiled) -> (Vec<u8>, f64) {
    let best = enumerate(model, Some(1))[0];
    let x = bits_from_lex(best.lex, model.len());
    let e = model.energy(&x);
    (x, e)
}

/// Enumerates every assignment of `bqm` and returns them sorted by energy.
pub fn sample_exact(bqm: &Bqm, cfg: &ExactConfig) -> Result<SampleSet, SamplerError> {
    let n = bqm.num_variables();
    let limit = cfg.max_variables.min(ENUMERATION_LIMIT);
    if n > limit {
        return Err(SamplerError::TooLarge { variables: n, limit });
    }
    let started = Instant::now();
    let model = Compiled::new(bqm);
    let ranked = enumerate(&model, cfg.keep);
    let assignments = ranked
        .iter()
        .map(|r| model.assignment(&bits_from_lex(r.lex, n)));
    let info = SampleInfo {
        sampler: "exact".into(),
        wall_time: started.elapsed(),
        sweeps: 0,
        restarts: 0,
    };
    let mut set = SampleSet::from_assignments(bqm, assignments, info);
    set.info.wall_time = started.elapsed();
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::super::test_models::*;
    use super::*;
    use crate::qubo::{Assignment, VarKey};

    #[test]
    fn two_variable_ground_state() {
        let bqm = two_var();
        let set = sample_exact(&bqm, &ExactConfig::default()).unwrap();
        assert_eq!(set.len(), 4);
        let best = set.best().unwrap();
        assert_eq!(best.energy, -2.0);
        assert_eq!(best.assignment, Assignment::with_ones(&bqm, [&var(1)]));
        let energies: Vec<f64> = set.samples.iter().map(|s| s.energy).collect();
        assert_eq!(energies, vec![-2.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn empty_model() {
        let mut bqm = Bqm::new();
        bqm.add_offset(3.5);
        let set = sample_exact(&bqm, &ExactConfig::default()).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set.samples[0].assignment.is_empty());
        assert_eq!(set.samples[0].energy, 3.5);
    }

    #[test]
    fn too_large() {
        let bqm = Bqm::with_variables((0..25).map(|t| VarKey::new(0, 0, 0, t)));
        assert_eq!(
            sample_exact(&bqm, &ExactConfig::default()),
            Err(SamplerError::TooLarge { variables: 25, limit: 24 })
        );
    }

    #[test]
    fn keep_returns_prefix_of_full_enumeration() {
        let bqm = random_bqm(5, 10, 0.4);
        let full = sample_exact(&bqm, &ExactConfig::default()).unwrap();
        let top = sample_exact(&bqm, &ExactConfig { keep: Some(7), ..Default::default() }).unwrap();
        assert_eq!(full.len(), 1024);
        assert_eq!(top.samples[..], full.samples[..7]);
    }

    #[test]
    fn enumeration_is_sorted_and_consistent() {
        let bqm = random_bqm(11, 8, 0.5);
        let set = sample_exact(&bqm, &ExactConfig::default()).unwrap();
        assert!(set.samples.windows(2).all(|w| w[0].energy <= w[1].energy));
        for s in &set.samples {
            assert_eq!(bqm.energy(&s.assignment).unwrap(), s.energy);
        }
        let distinct: std::collections::BTreeSet<_> = set.samples.iter().map(|s| s.assignment.clone()).collect();
        assert_eq!(distinct.len(), 256);
        let (x, e) = ground_state(&Compiled::new(&bqm));
        assert!((e - set.samples[0].energy).abs() < 1e-9);
        assert_eq!(Compiled::new(&bqm).assignment(&x), set.samples[0].assignment);
    }
}
