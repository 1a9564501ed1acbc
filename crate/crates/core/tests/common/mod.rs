//! Strategies and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use mofjsp::instance::{Instance, MachineOption, Time};
use mofjsp::qubo::{build_variables, full_windows, Bqm, HamiltonianParts, MachineBlocks, Subset, VarKey};
use mofjsp::schedule::{Entry, Schedule};
use proptest::collection::{btree_set, vec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOY1_TEXT: &str = "2 2 1.67\n2  2 1 2 2 3  1 2 1\n1  2 1 1 2 2\n#priorities\n2 1\n";

fn arb_operation(machines: usize, max_dur: Time) -> impl Strategy<Value = Vec<MachineOption>> {
    (btree_set(0..machines, 1..=machines), vec(1..=max_dur, machines)).prop_map(|(set, durs)| {
        set.into_iter()
            .map(|machine| MachineOption { machine, duration: durs[machine] })
            .collect()
    })
}

/// Instances with up to `max_jobs` jobs of up to `max_ops` operations on up
/// to `max_machines` machines.
pub fn arb_instance(max_jobs: usize, max_ops: usize, max_machines: usize) -> impl Strategy<Value = Instance> {
    (1..=max_machines).prop_flat_map(move |m| {
        let job = (1..=3u32, vec(arb_operation(m, 4), 1..=max_ops));
        vec(job, 1..=max_jobs).prop_map(move |jobs| Instance::new("arb", m, jobs).unwrap())
    })
}

/// Random feasible schedule: dispatch ready operations in random order on
/// random machines, each appended after its job and machine with a gap.
pub fn random_schedule(seed: u64, instance: &Instance, max_gap: Time) -> Schedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = vec![0; instance.num_jobs()];
    let mut job_ready = vec![0; instance.num_jobs()];
    let mut machine_ready = vec![0; instance.num_machines];
    let mut entries = Vec::new();
    loop {
        let ready: Vec<usize> = (0..instance.num_jobs())
            .filter(|&i| next[i] < instance.jobs[i].operations.len())
            .collect();
        if ready.is_empty() {
            break;
        }
        let i = ready[rng.random_range(0..ready.len())];
        let op = &instance.jobs[i].operations[next[i]];
        let opt = op.options[rng.random_range(0..op.options.len())];
        let start = job_ready[i].max(machine_ready[opt.machine]) + rng.random_range(0..=max_gap);
        entries.push(Entry { job: i, op: next[i], machine: opt.machine, start, duration: opt.duration });
        next[i] += 1;
        job_ready[i] = start + opt.duration;
        machine_ready[opt.machine] = start + opt.duration;
    }
    Schedule::from_entries(entries, instance)
}

/// Unweighted term groups of the whole instance with every start in
/// `[0, t_max]` allowed (subject to each operation's window).
pub fn full_model(instance: &Instance, t_max: Time) -> (BTreeSet<VarKey>, HamiltonianParts) {
    let windows = full_windows(&Subset::whole(instance), t_max);
    let vars = build_variables(instance, &windows, &MachineBlocks::new());
    let parts = HamiltonianParts::build(instance, &vars, &windows);
    (vars, parts)
}

pub fn key(i: u32) -> VarKey {
    VarKey::new(0, 0, 0, i)
}

/// Dense random model over `n` variables with integer-valued weights.
pub fn arb_bqm(max_vars: u32) -> impl Strategy<Value = Bqm> {
    (1..=max_vars).prop_flat_map(|n| {
        let pairs = (n * (n - 1) / 2) as usize;
        (vec(-6i32..=6, n as usize), vec(-6i32..=6, pairs), -3i32..=3).prop_map(move |(lin, quad, off)| {
            let mut bqm = Bqm::with_variables((0..n).map(key));
            for (i, w) in lin.iter().enumerate() {
                bqm.add_linear(key(i as u32), *w as f64);
            }
            let mut q = quad.iter();
            for i in 0..n {
                for j in i + 1..n {
                    let w = *q.next().unwrap();
                    if w != 0 {
                        bqm.add_quadratic(key(i), key(j), w as f64);
                    }
                }
            }
            bqm.add_offset(off as f64);
            bqm
        })
    })
}
