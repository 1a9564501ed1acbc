//! Instance generators and brute-force oracles shared by integration tests.
#![allow(dead_code)]

use mofjsp::instance::{Instance, MachineOption, Time};
use mofjsp::schedule::{Entry, Schedule};
use rand::seq::index::sample;
use rand::Rng;

/// Random instance: `jobs` jobs with 1..=`max_ops` operations each, every
/// operation on 1..=`max_flex` distinct machines with durations 1..=`max_dur`
/// and job priorities 1..=3.
pub fn random_instance(
    rng: &mut impl Rng,
    jobs: usize,
    max_ops: usize,
    machines: usize,
    max_dur: Time,
    max_flex: usize,
) -> Instance {
    let spec = (0..jobs)
        .map(|_| {
            let ops = rng.random_range(1..=max_ops);
            let operations = (0..ops)
                .map(|_| {
                    let flex = rng.random_range(1..=max_flex.min(machines));
                    let mut chosen = sample(rng, machines, flex).into_vec();
                    chosen.sort_unstable();
                    chosen
                        .into_iter()
                        .map(|machine| MachineOption { machine, duration: rng.random_range(1..=max_dur) })
                        .collect()
                })
                .collect();
            (rng.random_range(1..=3), operations)
        })
        .collect();
    Instance::new("random", machines, spec).expect("generated instance is valid")
}

/// Minimum makespan by exhaustive search over machine choices and operation
/// orders, each order scheduled semi-actively (every optimum is reached this
/// way), with pruning against the incumbent.
pub fn optimal_makespan(instance: &Instance) -> Time {
    struct Search<'a> {
        inst: &'a Instance,
        next: Vec<usize>,
        job_ready: Vec<Time>,
        machine_ready: Vec<Time>,
        best: Time,
    }
    impl Search<'_> {
        fn go(&mut self, current: Time, left: usize) {
            if left == 0 {
                self.best = self.best.min(current);
                return;
            }
            for i in 0..self.inst.num_jobs() {
                let j = self.next[i];
                let Some(op) = self.inst.jobs[i].operations.get(j) else { continue };
                for opt in &op.options {
                    let start = self.job_ready[i].max(self.machine_ready[opt.machine]);
                    let end = start + opt.duration;
                    let makespan = current.max(end);
                    if makespan >= self.best {
                        continue;
                    }
                    let (jr, mr) = (self.job_ready[i], self.machine_ready[opt.machine]);
                    self.next[i] += 1;
                    self.job_ready[i] = end;
                    self.machine_ready[opt.machine] = end;
                    self.go(makespan, left - 1);
                    self.next[i] -= 1;
                    self.job_ready[i] = jr;
                    self.machine_ready[opt.machine] = mr;
                }
            }
        }
    }
    let mut s = Search {
        inst: instance,
        next: vec![0; instance.num_jobs()],
        job_ready: vec![0; instance.num_jobs()],
        machine_ready: vec![0; instance.num_machines],
        best: Time::MAX,
    };
    s.go(0, instance.num_operations());
    s.best
}

/// Random feasible schedule: dispatch random ready operations on random
/// machines, appending each after its job and machine with a random gap.
pub fn random_schedule(rng: &mut impl Rng, instance: &Instance, max_gap: Time) -> Schedule {
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
        let start: Time = job_ready[i].max(machine_ready[opt.machine]) + rng.random_range(0..=max_gap);
        let end = start + opt.duration;
        entries.push(Entry { job: i, op: next[i], machine: opt.machine, start, duration: opt.duration });
        next[i] += 1;
        job_ready[i] = end;
        machine_ready[opt.machine] = end;
    }
    Schedule::from_entries(entries, instance)
}
