mod common;

use std::path::PathBuf;

use common::TOY1_TEXT;
use mofjsp::decompose::{run_iterative, BottleneckWeights, DecomposeError, IterativeConfig};
use mofjsp::instance::{parse_instance, Instance};
use mofjsp::qubo::{build_windows, estimate_tmax, Floors, MachineBlocks, SubproblemModel, Subset};
use mofjsp::samplers::{Sampler, SamplerConfig, SamplerKind};
use mofjsp::schedule::{check_feasible, evaluate};
use mofjsp::LagrangeParams;

const SMALL: &str = "\
4 3 1.5
3  2 1 3 2 4  1 2 2  2 1 2 3 1
2  1 3 3  2 1 2 2 2
3  1 1 1  2 2 3 3 2  1 3 1
1  3 1 2 2 2 3 3
";

fn config(j_s: usize, o_s: usize) -> IterativeConfig {
    IterativeConfig {
        params: LagrangeParams { alpha: 1.0, beta: 1.0, gamma: 1.0, delta: 200.0, epsilon: 200.0, zeta: 200.0 },
        weights: BottleneckWeights::default(),
        j_s,
        o_s,
        t_est: 2.0,
        retries: 4,
    }
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

#[test]
fn toy1_model_matches_golden_dump() {
    let inst = parse_instance(TOY1_TEXT).unwrap();
    let subset = Subset::whole(&inst);
    let t_max = estimate_tmax(&inst, &subset, 0.0, 0).unwrap().t_max;
    assert_eq!(t_max, 5);
    let windows = build_windows(&inst, &subset, t_max, &Floors::new()).unwrap();
    let params = LagrangeParams { alpha: 1.0, beta: 1.0, gamma: 1.0, delta: 2.0, epsilon: 2.0, zeta: 2.0 };
    let model = SubproblemModel::build(&inst, windows, &MachineBlocks::new(), &params);
    // O11 in [0,2] on two machines, O12 in [2,4] on one, O21 in [0,4] on two.
    assert_eq!(model.variables.len(), 3 * 2 + 3 + 5 * 2);
    let dump = model.bqm.dump();
    let path = golden("toy1_tmax5.bqm");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &dump).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert_eq!(dump, expected);
}

#[test]
fn every_sampler_yields_feasible_schedules() {
    let inst = parse_instance(SMALL).unwrap();
    let mut cfg_small = SamplerConfig::default();
    cfg_small.exact.max_variables = 24;
    for kind in [SamplerKind::Sa, SamplerKind::Tabu, SamplerKind::Csa, SamplerKind::BranchBound] {
        let sampler = Sampler::new(kind, cfg_small.clone());
        let r = run_iterative(&inst, &config(2, 2), &sampler, 11).unwrap();
        assert!(check_feasible(&r.schedule, &inst).is_empty(), "{kind}");
        assert!(r.trace.iter().all(|t| t.feasible));
        let obj = evaluate(&r.schedule, &inst).unwrap();
        assert!(obj.makespan >= 6, "{kind}: every job needs at least 6 on its own path or machine");
        assert!(obj.priority > 0.0 && obj.priority <= inst.num_jobs() as f64);
    }
}

#[test]
fn exact_sampler_handles_single_operation_loops() {
    let inst = parse_instance(TOY1_TEXT).unwrap();
    let sampler = Sampler::new(SamplerKind::Exact, SamplerConfig::default());
    let r = run_iterative(&inst, &config(1, 1), &sampler, 0).unwrap();
    assert_eq!(r.trace.len(), 3);
    assert!(check_feasible(&r.schedule, &inst).is_empty());
}

#[test]
fn runs_are_reproducible() {
    let inst: Instance = parse_instance(SMALL).unwrap();
    let sampler = Sampler::new(SamplerKind::Csa, SamplerConfig::default());
    let a = run_iterative(&inst, &config(2, 3), &sampler, 99).unwrap();
    let b = run_iterative(&inst, &config(2, 3), &sampler, 99).unwrap();
    assert_eq!(a.schedule, b.schedule);
    assert_eq!(a.trace, b.trace);
}

#[test]
fn qasa_without_backend_is_reported() {
    let inst = parse_instance(TOY1_TEXT).unwrap();
    let sampler = Sampler::new(SamplerKind::Qasa, SamplerConfig::default());
    let err = run_iterative(&inst, &config(2, 2), &sampler, 0).unwrap_err();
    assert!(matches!(err, DecomposeError::Sampler(_)), "{err}");
}

#[test]
fn invalid_configs_are_rejected() {
    let inst = parse_instance(TOY1_TEXT).unwrap();
    let sampler = Sampler::new(SamplerKind::Sa, SamplerConfig::default());
    let mut cfg = config(0, 1);
    assert!(matches!(run_iterative(&inst, &cfg, &sampler, 0), Err(DecomposeError::InvalidConfig(_))));
    cfg = config(1, 1);
    cfg.params.delta = 0.0;
    assert!(run_iterative(&inst, &cfg, &sampler, 0).is_err());
    cfg = config(1, 1);
    cfg.weights = BottleneckWeights { alpha_l: 0.0, beta_l: 0.0, gamma_l: 0.0 };
    assert!(matches!(run_iterative(&inst, &cfg, &sampler, 0), Err(DecomposeError::InvalidWeights(_))));
}
