mod common;

use common::rng;
use demorl_core::compose::{compose, prefill_dataset, AgentSpec, ActMode, Mixer, OfflineInputs};
use demorl_core::demos::scripted_demos;
use demorl_core::envs::EnvSpec;
use demorl_core::metrics::RunRecord;
use demorl_core::pretrain::{pretrain, OfflineCheckpoint, PretrainMethod, PretrainSpec};
use demorl_core::replay::TrajectoryDataset;
use demorl_core::rl::{evaluate, train_online, BaseAlgo, Hyperparams, PolicyKind};
use rand::Rng;

fn small() -> Hyperparams {
    Hyperparams {
        batch_size: 32,
        hidden_dim: 16,
        eval_episodes: 3,
        eval_every: 200,
        warmup_steps: 100,
        pretrain_steps: 50,
        resrl_burn_in: 300,
        ..Hyperparams::desk()
    }
}

fn reach() -> EnvSpec {
    EnvSpec::named("point-reach").unwrap()
}

fn demos(episodes: usize) -> TrajectoryDataset {
    scripted_demos(&reach(), episodes, 0.1, 0.8, 7).unwrap().dataset
}

fn checkpoint(method: PretrainMethod, critics: usize, hyper: &Hyperparams, ds: &TrajectoryDataset) -> OfflineCheckpoint {
    pretrain(&PretrainSpec::new(method, PolicyKind::Stochastic, hyper, critics, 3), ds).unwrap()
}

fn run(spec: &str, budget: u64, hyper: &Hyperparams, ck: Option<&OfflineCheckpoint>, ds: &TrajectoryDataset) -> (RunRecord, demorl_core::compose::Agent) {
    let spec: AgentSpec = spec.parse().unwrap();
    let mut agent = compose(&spec, &reach(), hyper, OfflineInputs { dataset: Some(ds), checkpoint: ck }, 5).unwrap();
    let rec = train_online(&mut agent, &reach(), budget, 5).map_err(|f| f.error).unwrap();
    (rec, agent)
}

#[test]
fn whole_lattice_composes_and_acts() {
    let hyper = small();
    let ds = demos(4);
    let env = reach();
    let mut cks = std::collections::HashMap::new();
    for method in PretrainMethod::ALL {
        for n in [hyper.num_critics, hyper.num_critics_prefill] {
            cks.insert((method, n), checkpoint(method, n, &hyper, &ds));
        }
    }
    let bc = &cks[&(PretrainMethod::Bc, hyper.num_critics)];
    let mut count = 0;
    for base in [BaseAlgo::Sac, BaseAlgo::Td3] {
        for spec in AgentSpec::lattice(base) {
            let n = if spec.prefill { hyper.num_critics_prefill } else { hyper.num_critics };
            let ck = spec.init.map(|m| &cks[&(m, n)]).unwrap_or(bc);
            let mut agent = compose(&spec, &env, &hyper, OfflineInputs { dataset: Some(&ds), checkpoint: Some(ck) }, 1)
                .unwrap_or_else(|e| panic!("{spec}: {e}"));
            let s = vec![0.1; env.state_dim];
            let d = agent.act(&s, agent.initial_lambda(), ActMode::Explore).unwrap();
            assert!(d.action.iter().all(|a| (-1.0..=1.0).contains(a)), "{spec}: {:?}", d.action);
            count += 1;
        }
    }
    assert_eq!(count, 2 * AgentSpec::lattice(BaseAlgo::Sac).len());
}

#[test]
fn budget_zero_gives_single_point() {
    let (rec, _) = run("sac", 0, &small(), None, &demos(2));
    assert_eq!(rec.points.len(), 1);
    assert_eq!(rec.points[0].env_step, 0);
    assert!(rec.is_complete());
}

#[test]
fn prefill_runs_five_updates_per_step() {
    let hyper = small();
    let ds = demos(4);
    let ck = checkpoint(PretrainMethod::Bc, hyper.num_critics_prefill, &hyper, &ds);
    let (_, agent) = run("sac+demos+prefill+bc", 300, &hyper, Some(&ck), &ds);
    assert_eq!(agent.train.env_steps, 300);
    assert_eq!(agent.train.grad_steps, 5 * 300);
    assert_eq!(agent.train.critics.len(), 5);

    // without an informed policy the warmup steps come first
    let (_, agent) = run("sac+demos+prefill", 300, &hyper, None, &ds);
    assert_eq!(agent.train.grad_steps, 5 * (300 - hyper.warmup_steps));
}

#[test]
fn td3_actor_updates_are_delayed() {
    let hyper = small();
    let (_, agent) = run("td3", 400, &hyper, None, &demos(2));
    let critic = agent.train.grad_steps;
    assert_eq!(critic, 400 - hyper.warmup_steps);
    assert_eq!(agent.train.actor_steps, critic / 2);
}

#[test]
fn evaluation_never_touches_the_buffer() {
    let hyper = small();
    let ds = demos(2);
    let (_, mut agent) = run("sac", 250, &hyper, None, &ds);
    let before: Vec<_> = agent.online.iter().cloned().collect();
    let steps = agent.train.env_steps;
    evaluate(&mut agent, &reach(), 4, 99).unwrap();
    assert_eq!(agent.online.iter().cloned().collect::<Vec<_>>(), before);
    assert_eq!(agent.train.env_steps, steps);
}

#[test]
fn residual_burn_in_freezes_actor() {
    let hyper = small();
    let ds = demos(4);
    let ck = checkpoint(PretrainMethod::Bc, hyper.num_critics, &hyper, &ds);
    let (_, agent) = run("sac+resrl", 250, &hyper, Some(&ck), &ds);
    assert!(agent.train.grad_steps > 0);
    assert_eq!(agent.train.actor_steps, 0);
    let (_, agent) = run("sac+resrl", 400, &hyper, Some(&ck), &ds);
    assert!(agent.train.actor_steps > 0);
}

#[test]
fn ibrl_with_pretrained_critics_selects_by_them() {
    let hyper = small();
    let ds = demos(4);
    let ck = checkpoint(PretrainMethod::CqlRho, hyper.num_critics, &hyper, &ds);
    let spec: AgentSpec = "sac+cqlrho+ibrl".parse().unwrap();
    let agent = compose(&spec, &reach(), &hyper, OfflineInputs { dataset: None, checkpoint: Some(&ck) }, 2).unwrap();
    let loaded = ck.critics.as_ref().unwrap();
    for (k, c) in agent.train.critics.online.iter().enumerate() {
        assert_eq!(c.params_flat(), loaded[k].params_flat());
    }
    assert!(matches!(agent.mixer, Mixer::Ibrl { .. }));
}

#[test]
fn all_off_reproduces_plain_baseline() {
    let hyper = small();
    let ds = demos(2);
    let (a, _) = run("sac", 400, &hyper, None, &ds);
    let spec = AgentSpec::baseline(BaseAlgo::Sac);
    let mut agent = compose(&spec, &reach(), &hyper, OfflineInputs::default(), 5).unwrap();
    let b = train_online(&mut agent, &reach(), 400, 5).map_err(|f| f.error).unwrap();
    assert_eq!(a.to_text(), b.to_text());
}

#[test]
fn rollouts_of_a_cloned_expert_succeed() {
    let hyper = Hyperparams::desk();
    let ds = demos(100);
    let ck = pretrain(&PretrainSpec::new(PretrainMethod::Bc, PolicyKind::Stochastic, &hyper, 2, 4), &ds).unwrap();
    let spec: AgentSpec = "sac+rollouts+prefill+bc".parse().unwrap();
    let out = prefill_dataset(&spec, &reach(), Some(&ds), Some(&ck.actor), 0.8, 6).unwrap().unwrap();
    assert!(out.num_transitions() >= ds.num_transitions());
    let reached = out
        .episodes
        .iter()
        .filter(|e| e.transitions.iter().any(|t| reach_success(&t.next_state)))
        .count();
    let frac = reached as f64 / out.episodes.len() as f64;
    assert!(frac >= 0.9, "success fraction {frac}");
}

fn reach_success(state: &[f64]) -> bool {
    let goal = demorl_core::envs::PointReach::goal();
    let d = ((state[0] - goal[0]).powi(2) + (state[1] - goal[1]).powi(2)).sqrt();
    d <= reach().goal_tolerance
}

#[test]
fn mixed_actions_stay_in_bounds() {
    let hyper = small();
    let ds = demos(4);
    let ck = checkpoint(PretrainMethod::Bc, hyper.num_critics, &hyper, &ds);
    let mut r = rng(8);
    for spec in ["sac+ibrl", "sac+cheq", "sac+resrl", "td3+ibrl", "td3+cheq", "td3+resrl"] {
        let spec: AgentSpec = spec.parse().unwrap();
        let mut agent = compose(&spec, &reach(), &hyper, OfflineInputs { dataset: None, checkpoint: Some(&ck) }, 9).unwrap();
        for _ in 0..300 {
            let s: Vec<f64> = (0..reach().state_dim).map(|_| r.random_range(-3.0..3.0)).collect();
            let d = agent.act(&s, r.random_range(0.2..1.0), ActMode::Explore).unwrap();
            assert!(d.action.iter().all(|a| (-1.0..=1.0).contains(a)), "{spec}");
            if let Some(l) = d.lambda {
                assert!((0.2..=1.0).contains(&l));
            }
        }
    }
}
