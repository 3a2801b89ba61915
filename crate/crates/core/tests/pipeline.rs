mod common;

use common::rng;
use demorl_core::demos::{collect_episodes, filter_episodes, train_expert, Collect};
use demorl_core::envs::EnvSpec;
use demorl_core::replay::TrajectoryDataset;
use demorl_core::rl::{q_target, Actor, BaseAlgo, CriticEnsemble, Hyperparams, PolicyKind};
use rand::Rng;

#[test]
fn untrained_expert_has_empty_log() {
    let env = EnvSpec::named("point-reach").unwrap();
    let run = train_expert(&env, 0, &Hyperparams::desk(), 0).unwrap();
    assert!(run.log.episodes.is_empty());
    assert_eq!(run.record.points.len(), 1);
}

#[test]
fn expert_learns_point_reach_and_filters_to_a_dataset() {
    let env = EnvSpec::named("point-reach").unwrap();
    let hyper = Hyperparams::desk();
    let run = train_expert(&env, 50_000, &hyper, 0).unwrap();
    let last = run.record.final_success().unwrap();
    assert!(last >= 0.9, "final success {last}");
    // every completed training episode is logged
    assert_eq!(run.log.num_transitions(), run.log.episodes.len() * env.horizon);
    assert_eq!(run.log.episodes.len() as u64, 50_000 / env.horizon as u64);

    let kept = filter_episodes(&run.log, 0.9).unwrap();
    kept.validate().unwrap();
    assert!(!kept.episodes.is_empty() && kept.episodes.len() < run.log.episodes.len());
    let ids: Vec<u64> = kept.episodes.iter().map(|e| e.id).collect();
    assert!(ids.windows(2).all(|w| w[0] < w[1]));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("expert.txt");
    kept.save(&path).unwrap();
    let back = TrajectoryDataset::load(&path).unwrap();
    assert_eq!(back, kept);
    let lines = std::fs::read_to_string(&path).unwrap().lines().count();
    assert_eq!(lines, 1 + kept.num_transitions());
}

#[test]
fn one_step_target_matches_tabular_bellman() {
    let env = EnvSpec::named("chain3").unwrap();
    let hyper = Hyperparams { nstep: 1, td3_target_noise: 0.0, ..Hyperparams::desk() };
    let mut r = rng(5);
    let mut explore = rng(6);
    let mut policy = |_: &[f64]| Ok(vec![explore.random_range(-1.0..1.0)]);
    let data = collect_episodes(&env, &mut policy, Collect::Episodes(3), hyper.gamma, 1).unwrap();
    let buffer = data.dataset.to_buffer(1000).unwrap();
    let actor = Actor::new(3, 1, &[8], PolicyKind::Deterministic, &mut r).unwrap();
    let critics = CriticEnsemble::new(2, 3, 1, &[8], 1e-3, &mut r).unwrap();
    let batch = buffer.sample_nstep(64, 1, hyper.gamma, &mut r).unwrap();
    let y = q_target(&batch, &critics, BaseAlgo::Td3, &actor, &actor, &hyper, &mut r).unwrap();
    for i in 0..batch.len() {
        let s2 = batch.next_states.row(i).to_vec();
        let a2 = actor.mean_action(&s2).unwrap();
        let x = [s2, a2].concat();
        let q = critics.target.iter().map(|c| c.forward(&x).unwrap()[0]).fold(f64::INFINITY, f64::min);
        let oracle = batch.returns[i] + hyper.gamma * q;
        assert!((y[i] - oracle).abs() <= 1e-9, "row {i}: {} vs {oracle}", y[i]);
    }
}
