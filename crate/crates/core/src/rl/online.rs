use crate::compose::{ActMode, Agent};
use crate::envs::{make_env, EnvSpec};
use crate::error::{Error, Result};
use crate::metrics::{EvalPoint, RunRecord, RunStatus};
use crate::replay::Transition;
use crate::rng::derive_seed;

const EVAL_STREAM: u64 = 0x4556_414c;
const ENV_STREAM: u64 = 0x454e_5653;

/// A run that stopped early, with everything recorded up to the failure.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub record: RunRecord,
}

/// Success rate and mean undiscounted return of mean-action rollouts on a
/// fresh environment. The seeds are the same at every evaluation of a run.
pub fn evaluate(agent: &mut Agent, env: &EnvSpec, episodes: usize, seed: u64) -> Result<(f64, f64)> {
    let mut e = make_env(env)?;
    let (mut successes, mut total) = (0usize, 0.0);
    for k in 0..episodes {
        let mut s = e.reset(derive_seed(seed ^ EVAL_STREAM, k as u64));
        let mut lambda = agent.initial_lambda();
        loop {
            let d = agent.act(&s, lambda, ActMode::Eval)?;
            let r = e.step(&d.action)?;
            total += r.reward;
            lambda = d.lambda.unwrap_or(lambda);
            if r.episode_over() {
                successes += usize::from(r.success);
                break;
            }
            s = r.next_state;
        }
    }
    Ok((successes as f64 / episodes as f64, total / episodes as f64))
}

fn config_snapshot(agent: &Agent) -> Vec<(String, String)> {
    let mut out = Vec::new();
    if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(&agent.train.hyper) {
        for (k, v) in map {
            out.push((format!("hyper.{k}"), v.to_string()));
        }
    }
    out
}

fn at_step(e: Error, step: u64) -> Error {
    match e {
        Error::Numerical { term, value } => Error::Numerical { term: format!("{term} at env step {step}"), value },
        other => other,
    }
}

/// Collects `budget` environment steps with interleaved gradient updates,
/// evaluating at step 0, every `eval_every` steps and at the budget.
pub fn train_online(agent: &mut Agent, env: &EnvSpec, budget: u64, seed: u64) -> std::result::Result<RunRecord, TrainFailure> {
    let mut record = RunRecord::new(&env.name, &agent.spec.to_string(), seed, budget);
    record.config = config_snapshot(agent);
    match run(agent, env, budget, seed, &mut record) {
        Ok(()) => Ok(record),
        Err(error) => {
            record.status = RunStatus::Failed(error.to_string());
            Err(TrainFailure { error, record })
        }
    }
}

fn run(agent: &mut Agent, env: &EnvSpec, budget: u64, seed: u64, record: &mut RunRecord) -> Result<()> {
    let hyper = agent.train.hyper.clone();
    let eval_point = |agent: &mut Agent, step: u64, record: &mut RunRecord| -> Result<()> {
        let (success_rate, mean_return) = evaluate(agent, env, hyper.eval_episodes, seed).map_err(|e| at_step(e, step))?;
        record.push(EvalPoint { env_step: step, success_rate, mean_return })
    };
    eval_point(agent, 0, record)?;
    let mut e = make_env(env)?;
    let mut episode = 0u64;
    let mut s = e.reset(derive_seed(seed ^ ENV_STREAM, episode));
    let mut lambda = agent.initial_lambda();
    let mut t = 0usize;
    for step in 1..=budget {
        let d = agent.act(&s, lambda, ActMode::Explore).map_err(|e| at_step(e, step))?;
        let r = e.step(&d.action).map_err(|e| at_step(e, step))?;
        lambda = d.lambda.unwrap_or(lambda);
        let next_agent = agent.agent_state(&r.next_state, lambda);
        let action = d.action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
        let tr = Transition { state: d.agent_state, action, reward: r.reward, next_state: next_agent, terminal: r.terminal, episode_id: episode, t };
        agent.record(tr).map_err(|e| at_step(e, step))?;
        t += 1;
        if r.episode_over() {
            agent.end_episode();
            episode += 1;
            s = e.reset(derive_seed(seed ^ ENV_STREAM, episode));
            lambda = agent.initial_lambda();
            t = 0;
        } else {
            s = r.next_state;
        }
        agent.update().map_err(|e| at_step(e, step))?;
        if step % hyper.eval_every == 0 || step == budget {
            eval_point(agent, step, record)?;
        }
    }
    Ok(())
}
