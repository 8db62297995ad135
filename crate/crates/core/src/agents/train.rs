use super::{AgentError, Policy};
use crate::env::{Environment, VecEnv};
use crate::seed::child_seed;

/// Learning curve of one training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainOutcome {
    /// Undiscounted return of every completed episode, in completion order.
    pub episode_returns: Vec<f64>,
    pub losses: Vec<f64>,
    pub steps: usize,
}

/// Runs `steps` interaction steps (act, step, observe, learn). Episode `k`
/// resets with `child_seed(seed, k)` and the policy's exploration stream is
/// re-keyed from `seed`, so a run is a pure function of its inputs.
pub fn train_agent<P, E>(policy: &mut P, env: &mut E, steps: usize, seed: u64) -> Result<TrainOutcome, AgentError>
where
    P: Policy + ?Sized,
    E: Environment + ?Sized,
{
    let mut out = TrainOutcome::default();
    if steps == 0 {
        return Ok(out);
    }
    policy.reseed(seed);
    let mut episode = 0u64;
    let mut obs = env.reset(child_seed(seed, episode));
    policy.begin_episode();
    let mut ep_return = 0.0;
    for _ in 0..steps {
        let action = policy.act(&obs, true);
        let res = env.step(&action)?;
        policy.observe(&obs.vector, &action, res.reward, &res.obs.vector, res.done);
        if let Some(loss) = policy.learn()? {
            out.losses.push(loss);
        }
        ep_return += res.reward;
        out.steps += 1;
        if res.done {
            out.episode_returns.push(ep_return);
            ep_return = 0.0;
            episode += 1;
            obs = env.reset(child_seed(seed, episode));
            policy.begin_episode();
        } else {
            obs = res.obs;
        }
    }
    log::debug!("trained {} steps over {} episodes", out.steps, out.episode_returns.len());
    Ok(out)
}

/// Vectorized variant: slot `k` starts from `child_seed(seed, k)` and
/// auto-resets. Transitions are fed to the policy in slot order each tick,
/// which suits replay-based learners; `steps` counts ticks.
pub fn train_agent_vec<P, E>(
    policy: &mut P,
    envs: &mut VecEnv<E>,
    steps: usize,
    seed: u64,
) -> Result<TrainOutcome, AgentError>
where
    P: Policy + ?Sized,
    E: Environment,
{
    let mut out = TrainOutcome::default();
    if steps == 0 || envs.is_empty() {
        return Ok(out);
    }
    policy.reseed(seed);
    let seeds: Vec<u64> = (0..envs.len() as u64).map(|k| child_seed(seed, k)).collect();
    let mut obs = envs.vec_reset(&seeds)?;
    let mut returns = vec![0.0; envs.len()];
    for _ in 0..steps {
        let actions: Vec<Vec<f64>> = obs.iter().map(|o| policy.act(o, true)).collect();
        let tick = envs.vec_step(&actions)?;
        for (k, slot) in tick.results.into_iter().enumerate() {
            let r = &slot.result;
            policy.observe(&obs[k].vector, &actions[k], r.reward, &r.obs.vector, r.done);
            if let Some(loss) = policy.learn()? {
                out.losses.push(loss);
            }
            returns[k] += r.reward;
            out.steps += 1;
            if r.done {
                out.episode_returns.push(returns[k]);
                returns[k] = 0.0;
            }
            obs[k] = slot.reset_obs.unwrap_or(slot.result.obs);
        }
    }
    Ok(out)
}
