//! Learning-side oracles: scalar MLP recomputation, finite differences,
//! value iteration and the uptrend trading fixture.

use std::sync::Arc;

use marketforge::agents::{
    train_agent, Action, ActionSpace, Activation, DqnAgent, DqnConfig, Mlp, Policy, RandomPolicy, Transition,
};
use marketforge::env::{EnvConfig, Environment, FeatureNormalizer, TradingEnv};
use marketforge::marketdata::{align, generate_gbm, GbmParams};
use marketforge::seed::stream_rng;
use rand::Rng;

/// Per-neuron scalar recomputation of a forward pass.
pub fn scalar_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let last = net.layers().len() - 1;
    for (i, l) in net.layers().iter().enumerate() {
        let mut next = Vec::new();
        for o in 0..l.n_out {
            let mut z = l.bias[o];
            for j in 0..l.n_in {
                z += l.weights[o * l.n_in + j] * a[j];
            }
            next.push(if i == last {
                z
            } else {
                match net.activation() {
                    Activation::Tanh => z.tanh(),
                    Activation::Relu => z.max(0.0),
                }
            });
        }
        a = next;
    }
    a
}

pub fn random_net(sizes: &[usize], act: Activation, seed: u64, scale: f64) -> Mlp {
    let mut rng = stream_rng(seed, 9);
    let mut net = Mlp::zeros(sizes, act).unwrap();
    let p: Vec<f64> = (0..net.n_params()).map(|_| rng.random_range(-scale..scale)).collect();
    net.set_params(&p).unwrap();
    net
}

pub fn tabular_dqn(n_states: usize, n_actions: usize, gamma: f64, lr: f64, batch: usize, seed: u64) -> DqnAgent {
    let cfg = DqnConfig {
        gamma,
        lr,
        hidden: vec![],
        batch_size: batch,
        target_sync_every: 1,
        buffer_capacity: 10_000,
        grad_clip: 1e9,
        ..DqnConfig::default()
    };
    let mut agent = DqnAgent::new(n_states, ActionSpace::Discrete(n_actions), cfg, seed).unwrap();
    let p = vec![0.0; agent.network().n_params()];
    agent.network_mut().set_params(&p).unwrap();
    agent.sync_target();
    agent
}

pub fn one_hot(i: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Value iteration over a deterministic or stochastic tabular MDP given as
/// `p[s][a] = [(prob, next, reward)]`.
pub fn value_iteration(p: &[Vec<Vec<(f64, usize, f64)>>], gamma: f64) -> Vec<Vec<f64>> {
    let ns = p.len();
    let na = p[0].len();
    let mut q = vec![vec![0.0; na]; ns];
    for _ in 0..10_000 {
        let v: Vec<f64> = q.iter().map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        let mut delta: f64 = 0.0;
        for s in 0..ns {
            for a in 0..na {
                let new: f64 = p[s][a].iter().map(|(pr, s2, r)| pr * (r + gamma * v[*s2])).sum();
                delta = delta.max((new - q[s][a]).abs());
                q[s][a] = new;
            }
        }
        if delta < 1e-14 {
            break;
        }
    }
    q
}

/// Single asset with a deterministic exponential uptrend (mu 0.5, sigma 0).
pub fn uptrend_env(bars: usize) -> TradingEnv {
    let params = GbmParams::uncorrelated(1, 100.0, 0.5, 0.0);
    let raw = generate_gbm(&params, &["UP".to_string()], bars, 1).unwrap();
    let ds = align(&[raw]).unwrap();
    let norm = FeatureNormalizer::fit(&ds);
    let cfg = EnvConfig { hmax: 1000, ..EnvConfig::default() };
    TradingEnv::new(Arc::new(ds), cfg).unwrap().with_normalizer(norm).unwrap()
}

pub fn greedy_final_value<P: Policy + ?Sized>(policy: &mut P, env: &mut TradingEnv) -> f64 {
    let mut obs = env.reset(0);
    loop {
        let a = policy.act(&obs, false);
        let r = env.step(&a).unwrap();
        if r.done {
            return env.value();
        }
        obs = r.obs;
    }
}

pub fn uptrend_dqn(seed: u64) -> DqnAgent {
    let env = uptrend_env(2);
    let cfg = DqnConfig {
        gamma: 0.9,
        lr: 1e-3,
        epsilon_decay_steps: 1500,
        batch_size: 32,
        target_sync_every: 100,
        hidden: vec![32],
        ..DqnConfig::default()
    };
    DqnAgent::new(env.obs_dim(), ActionSpace::Grid { n_assets: 1, levels: vec![-1.0, 0.0, 1.0] }, cfg, seed).unwrap()
}

/// Worst relative error between analytic parameter gradients of
/// `sum(up * net(x))` and central finite differences.
pub fn finite_difference_error(sizes: &[usize], act: Activation, seed: u64) -> f64 {
    let mut net = random_net(sizes, act, 100 + seed, 0.1);
    let mut rng = stream_rng(7 + seed, 0);
    let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
    let up: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect();
    net.forward(&x).unwrap();
    let analytic = net.backward(&up).unwrap().flat();
    let base = net.params();
    let h = 1e-5;
    let objective = |p: &[f64]| {
        let mut n = net.clone();
        n.set_params(p).unwrap();
        n.predict(&x).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum::<f64>()
    };
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += h;
        let mut minus = base.clone();
        minus[i] -= h;
        let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
        let denom = fd.abs().max(analytic[i].abs()).max(1e-7);
        worst = worst.max((fd - analytic[i]).abs() / denom);
    }
    worst
}

/// Trains a tabular DQN on every transition of a random deterministic
/// 5-state, 3-action MDP and returns `(sup |Q - Q*|, greedy policy optimal)`.
pub fn random_mdp_q_error(seed: u64) -> (f64, bool) {
    let (ns, na, gamma) = (5, 3, 0.8);
    let mut rng = stream_rng(seed, 0);
    let p: Vec<Vec<Vec<(f64, usize, f64)>>> = (0..ns)
        .map(|_| (0..na).map(|_| vec![(1.0, rng.random_range(0..ns), rng.random_range(-1.0..1.0))]).collect())
        .collect();
    let q_star = value_iteration(&p, gamma);
    let mut agent = tabular_dqn(ns, na, gamma, 0.5, ns * na, seed + 1);
    for s in 0..ns {
        for a in 0..na {
            let (_, s2, r) = p[s][a][0];
            agent.push(Transition {
                state: one_hot(s, ns),
                action: Action::Discrete(vec![a]),
                reward: r,
                next_state: one_hot(s2, ns),
                done: false,
            });
        }
    }
    for _ in 0..4000 {
        agent.learn_batch().unwrap();
    }
    let argmax = |q: &[f64]| (0..q.len()).fold(0, |b, i| if q[i] > q[b] { i } else { b });
    let mut sup: f64 = 0.0;
    let mut optimal = true;
    for s in 0..ns {
        let q = agent.q_values(&one_hot(s, ns)).unwrap();
        for a in 0..na {
            sup = sup.max((q[a] - q_star[s][a]).abs());
        }
        let best = q_star[s][argmax(&q_star[s])];
        optimal &= q_star[s][argmax(&q)] >= best - 1e-9;
    }
    (sup, optimal)
}

/// Final values `(dqn, random, initial capital)` after training a DQN for
/// `steps` on the uptrend fixture.
pub fn uptrend_dqn_vs_random(bars: usize, steps: usize, seed: u64) -> (f64, f64, f64) {
    let mut env = uptrend_env(bars);
    let capital = env.config().initial_capital;
    let mut agent = uptrend_dqn(seed);
    train_agent(&mut agent, &mut env, steps, seed).unwrap();
    let v_dqn = greedy_final_value(&mut agent, &mut env);
    let mut random = RandomPolicy::new(ActionSpace::Grid { n_assets: 1, levels: vec![-1.0, 0.0, 1.0] }, seed);
    let v_rand = greedy_final_value(&mut random, &mut env);
    (v_dqn, v_rand, capital)
}
