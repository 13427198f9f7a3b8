//! Finite-difference checks of the analytic gradients.

use rand::Rng;
use smg_core::game::{env_rng, SmgRng};
use smg_core::learners::nn::log_softmax;
use smg_core::learners::{
    actor_loss_and_grad, critic_loss_and_grad, dqn_loss_and_grad, Activation, Experience, Mlp,
};

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
pub const INSTANCES: u64 = 50;

pub fn random_net(rng: &mut SmgRng, out: usize, act: Activation) -> Mlp {
    let input = rng.random_range(1..5);
    let hidden: Vec<usize> = (0..rng.random_range(1..3)).map(|_| rng.random_range(1..6)).collect();
    Mlp::with_hidden(input, &hidden, out, act, rng)
}

pub fn random_vec(rng: &mut SmgRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()
}

/// Compares `grad` with central differences of `loss` around `params`.
/// Relative error uses `max(|a|, |b|, 1e-3)` so near-zero entries are
/// compared absolutely.
fn check(params: &[f64], grad: &[f64], loss: impl Fn(&[f64]) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut p = params.to_vec();
    for k in 0..p.len() {
        let orig = p[k];
        p[k] = orig + STEP;
        let up = loss(&p);
        p[k] = orig - STEP;
        let down = loss(&p);
        p[k] = orig;
        let fd = (up - down) / (2.0 * STEP);
        let denom = fd.abs().max(grad[k].abs()).max(1e-3);
        worst = worst.max((fd - grad[k]).abs() / denom);
    }
    worst
}

fn with_params(net: &Mlp, p: &[f64]) -> Mlp {
    Mlp::from_params(net.sizes().to_vec(), net.activations().to_vec(), p.to_vec()).unwrap()
}

pub fn mlp_backward_worst(seed: u64) -> f64 {
    let mut rng = env_rng(seed);
    let act = [Activation::Elu, Activation::Tanh, Activation::Identity][(seed % 3) as usize];
    let out = rng.random_range(1..4);
    let net = random_net(&mut rng, out, act);
    let x = random_vec(&mut rng, net.input_len());
    let up = random_vec(&mut rng, net.output_len());
    let cache = net.forward_cached(&x).unwrap();
    let mut grad = vec![0.0; net.n_params()];
    net.backward(&cache, &up, &mut grad).unwrap();
    check(net.params(), &grad, |p| {
        let y = with_params(&net, p).forward(&x).unwrap();
        y.iter().zip(&up).map(|(a, b)| a * b).sum()
    })
}

pub fn dqn_worst(seed: u64) -> f64 {
    let mut rng = env_rng(1000 + seed);
    let n_actions = rng.random_range(2..5);
    let online = random_net(&mut rng, n_actions, Activation::Elu);
    let target = Mlp::with_hidden(online.input_len(), &online.sizes()[1..online.sizes().len() - 1], n_actions, Activation::Elu, &mut rng);
    let batch: Vec<Experience> = (0..4)
        .map(|_| Experience {
            obs: random_vec(&mut rng, online.input_len()),
            action: rng.random_range(0..n_actions),
            reward: rng.random_range(-3.0..3.0),
            next_obs: random_vec(&mut rng, online.input_len()),
            done: rng.random_bool(0.3),
        })
        .collect();
    let refs: Vec<&Experience> = batch.iter().collect();
    let (_, grad) = dqn_loss_and_grad(&online, &target, &refs, 0.9).unwrap();
    check(online.params(), &grad, |p| dqn_loss_and_grad(&with_params(&online, p), &target, &refs, 0.9).unwrap().0)
}

pub fn ppo_actor_worst(seed: u64) -> f64 {
    let mut rng = env_rng(2000 + seed);
    let n_actions = rng.random_range(2..5);
    let actor = random_net(&mut rng, n_actions, Activation::Tanh);
    let old = with_params(
        &actor,
        &actor.params().iter().map(|p| p + rng.random_range(-0.3..0.3)).collect::<Vec<_>>(),
    );
    let obs: Vec<Vec<f64>> = (0..5).map(|_| random_vec(&mut rng, actor.input_len())).collect();
    let actions: Vec<usize> = (0..5).map(|_| rng.random_range(0..n_actions)).collect();
    let old_lp: Vec<f64> = obs
        .iter()
        .zip(&actions)
        .map(|(o, &a)| log_softmax(&old.forward(o).unwrap())[a])
        .collect();
    let adv = random_vec(&mut rng, 5);
    let (_, grad, _) = actor_loss_and_grad(&actor, &obs, &actions, &old_lp, &adv, 0.2, 0.01).unwrap();
    check(actor.params(), &grad, |p| {
        actor_loss_and_grad(&with_params(&actor, p), &obs, &actions, &old_lp, &adv, 0.2, 0.01)
            .unwrap()
            .0
    })
}

pub fn entropy_worst(seed: u64) -> f64 {
    let mut rng = env_rng(3000 + seed);
    let n_actions = rng.random_range(2..6);
    let actor = random_net(&mut rng, n_actions, Activation::Tanh);
    let obs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, actor.input_len())).collect();
    let actions = vec![0; 3];
    let zeros = vec![0.0; 3];
    // zero advantages isolate the entropy term
    let (_, grad, _) = actor_loss_and_grad(&actor, &obs, &actions, &zeros, &zeros, 0.2, 1.0).unwrap();
    check(actor.params(), &grad, |p| {
        actor_loss_and_grad(&with_params(&actor, p), &obs, &actions, &zeros, &zeros, 0.2, 1.0)
            .unwrap()
            .0
    })
}

pub fn critic_worst(seed: u64) -> f64 {
    let mut rng = env_rng(4000 + seed);
    let critic = random_net(&mut rng, 1, Activation::Tanh);
    let obs: Vec<Vec<f64>> = (0..5).map(|_| random_vec(&mut rng, critic.input_len())).collect();
    let returns = random_vec(&mut rng, 5);
    let (_, grad) = critic_loss_and_grad(&critic, &obs, &returns, 1.0).unwrap();
    check(critic.params(), &grad, |p| {
        critic_loss_and_grad(&with_params(&critic, p), &obs, &returns, 1.0).unwrap().0
    })
}


fn two_state_mdp(s: u64, a: usize) -> (f64, u64) {
    let next = if a == 0 { s } else { 1 - s };
    let r = if s == 1 && a == 0 { 1.0 } else { 0.0 };
    (r, next)
}

/// Largest gap between swept tabular Q-updates (alpha = 1) and value
/// iteration on a deterministic two-state MDP.
pub fn tabular_value_iteration_gap(gamma: f64) -> f64 {
    use smg_core::learners::{q_update, QTable};
    let mut vi = [[0.0f64; 2]; 2];
    for _ in 0..10_000 {
        let mut next = vi;
        for s in 0..2u64 {
            for a in 0..2 {
                let (r, n) = two_state_mdp(s, a);
                next[s as usize][a] = r + gamma * vi[n as usize][0].max(vi[n as usize][1]);
            }
        }
        vi = next;
    }
    let mut t = QTable::new(2);
    for _ in 0..400 {
        for s in 0..2u64 {
            for a in 0..2 {
                let (r, n) = two_state_mdp(s, a);
                q_update(&mut t, s, a, r, Some(n), 1.0, gamma);
            }
        }
    }
    let mut worst: f64 = 0.0;
    for s in 0..2u64 {
        for a in 0..2 {
            worst = worst.max((t.get(s, a) - vi[s as usize][a]).abs());
        }
    }
    worst
}
