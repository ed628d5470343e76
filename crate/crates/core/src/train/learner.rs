//! Learner state and the per-iteration updates.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nn::{adam_step, gae, AdamState, Checkpoint, DenseNet};
use crate::sim::{OBS_LEN, PHASES};

use super::config::{Algorithm, TrainConfig};
use super::features::Features;
use super::loss::{baseline_penalty_reward, policy_gradient};
use super::rollout::Episode;
use super::TrainError;

/// Sampled episodes flattened into network-ready arrays. Per-agent rows are
/// ordered timestep-major: row `t * agents + i`.
#[derive(Clone, Debug)]
pub struct TrainingBatch {
    pub agents: usize,
    pub states: Array2<f64>,
    pub next_states: Array2<f64>,
    pub actor_inputs: Array2<f64>,
    /// Encoded local observations without agent ids, current and next.
    pub local_inputs: Array2<f64>,
    pub next_local_inputs: Array2<f64>,
    /// Global state followed by the joint-action one-hot.
    pub estimator_inputs: Array2<f64>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub costs: Vec<f64>,
    pub dones: Vec<bool>,
}

impl TrainingBatch {
    pub fn from_episodes(episodes: &[&Episode], features: &Features) -> Self {
        let agents = features.num_agents;
        let steps: usize = episodes.iter().map(|e| e.len()).sum();
        let rows = steps * agents;
        let mut states = Vec::with_capacity(steps * features.state_len());
        let mut next_states = Vec::with_capacity(steps * features.state_len());
        let mut actor_inputs = Vec::with_capacity(rows * features.actor_input_len());
        let mut local = Vec::with_capacity(rows * OBS_LEN);
        let mut next_local = Vec::with_capacity(rows * OBS_LEN);
        let mut estimator = Vec::with_capacity(steps * features.estimator_input_len());
        let mut actions = Vec::with_capacity(rows);
        let mut old_log_probs = Vec::with_capacity(rows);
        let mut rewards = Vec::with_capacity(steps);
        let mut costs = Vec::with_capacity(steps);
        let mut dones = Vec::with_capacity(steps);
        for t in episodes.iter().flat_map(|e| &e.transitions) {
            features.encode_state(&t.state, &mut states);
            features.encode_state(&t.next_state, &mut next_states);
            features.encode_state(&t.state, &mut estimator);
            features.encode_joint_action(&t.actions, &mut estimator);
            for (i, o) in t.observations.iter().enumerate() {
                features.encode_actor(o.as_slice(), i, &mut actor_inputs);
                features.encode_local(o.as_slice(), &mut local);
            }
            for chunk in t.next_state.chunks(OBS_LEN) {
                features.encode_local(chunk, &mut next_local);
            }
            actions.extend_from_slice(&t.actions);
            old_log_probs.extend_from_slice(&t.log_probs);
            rewards.push(t.reward);
            costs.push(t.cost);
            dones.push(t.done);
        }
        let shape = |n: usize, w: usize, v: Vec<f64>| Array2::from_shape_vec((n, w), v).expect("batch shape");
        TrainingBatch {
            agents,
            states: shape(steps, features.state_len(), states),
            next_states: shape(steps, features.state_len(), next_states),
            actor_inputs: shape(rows, features.actor_input_len(), actor_inputs),
            local_inputs: shape(rows, OBS_LEN, local),
            next_local_inputs: shape(rows, OBS_LEN, next_local),
            estimator_inputs: shape(steps, features.estimator_input_len(), estimator),
            actions,
            old_log_probs,
            rewards,
            costs,
            dones,
        }
    }

    pub fn steps(&self) -> usize {
        self.rewards.len()
    }

    /// Indices of agent `i`'s rows.
    pub fn agent_rows(&self, i: usize) -> Vec<usize> {
        (0..self.steps()).map(|t| t * self.agents + i).collect()
    }
}

fn component_rng(seed: u64, iteration: u64, tag: u64, agent: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ iteration.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(tag << 32 | agent as u64);
    rng
}

const TAG_ACTOR: u64 = 1;
const TAG_REWARD_CRITIC: u64 = 2;
const TAG_COST_CRITIC: u64 = 3;
const TAG_ESTIMATOR: u64 = 4;

/// Row subsets for `epochs` passes of `minibatches` chunks each.
fn minibatch_plan<R: Rng + ?Sized>(rows: usize, minibatches: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..rows).collect();
    if minibatches > 1 {
        order.shuffle(rng);
    }
    let size = rows.div_ceil(minibatches.max(1)).max(1);
    order.chunks(size).map(|c| c.to_vec()).collect()
}

fn normalize(values: &mut [f64]) {
    let n = values.len();
    if n < 2 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt() + 1e-8;
    for v in values.iter_mut() {
        *v = (*v - mean) / std;
    }
}

fn column(net: &DenseNet, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, TrainError> {
    Ok(net.predict(x)?.into_raw_vec_and_offset().0)
}

/// Clipped-surrogate actor update over `epochs` passes. `cost` carries the
/// cost advantages and the multiplier; with `None` this is the plain
/// PPO update. Returns the mean loss of the first pass.
#[allow(clippy::too_many_arguments)]
pub fn actor_update<R: Rng + ?Sized>(
    actor: &mut DenseNet,
    opt: &mut AdamState,
    inputs: ArrayView2<'_, f64>,
    actions: &[usize],
    old_log_probs: &[f64],
    reward_adv: &[f64],
    cost: Option<(&[f64], f64)>,
    config: &TrainConfig,
    agents: usize,
    rng: &mut R,
) -> Result<f64, TrainError> {
    let mut first_loss = None;
    for _ in 0..config.epochs {
        let mut pass_loss = 0.0;
        let plan = minibatch_plan(actions.len(), config.minibatches, rng);
        for idx in &plan {
            let (grads, loss) = if config.minibatches == 1 {
                policy_gradient(
                    actor,
                    inputs,
                    actions,
                    old_log_probs,
                    reward_adv,
                    cost,
                    config.eps_clip,
                    config.entropy_coef,
                    agents,
                )
            } else {
                let x = inputs.select(Axis(0), idx);
                let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
                let a: Vec<usize> = idx.iter().map(|&i| actions[i]).collect();
                let cost_adv = cost.map(|(c, l)| (pick(c), l));
                policy_gradient(
                    actor,
                    x.view(),
                    &a,
                    &pick(old_log_probs),
                    &pick(reward_adv),
                    cost_adv.as_ref().map(|(c, l)| (c.as_slice(), *l)),
                    config.eps_clip,
                    config.entropy_coef,
                    1,
                )
                .map_err(|e| match e {
                    TrainError::NonFiniteRatio { timestep, .. } => {
                        let row = idx[timestep];
                        TrainError::NonFiniteRatio {
                            timestep: row / agents.max(1),
                            agent: row % agents.max(1),
                        }
                    }
                    other => other,
                })
            }?;
            adam_step(actor.params_mut(), &grads, opt, Some(config.grad_norm_clip))?;
            pass_loss += loss * idx.len() as f64;
        }
        first_loss.get_or_insert(pass_loss / actions.len().max(1) as f64);
    }
    Ok(first_loss.unwrap_or(0.0))
}

/// Least-squares regression of `net` onto fixed `targets`, minimizing
/// `scale * mean((net(x) - y)^2)`.
#[allow(clippy::too_many_arguments)]
fn regress<R: Rng + ?Sized>(
    net: &mut DenseNet,
    opt: &mut AdamState,
    inputs: ArrayView2<'_, f64>,
    targets: &[f64],
    scale: f64,
    epochs: usize,
    minibatches: usize,
    grad_clip: Option<f64>,
    rng: &mut R,
) -> Result<f64, TrainError> {
    let mut first_loss = None;
    for _ in 0..epochs {
        let mut pass_loss = 0.0;
        for idx in minibatch_plan(targets.len(), minibatches, rng) {
            let x = if minibatches == 1 { inputs.to_owned() } else { inputs.select(Axis(0), &idx) };
            let (y, cache) = net.forward(x.view())?;
            let n = idx.len() as f64;
            let mut grad = Array2::<f64>::zeros((idx.len(), 1));
            for (k, &i) in idx.iter().enumerate() {
                let diff = y[[k, 0]] - targets[i];
                pass_loss += scale * diff * diff;
                grad[[k, 0]] = 2.0 * scale * diff / n;
            }
            let grads = net.backward(&cache, grad.view())?;
            adam_step(net.params_mut(), &grads, opt, grad_clip)?;
        }
        first_loss.get_or_insert(pass_loss / targets.len().max(1) as f64);
    }
    Ok(first_loss.unwrap_or(0.0))
}

/// TD regression `V(s) -> signal + gamma * (1 - done) * V'(s')` against the
/// frozen `target` critic. Returns `0.5 * mean residual^2` before the update.
#[allow(clippy::too_many_arguments)]
pub fn critic_td_update<R: Rng + ?Sized>(
    critic: &mut DenseNet,
    target: &DenseNet,
    opt: &mut AdamState,
    states: ArrayView2<'_, f64>,
    next_states: ArrayView2<'_, f64>,
    signal: &[f64],
    dones: &[bool],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<f64, TrainError> {
    let next = column(target, next_states)?;
    let targets: Vec<f64> = signal
        .iter()
        .zip(&next)
        .zip(dones)
        .map(|((r, v), &d)| if d { *r } else { r + config.gamma * v })
        .collect();
    regress(
        critic,
        opt,
        states,
        &targets,
        0.5,
        config.epochs,
        config.minibatches,
        Some(config.grad_norm_clip),
        rng,
    )
}

/// Regression of the cost estimator onto realized costs, minimizing
/// `mean((theta_C(s, a) - c)^2)`.
pub fn cost_estimator_update<R: Rng + ?Sized>(
    estimator: &mut DenseNet,
    opt: &mut AdamState,
    inputs: ArrayView2<'_, f64>,
    costs: &[f64],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<f64, TrainError> {
    regress(
        estimator,
        opt,
        inputs,
        costs,
        1.0,
        config.epochs,
        config.minibatches,
        Some(config.grad_norm_clip),
        rng,
    )
}

/// One dual step `lambda + lr * mean(estimate - limit)`, clamped to
/// `[0, max]`.
pub fn lambda_update(lambda: f64, estimates: &[f64], cost_limit: f64, lr: f64, max: Option<f64>) -> f64 {
    if estimates.is_empty() {
        return lambda;
    }
    let mean = estimates.iter().map(|e| e - cost_limit).sum::<f64>() / estimates.len() as f64;
    let next = (lambda + lr * mean).max(0.0);
    match max {
        Some(m) => next.min(m),
        None => next,
    }
}

/// Centralized learner: shared actor, reward and cost critics, cost estimator.
#[derive(Clone, Debug)]
pub struct LearnerState {
    pub actor: DenseNet,
    pub actor_target: DenseNet,
    pub reward_critic: DenseNet,
    pub reward_critic_target: DenseNet,
    pub cost_critic: DenseNet,
    pub cost_critic_target: DenseNet,
    pub cost_estimator: DenseNet,
    pub lambda: f64,
    pub actor_opt: AdamState,
    pub reward_critic_opt: AdamState,
    pub cost_critic_opt: AdamState,
    pub estimator_opt: AdamState,
}

const ACTOR_GAIN: f64 = 0.01;

impl LearnerState {
    pub fn new<R: Rng + ?Sized>(features: &Features, config: &TrainConfig, rng: &mut R) -> Self {
        let h = config.hidden_dim;
        let lr = config.learning_rate();
        let actor = DenseNet::init(&[features.actor_input_len(), h, h, PHASES], ACTOR_GAIN, rng);
        let reward_critic = DenseNet::init(&[features.state_len(), h, h, 1], 1.0, rng);
        let cost_critic = DenseNet::init(&[features.state_len(), h, h, 1], 1.0, rng);
        let cost_estimator = DenseNet::init(&[features.estimator_input_len(), h, h, 1], 1.0, rng);
        LearnerState {
            actor_opt: AdamState::new(actor.num_params(), lr),
            reward_critic_opt: AdamState::new(reward_critic.num_params(), lr),
            cost_critic_opt: AdamState::new(cost_critic.num_params(), lr),
            estimator_opt: AdamState::new(cost_estimator.num_params(), config.cost_estimator_lr),
            actor_target: actor.clone(),
            reward_critic_target: reward_critic.clone(),
            cost_critic_target: cost_critic.clone(),
            actor,
            reward_critic,
            cost_critic,
            cost_estimator,
            lambda: config.lambda_init,
        }
    }
}

/// Independent learner of one IPPO agent.
#[derive(Clone, Debug)]
pub struct AgentLearner {
    pub actor: DenseNet,
    pub actor_target: DenseNet,
    pub critic: DenseNet,
    pub critic_target: DenseNet,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
}

impl AgentLearner {
    pub fn new<R: Rng + ?Sized>(config: &TrainConfig, rng: &mut R) -> Self {
        let h = config.hidden_dim;
        let lr = config.learning_rate();
        let actor = DenseNet::init(&[OBS_LEN, h, h, PHASES], ACTOR_GAIN, rng);
        let critic = DenseNet::init(&[OBS_LEN, h, h, 1], 1.0, rng);
        AgentLearner {
            actor_opt: AdamState::new(actor.num_params(), lr),
            critic_opt: AdamState::new(critic.num_params(), lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
        }
    }
}

/// Losses and multiplier after one training iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub reward_td_loss: f64,
    pub cost_td_loss: f64,
    pub estimator_loss: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug)]
pub enum Learner {
    Central { algorithm: Algorithm, state: Box<LearnerState> },
    Independent(Vec<AgentLearner>),
}

fn advantages(
    critic: &DenseNet,
    states: ArrayView2<'_, f64>,
    next_states: ArrayView2<'_, f64>,
    signal: &[f64],
    dones: &[bool],
    config: &TrainConfig,
) -> Result<Vec<f64>, TrainError> {
    let v = column(critic, states)?;
    let v_next = column(critic, next_states)?;
    let mut adv = gae(signal, &v, &v_next, dones, config.gamma, config.gae_lambda)?.advantages;
    if config.normalize_advantages {
        normalize(&mut adv);
    }
    Ok(adv)
}

fn per_row(adv: &[f64], agents: usize) -> Vec<f64> {
    adv.iter().flat_map(|&a| std::iter::repeat_n(a, agents)).collect()
}

impl Learner {
    pub fn new<R: Rng + ?Sized>(features: &Features, config: &TrainConfig, rng: &mut R) -> Self {
        match config.algorithm {
            Algorithm::Ippo => Learner::Independent((0..features.num_agents).map(|_| AgentLearner::new(config, rng)).collect()),
            algorithm => Learner::Central {
                algorithm,
                state: Box::new(LearnerState::new(features, config, rng)),
            },
        }
    }

    /// Current Lagrange multiplier; zero for the penalty baselines.
    pub fn lambda(&self) -> f64 {
        match self {
            Learner::Central {
                algorithm: Algorithm::MappoLce,
                state,
            } => state.lambda,
            _ => 0.0,
        }
    }

    pub fn features(&self, num_agents: usize, obs_scale: f64) -> Features {
        match self {
            Learner::Central { .. } => Features::shared(num_agents, obs_scale),
            Learner::Independent(_) => Features::local(num_agents, obs_scale),
        }
    }

    /// One pass of actor, critic, estimator and multiplier updates plus soft
    /// target updates on `batch`.
    pub fn update(&mut self, batch: &TrainingBatch, config: &TrainConfig, iteration: u64) -> Result<UpdateStats, TrainError> {
        let seed = config.seed;
        let rng = |tag, agent| component_rng(seed, iteration, tag, agent);
        match self {
            Learner::Central { algorithm, state } => {
                let lce = *algorithm == Algorithm::MappoLce;
                let rewards: Vec<f64> = batch
                    .rewards
                    .iter()
                    .zip(&batch.costs)
                    .map(|(&r, &c)| {
                        let r = r * config.reward_scale;
                        if lce {
                            r
                        } else {
                            baseline_penalty_reward(r, c, config.penalty_zeta)
                        }
                    })
                    .collect();
                let (s, s_next) = (batch.states.view(), batch.next_states.view());
                let adv_r = per_row(&advantages(&state.reward_critic, s, s_next, &rewards, &batch.dones, config)?, batch.agents);
                let adv_c = if lce {
                    Some(per_row(
                        &advantages(&state.cost_critic, s, s_next, &batch.costs, &batch.dones, config)?,
                        batch.agents,
                    ))
                } else {
                    None
                };
                let mut stats = UpdateStats {
                    actor_loss: actor_update(
                        &mut state.actor,
                        &mut state.actor_opt,
                        batch.actor_inputs.view(),
                        &batch.actions,
                        &batch.old_log_probs,
                        &adv_r,
                        adv_c.as_deref().map(|c| (c, state.lambda)),
                        config,
                        batch.agents,
                        &mut rng(TAG_ACTOR, 0),
                    )?,
                    ..UpdateStats::default()
                };
                stats.reward_td_loss = critic_td_update(
                    &mut state.reward_critic,
                    &state.reward_critic_target,
                    &mut state.reward_critic_opt,
                    s,
                    s_next,
                    &rewards,
                    &batch.dones,
                    config,
                    &mut rng(TAG_REWARD_CRITIC, 0),
                )?;
                if lce {
                    stats.cost_td_loss = critic_td_update(
                        &mut state.cost_critic,
                        &state.cost_critic_target,
                        &mut state.cost_critic_opt,
                        s,
                        s_next,
                        &batch.costs,
                        &batch.dones,
                        config,
                        &mut rng(TAG_COST_CRITIC, 0),
                    )?;
                    stats.estimator_loss = cost_estimator_update(
                        &mut state.cost_estimator,
                        &mut state.estimator_opt,
                        batch.estimator_inputs.view(),
                        &batch.costs,
                        config,
                        &mut rng(TAG_ESTIMATOR, 0),
                    )?;
                    let estimates = column(&state.cost_estimator, batch.estimator_inputs.view())?;
                    state.lambda =
                        lambda_update(state.lambda, &estimates, config.cost_limit, config.lambda_lr, config.lambda_max);
                    state.cost_critic_target.soft_update_from(&state.cost_critic, config.tau)?;
                }
                state.actor_target.soft_update_from(&state.actor, config.tau)?;
                state.reward_critic_target.soft_update_from(&state.reward_critic, config.tau)?;
                stats.lambda = if lce { state.lambda } else { 0.0 };
                Ok(stats)
            }
            Learner::Independent(agents) => {
                let rewards: Vec<f64> = batch
                    .rewards
                    .iter()
                    .zip(&batch.costs)
                    .map(|(&r, &c)| baseline_penalty_reward(r * config.reward_scale, c, config.penalty_zeta))
                    .collect();
                let mut stats = UpdateStats::default();
                for (i, agent) in agents.iter_mut().enumerate() {
                    let rows = batch.agent_rows(i);
                    let local = batch.local_inputs.select(Axis(0), &rows);
                    let next_local = batch.next_local_inputs.select(Axis(0), &rows);
                    let actions: Vec<usize> = rows.iter().map(|&r| batch.actions[r]).collect();
                    let old: Vec<f64> = rows.iter().map(|&r| batch.old_log_probs[r]).collect();
                    let adv = advantages(&agent.critic, local.view(), next_local.view(), &rewards, &batch.dones, config)?;
                    stats.actor_loss += actor_update(
                        &mut agent.actor,
                        &mut agent.actor_opt,
                        local.view(),
                        &actions,
                        &old,
                        &adv,
                        None,
                        config,
                        1,
                        &mut rng(TAG_ACTOR, i),
                    )?;
                    stats.reward_td_loss += critic_td_update(
                        &mut agent.critic,
                        &agent.critic_target,
                        &mut agent.critic_opt,
                        local.view(),
                        next_local.view(),
                        &rewards,
                        &batch.dones,
                        config,
                        &mut rng(TAG_REWARD_CRITIC, i),
                    )?;
                    agent.actor_target.soft_update_from(&agent.actor, config.tau)?;
                    agent.critic_target.soft_update_from(&agent.critic, config.tau)?;
                }
                let n = agents.len().max(1) as f64;
                stats.actor_loss /= n;
                stats.reward_td_loss /= n;
                Ok(stats)
            }
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        match self {
            Learner::Central { state, .. } => {
                ck.add_scalar("lambda", state.lambda);
                ck.add_net("actor", &state.actor);
                ck.add_net("actor_target", &state.actor_target);
                ck.add_net("reward_critic", &state.reward_critic);
                ck.add_net("reward_critic_target", &state.reward_critic_target);
                ck.add_net("cost_critic", &state.cost_critic);
                ck.add_net("cost_critic_target", &state.cost_critic_target);
                ck.add_net("cost_estimator", &state.cost_estimator);
            }
            Learner::Independent(agents) => {
                for (i, a) in agents.iter().enumerate() {
                    ck.add_net(&format!("actor_{i}"), &a.actor);
                    ck.add_net(&format!("actor_target_{i}"), &a.actor_target);
                    ck.add_net(&format!("critic_{i}"), &a.critic);
                    ck.add_net(&format!("critic_target_{i}"), &a.critic_target);
                }
            }
        }
        ck
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_step_examples() {
        assert!((lambda_update(0.01, &[0.5, 0.5], 0.0, 1e-4, None) - 0.01005).abs() < 1e-15);
        assert_eq!(lambda_update(0.3, &[0.2, 0.2], 0.2, 1e-4, None), 0.3);
        assert_eq!(lambda_update(0.0, &[-0.2], 0.0, 1e-4, None), 0.0);
        assert_eq!(lambda_update(0.5, &[100.0], 0.0, 1.0, Some(1.0)), 1.0);
    }

    #[test]
    fn minibatch_plan_covers_rows_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let plan = minibatch_plan(10, 3, &mut rng);
        let mut all: Vec<usize> = plan.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(minibatch_plan(4, 1, &mut rng), vec![vec![0, 1, 2, 3]]);
    }
}
