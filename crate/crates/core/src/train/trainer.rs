//! The training loop: collect, store, sample, update, evaluate.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintConfig;
use crate::nn::Checkpoint;
use crate::sim::{FlowDocument, RoadNetwork, SimConfig, Simulator};

use super::buffer::ReplayBuffer;
use super::config::{Algorithm, EvalPolicy, TrainConfig};
use super::features::Features;
use super::learner::{Learner, TrainingBatch, UpdateStats};
use super::rollout::{collect_rollout, ActionMode, Episode, IndependentActors, JointPolicy, SharedActor, SignalEnv};
use super::TrainError;

pub const METRICS_COLUMNS: [&str; 9] = [
    "step",
    "test_reward",
    "throughput",
    "avg_delay",
    "cost_greentime",
    "cost_phaseskip",
    "cost_greenskip",
    "cost_total",
    "lambda",
];

/// One evaluation row of the metrics stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub test_reward: f64,
    pub throughput: f64,
    pub avg_delay: f64,
    pub cost_greentime: f64,
    pub cost_phaseskip: f64,
    pub cost_greenskip: f64,
    pub cost_total: f64,
    pub lambda: f64,
}

impl MetricsRow {
    /// Row for a finished greedy episode.
    pub fn from_episode(step: u64, episode: &Episode, lambda: f64) -> Self {
        let costs = episode.mean_costs();
        MetricsRow {
            step,
            test_reward: episode.total_reward(),
            throughput: episode.metrics.throughput as f64,
            avg_delay: episode.metrics.average_delay,
            cost_greentime: costs.green_time,
            cost_phaseskip: costs.phase_skip,
            cost_greenskip: costs.green_skip,
            cost_total: costs.total,
            lambda,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub metrics: Vec<MetricsRow>,
    /// Per-iteration update statistics, including the multiplier after each update.
    pub updates: Vec<(u64, UpdateStats)>,
    pub env_steps: u64,
    pub iterations: u64,
}

#[derive(Clone, Debug)]
pub struct Trainer {
    config: TrainConfig,
    env: SignalEnv,
    eval_env: SignalEnv,
    features: Features,
    learner: Learner,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    env_steps: u64,
    iterations: u64,
    episodes: u64,
}

const EVAL_SEED_OFFSET: u64 = 0x5EED;

impl Trainer {
    pub fn new(
        config: TrainConfig,
        network: Arc<RoadNetwork>,
        flow: Arc<FlowDocument>,
        sim_config: SimConfig,
        constraints: ConstraintConfig,
    ) -> Result<Self, TrainError> {
        config.validate()?;
        let sim = Simulator::new(network, flow, sim_config, config.seed)?;
        let env = SignalEnv::new(sim, constraints)?;
        let eval_env = env.clone();
        let n = env.num_agents();
        let features = match config.algorithm {
            Algorithm::Ippo => Features::local(n, config.obs_scale),
            _ => Features::shared(n, config.obs_scale),
        };
        let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
        let learner = Learner::new(&features, &config, &mut init_rng);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Trainer {
            buffer: ReplayBuffer::new(config.buffer_size),
            config,
            env,
            eval_env,
            features,
            learner,
            rng,
            env_steps: 0,
            iterations: 0,
            episodes: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn learner_mut(&mut self) -> &mut Learner {
        &mut self.learner
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    /// Current exploration rate.
    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.value(self.env_steps)
    }

    fn with_policy<T>(&self, f: impl FnOnce(&dyn JointPolicy) -> T) -> T {
        match &self.learner {
            Learner::Central { state, .. } => f(&SharedActor {
                actor: &state.actor,
                features: self.features,
            }),
            Learner::Independent(agents) => f(&IndependentActors {
                actors: agents.iter().map(|a| &a.actor).collect(),
                features: self.features,
            }),
        }
    }

    /// Collects one exploratory episode, stores it and runs one update on a
    /// sampled batch.
    pub fn train_iteration(&mut self) -> Result<UpdateStats, TrainError> {
        let seed = self.config.seed.wrapping_mul(1_000_003).wrapping_add(self.episodes);
        let mode = ActionMode::Explore {
            schedule: self.config.epsilon,
            start_step: self.env_steps,
        };
        let mut rng = self.rng.clone();
        let mut env = self.env.clone();
        let episode = self.with_policy(|p| collect_rollout(p, &mut env, seed, mode, &mut rng))?;
        self.env = env;
        self.rng = rng;
        self.env_steps += episode.len() as u64;
        self.episodes += 1;
        self.buffer.push(episode);
        let sampled = self.buffer.sample(self.config.batch_size, &mut self.rng);
        let batch = TrainingBatch::from_episodes(&sampled, &self.features);
        let stats = self.learner.update(&batch, &self.config, self.iterations)?;
        self.iterations += 1;
        Ok(stats)
    }

    /// One episode with exploration off on a separate environment. Touches
    /// neither the buffer nor the exploration schedule.
    pub fn evaluate(&self) -> Result<Episode, TrainError> {
        let mode = match self.config.eval_policy {
            EvalPolicy::Sample => ActionMode::Fixed(0.0),
            EvalPolicy::Greedy => ActionMode::Greedy,
        };
        self.with_policy(|p| self.evaluate_with(p, mode))
    }

    /// Runs `policy` on the evaluation episode, e.g. a baseline scored on
    /// the same demand and seed as the learned policy.
    pub fn evaluate_with<P: JointPolicy + ?Sized>(&self, policy: &P, mode: ActionMode) -> Result<Episode, TrainError> {
        let mut env = self.eval_env.clone();
        let seed = self.config.seed ^ EVAL_SEED_OFFSET;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        collect_rollout(policy, &mut env, seed, mode, &mut rng)
    }

    pub fn evaluation_row(&self) -> Result<MetricsRow, TrainError> {
        Ok(MetricsRow::from_episode(self.env_steps, &self.evaluate()?, self.learner.lambda()))
    }

    /// Trains until the configured step budget, evaluating every
    /// `eval_interval` iterations and once at the end.
    pub fn run(&mut self, mut on_row: impl FnMut(&MetricsRow)) -> Result<TrainReport, TrainError> {
        let mut report = TrainReport::default();
        while self.env_steps < self.config.total_env_steps {
            let stats = self.train_iteration()?;
            report.updates.push((self.iterations, stats));
            let last = self.env_steps >= self.config.total_env_steps;
            if self.iterations % self.config.eval_interval == 0 || last {
                let row = self.evaluation_row()?;
                on_row(&row);
                report.metrics.push(row);
            }
        }
        report.env_steps = self.env_steps;
        report.iterations = self.iterations;
        Ok(report)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = self.learner.checkpoint();
        ck.add_scalar("env_steps", self.env_steps as f64);
        ck.add_scalar("iterations", self.iterations as f64);
        ck
    }
}

/// Runs MAPPO-LCE or penalty MAPPO to completion.
pub fn train(
    config: TrainConfig,
    network: Arc<RoadNetwork>,
    flow: Arc<FlowDocument>,
    sim_config: SimConfig,
    constraints: ConstraintConfig,
) -> Result<(Checkpoint, TrainReport), TrainError> {
    if config.algorithm == Algorithm::Ippo {
        return Err(TrainError::Config("train runs the centralized algorithms; use ippo_train".into()));
    }
    let mut trainer = Trainer::new(config, network, flow, sim_config, constraints)?;
    let report = trainer.run(|_| {})?;
    Ok((trainer.checkpoint(), report))
}

/// Runs independent PPO with per-agent actors and critics.
pub fn ippo_train(
    config: TrainConfig,
    network: Arc<RoadNetwork>,
    flow: Arc<FlowDocument>,
    sim_config: SimConfig,
    constraints: ConstraintConfig,
) -> Result<(Checkpoint, TrainReport), TrainError> {
    let config = TrainConfig {
        algorithm: Algorithm::Ippo,
        ..config
    };
    let mut trainer = Trainer::new(config, network, flow, sim_config, constraints)?;
    let report = trainer.run(|_| {})?;
    Ok((trainer.checkpoint(), report))
}
