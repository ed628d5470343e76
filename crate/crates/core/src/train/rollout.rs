//! Environment wrapper, joint policies and episode collection.

use ndarray::ArrayView2;
use rand::Rng;

use crate::constraints::{ConstraintConfig, ConstraintTracker, CostSample};
use crate::nn::{argmax, log_softmax, sample_action, DenseNet, EpsilonSchedule};
use crate::sim::{global_state, EpisodeMetrics, Observation, Simulator};

use super::features::Features;
use super::TrainError;

/// A simulator paired with its constraint trackers.
#[derive(Clone, Debug)]
pub struct SignalEnv {
    sim: Simulator,
    tracker: ConstraintTracker,
    constraints: ConstraintConfig,
    observations: Vec<Observation>,
}

#[derive(Clone, Debug)]
pub struct EnvStep {
    pub observations: Vec<Observation>,
    pub reward: f64,
    pub costs: CostSample,
    /// Cost in the configured constraint mode.
    pub cost: f64,
    pub done: bool,
}

impl SignalEnv {
    pub fn new(sim: Simulator, constraints: ConstraintConfig) -> Result<Self, TrainError> {
        constraints.validate()?;
        let tracker = ConstraintTracker::new(sim.num_agents());
        let observations = sim.observations();
        Ok(SignalEnv {
            sim,
            tracker,
            constraints,
            observations,
        })
    }

    pub fn reset(&mut self, seed: u64) -> &[Observation] {
        self.observations = self.sim.reset(seed);
        self.tracker.reset();
        &self.observations
    }

    pub fn step(&mut self, actions: &[usize]) -> Result<EnvStep, TrainError> {
        let out = self.sim.step(actions)?;
        let network = self.sim.network().clone();
        self.tracker
            .observe_step(&out.info, |i, p| network.intersections[i].phase_green(p))?;
        let costs = self.tracker.compute_cost(&self.constraints);
        self.observations = out.observations.clone();
        Ok(EnvStep {
            observations: out.observations,
            reward: out.reward,
            cost: costs.total,
            costs,
            done: out.info.done,
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn num_agents(&self) -> usize {
        self.sim.num_agents()
    }

    pub fn sim(&self) -> &Simulator {
        &self.sim
    }

    pub fn tracker(&self) -> &ConstraintTracker {
        &self.tracker
    }

    pub fn constraints(&self) -> &ConstraintConfig {
        &self.constraints
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    /// Raw global state (observations concatenated in agent order).
    pub state: Vec<f64>,
    pub observations: Vec<Observation>,
    pub actions: Vec<usize>,
    /// Softmax log-probabilities of the chosen actions under the behavior policy.
    pub log_probs: Vec<f64>,
    pub reward: f64,
    pub cost: f64,
    pub costs: CostSample,
    pub next_state: Vec<f64>,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub transitions: Vec<Transition>,
    pub metrics: EpisodeMetrics,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    /// Per-step cost averages over the episode.
    pub fn mean_costs(&self) -> CostSample {
        let n = self.transitions.len().max(1) as f64;
        let mut m = CostSample::default();
        for t in &self.transitions {
            m.green_time += t.costs.green_time;
            m.phase_skip += t.costs.phase_skip;
            m.green_skip += t.costs.green_skip;
            m.total += t.costs.total;
        }
        m.green_time /= n;
        m.phase_skip /= n;
        m.green_skip /= n;
        m.total /= n;
        m
    }
}

/// Per-agent phase logits for the current observations.
pub trait JointPolicy {
    fn logits(&self, observations: &[Observation]) -> Result<Vec<Vec<f64>>, TrainError>;
}

/// One actor shared by every agent.
#[derive(Clone, Copy, Debug)]
pub struct SharedActor<'a> {
    pub actor: &'a DenseNet,
    pub features: Features,
}

impl JointPolicy for SharedActor<'_> {
    fn logits(&self, observations: &[Observation]) -> Result<Vec<Vec<f64>>, TrainError> {
        let x = self.features.actor_batch(observations);
        let y = self.actor.predict(x.view())?;
        Ok(y.outer_iter().map(|r| r.to_vec()).collect())
    }
}

/// One actor per agent, each seeing only its own observation.
#[derive(Clone, Debug)]
pub struct IndependentActors<'a> {
    pub actors: Vec<&'a DenseNet>,
    pub features: Features,
}

impl JointPolicy for IndependentActors<'_> {
    fn logits(&self, observations: &[Observation]) -> Result<Vec<Vec<f64>>, TrainError> {
        observations
            .iter()
            .zip(&self.actors)
            .map(|(o, actor)| {
                let mut x = Vec::with_capacity(o.as_slice().len());
                self.features.encode_local(o.as_slice(), &mut x);
                let view = ArrayView2::from_shape((1, x.len()), &x).expect("row");
                Ok(actor.predict(view)?.into_raw_vec_and_offset().0)
            })
            .collect()
    }
}

/// Equal logits for every phase. Sampled with epsilon 1 it is the uniform-random policy.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformPolicy;

impl JointPolicy for UniformPolicy {
    fn logits(&self, observations: &[Observation]) -> Result<Vec<Vec<f64>>, TrainError> {
        Ok(vec![vec![0.0; crate::sim::PHASES]; observations.len()])
    }
}

#[derive(Clone, Copy, Debug)]
pub enum ActionMode {
    /// Epsilon-greedy sampling; epsilon follows the schedule from `start_step` on.
    Explore { schedule: EpsilonSchedule, start_step: u64 },
    /// Sampling with a fixed epsilon.
    Fixed(f64),
    /// Argmax of the logits, no exploration.
    Greedy,
}

/// Runs one full episode from a fresh reset.
pub fn collect_rollout<P, R>(
    policy: &P,
    env: &mut SignalEnv,
    seed: u64,
    mode: ActionMode,
    rng: &mut R,
) -> Result<Episode, TrainError>
where
    P: JointPolicy + ?Sized,
    R: Rng + ?Sized,
{
    env.reset(seed);
    let mut transitions = Vec::new();
    loop {
        let observations = env.observations().to_vec();
        let logits = policy.logits(&observations)?;
        let epsilon = match mode {
            ActionMode::Explore { schedule, start_step } => Some(schedule.value(start_step + transitions.len() as u64)),
            ActionMode::Fixed(e) => Some(e),
            ActionMode::Greedy => None,
        };
        let (actions, log_probs): (Vec<usize>, Vec<f64>) = logits
            .iter()
            .map(|l| match epsilon {
                Some(e) => sample_action(l, e, rng),
                None => {
                    let a = argmax(l);
                    (a, log_softmax(l)[a])
                }
            })
            .unzip();
        let step = env.step(&actions)?;
        transitions.push(Transition {
            state: global_state(&observations),
            observations,
            actions,
            log_probs,
            reward: step.reward,
            cost: step.cost,
            costs: step.costs,
            next_state: global_state(&step.observations),
            done: step.done,
        });
        if step.done {
            break;
        }
    }
    Ok(Episode {
        transitions,
        metrics: env.sim().episode_metrics(),
    })
}
