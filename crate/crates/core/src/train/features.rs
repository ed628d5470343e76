//! Network input encodings.

use ndarray::Array2;

use crate::sim::{Observation, OBS_LEN, PHASES};

/// Scales vehicle counts and lays out actor, critic and estimator inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Features {
    pub num_agents: usize,
    pub obs_scale: f64,
    /// Append an agent-id one-hot to actor inputs (shared actors with more than one agent).
    pub agent_ids: bool,
}

impl Features {
    pub fn shared(num_agents: usize, obs_scale: f64) -> Self {
        Features {
            num_agents,
            obs_scale,
            agent_ids: num_agents > 1,
        }
    }

    pub fn local(num_agents: usize, obs_scale: f64) -> Self {
        Features {
            num_agents,
            obs_scale,
            agent_ids: false,
        }
    }

    pub fn actor_input_len(&self) -> usize {
        OBS_LEN + if self.agent_ids { self.num_agents } else { 0 }
    }

    pub fn state_len(&self) -> usize {
        OBS_LEN * self.num_agents
    }

    pub fn estimator_input_len(&self) -> usize {
        self.state_len() + PHASES * self.num_agents
    }

    fn push_obs(&self, obs: &[f64], out: &mut Vec<f64>) {
        let start = out.len();
        out.extend_from_slice(obs);
        for i in Observation::count_indices() {
            out[start + i] *= self.obs_scale;
        }
    }

    pub fn encode_local(&self, obs: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(obs.len(), OBS_LEN);
        self.push_obs(obs, out);
    }

    pub fn encode_actor(&self, obs: &[f64], agent: usize, out: &mut Vec<f64>) {
        self.push_obs(obs, out);
        if self.agent_ids {
            let start = out.len();
            out.resize(start + self.num_agents, 0.0);
            out[start + agent] = 1.0;
        }
    }

    /// Encodes a raw global state (observations concatenated in agent order).
    pub fn encode_state(&self, state: &[f64], out: &mut Vec<f64>) {
        for chunk in state.chunks(OBS_LEN) {
            self.push_obs(chunk, out);
        }
    }

    pub fn encode_joint_action(&self, actions: &[usize], out: &mut Vec<f64>) {
        let start = out.len();
        out.resize(start + PHASES * actions.len(), 0.0);
        for (i, &a) in actions.iter().enumerate() {
            out[start + i * PHASES + a] = 1.0;
        }
    }

    /// Actor input rows, one per agent.
    pub fn actor_batch(&self, observations: &[Observation]) -> Array2<f64> {
        let mut flat = Vec::with_capacity(observations.len() * self.actor_input_len());
        for (i, o) in observations.iter().enumerate() {
            self.encode_actor(o.as_slice(), i, &mut flat);
        }
        Array2::from_shape_vec((observations.len(), self.actor_input_len()), flat).expect("actor batch shape")
    }
}
