//! Fixed-length per-agent observation vectors.

use super::network::{MOVEMENTS, PHASES};

/// Moving count, waiting count, phase one-hot, lane count, lane mean speed.
pub const OBS_LEN: usize = MOVEMENTS * 4 + PHASES;

const MOVING: usize = 0;
const WAITING: usize = MOVING + MOVEMENTS;
const PHASE: usize = WAITING + MOVEMENTS;
const LANE_COUNT: usize = PHASE + PHASES;
const LANE_SPEED: usize = LANE_COUNT + MOVEMENTS;

/// Layout: `[moving x12 | waiting x12 | phase one-hot x8 | lane count x12 | lane speed x12]`.
/// Lane speeds are normalized by the road's free speed.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation(pub [f64; OBS_LEN]);

impl Observation {
    pub fn zeros() -> Self {
        Observation([0.0; OBS_LEN])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn moving(&self) -> &[f64] {
        &self.0[MOVING..WAITING]
    }

    pub fn waiting(&self) -> &[f64] {
        &self.0[WAITING..PHASE]
    }

    pub fn phase_one_hot(&self) -> &[f64] {
        &self.0[PHASE..LANE_COUNT]
    }

    pub fn lane_counts(&self) -> &[f64] {
        &self.0[LANE_COUNT..LANE_SPEED]
    }

    pub fn lane_speeds(&self) -> &[f64] {
        &self.0[LANE_SPEED..]
    }

    pub fn phase(&self) -> usize {
        self.phase_one_hot().iter().position(|&v| v == 1.0).unwrap_or(0)
    }

    pub(crate) fn set_lane(&mut self, m: usize, moving: usize, waiting: usize, count: usize, speed: f64) {
        self.0[MOVING + m] = moving as f64;
        self.0[WAITING + m] = waiting as f64;
        self.0[LANE_COUNT + m] = count as f64;
        self.0[LANE_SPEED + m] = speed;
    }

    pub(crate) fn set_phase(&mut self, phase: usize) {
        self.0[PHASE..LANE_COUNT].fill(0.0);
        self.0[PHASE + phase] = 1.0;
    }

    /// Indices holding vehicle counts (as opposed to one-hot or normalized entries).
    pub fn count_indices() -> impl Iterator<Item = usize> {
        (MOVING..PHASE).chain(LANE_COUNT..LANE_SPEED)
    }
}

/// Concatenates observations in agent-id order.
pub fn global_state(observations: &[Observation]) -> Vec<f64> {
    let mut out = Vec::with_capacity(observations.len() * OBS_LEN);
    for o in observations {
        out.extend_from_slice(&o.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_56_wide() {
        assert_eq!(OBS_LEN, 56);
        assert_eq!(Observation::count_indices().count(), 36);
    }

    #[test]
    fn global_state_lengths_and_order() {
        let mut obs: Vec<Observation> = (0..4).map(|_| Observation::zeros()).collect();
        for (i, o) in obs.iter_mut().enumerate() {
            o.set_phase(i);
        }
        let s = global_state(&obs);
        assert_eq!(s.len(), 224);
        for i in 0..4 {
            assert_eq!(s[i * OBS_LEN + PHASE + i], 1.0);
        }
        let sixteen: Vec<Observation> = (0..16).map(|_| Observation::zeros()).collect();
        assert_eq!(global_state(&sixteen).len(), 896);

        obs.swap(0, 1);
        assert_ne!(global_state(&obs), s);
    }
}
