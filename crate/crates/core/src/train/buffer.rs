//! Episode replay buffer.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;

use super::rollout::Episode;

/// Ring of complete episodes; the oldest is evicted first.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<Episode>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        ReplayBuffer {
            capacity,
            episodes: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, episode: Episode) {
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn episodes(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.iter()
    }

    /// Up to `batch_size` distinct episodes in random order.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Vec<&Episode> {
        let n = batch_size.min(self.episodes.len());
        sample(rng, self.episodes.len(), n)
            .into_iter()
            .map(|i| &self.episodes[i])
            .collect()
    }
}
