//! GreenTime, PhaseSkip and GreenSkip counters and the per-step cost signal.
//!
//! Counters follow the incremental update rules exactly:
//!
//! * green time: every step a light is on adds one; a step it is off resets it.
//! * phase skips: on a phase change, every phase other than the old and new
//!   phase adds one and the new phase resets. The old phase is left as is.
//! * green skips: on a phase change, a light red in both the old and the new
//!   phase adds one; every other light resets.
//!
//! Right-turn lights are always on and never counted. A light or phase
//! violates its constraint when its counter strictly exceeds the threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{LightSet, Movement, StepInfo, MOVEMENTS, PHASES};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("intersection {intersection}: phase-change update called with unchanged phase {phase}")]
    SamePhase { intersection: usize, phase: usize },
    #[error("intersection {intersection}: green-skip update called with identical green sets")]
    SameGreenSet { intersection: usize },
    #[error("intersection index {0} out of range")]
    UnknownIntersection(usize),
    #[error("phase id {0} out of range")]
    UnknownPhase(usize),
    #[error("invalid constraint config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    GreenTime,
    PhaseSkip,
    GreenSkip,
    /// Sum of the three costs.
    All,
}

impl std::str::FromStr for ConstraintMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "greentime" => Ok(ConstraintMode::GreenTime),
            "phaseskip" => Ok(ConstraintMode::PhaseSkip),
            "greenskip" => Ok(ConstraintMode::GreenSkip),
            "all" => Ok(ConstraintMode::All),
            other => Err(format!("unknown constraint mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintConfig {
    pub max_green_time: u32,
    pub max_phase_skips: u32,
    pub max_green_skips: u32,
    pub mode: ConstraintMode,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        ConstraintConfig {
            max_green_time: 40,
            max_phase_skips: 16,
            max_green_skips: 4,
            mode: ConstraintMode::GreenTime,
        }
    }
}

impl ConstraintConfig {
    pub fn validate(&self) -> Result<(), ConstraintError> {
        if self.max_green_time < 1 || self.max_phase_skips < 1 || self.max_green_skips < 1 {
            return Err(ConstraintError::Config("thresholds must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IntersectionCounters {
    pub green_time: [u32; MOVEMENTS],
    pub phase_skips: [u32; PHASES],
    pub green_skips: [u32; MOVEMENTS],
}

fn counted(light: usize) -> bool {
    !Movement::from_index(light).is_right_turn()
}

impl IntersectionCounters {
    fn green_time_violations(&self, max: u32) -> usize {
        self.green_time.iter().filter(|&&g| g > max).count()
    }

    fn phase_skip_violations(&self, max: u32) -> usize {
        self.phase_skips.iter().filter(|&&p| p > max).count()
    }

    fn green_skip_violations(&self, max: u32) -> usize {
        self.green_skips.iter().filter(|&&g| g > max).count()
    }
}

/// Per-constraint costs, each the mean over agents of the violating fraction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CostSample {
    pub green_time: f64,
    pub phase_skip: f64,
    pub green_skip: f64,
    /// Cost of the configured mode; the sum of all three in `All` mode.
    pub total: f64,
}

impl CostSample {
    pub fn for_mode(&self, mode: ConstraintMode) -> f64 {
        match mode {
            ConstraintMode::GreenTime => self.green_time,
            ConstraintMode::PhaseSkip => self.phase_skip,
            ConstraintMode::GreenSkip => self.green_skip,
            ConstraintMode::All => self.green_time + self.phase_skip + self.green_skip,
        }
    }
}

/// Constraint counters for every intersection of one environment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintTracker {
    counters: Vec<IntersectionCounters>,
}

impl ConstraintTracker {
    pub fn new(num_intersections: usize) -> Self {
        ConstraintTracker {
            counters: vec![IntersectionCounters::default(); num_intersections],
        }
    }

    pub fn reset(&mut self) {
        self.counters.iter_mut().for_each(|c| *c = IntersectionCounters::default());
    }

    pub fn counters(&self) -> &[IntersectionCounters] {
        &self.counters
    }

    pub fn counters_mut(&mut self) -> &mut [IntersectionCounters] {
        &mut self.counters
    }

    pub fn num_intersections(&self) -> usize {
        self.counters.len()
    }

    fn at(&mut self, i: usize) -> Result<&mut IntersectionCounters, ConstraintError> {
        self.counters.get_mut(i).ok_or(ConstraintError::UnknownIntersection(i))
    }

    /// One green-time tick with the lights currently on at each intersection.
    pub fn update_green_time(&mut self, green: &[LightSet]) -> Result<(), ConstraintError> {
        if green.len() != self.counters.len() {
            return Err(ConstraintError::UnknownIntersection(green.len()));
        }
        for (c, on) in self.counters.iter_mut().zip(green) {
            for light in (0..MOVEMENTS).filter(|&l| counted(l)) {
                c.green_time[light] = if on.contains(light) { c.green_time[light] + 1 } else { 0 };
            }
        }
        Ok(())
    }

    pub fn update_phase_skip(&mut self, i: usize, old_phase: usize, new_phase: usize) -> Result<(), ConstraintError> {
        if old_phase >= PHASES || new_phase >= PHASES {
            return Err(ConstraintError::UnknownPhase(old_phase.max(new_phase)));
        }
        if old_phase == new_phase {
            return Err(ConstraintError::SamePhase {
                intersection: i,
                phase: new_phase,
            });
        }
        let c = self.at(i)?;
        for p in 0..PHASES {
            if p != old_phase && p != new_phase {
                c.phase_skips[p] += 1;
            }
        }
        c.phase_skips[new_phase] = 0;
        Ok(())
    }

    pub fn update_green_skip(&mut self, i: usize, old_green: LightSet, new_green: LightSet) -> Result<(), ConstraintError> {
        if old_green == new_green {
            return Err(ConstraintError::SameGreenSet { intersection: i });
        }
        let c = self.at(i)?;
        for light in (0..MOVEMENTS).filter(|&l| counted(l)) {
            let red_both = !old_green.contains(light) && !new_green.contains(light);
            c.green_skips[light] = if red_both { c.green_skips[light] + 1 } else { 0 };
        }
        Ok(())
    }

    /// Applies one env step: phase-change updates for every intersection whose
    /// commanded phase changed, then a green-time tick on the post-transition
    /// green sets.
    pub fn observe_step(&mut self, info: &StepInfo, phase_green: impl Fn(usize, usize) -> LightSet) -> Result<(), ConstraintError> {
        for (i, change) in info.phase_changes.iter().enumerate() {
            if let Some((old, new)) = *change {
                self.update_phase_skip(i, old, new)?;
                self.update_green_skip(i, phase_green(i, old), phase_green(i, new))?;
            }
        }
        self.update_green_time(&info.green)
    }

    pub fn compute_cost(&self, config: &ConstraintConfig) -> CostSample {
        let n = self.counters.len();
        if n == 0 {
            return CostSample::default();
        }
        let mean = |f: &dyn Fn(&IntersectionCounters) -> f64| self.counters.iter().map(f).sum::<f64>() / n as f64;
        let lights = MOVEMENTS as f64;
        let mut sample = CostSample {
            green_time: mean(&|c| c.green_time_violations(config.max_green_time) as f64 / lights),
            phase_skip: mean(&|c| c.phase_skip_violations(config.max_phase_skips) as f64 / PHASES as f64),
            green_skip: mean(&|c| c.green_skip_violations(config.max_green_skips) as f64 / lights),
            total: 0.0,
        };
        sample.total = sample.for_mode(config.mode);
        sample
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::standard_phases;

    fn green(p: usize) -> LightSet {
        standard_phases()[p].green
    }

    #[test]
    fn green_time_counts_consecutive_steps() {
        let mut t = ConstraintTracker::new(1);
        for _ in 0..3 {
            t.update_green_time(&[green(0)]).unwrap();
        }
        let ns: usize = "N_S".parse::<Movement>().unwrap().index();
        let es: usize = "E_S".parse::<Movement>().unwrap().index();
        assert_eq!(t.counters()[0].green_time[ns], 3);
        assert_eq!(t.counters()[0].green_time[es], 0);
    }

    #[test]
    fn green_time_violation_after_41_steps() {
        let mut t = ConstraintTracker::new(1);
        let cfg = ConstraintConfig::default();
        for _ in 0..40 {
            t.update_green_time(&[green(0)]).unwrap();
        }
        assert_eq!(t.compute_cost(&cfg).green_time, 0.0);
        t.update_green_time(&[green(0)]).unwrap();
        let ns = "N_S".parse::<Movement>().unwrap().index();
        assert_eq!(t.counters()[0].green_time[ns], 41);
        assert_eq!(t.compute_cost(&cfg).green_time, 2.0 / 12.0);
    }

    #[test]
    fn phase_skip_hand_trace() {
        let mut t = ConstraintTracker::new(1);
        t.update_phase_skip(0, 0, 1).unwrap();
        assert_eq!(t.counters()[0].phase_skips, [0, 0, 1, 1, 1, 1, 1, 1]);
        t.update_phase_skip(0, 1, 2).unwrap();
        assert_eq!(t.counters()[0].phase_skips, [1, 0, 0, 2, 2, 2, 2, 2]);
    }

    #[test]
    fn round_robin_never_violates_phase_skip() {
        let mut t = ConstraintTracker::new(1);
        let cfg = ConstraintConfig::default();
        let mut max_seen = 0;
        for k in 0..8 * 50 {
            t.update_phase_skip(0, k % 8, (k + 1) % 8).unwrap();
            max_seen = max_seen.max(*t.counters()[0].phase_skips.iter().max().unwrap());
            assert_eq!(t.compute_cost(&cfg).phase_skip, 0.0);
        }
        assert!(max_seen <= 7);
    }

    #[test]
    fn same_phase_is_a_contract_violation() {
        let mut t = ConstraintTracker::new(1);
        assert_eq!(
            t.update_phase_skip(0, 3, 3),
            Err(ConstraintError::SamePhase { intersection: 0, phase: 3 })
        );
        assert!(t.update_green_skip(0, green(2), green(2)).is_err());
        assert!(t.update_phase_skip(4, 0, 1).is_err());
    }

    #[test]
    fn green_skip_resets_and_violates() {
        let mut t = ConstraintTracker::new(1);
        let cfg = ConstraintConfig::default();
        let wl = "W_L".parse::<Movement>().unwrap().index();
        // alternate NS phases: W_L stays red across every change
        for k in 0..5 {
            t.update_green_skip(0, green(k % 2 * 2), green((k + 1) % 2 * 2)).unwrap();
        }
        assert_eq!(t.counters()[0].green_skips[wl], 5);
        assert!(t.compute_cost(&cfg).green_skip > 0.0);
        t.update_green_skip(0, green(0), green(3)).unwrap();
        assert_eq!(t.counters()[0].green_skips[wl], 0);
    }

    #[test]
    fn fresh_tracker_costs_nothing() {
        let t = ConstraintTracker::new(4);
        let c = t.compute_cost(&ConstraintConfig {
            mode: ConstraintMode::All,
            ..ConstraintConfig::default()
        });
        assert_eq!(c, CostSample::default());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("GreenTime".parse::<ConstraintMode>(), Ok(ConstraintMode::GreenTime));
        assert_eq!("all".parse::<ConstraintMode>(), Ok(ConstraintMode::All));
        assert!("speed".parse::<ConstraintMode>().is_err());
    }
}
