mod common;

use atsc::constraints::{ConstraintConfig, ConstraintMode, ConstraintTracker};
use atsc::sim::{LightSet, Movement, MOVEMENTS};
use common::{phase_green, replay_green_skips, replay_green_time, replay_phase_skips};
use proptest::prelude::*;

fn light(name: &str) -> usize {
    name.parse::<Movement>().unwrap().index()
}

#[test]
fn worked_greentime_cost_example() {
    let mut t = ConstraintTracker::new(2);
    for l in ["N_S", "E_L", "W_S"] {
        t.counters_mut()[0].green_time[light(l)] = 41;
    }
    let c = t.compute_cost(&ConstraintConfig::default());
    assert_eq!(c.green_time, 0.125);
    assert_eq!(c.total, 0.125);
}

#[test]
fn saturated_greentime_cost_excludes_right_turns() {
    let mut t = ConstraintTracker::new(3);
    let all = LightSet::from_bits(0xFFF);
    for _ in 0..41 {
        t.update_green_time(&[all, all, all]).unwrap();
    }
    let c = t.compute_cost(&ConstraintConfig::default());
    assert_eq!(c.green_time, 8.0 / 12.0);
}

#[test]
fn all_mode_sums_constraints() {
    let mut t = ConstraintTracker::new(1);
    t.counters_mut()[0].green_time[light("N_S")] = 100;
    t.counters_mut()[0].phase_skips[3] = 100;
    t.counters_mut()[0].green_skips[light("E_L")] = 100;
    let c = t.compute_cost(&ConstraintConfig {
        mode: ConstraintMode::All,
        ..ConstraintConfig::default()
    });
    assert_eq!(c.total, 1.0 / 12.0 + 1.0 / 8.0 + 1.0 / 12.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn incremental_counters_match_replay(
        phases in proptest::collection::vec(0usize..8, 1..300),
        extra_lights in proptest::collection::vec(0u16..4096, 1..300),
    ) {
        let mut t = ConstraintTracker::new(1);
        let mut greens = Vec::new();
        let mut changes = Vec::new();
        let mut set_changes = Vec::new();
        let mut old = 0;
        for &p in &phases {
            if p != old {
                t.update_phase_skip(0, old, p).unwrap();
                t.update_green_skip(0, phase_green(old), phase_green(p)).unwrap();
                changes.push((old, p));
                set_changes.push((phase_green(old), phase_green(p)));
            }
            t.update_green_time(&[phase_green(p)]).unwrap();
            greens.push(phase_green(p));
            old = p;
        }
        let c = &t.counters()[0];
        prop_assert_eq!(c.green_time, replay_green_time(&greens));
        prop_assert_eq!(c.phase_skips, replay_phase_skips(&changes));
        prop_assert_eq!(c.green_skips, replay_green_skips(&set_changes));

        // arbitrary light sets for green time
        let mut t = ConstraintTracker::new(1);
        let sets: Vec<LightSet> = extra_lights.iter().map(|&b| LightSet::from_bits(b)).collect();
        for s in &sets {
            t.update_green_time(&[*s]).unwrap();
        }
        prop_assert_eq!(t.counters()[0].green_time, replay_green_time(&sets));
    }

    #[test]
    fn costs_bounded_and_right_turns_neutral(
        gt in proptest::collection::vec(0u32..80, 2 * MOVEMENTS),
        ps in proptest::collection::vec(0u32..40, 2 * 8),
        gs in proptest::collection::vec(0u32..10, 2 * MOVEMENTS),
        toggles in proptest::collection::vec(0u16..16, 1..20),
    ) {
        let mut t = ConstraintTracker::new(2);
        for i in 0..2 {
            let c = &mut t.counters_mut()[i];
            for l in 0..MOVEMENTS {
                if !Movement::from_index(l).is_right_turn() {
                    c.green_time[l] = gt[i * MOVEMENTS + l];
                    c.green_skips[l] = gs[i * MOVEMENTS + l];
                }
            }
            c.phase_skips.copy_from_slice(&ps[i * 8..(i + 1) * 8]);
        }
        let all = ConstraintConfig { mode: ConstraintMode::All, ..ConstraintConfig::default() };
        let before = t.compute_cost(&all);
        for v in [before.green_time, before.phase_skip, before.green_skip] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((0.0..=3.0).contains(&before.total));

        // only right-turn lights toggle: counters of counted lights reset or
        // grow identically, and right turns stay at zero
        let rights = LightSet::right_turns();
        let mut a = t.clone();
        let mut b = t.clone();
        for bits in toggles {
            let mut on_b = LightSet::EMPTY;
            for (k, m) in rights.iter().enumerate() {
                if bits & (1 << k) != 0 {
                    on_b = on_b.with(m.index());
                }
            }
            a.update_green_time(&[LightSet::EMPTY, LightSet::EMPTY]).unwrap();
            b.update_green_time(&[on_b, on_b]).unwrap();
            prop_assert_eq!(a.compute_cost(&all), b.compute_cost(&all));
        }
    }

    #[test]
    fn new_phase_lights_have_zero_green_skips(seq in proptest::collection::vec(0usize..8, 2..100)) {
        let mut t = ConstraintTracker::new(1);
        let mut old = seq[0];
        for &p in &seq[1..] {
            if p == old { continue; }
            t.update_green_skip(0, phase_green(old), phase_green(p)).unwrap();
            for m in phase_green(p).iter() {
                prop_assert_eq!(t.counters()[0].green_skips[m.index()], 0);
            }
            old = p;
        }
    }
}
