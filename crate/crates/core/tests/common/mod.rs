//! Test-only oracles, independent of the library's implementation paths.
#![allow(dead_code)]

use atsc::sim::{standard_phases, LightSet, Movement, MOVEMENTS, PHASES};

/// From-scratch counters for one intersection, recomputed from a full
/// history. `greens[t]` is the set of lights on after step `t`; `changes`
/// lists every `(old, new)` phase change in order.
pub struct ReplayCounters {
    pub green_time: [u32; MOVEMENTS],
    pub phase_skips: [u32; PHASES],
    pub green_skips: [u32; MOVEMENTS],
}

pub fn replay_green_time(greens: &[LightSet]) -> [u32; MOVEMENTS] {
    let mut out = [0; MOVEMENTS];
    for (l, slot) in out.iter_mut().enumerate() {
        if Movement::from_index(l).is_right_turn() {
            continue;
        }
        *slot = greens.iter().rev().take_while(|g| g.contains(l)).count() as u32;
    }
    out
}

pub fn replay_phase_skips(changes: &[(usize, usize)]) -> [u32; PHASES] {
    let mut out = [0; PHASES];
    for (p, slot) in out.iter_mut().enumerate() {
        let since = changes.iter().rposition(|&(_, new)| new == p).map_or(0, |i| i + 1);
        *slot = changes[since..].iter().filter(|&&(old, new)| old != p && new != p).count() as u32;
    }
    out
}

pub fn replay_green_skips(changes: &[(LightSet, LightSet)]) -> [u32; MOVEMENTS] {
    let mut out = [0; MOVEMENTS];
    for (l, slot) in out.iter_mut().enumerate() {
        if Movement::from_index(l).is_right_turn() {
            continue;
        }
        *slot = changes
            .iter()
            .rev()
            .take_while(|(old, new)| !old.contains(l) && !new.contains(l))
            .count() as u32;
    }
    out
}

pub fn phase_green(p: usize) -> LightSet {
    standard_phases()[p].green
}

/// Straight-line evaluation of a tanh MLP from its flat parameters, one
/// sample at a time with explicit loops.
pub fn mlp_reference(sizes: &[usize], params: &[f64], x: &[f64]) -> Vec<f64> {
    let mut act = x.to_vec();
    let mut offset = 0;
    let layers = sizes.len() - 1;
    for k in 0..layers {
        let (fi, fo) = (sizes[k], sizes[k + 1]);
        let mut next = vec![0.0; fo];
        for j in 0..fo {
            let mut z = params[offset + fi * fo + j];
            for i in 0..fi {
                z += act[i] * params[offset + i * fo + j];
            }
            next[j] = if k + 1 < layers { z.tanh() } else { z };
        }
        offset += (fi + 1) * fo;
        act = next;
    }
    act
}

/// Central finite-difference gradient of `f` at `params`.
pub fn finite_difference<F: FnMut(&[f64]) -> f64>(params: &[f64], h: f64, mut f: F) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative error used for gradient checks.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Advantages as the explicit double sum of discounted TD errors.
pub fn gae_brute_force(r: &[f64], v: &[f64], nv: &[f64], done: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = r.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| r[t] + gamma * if done[t] { 0.0 } else { nv[t] } - v[t])
        .collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut weight = 1.0;
            for k in t..n {
                sum += weight * delta[k];
                if done[k] {
                    break;
                }
                weight *= gamma * lambda;
            }
            sum
        })
        .collect()
}
