//! Seeded random instances for property suites.
//!
//! Instance `k` of a suite is drawn from its own ChaCha stream keyed by
//! `(seed, k)`, so results do not depend on evaluation order or thread count.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batch;
use crate::model::{validate_and_normalize, Distribution, Instance, RawAgent, RawInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub instances: usize,
    pub max_agents: usize,
    pub max_projects: usize,
}

impl SuiteConfig {
    pub fn new(seed: u64, instances: usize, max_agents: usize, max_projects: usize) -> Self {
        SuiteConfig {
            seed,
            instances,
            max_agents,
            max_projects,
        }
    }

    pub fn rng(&self, index: usize) -> ChaCha8Rng {
        instance_rng(self.seed, index)
    }

    /// Generates instance `index` and hands it to `f`, for every index, as one batch.
    pub fn run<R, F>(&self, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize, Instance) -> R + Sync + Send,
    {
        batch::map_range(self.instances, |k| {
            let mut rng = self.rng(k);
            f(k, random_instance(&mut rng, self.max_agents, self.max_projects))
        })
    }
}

pub fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn project_name(x: usize) -> String {
    let letters = b"abcdefghijklmnopqrstuvwxyz";
    if x < letters.len() {
        (letters[x] as char).to_string()
    } else {
        format!("p{x}")
    }
}

/// Utility row: half the agents are dichotomous, the rest cardinal with
/// integer or real values in `[1, 5]` and some zeros. At least one entry is
/// positive.
fn random_utilities<R: Rng>(rng: &mut R, allowed: &[usize], m: usize) -> Vec<f64> {
    let mut u = vec![0.0; m];
    let dichotomous = rng.gen_bool(0.5);
    let integer = rng.gen_bool(0.5);
    for &x in allowed {
        if rng.gen_bool(0.35) {
            continue;
        }
        u[x] = if dichotomous {
            1.0
        } else if integer {
            rng.gen_range(1..=5) as f64
        } else {
            rng.gen_range(1.0..5.0)
        };
    }
    if u.iter().all(|&v| v == 0.0) {
        let x = *allowed.choose(rng).expect("allowed set is nonempty");
        u[x] = if dichotomous { 1.0 } else { rng.gen_range(1..=5) as f64 };
    }
    u
}

/// Contribution `k/20` for `k` in `1..=20`.
fn random_contribution<R: Rng>(rng: &mut R) -> f64 {
    rng.gen_range(1..=20) as f64 / 20.0
}

fn build(projects: Vec<String>, rows: Vec<(Vec<f64>, f64)>) -> Instance {
    let agents = rows
        .into_iter()
        .enumerate()
        .map(|(i, (u, c))| RawAgent {
            name: (i + 1).to_string(),
            budget: 1.0,
            contribution: c,
            utilities: projects.iter().cloned().zip(u).collect::<IndexMap<_, _>>(),
        })
        .collect();
    validate_and_normalize(&RawInstance { projects, agents }).expect("generated instances are valid")
}

/// Instance with `1..=max_agents` agents, `2..=max_projects` projects, budgets
/// 1 and contributions in `(0, 1]`.
pub fn random_instance<R: Rng>(rng: &mut R, max_agents: usize, max_projects: usize) -> Instance {
    let n = rng.gen_range(1..=max_agents.max(1));
    let m = rng.gen_range(2.min(max_projects)..=max_projects.max(1));
    let all: Vec<usize> = (0..m).collect();
    let rows = (0..n)
        .map(|_| (random_utilities(rng, &all, m), random_contribution(rng)))
        .collect();
    build((0..m).map(project_name).collect(), rows)
}

/// Random distribution of `total` with some exact zeros.
pub fn random_distribution<R: Rng>(rng: &mut R, projects: usize, total: f64) -> Distribution {
    let mut w: Vec<f64> = (0..projects)
        .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..1.0) })
        .collect();
    if w.iter().sum::<f64>() <= 0.0 {
        w[rng.gen_range(0..projects)] = 1.0;
    }
    let s: f64 = w.iter().sum();
    Distribution {
        total,
        spend: w.into_iter().map(|v| v / s * total).collect(),
    }
}

/// Instance with a planted group whose members value only a small project
/// subset, plus unrestricted other agents. Returns the group's agent indices.
pub fn random_core_instance<R: Rng>(rng: &mut R, max_agents: usize, max_projects: usize) -> (Instance, Vec<usize>) {
    let m = rng.gen_range(3.min(max_projects)..=max_projects.max(1));
    let n = rng.gen_range(2.min(max_agents)..=max_agents.max(1));
    let group_size = rng.gen_range(1..=n.saturating_sub(1).max(1));
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let subset: Vec<usize> = order[..rng.gen_range(1..=2.min(m - 1).max(1))].to_vec();
    let all: Vec<usize> = (0..m).collect();
    let rows = (0..n)
        .map(|i| {
            let allowed = if i < group_size { &subset } else { &all };
            (random_utilities(rng, allowed, m), random_contribution(rng))
        })
        .collect();
    (build((0..m).map(project_name).collect(), rows), (0..group_size).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_index() {
        let cfg = SuiteConfig::new(7, 20, 6, 5);
        let a = cfg.run(|_, inst| inst.to_raw());
        let b: Vec<RawInstance> = (0..20)
            .map(|k| random_instance(&mut cfg.rng(k), 6, 5).to_raw())
            .collect();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn bounds_respected() {
        let cfg = SuiteConfig::new(1, 200, 5, 4);
        for inst in cfg.run(|_, inst| inst) {
            assert!((1..=5).contains(&inst.num_agents()));
            assert!((2..=4).contains(&inst.num_projects()));
            for a in inst.agents() {
                assert!(a.contribution > 0.0 && a.contribution <= 1.0);
                assert!(a.max_utility() >= 1.0);
            }
        }
    }

    #[test]
    fn planted_group_is_confined() {
        for k in 0..100 {
            let (inst, group) = random_core_instance(&mut instance_rng(3, k), 6, 6);
            let mut support = vec![false; inst.num_projects()];
            for &i in &group {
                for x in inst.agents()[i].acceptable() {
                    support[x] = true;
                }
            }
            let size = support.iter().filter(|&&b| b).count();
            assert!((1..=2).contains(&size) && size < inst.num_projects());
        }
    }

    #[test]
    fn random_distribution_sums() {
        let mut rng = instance_rng(0, 0);
        for _ in 0..50 {
            let d = random_distribution(&mut rng, 4, 2.5);
            assert!(d.is_valid());
        }
    }
}
