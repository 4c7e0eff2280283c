//! Reference aggregation mechanisms: contribution profile in, distribution of
//! the pool out.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Distribution, Instance};
use crate::solver::{solve_nash, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismId {
    /// Maximizes `Π u_i(δ)^{C_i}`.
    Nash,
    /// Whole pool to the project(s) with the highest total utility.
    Utilitarian,
    /// Each agent splits its contribution evenly over its acceptable projects.
    UniformSplit,
    /// Each agent funds its acceptable projects of highest total utility.
    ConditionalUtilitarian,
    /// Each agent funds its acceptable projects of lowest total utility.
    Anticut,
    /// Fixed three-agent rule that is contribution incentive-compatible but
    /// not decomposable.
    AppendixC,
}

impl MechanismId {
    pub const ALL: [MechanismId; 6] = [
        MechanismId::Nash,
        MechanismId::Utilitarian,
        MechanismId::UniformSplit,
        MechanismId::ConditionalUtilitarian,
        MechanismId::Anticut,
        MechanismId::AppendixC,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MechanismId::Nash => "nash",
            MechanismId::Utilitarian => "utilitarian",
            MechanismId::UniformSplit => "uniform_split",
            MechanismId::ConditionalUtilitarian => "conditional_utilitarian",
            MechanismId::Anticut => "anticut",
            MechanismId::AppendixC => "appendix_c",
        }
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MechanismId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMechanism(s.to_string()))
    }
}

/// Runs a mechanism with the default solver settings.
pub fn run_mechanism(id: MechanismId, instance: &Instance) -> Result<Distribution> {
    run_mechanism_with(id, instance, &SolverConfig::default())
}

pub fn run_mechanism_with(
    id: MechanismId,
    instance: &Instance,
    config: &SolverConfig,
) -> Result<Distribution> {
    match id {
        MechanismId::Nash => solve_nash(instance, config).map(|r| r.distribution),
        MechanismId::Utilitarian => Ok(utilitarian(instance)),
        MechanismId::UniformSplit => Ok(per_agent(instance, |_, acceptable| acceptable.to_vec())),
        MechanismId::ConditionalUtilitarian => {
            let welfare = welfare(instance);
            Ok(per_agent(instance, |_, acceptable| {
                extreme(acceptable, &welfare, |a, b| a > b)
            }))
        }
        MechanismId::Anticut => {
            let welfare = welfare(instance);
            Ok(per_agent(instance, |_, acceptable| {
                extreme(acceptable, &welfare, |a, b| a < b)
            }))
        }
        MechanismId::AppendixC => appendix_c(instance),
    }
}

/// Same profile with agent `agent` contributing `contribution` instead.
pub fn with_contribution(instance: &Instance, agent: usize, contribution: f64) -> Result<Instance> {
    instance.with_contribution(agent, contribution)
}

/// Unweighted utility sum per project over contributing agents.
fn welfare(instance: &Instance) -> Vec<f64> {
    let mut w = vec![0.0; instance.num_projects()];
    for agent in instance.agents().iter().filter(|a| a.contribution > 0.0) {
        for (wx, ux) in w.iter_mut().zip(&agent.utilities) {
            *wx += ux;
        }
    }
    w
}

fn ties_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Candidates whose welfare is best under `better`, ties included.
fn extreme(candidates: &[usize], welfare: &[f64], better: impl Fn(f64, f64) -> bool) -> Vec<usize> {
    let mut best: Option<f64> = None;
    for &x in candidates {
        let w = welfare[x];
        if best.is_none_or(|b| better(w, b) && !ties_equal(w, b)) {
            best = Some(w);
        }
    }
    match best {
        Some(b) => candidates
            .iter()
            .copied()
            .filter(|&x| ties_equal(welfare[x], b))
            .collect(),
        None => Vec::new(),
    }
}

fn utilitarian(instance: &Instance) -> Distribution {
    let m = instance.num_projects();
    let pool = instance.pool();
    if pool <= 0.0 {
        return Distribution::zero(m);
    }
    let all: Vec<usize> = (0..m).collect();
    let winners = extreme(&all, &welfare(instance), |a, b| a > b);
    let mut spend = vec![0.0; m];
    for &x in &winners {
        spend[x] = pool / winners.len() as f64;
    }
    Distribution { total: pool, spend }
}

/// Each contributing agent splits `C_i` evenly over the projects `pick` returns.
fn per_agent(instance: &Instance, pick: impl Fn(usize, &[usize]) -> Vec<usize>) -> Distribution {
    let mut spend = vec![0.0; instance.num_projects()];
    for (i, agent) in instance.agents().iter().enumerate() {
        if agent.contribution <= 0.0 {
            continue;
        }
        let targets = pick(i, &agent.acceptable());
        let share = agent.contribution / targets.len() as f64;
        for x in targets {
            spend[x] += share;
        }
    }
    Distribution {
        total: instance.pool(),
        spend,
    }
}

/// `f(C) = min·a + (C₁ − min)·b + (C₂ − min)·c + (min + C₃)·d`, `min = min(C₁, C₂)`,
/// defined only for the profile `u₁ = 1_{ab}`, `u₂ = 1_{ac}`, `u₃ = 1_{d}`.
fn appendix_c(instance: &Instance) -> Result<Distribution> {
    let unsupported = |reason: String| Error::UnsupportedInstance {
        mechanism: "appendix_c",
        reason,
    };
    if instance.num_agents() != 3 {
        return Err(unsupported(format!(
            "needs exactly 3 agents, got {}",
            instance.num_agents()
        )));
    }
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(["a", "b", "c", "d"]) {
        *slot = instance
            .project_index(name)
            .ok_or_else(|| unsupported(format!("missing project `{name}`")))?;
    }
    if instance.num_projects() != 4 {
        return Err(unsupported(format!(
            "needs exactly projects a, b, c, d, got {}",
            instance.num_projects()
        )));
    }
    let expected: [[f64; 4]; 3] = [[1.0, 1.0, 0.0, 0.0], [1.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
    for (agent, row) in instance.agents().iter().zip(&expected) {
        let actual: Vec<f64> = idx.iter().map(|&x| agent.utilities[x]).collect();
        if actual != row {
            return Err(unsupported(format!(
                "agent `{}` does not have the fixed approval set",
                agent.name
            )));
        }
    }
    let c: Vec<f64> = instance.agents().iter().map(|a| a.contribution).collect();
    let low = c[0].min(c[1]);
    let mut spend = vec![0.0; 4];
    spend[idx[0]] = low;
    spend[idx[1]] = c[0] - low;
    spend[idx[2]] = c[1] - low;
    spend[idx[3]] = low + c[2];
    Ok(Distribution {
        total: instance.pool(),
        spend,
    })
}
