//! Domain types for contribution profiles and distributions.
//!
//! Projects are addressed by index everywhere inside the library; names only
//! matter at the JSON boundary. Utilities are stored twice: as given in the
//! input (`raw_utilities`) and after rescaling so that each agent's least
//! preferred acceptable project has utility exactly 1 (`utilities`).

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used for every "sums to the total" comparison.
pub const DIST_TOL: f64 = 1e-9;

/// Absolute tolerance for a distribution (or pool) of the given size.
pub fn dist_tolerance(total: f64) -> f64 {
    DIST_TOL * total.abs().max(1.0)
}

/// Agent record as it appears in instance JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawAgent {
    pub name: String,
    pub budget: f64,
    pub contribution: f64,
    pub utilities: IndexMap<String, f64>,
}

/// Instance JSON: `{"projects": [...], "agents": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawInstance {
    pub projects: Vec<String>,
    pub agents: Vec<RawAgent>,
}

impl RawInstance {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("raw instance is always serializable")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub name: String,
    pub budget: f64,
    pub contribution: f64,
    /// Normalized utility per unit of money, indexed like `Instance::projects`.
    pub utilities: Vec<f64>,
    /// Utilities exactly as supplied.
    pub raw_utilities: Vec<f64>,
}

impl Agent {
    pub fn utility(&self, spend: &[f64]) -> f64 {
        self.utilities.iter().zip(spend).map(|(u, d)| u * d).sum()
    }

    pub fn accepts(&self, project: usize) -> bool {
        self.utilities[project] > 0.0
    }

    /// Projects with strictly positive utility.
    pub fn acceptable(&self) -> Vec<usize> {
        (0..self.utilities.len()).filter(|&x| self.accepts(x)).collect()
    }

    pub fn max_utility(&self) -> f64 {
        self.utilities.iter().copied().fold(0.0, f64::max)
    }

    /// Projects attaining the agent's maximum utility.
    pub fn favorites(&self) -> Vec<usize> {
        let top = self.max_utility();
        (0..self.utilities.len())
            .filter(|&x| self.utilities[x] >= top)
            .collect()
    }

    pub fn is_dichotomous(&self) -> bool {
        self.utilities.iter().all(|&u| u == 0.0 || u == 1.0)
    }
}

/// A validated, normalized contribution profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    projects: Vec<String>,
    agents: Vec<Agent>,
}

impl Instance {
    pub fn projects(&self) -> &[String] {
        &self.projects
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent(&self, index: usize) -> Result<&Agent> {
        self.agents.get(index).ok_or(Error::NoSuchAgent(index))
    }

    pub fn num_projects(&self) -> usize {
        self.projects.len()
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn project_index(&self, name: &str) -> Option<usize> {
        self.projects.iter().position(|p| p == name)
    }

    pub fn agent_index(&self, name: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.name == name)
    }

    /// Indices of agents with a strictly positive contribution.
    pub fn contributors(&self) -> Vec<usize> {
        (0..self.agents.len())
            .filter(|&i| self.agents[i].contribution > 0.0)
            .collect()
    }

    /// The pool: sum of all contributions.
    pub fn pool(&self) -> f64 {
        self.agents.iter().map(|a| a.contribution).sum()
    }

    /// Same profile with one contribution replaced.
    pub fn with_contribution(&self, agent: usize, contribution: f64) -> Result<Instance> {
        let a = self.agent(agent)?;
        if !(contribution >= 0.0 && contribution <= a.budget) {
            return Err(Error::ContributionExceedsBudget {
                agent: a.name.clone(),
                contribution,
                budget: a.budget,
            });
        }
        let mut next = self.clone();
        next.agents[agent].contribution = contribution;
        Ok(next)
    }

    /// Same profile with one agent's budget replaced (contribution untouched).
    pub fn with_budget(&self, agent: usize, budget: f64) -> Result<Instance> {
        let a = self.agent(agent)?;
        if !(budget.is_finite() && budget >= a.contribution) {
            return Err(Error::InvalidBudget {
                agent: a.name.clone(),
                budget,
            });
        }
        let mut next = self.clone();
        next.agents[agent].budget = budget;
        Ok(next)
    }

    /// Converts back to the JSON shape, reporting the utilities as supplied.
    pub fn to_raw(&self) -> RawInstance {
        self.to_raw_with(|a| &a.raw_utilities)
    }

    /// Converts back to the JSON shape, reporting normalized utilities.
    pub fn to_raw_normalized(&self) -> RawInstance {
        self.to_raw_with(|a| &a.utilities)
    }

    fn to_raw_with(&self, pick: impl Fn(&Agent) -> &Vec<f64>) -> RawInstance {
        RawInstance {
            projects: self.projects.clone(),
            agents: self
                .agents
                .iter()
                .map(|a| RawAgent {
                    name: a.name.clone(),
                    budget: a.budget,
                    contribution: a.contribution,
                    utilities: self
                        .projects
                        .iter()
                        .cloned()
                        .zip(pick(a).iter().copied())
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Instance> {
        validate_and_normalize(&RawInstance::from_json(text)?)
    }

    fn check_spend(&self, delta: &Distribution) -> Result<()> {
        if delta.spend.len() != self.projects.len() {
            return Err(Error::ProjectMismatch(format!(
                "expected {} projects, distribution has {}",
                self.projects.len(),
                delta.spend.len()
            )));
        }
        Ok(())
    }

    /// Fails unless `delta` is over this instance's projects and spends exactly the pool.
    pub fn check_pool_distribution(&self, delta: &Distribution) -> Result<()> {
        self.check_spend(delta)?;
        let pool = self.pool();
        if (delta.total - pool).abs() > dist_tolerance(pool) {
            return Err(Error::TotalMismatch {
                expected: pool,
                found: delta.total,
            });
        }
        Ok(())
    }
}

/// Validates a raw profile and rescales every agent's utilities so that the
/// smallest positive value is 1. Agents without a positive utility, or with
/// the same utility everywhere, become indifferent with all utilities 1.
pub fn validate_and_normalize(raw: &RawInstance) -> Result<Instance> {
    if raw.projects.is_empty() {
        return Err(Error::EmptyInstance("projects"));
    }
    if raw.agents.is_empty() {
        return Err(Error::EmptyInstance("agents"));
    }
    let mut seen = HashSet::new();
    for (pos, p) in raw.projects.iter().enumerate() {
        if p.is_empty() {
            return Err(Error::EmptyProjectName(pos));
        }
        if !seen.insert(p.as_str()) {
            return Err(Error::DuplicateProject(p.clone()));
        }
    }

    let mut names = HashSet::new();
    let mut agents = Vec::with_capacity(raw.agents.len());
    for ra in &raw.agents {
        if !names.insert(ra.name.as_str()) {
            return Err(Error::DuplicateAgent(ra.name.clone()));
        }
        if !(ra.budget.is_finite() && ra.budget >= 0.0) {
            return Err(Error::InvalidBudget {
                agent: ra.name.clone(),
                budget: ra.budget,
            });
        }
        if !(ra.contribution.is_finite() && ra.contribution >= 0.0 && ra.contribution <= ra.budget)
        {
            return Err(Error::ContributionExceedsBudget {
                agent: ra.name.clone(),
                contribution: ra.contribution,
                budget: ra.budget,
            });
        }
        if let Some(unknown) = ra.utilities.keys().find(|k| !seen.contains(k.as_str())) {
            return Err(Error::UnknownProject {
                agent: ra.name.clone(),
                project: unknown.clone(),
            });
        }
        let mut raw_utilities = Vec::with_capacity(raw.projects.len());
        for p in &raw.projects {
            let u = *ra.utilities.get(p).ok_or_else(|| Error::MissingUtility {
                agent: ra.name.clone(),
                project: p.clone(),
            })?;
            if !(u.is_finite() && u >= 0.0) {
                return Err(Error::NegativeUtility {
                    agent: ra.name.clone(),
                    project: p.clone(),
                    value: u,
                });
            }
            raw_utilities.push(u);
        }
        agents.push(Agent {
            name: ra.name.clone(),
            budget: ra.budget,
            contribution: ra.contribution,
            utilities: normalize_utilities(&raw_utilities),
            raw_utilities,
        });
    }

    Ok(Instance {
        projects: raw.projects.clone(),
        agents,
    })
}

fn normalize_utilities(raw: &[f64]) -> Vec<f64> {
    let first = raw[0];
    let min_positive = raw
        .iter()
        .copied()
        .filter(|&u| u > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_positive.is_finite() || raw.iter().all(|&u| u == first) {
        return vec![1.0; raw.len()];
    }
    raw.iter().map(|&u| u / min_positive).collect()
}

/// Nonnegative spend per project, indexed like the instance's projects.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub total: f64,
    pub spend: Vec<f64>,
}

/// Distribution JSON: `{"total": .., "spend": {"a": .., ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionJson {
    pub total: f64,
    pub spend: IndexMap<String, f64>,
}

impl Distribution {
    pub fn new(spend: Vec<f64>) -> Self {
        let total = spend.iter().sum();
        Distribution { total, spend }
    }

    pub fn zero(projects: usize) -> Self {
        Distribution {
            total: 0.0,
            spend: vec![0.0; projects],
        }
    }

    pub fn uniform(projects: usize, total: f64) -> Self {
        Distribution {
            total,
            spend: vec![total / projects as f64; projects],
        }
    }

    /// Point mass of `amount` on one project.
    pub fn single(projects: usize, project: usize, amount: f64) -> Self {
        let mut spend = vec![0.0; projects];
        spend[project] = amount;
        Distribution {
            total: amount,
            spend,
        }
    }

    /// Nonnegativity and the total-sum invariant.
    pub fn is_valid(&self) -> bool {
        self.spend.iter().all(|&d| d >= 0.0 && d.is_finite())
            && (self.spend.iter().sum::<f64>() - self.total).abs() <= dist_tolerance(self.total)
    }

    /// Projects with spend above `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        (0..self.spend.len())
            .filter(|&x| self.spend[x] > threshold)
            .collect()
    }

    pub fn l1_distance(&self, other: &Distribution) -> f64 {
        self.spend
            .iter()
            .zip(&other.spend)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn to_json(&self, instance: &Instance) -> DistributionJson {
        DistributionJson {
            total: self.total,
            spend: instance
                .projects()
                .iter()
                .cloned()
                .zip(self.spend.iter().copied())
                .collect(),
        }
    }

    /// Reads a distribution keyed by project name. Projects left out get zero spend.
    pub fn from_json(instance: &Instance, json: &DistributionJson) -> Result<Self> {
        let mut spend = vec![0.0; instance.num_projects()];
        for (name, &value) in &json.spend {
            let x = instance.project_index(name).ok_or_else(|| {
                Error::ProjectMismatch(format!("unknown project `{name}` in distribution"))
            })?;
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::ProjectMismatch(format!(
                    "spend on `{name}` must be finite and nonnegative, got {value}"
                )));
            }
            spend[x] = value;
        }
        let dist = Distribution {
            total: json.total,
            spend,
        };
        if !dist.is_valid() {
            return Err(Error::TotalMismatch {
                expected: json.total,
                found: dist.spend.iter().sum(),
            });
        }
        Ok(dist)
    }
}

/// Per-agent distributions summing to a collective one.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub parts: Vec<Distribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionJson {
    pub parts: IndexMap<String, DistributionJson>,
}

impl Decomposition {
    /// Per-project sum of all parts.
    pub fn combined(&self, projects: usize) -> Vec<f64> {
        let mut out = vec![0.0; projects];
        for part in &self.parts {
            for (o, d) in out.iter_mut().zip(&part.spend) {
                *o += d;
            }
        }
        out
    }

    /// Checks the decomposition invariants against `delta`: parts sum to it,
    /// part `i` totals `C_i`, and only spends on projects agent `i` accepts.
    /// `tol` is an absolute per-project tolerance.
    pub fn violations(&self, instance: &Instance, delta: &Distribution, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.parts.len() != instance.num_agents() {
            out.push(format!(
                "{} parts for {} agents",
                self.parts.len(),
                instance.num_agents()
            ));
            return out;
        }
        for (x, (sum, target)) in self
            .combined(instance.num_projects())
            .iter()
            .zip(&delta.spend)
            .enumerate()
        {
            if (sum - target).abs() > tol {
                out.push(format!(
                    "project `{}`: parts sum to {sum}, distribution has {target}",
                    instance.projects()[x]
                ));
            }
        }
        for (agent, part) in instance.agents().iter().zip(&self.parts) {
            let total: f64 = part.spend.iter().sum();
            if (total - agent.contribution).abs() > tol {
                out.push(format!(
                    "agent `{}`: part totals {total}, contribution is {}",
                    agent.name, agent.contribution
                ));
            }
            for (x, &d) in part.spend.iter().enumerate() {
                if d < -tol || (d > tol && !agent.accepts(x)) {
                    out.push(format!(
                        "agent `{}`: spends {d} on project `{}`",
                        agent.name,
                        instance.projects()[x]
                    ));
                }
            }
        }
        out
    }

    pub fn to_json(&self, instance: &Instance) -> DecompositionJson {
        DecompositionJson {
            parts: instance
                .agents()
                .iter()
                .zip(&self.parts)
                .map(|(a, p)| (a.name.clone(), p.to_json(instance)))
                .collect(),
        }
    }
}

/// Linear utility `Σ_x δ(x)·u_i(x)` of one agent.
pub fn utility_of(instance: &Instance, agent: usize, delta: &Distribution) -> Result<f64> {
    instance.check_spend(delta)?;
    Ok(instance.agent(agent)?.utility(&delta.spend))
}

/// `Σ_i C_i·log u_i(δ)` over contributing agents; `-inf` if one of them gets nothing.
pub fn log_nash_objective(instance: &Instance, delta: &Distribution) -> Result<f64> {
    instance.check_spend(delta)?;
    Ok(log_nash_unchecked(instance, &delta.spend))
}

pub(crate) fn log_nash_unchecked(instance: &Instance, spend: &[f64]) -> f64 {
    let mut total = 0.0;
    for agent in instance.agents() {
        if agent.contribution > 0.0 {
            let u = agent.utility(spend);
            if u <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += agent.contribution * u.ln();
        }
    }
    total
}

pub fn pool(instance: &Instance) -> f64 {
    instance.pool()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn raw(projects: &[&str], agents: &[(&str, f64, &[f64])]) -> RawInstance {
        RawInstance {
            projects: projects.iter().map(|p| p.to_string()).collect(),
            agents: agents
                .iter()
                .map(|(name, c, u)| RawAgent {
                    name: name.to_string(),
                    budget: *c,
                    contribution: *c,
                    utilities: projects
                        .iter()
                        .map(|p| p.to_string())
                        .zip(u.iter().copied())
                        .collect(),
                })
                .collect(),
        }
    }

    fn pair() -> Instance {
        validate_and_normalize(&raw(
            &["a", "b"],
            &[("1", 1.0, &[1.0, 0.0]), ("2", 1.0, &[1.0, 3.0])],
        ))
        .unwrap()
    }

    #[test]
    fn normalizes_by_min_positive_utility() {
        let inst = validate_and_normalize(&raw(&["a", "b", "c"], &[("1", 1.0, &[2.0, 0.0, 6.0])]))
            .unwrap();
        assert_eq!(inst.agents()[0].utilities, vec![1.0, 0.0, 3.0]);
        assert_eq!(inst.agents()[0].raw_utilities, vec![2.0, 0.0, 6.0]);
    }

    #[test]
    fn all_zero_agent_becomes_indifferent() {
        let inst = validate_and_normalize(&raw(&["a", "b"], &[("1", 1.0, &[0.0, 0.0])])).unwrap();
        assert_eq!(inst.agents()[0].utilities, vec![1.0, 1.0]);
    }

    #[test]
    fn normalized_agent_unchanged() {
        let inst = pair();
        assert_eq!(inst.agents()[1].utilities, vec![1.0, 3.0]);
    }

    #[test]
    fn validation_errors_name_the_offender() {
        let mut r = raw(&["a", "b"], &[("x", 1.0, &[1.0, -1.0])]);
        match validate_and_normalize(&r) {
            Err(Error::NegativeUtility { agent, project, .. }) => {
                assert_eq!((agent.as_str(), project.as_str()), ("x", "b"))
            }
            other => panic!("{other:?}"),
        }
        r.agents[0].utilities.insert("b".into(), 1.0);
        r.agents[0].contribution = 2.0;
        assert!(matches!(
            validate_and_normalize(&r),
            Err(Error::ContributionExceedsBudget { .. })
        ));
        let dup = raw(&["a", "a"], &[("x", 1.0, &[1.0, 1.0])]);
        assert!(matches!(validate_and_normalize(&dup), Err(Error::DuplicateProject(p)) if p == "a"));
        let twins = raw(&["a"], &[("x", 1.0, &[1.0]), ("x", 1.0, &[1.0])]);
        assert!(matches!(validate_and_normalize(&twins), Err(Error::DuplicateAgent(n)) if n == "x"));
        let empty = raw(&["a"], &[]);
        assert!(matches!(validate_and_normalize(&empty), Err(Error::EmptyInstance("agents"))));
        let mut missing = raw(&["a", "b"], &[("x", 1.0, &[1.0, 1.0])]);
        missing.agents[0].utilities.shift_remove("b");
        assert!(matches!(validate_and_normalize(&missing), Err(Error::MissingUtility { .. })));
    }

    #[test]
    fn utilities_and_objective_on_pair() {
        let inst = pair();
        let opt = Distribution::new(vec![1.5, 0.5]);
        assert_eq!(utility_of(&inst, 1, &opt).unwrap(), 3.0);
        assert_eq!(utility_of(&inst, 0, &Distribution::zero(2)).unwrap(), 0.0);
        let two_b = Distribution::new(vec![0.0, 2.0]);
        assert_eq!(utility_of(&inst, 0, &two_b).unwrap(), 0.0);
        let f = log_nash_objective(&inst, &opt).unwrap();
        assert!((f - (1.5f64.ln() + 3.0f64.ln())).abs() < 1e-15);
        assert!((f - 1.5041).abs() < 1e-4);
        assert_eq!(log_nash_objective(&inst, &two_b).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(
            utility_of(&inst, 0, &Distribution::new(vec![1.0])),
            Err(Error::ProjectMismatch(_))
        ));
    }

    #[test]
    fn zero_contribution_agents_are_skipped() {
        let inst = validate_and_normalize(&raw(&["a", "b"], &[("1", 0.0, &[1.0, 0.0])])).unwrap();
        let d = Distribution::single(2, 1, 0.0);
        assert_eq!(log_nash_objective(&inst, &d).unwrap(), 0.0);
    }

    #[test]
    fn pool_sums_contributions() {
        assert_eq!(pool(&pair()), 2.0);
        let zero = validate_and_normalize(&raw(&["a"], &[("1", 0.0, &[1.0]), ("2", 0.0, &[1.0])]))
            .unwrap();
        assert_eq!(pool(&zero), 0.0);
    }

    #[test]
    fn with_contribution_is_value_semantics() {
        let inst = pair();
        let next = inst.with_contribution(1, 0.0).unwrap();
        assert_eq!(next.agents()[1].contribution, 0.0);
        assert_eq!(inst.agents()[1].contribution, 1.0);
        assert_eq!(inst.with_contribution(1, 1.0).unwrap(), inst);
        let half = inst.with_contribution(0, 0.5).unwrap();
        assert_eq!(half.pool(), 1.5);
        assert!(matches!(
            inst.with_contribution(0, 1.5),
            Err(Error::ContributionExceedsBudget { .. })
        ));
    }

    #[test]
    fn distribution_json_by_name() {
        let inst = pair();
        let json: DistributionJson =
            serde_json::from_str(r#"{"total": 2.0, "spend": {"b": 2.0}}"#).unwrap();
        let d = Distribution::from_json(&inst, &json).unwrap();
        assert_eq!(d.spend, vec![0.0, 2.0]);
        let bad: DistributionJson =
            serde_json::from_str(r#"{"total": 2.0, "spend": {"z": 2.0}}"#).unwrap();
        assert!(matches!(
            Distribution::from_json(&inst, &bad),
            Err(Error::ProjectMismatch(_))
        ));
    }
}
