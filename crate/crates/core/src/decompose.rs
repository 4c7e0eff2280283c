//! Splitting a collective distribution into per-agent spending plans.
//!
//! A distribution is decomposable when every agent's contribution can be
//! routed to projects it accepts so that the routed amounts add up to the
//! distribution. That is a bipartite transportation problem, so we decide it
//! with max-flow and read a violated Hall-type subset inequality off the
//! minimum cut when it fails. The enumeration oracle checks the same subset
//! inequalities directly in exact arithmetic.

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::model::{dist_tolerance, Decomposition, Distribution, Instance};
use crate::rational::{rationalize, MAX_DENOMINATOR};
use crate::solver::{default_support_threshold, kkt_check};

/// Largest KKT residual at which the proportional split is still accepted.
pub const PROPORTIONAL_KKT_LIMIT: f64 = 1e-6;

/// Subset enumeration guard for the oracle.
pub const ORACLE_MAX_AGENTS: usize = 20;

/// Which projects an agent may fund in a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    /// Any project with positive utility.
    Acceptable,
    /// Only projects of maximum utility.
    Favorite,
}

impl Strength {
    pub fn from_strong(strong: bool) -> Self {
        if strong {
            Strength::Favorite
        } else {
            Strength::Acceptable
        }
    }

    fn allowed(self, instance: &Instance, agent: usize) -> Vec<usize> {
        let a = &instance.agents()[agent];
        match self {
            Strength::Acceptable => a.acceptable(),
            Strength::Favorite => a.favorites(),
        }
    }
}

/// A set of agents whose contributions exceed the spend on the projects they
/// may fund.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetWitness {
    pub agent_subset: Vec<usize>,
    pub covered_spend: f64,
    pub required: f64,
}

impl SubsetWitness {
    fn measure(instance: &Instance, delta: &Distribution, agents: Vec<usize>, strength: Strength) -> Self {
        let mut covered = vec![false; instance.num_projects()];
        for &i in &agents {
            for x in strength.allowed(instance, i) {
                covered[x] = true;
            }
        }
        SubsetWitness {
            covered_spend: (0..covered.len())
                .filter(|&x| covered[x])
                .map(|x| delta.spend[x])
                .sum(),
            required: agents
                .iter()
                .map(|&i| instance.agents()[i].contribution)
                .sum(),
            agent_subset: agents,
        }
    }

    pub fn shortfall(&self) -> f64 {
        self.required - self.covered_spend
    }

    pub fn agent_names<'a>(&self, instance: &'a Instance) -> Vec<&'a str> {
        self.agent_subset
            .iter()
            .map(|&i| instance.agents()[i].name.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecompositionVerdict {
    Decomposable(Decomposition),
    Violated(SubsetWitness),
}

impl DecompositionVerdict {
    pub fn is_decomposable(&self) -> bool {
        matches!(self, DecompositionVerdict::Decomposable(_))
    }

    pub fn witness(&self) -> Option<&SubsetWitness> {
        match self {
            DecompositionVerdict::Violated(w) => Some(w),
            DecompositionVerdict::Decomposable(_) => None,
        }
    }
}

/// Splits a Nash distribution by `δ_i(x) = C_i·δ(x)·u_i(x)/u_i(δ)`.
///
/// The parts only add back up to `δ` at the optimum, so the KKT residual is
/// checked first.
pub fn proportional_decomposition(instance: &Instance, delta: &Distribution) -> Result<Decomposition> {
    let report = kkt_check(instance, delta, default_support_threshold(instance.pool()))?;
    if report.max_residual > PROPORTIONAL_KKT_LIMIT {
        return Err(Error::NotAtOptimum(report.max_residual));
    }
    let parts = instance
        .agents()
        .iter()
        .map(|agent| {
            if agent.contribution <= 0.0 {
                return Distribution::zero(instance.num_projects());
            }
            let u = agent.utility(&delta.spend);
            if !(u > 0.0) {
                return Distribution::zero(instance.num_projects());
            }
            let scale = agent.contribution / u;
            let spend = delta
                .spend
                .iter()
                .zip(&agent.utilities)
                .map(|(d, ux)| scale * d * ux)
                .collect();
            Distribution {
                total: agent.contribution,
                spend,
            }
        })
        .collect();
    Ok(Decomposition { parts })
}

/// Decomposability via max-flow: source → agent (capacity `C_i`), agent →
/// acceptable project (unbounded), project → sink (capacity `δ(x)`).
pub fn check_decomposable(instance: &Instance, delta: &Distribution) -> Result<DecompositionVerdict> {
    check_with(instance, delta, Strength::Acceptable)
}

/// As [`check_decomposable`], but agents may only fund favorite projects.
pub fn check_strong_decomposable(
    instance: &Instance,
    delta: &Distribution,
) -> Result<DecompositionVerdict> {
    check_with(instance, delta, Strength::Favorite)
}

pub fn check_with(
    instance: &Instance,
    delta: &Distribution,
    strength: Strength,
) -> Result<DecompositionVerdict> {
    instance.check_pool_distribution(delta)?;
    let n = instance.num_agents();
    let m = instance.num_projects();
    let pool = instance.pool();
    let tol = dist_tolerance(pool);

    let source = n + m;
    let sink = source + 1;
    let mut net = FlowNetwork::new(n + m + 2, 1e-15 * pool.max(1.0));
    let mut routes = Vec::new();
    for (i, agent) in instance.agents().iter().enumerate() {
        net.add_edge(source, i, agent.contribution);
        for x in strength.allowed(instance, i) {
            routes.push((i, x, net.add_edge(i, n + x, f64::INFINITY)));
        }
    }
    for (x, &d) in delta.spend.iter().enumerate() {
        net.add_edge(n + x, sink, d);
    }
    let flow = net.max_flow(source, sink);

    if flow >= pool - tol {
        let mut parts: Vec<Distribution> = (0..n).map(|_| Distribution::zero(m)).collect();
        for (i, x, id) in routes {
            parts[i].spend[x] += net.flow(id);
        }
        for part in &mut parts {
            part.total = part.spend.iter().sum();
        }
        return Ok(DecompositionVerdict::Decomposable(Decomposition { parts }));
    }

    let side = net.source_side(source);
    let agents = (0..n).filter(|&i| side[i]).collect();
    Ok(DecompositionVerdict::Violated(SubsetWitness::measure(
        instance, delta, agents, strength,
    )))
}

/// Checks the subset inequality `Σ_{x ∈ ∪A_i} δ(x) ≥ Σ_{i ∈ N'} C_i` for
/// every agent subset, in exact arithmetic on rationalized inputs. Returns
/// the first violated subset in bitmask order.
///
/// The same slack as the flow check applies (`1e-9·max(1, |C|)`), so that a
/// distribution which is optimal only up to float error is judged the same
/// way by both.
pub fn brute_force_decomposability_oracle(
    instance: &Instance,
    delta: &Distribution,
    strong: bool,
) -> Result<Option<SubsetWitness>> {
    instance.check_pool_distribution(delta)?;
    let n = instance.num_agents();
    if n > ORACLE_MAX_AGENTS {
        return Err(Error::TooManyAgents {
            agents: n,
            limit: ORACLE_MAX_AGENTS,
        });
    }
    let strength = Strength::from_strong(strong);
    let m = instance.num_projects();
    let spend: Vec<BigRational> = delta
        .spend
        .iter()
        .map(|&d| rationalize(d, MAX_DENOMINATOR))
        .collect();
    let contributions: Vec<BigRational> = instance
        .agents()
        .iter()
        .map(|a| rationalize(a.contribution, MAX_DENOMINATOR))
        .collect();
    let slack = rationalize(dist_tolerance(instance.pool()), MAX_DENOMINATOR);
    let allowed: Vec<Vec<usize>> = (0..n).map(|i| strength.allowed(instance, i)).collect();

    let mut covered = vec![false; m];
    for mask in 0u32..(1u32 << n) {
        covered.iter_mut().for_each(|c| *c = false);
        let mut required = BigRational::zero();
        for i in (0..n).filter(|i| mask & (1 << i) != 0) {
            required += &contributions[i];
            for &x in &allowed[i] {
                covered[x] = true;
            }
        }
        let mut have = BigRational::zero();
        for x in (0..m).filter(|&x| covered[x]) {
            have += &spend[x];
        }
        if have + &slack < required {
            let agents = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            return Ok(Some(SubsetWitness::measure(instance, delta, agents, strength)));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::raw;
    use crate::model::validate_and_normalize;

    fn pair() -> Instance {
        validate_and_normalize(&raw(
            &["a", "b"],
            &[("1", 1.0, &[1.0, 0.0]), ("2", 1.0, &[1.0, 3.0])],
        ))
        .unwrap()
    }

    fn approval_triple() -> Instance {
        validate_and_normalize(&raw(
            &["a", "b", "c", "d"],
            &[
                ("1", 1.0, &[1.0, 1.0, 0.0, 0.0]),
                ("2", 1.0, &[1.0, 0.0, 1.0, 0.0]),
                ("3", 1.0, &[0.0, 0.0, 0.0, 1.0]),
            ],
        ))
        .unwrap()
    }

    fn compromise() -> Instance {
        validate_and_normalize(&raw(
            &["a", "b", "x"],
            &[("1", 1.0, &[1.5, 0.0, 1.0]), ("2", 1.0, &[0.0, 1.5, 1.0])],
        ))
        .unwrap()
    }

    #[test]
    fn proportional_split_of_pair() {
        let inst = pair();
        let delta = Distribution::new(vec![1.5, 0.5]);
        let dec = proportional_decomposition(&inst, &delta).unwrap();
        assert!((dec.parts[0].spend[0] - 1.0).abs() < 1e-12);
        assert!(dec.parts[0].spend[1].abs() < 1e-12);
        assert!((dec.parts[1].spend[0] - 0.5).abs() < 1e-12);
        assert!((dec.parts[1].spend[1] - 0.5).abs() < 1e-12);
        assert!(dec.violations(&inst, &delta, 1e-9).is_empty());
    }

    #[test]
    fn proportional_split_single_agent() {
        let inst = validate_and_normalize(&raw(&["a", "b"], &[("1", 2.0, &[1.0, 2.0])])).unwrap();
        let delta = Distribution::single(2, 1, 2.0);
        let dec = proportional_decomposition(&inst, &delta).unwrap();
        assert_eq!(dec.parts[0], delta);
    }

    #[test]
    fn proportional_split_needs_optimum() {
        let err = proportional_decomposition(&pair(), &Distribution::new(vec![1.0, 1.0]));
        assert!(matches!(err, Err(Error::NotAtOptimum(_))));
    }

    #[test]
    fn flow_check_on_pair() {
        let inst = pair();
        let ok = check_decomposable(&inst, &Distribution::new(vec![1.5, 0.5])).unwrap();
        match &ok {
            DecompositionVerdict::Decomposable(dec) => {
                assert!(dec.violations(&inst, &Distribution::new(vec![1.5, 0.5]), 1e-12).is_empty())
            }
            other => panic!("{other:?}"),
        }
        let bad = check_decomposable(&inst, &Distribution::new(vec![0.0, 2.0])).unwrap();
        let w = bad.witness().unwrap();
        assert_eq!(w.agent_subset, vec![0]);
        assert_eq!((w.covered_spend, w.required), (0.0, 1.0));
    }

    #[test]
    fn flow_check_on_approval_triple() {
        let inst = approval_triple();
        let delta = Distribution::new(vec![1.0, 0.0, 0.0, 2.0]);
        let w = check_decomposable(&inst, &delta).unwrap();
        let w = w.witness().unwrap();
        assert_eq!(w.agent_subset, vec![0, 1]);
        assert_eq!((w.covered_spend, w.required), (1.0, 2.0));
    }

    #[test]
    fn strong_check_on_compromise() {
        let inst = compromise();
        let ab = Distribution::new(vec![1.0, 1.0, 0.0]);
        assert!(check_strong_decomposable(&inst, &ab).unwrap().is_decomposable());
        let xx = Distribution::new(vec![0.0, 0.0, 2.0]);
        assert!(!check_strong_decomposable(&inst, &xx).unwrap().is_decomposable());
        // Plain decomposability accepts both.
        assert!(check_decomposable(&inst, &xx).unwrap().is_decomposable());
    }

    #[test]
    fn strong_equals_plain_when_dichotomous() {
        let inst = approval_triple();
        for spend in [vec![1.0, 0.0, 0.0, 2.0], vec![1.0, 0.5, 0.5, 1.0], vec![0.0, 1.0, 1.0, 1.0]] {
            let d = Distribution::new(spend);
            assert_eq!(
                check_decomposable(&inst, &d).unwrap().is_decomposable(),
                check_strong_decomposable(&inst, &d).unwrap().is_decomposable()
            );
        }
    }

    #[test]
    fn oracle_matches_examples() {
        let inst = pair();
        assert_eq!(
            brute_force_decomposability_oracle(&inst, &Distribution::new(vec![1.5, 0.5]), false)
                .unwrap(),
            None
        );
        let w = brute_force_decomposability_oracle(
            &approval_triple(),
            &Distribution::new(vec![1.0, 0.0, 0.0, 2.0]),
            false,
        )
        .unwrap()
        .unwrap();
        assert_eq!(w.agent_subset, vec![0, 1]);
        assert_eq!((w.covered_spend, w.required), (1.0, 2.0));
    }

    #[test]
    fn oracle_guard() {
        let agents: Vec<(String, f64, Vec<f64>)> =
            (0..21).map(|i| (i.to_string(), 0.0, vec![1.0])).collect();
        let refs: Vec<(&str, f64, &[f64])> = agents
            .iter()
            .map(|(n, c, u)| (n.as_str(), *c, u.as_slice()))
            .collect();
        let inst = validate_and_normalize(&raw(&["a"], &refs)).unwrap();
        assert!(matches!(
            brute_force_decomposability_oracle(&inst, &Distribution::zero(1), false),
            Err(Error::TooManyAgents { agents: 21, .. })
        ));
    }
}
