//! Numerical checks of the funding axioms for arbitrary mechanisms.
//!
//! Contribution incentive-compatibility quantifies over a continuum of
//! contribution levels; here it is evaluated on an evenly spaced grid, so a
//! `Holds` verdict means "holds on every tested point".

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::batch;
use crate::decompose::{check_with, DecompositionVerdict, Strength};
use crate::error::{Error, Result};
use crate::lp::{maximize, LpOutcome, LpScalar};
use crate::mechanisms::{run_mechanism_with, MechanismId};
use crate::model::{Distribution, DistributionJson, Instance};
use crate::rational::{rationalize, to_f64, MAX_DENOMINATOR};
use crate::solver::{solve_nash, SolverConfig};

pub const DEFAULT_GRID: usize = 21;
pub const DEFAULT_CIC_TOL: f64 = 1e-7;

/// Problems with at most this many agents plus projects get the exact LP.
pub const EXACT_LP_LIMIT: usize = 30;

pub fn default_efficiency_tol(pool: f64) -> f64 {
    1e-7 * pool
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Efficiency,
    Decomposability,
    StrongDecomposability,
    Cic,
    StrongCic,
    ConjecturedCic,
    CoreShare,
}

impl Axiom {
    pub fn as_str(self) -> &'static str {
        match self {
            Axiom::Efficiency => "efficiency",
            Axiom::Decomposability => "decomposability",
            Axiom::StrongDecomposability => "strong_decomposability",
            Axiom::Cic => "cic",
            Axiom::StrongCic => "strong_cic",
            Axiom::ConjecturedCic => "conjectured_cic",
            Axiom::CoreShare => "core_share",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// A distribution every contributing agent weakly prefers.
    Dominating {
        distribution: DistributionJson,
        utilities_before: Vec<f64>,
        utilities_after: Vec<f64>,
        total_gain: f64,
    },
    /// A contribution level the agent would rather choose. `at_contribution`
    /// is the agent's value at the actual contribution, `at_deviation` at
    /// `deviation`. For the CIC variants the value is net of the amount paid.
    Contribution {
        agent: String,
        agent_index: usize,
        contribution: f64,
        deviation: f64,
        at_contribution: f64,
        at_deviation: f64,
    },
    /// Agents whose contributions cannot be placed on projects they may fund.
    Subset {
        agents: Vec<String>,
        agent_indices: Vec<usize>,
        covered_spend: f64,
        required: f64,
    },
    /// A group whose project subset received less than the group contributed.
    CoreShortfall {
        group: Vec<String>,
        projects: Vec<String>,
        spend: f64,
        required: f64,
    },
}

/// One tested inequality `lhs ≥ rhs − tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub agent: String,
    /// Contribution level or extra amount the inequality was tested at.
    pub point: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub tested_points: usize,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub evaluations: Vec<Evaluation>,
}

impl AxiomReport {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    fn from_evaluations(axiom: Axiom, tolerance: f64, evaluations: Vec<Evaluation>, witness: Option<Witness>) -> Self {
        AxiomReport {
            axiom,
            verdict: if witness.is_some() {
                Verdict::Violated
            } else {
                Verdict::Holds
            },
            witness,
            tested_points: evaluations.len(),
            tolerance,
            evaluations,
        }
    }

    /// Folds per-agent reports into one, keeping the first witness.
    pub fn merge(axiom: Axiom, tolerance: f64, reports: Vec<AxiomReport>) -> Self {
        let witness = reports.iter().find_map(|r| r.witness.clone());
        let evaluations = reports.into_iter().flat_map(|r| r.evaluations).collect();
        Self::from_evaluations(axiom, tolerance, evaluations, witness)
    }
}

/// Pareto efficiency with respect to contributing agents.
///
/// Solves `max Σ_i (u_i(δ') − u_i(δ))` over distributions `δ'` of the same
/// total with `u_i(δ') ≥ u_i(δ)` for every contributor. `δ` is efficient iff
/// the optimum is at most `tol`; otherwise the maximizer is the witness.
pub fn check_efficiency(instance: &Instance, delta: &Distribution, tol: f64) -> Result<AxiomReport> {
    instance.check_pool_distribution(delta)?;
    let contributors = instance.contributors();
    let report = |witness: Option<Witness>| AxiomReport {
        axiom: Axiom::Efficiency,
        verdict: if witness.is_some() {
            Verdict::Violated
        } else {
            Verdict::Holds
        },
        witness,
        tested_points: 1,
        tolerance: tol,
        evaluations: Vec::new(),
    };
    if contributors.is_empty() {
        return Ok(report(None));
    }

    let spend = if instance.num_agents() + instance.num_projects() <= EXACT_LP_LIMIT {
        let q = |v: f64| rationalize(v, MAX_DENOMINATOR);
        let delta_q: Vec<BigRational> = delta.spend.iter().map(|&d| q(d)).collect();
        let utils: Vec<Vec<BigRational>> = contributors
            .iter()
            .map(|&i| instance.agents()[i].utilities.iter().map(|&u| q(u)).collect())
            .collect();
        dominance_lp(&delta_q, &utils)?
            .map(|x| x.iter().map(to_f64).collect::<Vec<f64>>())
    } else {
        let utils: Vec<Vec<f64>> = contributors
            .iter()
            .map(|&i| instance.agents()[i].utilities.clone())
            .collect();
        dominance_lp(&delta.spend, &utils)?
    };

    let Some(spend) = spend else {
        return Ok(report(None));
    };
    let candidate = Distribution::new(spend);
    let before: Vec<f64> = contributors
        .iter()
        .map(|&i| instance.agents()[i].utility(&delta.spend))
        .collect();
    let after: Vec<f64> = contributors
        .iter()
        .map(|&i| instance.agents()[i].utility(&candidate.spend))
        .collect();
    let gain: f64 = after.iter().zip(&before).map(|(a, b)| a - b).sum();
    if gain <= tol {
        return Ok(report(None));
    }
    Ok(report(Some(Witness::Dominating {
        distribution: candidate.to_json(instance),
        utilities_before: before,
        utilities_after: after,
        total_gain: gain,
    })))
}

/// Returns the maximizing spend if the LP optimum is strictly above zero.
fn dominance_lp<T: LpScalar>(delta: &[T], utils: &[Vec<T>]) -> Result<Option<Vec<T>>> {
    let m = delta.len();
    let k = utils.len();
    let dot = |u: &[T]| {
        u.iter()
            .zip(delta)
            .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
    };
    let total = delta.iter().fold(T::zero(), |acc, d| acc + d.clone());
    let vars = m + k;

    let mut a = Vec::with_capacity(k + 1);
    let mut b = Vec::with_capacity(k + 1);
    let mut budget = vec![T::zero(); vars];
    budget[..m].iter_mut().for_each(|v| *v = T::one());
    a.push(budget);
    b.push(total);
    let mut baseline = T::zero();
    for (i, u) in utils.iter().enumerate() {
        let mut row: Vec<T> = u.clone();
        row.extend((0..k).map(|j| if j == i { -T::one() } else { T::zero() }));
        a.push(row);
        let level = dot(u);
        baseline = baseline + level.clone();
        b.push(level);
    }
    let mut c = vec![T::zero(); vars];
    for u in utils {
        for (cx, ux) in c.iter_mut().zip(u) {
            *cx = cx.clone() + ux.clone();
        }
    }

    match maximize(&a, &b, &c) {
        LpOutcome::Optimal { x, value } => {
            if (value - baseline).is_pos() {
                Ok(Some(x[..m].to_vec()))
            } else {
                Ok(None)
            }
        }
        LpOutcome::Infeasible => Err(Error::LpFailure("dominance LP reported infeasible".into())),
        LpOutcome::Unbounded => Err(Error::LpFailure("dominance LP reported unbounded".into())),
    }
}

/// Decomposability (plain or strong) phrased as an axiom report.
pub fn check_decomposability(
    instance: &Instance,
    delta: &Distribution,
    strong: bool,
) -> Result<AxiomReport> {
    let verdict = check_with(instance, delta, Strength::from_strong(strong))?;
    let witness = match verdict {
        DecompositionVerdict::Decomposable(_) => None,
        DecompositionVerdict::Violated(w) => Some(Witness::Subset {
            agents: w.agent_names(instance).into_iter().map(String::from).collect(),
            agent_indices: w.agent_subset.clone(),
            covered_spend: w.covered_spend,
            required: w.required,
        }),
    };
    Ok(AxiomReport {
        axiom: if strong {
            Axiom::StrongDecomposability
        } else {
            Axiom::Decomposability
        },
        verdict: if witness.is_some() {
            Verdict::Violated
        } else {
            Verdict::Holds
        },
        witness,
        tested_points: 1,
        tolerance: crate::model::dist_tolerance(instance.pool()),
        evaluations: Vec::new(),
    })
}

/// Utility of one agent at one contribution level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CicSample {
    pub contribution: f64,
    pub utility: f64,
}

/// Evenly spaced contribution levels over `[0, C_i]`, both ends included.
pub fn contribution_grid(contribution: f64, grid_size: usize) -> Vec<f64> {
    if contribution <= 0.0 || grid_size <= 1 {
        return vec![contribution];
    }
    let last = grid_size - 1;
    (0..grid_size)
        .map(|k| {
            if k == last {
                contribution
            } else {
                contribution * k as f64 / last as f64
            }
        })
        .collect()
}

/// `u_i(f(C_{-i}, c))` for every `c` on the contribution grid. Grid points
/// are evaluated as one batch.
pub fn cic_profile(
    mechanism: MechanismId,
    instance: &Instance,
    agent: usize,
    grid_size: usize,
    config: &SolverConfig,
) -> Result<Vec<CicSample>> {
    let grid = contribution_grid(instance.agent(agent)?.contribution, grid_size);
    batch::map(&grid, |&c| {
        let profile = instance.with_contribution(agent, c)?;
        let delta = run_mechanism_with(mechanism, &profile, config)?;
        Ok(CicSample {
            contribution: c,
            utility: profile.agents()[agent].utility(&delta.spend),
        })
    })
    .into_iter()
    .collect()
}

/// Checks `h(C_i) ≥ h(c) − tol` on the grid, where `h(c) = u_i(c) − c·price`.
fn grid_report(
    axiom: Axiom,
    instance: &Instance,
    agent: usize,
    samples: &[CicSample],
    price: f64,
    tol: f64,
) -> AxiomReport {
    let a = &instance.agents()[agent];
    let net = |s: &CicSample| s.utility - s.contribution * price;
    let full = samples.last().map(net).unwrap_or(0.0);
    let evaluations: Vec<Evaluation> = samples
        .iter()
        .map(|s| Evaluation {
            agent: a.name.clone(),
            point: s.contribution,
            lhs: full,
            rhs: net(s),
            holds: full >= net(s) - tol,
        })
        .collect();
    let witness = evaluations
        .iter()
        .filter(|e| !e.holds)
        .max_by(|x, y| (x.rhs - x.lhs).total_cmp(&(y.rhs - y.lhs)))
        .map(|e| Witness::Contribution {
            agent: a.name.clone(),
            agent_index: agent,
            contribution: a.contribution,
            deviation: e.point,
            at_contribution: e.lhs,
            at_deviation: e.rhs,
        });
    AxiomReport::from_evaluations(axiom, tol, evaluations, witness)
}

/// Contribution incentive-compatibility for one agent: `u_i(f(C_{-i}, c)) − c`
/// must be largest at the agent's actual contribution.
pub fn check_cic(
    mechanism: MechanismId,
    instance: &Instance,
    agent: usize,
    grid_size: usize,
    tol: f64,
) -> Result<AxiomReport> {
    let samples = cic_profile(mechanism, instance, agent, grid_size, &SolverConfig::default())?;
    Ok(grid_report(Axiom::Cic, instance, agent, &samples, 1.0, tol))
}

/// [`check_cic`] for every agent; the witness names the first violating agent.
pub fn check_cic_all(
    mechanism: MechanismId,
    instance: &Instance,
    grid_size: usize,
    tol: f64,
) -> Result<AxiomReport> {
    let reports = (0..instance.num_agents())
        .map(|i| check_cic(mechanism, instance, i, grid_size, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(AxiomReport::merge(Axiom::Cic, tol, reports))
}

/// Strong CIC for one agent: `u_i(f(C)) ≥ u_i(f(C_{-i})) + C_i·u_i^max`.
/// Compares the actual contribution with staying out only.
pub fn check_strong_cic(
    mechanism: MechanismId,
    instance: &Instance,
    agent: usize,
    tol: f64,
) -> Result<AxiomReport> {
    check_strong_cic_grid(mechanism, instance, agent, 2, tol)
}

/// Strong CIC on a full contribution grid: `u_i(f(C_{-i}, c)) − c·u_i^max`
/// must be largest at the actual contribution.
pub fn check_strong_cic_grid(
    mechanism: MechanismId,
    instance: &Instance,
    agent: usize,
    grid_size: usize,
    tol: f64,
) -> Result<AxiomReport> {
    let price = instance.agent(agent)?.max_utility();
    let samples = cic_profile(mechanism, instance, agent, grid_size, &SolverConfig::default())?;
    Ok(grid_report(Axiom::StrongCic, instance, agent, &samples, price, tol))
}

pub fn check_strong_cic_all(
    mechanism: MechanismId,
    instance: &Instance,
    grid_size: Option<usize>,
    tol: f64,
) -> Result<AxiomReport> {
    let reports = (0..instance.num_agents())
        .map(|i| check_strong_cic_grid(mechanism, instance, i, grid_size.unwrap_or(2), tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(AxiomReport::merge(Axiom::StrongCic, tol, reports))
}

/// The proportional extra-contribution distribution `δ_ε(x) ∝ δ(x)·u_i(x)`,
/// scaled to total `ε`.
pub fn proportional_extra(instance: &Instance, agent: usize, delta: &Distribution, extra: f64) -> Result<Distribution> {
    let a = instance.agent(agent)?;
    let u = a.utility(&delta.spend);
    if !(u > 0.0) {
        return Err(Error::ZeroUtilityAgent(a.name.clone()));
    }
    let alpha = extra / u;
    Ok(Distribution::new(
        delta
            .spend
            .iter()
            .zip(&a.utilities)
            .map(|(d, ux)| alpha * d * ux)
            .collect(),
    ))
}

/// Experimental: `u_i(nash(C_{-i}, C_i + ε)) ≥ u_i(δ) + u_i(δ_ε)` for each `ε`,
/// where `δ = nash(C)`. This is an open conjecture; a violation is a finding.
pub fn check_conjectured_cic(
    instance: &Instance,
    agent: usize,
    extras: &[f64],
    tol: f64,
) -> Result<AxiomReport> {
    let a = instance.agent(agent)?;
    if !(a.contribution > 0.0) {
        return Err(Error::ContributionExceedsBudget {
            agent: a.name.clone(),
            contribution: a.contribution,
            budget: a.budget,
        });
    }
    let config = SolverConfig::default();
    let delta = solve_nash(instance, &config)?.distribution;
    let base = a.utility(&delta.spend);
    let evaluations = batch::map(extras, |&extra| -> Result<Evaluation> {
        let raised = instance.with_contribution(agent, a.contribution + extra)?;
        let after = solve_nash(&raised, &config)?.distribution;
        let lhs = a.utility(&after.spend);
        let rhs = base + a.utility(&proportional_extra(instance, agent, &delta, extra)?.spend);
        Ok(Evaluation {
            agent: a.name.clone(),
            point: extra,
            lhs,
            rhs,
            holds: lhs >= rhs - tol,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let witness = evaluations.iter().find(|e| !e.holds).map(|e| Witness::Contribution {
        agent: a.name.clone(),
        agent_index: agent,
        contribution: a.contribution,
        deviation: a.contribution + e.point,
        at_contribution: e.rhs,
        at_deviation: e.lhs,
    });
    Ok(AxiomReport::from_evaluations(Axiom::ConjecturedCic, tol, evaluations, witness))
}

/// Core share: a group whose members only like projects in `A'` gets at
/// least its total contribution spent on `A'` under the Nash rule.
///
/// `projects` defaults to the union of the members' acceptable sets.
pub fn check_core_share(
    instance: &Instance,
    group: &[usize],
    projects: Option<&[usize]>,
    tol: f64,
) -> Result<AxiomReport> {
    if group.is_empty() {
        return Err(Error::GroupNotEligible("group is empty".into()));
    }
    let m = instance.num_projects();
    let mut in_subset = vec![false; m];
    match projects {
        Some(p) => {
            for &x in p {
                *in_subset
                    .get_mut(x)
                    .ok_or_else(|| Error::GroupNotEligible(format!("project index {x} out of range")))? = true;
            }
        }
        None => {
            for &i in group {
                for x in instance.agent(i)?.acceptable() {
                    in_subset[x] = true;
                }
            }
        }
    }
    for &i in group {
        let a = instance.agent(i)?;
        if !(a.contribution > 0.0) {
            return Err(Error::GroupNotEligible(format!(
                "agent `{}` does not contribute",
                a.name
            )));
        }
        if let Some(x) = a.acceptable().into_iter().find(|&x| !in_subset[x]) {
            return Err(Error::GroupNotEligible(format!(
                "agent `{}` values project `{}` outside the subset",
                a.name,
                instance.projects()[x]
            )));
        }
    }

    let delta = solve_nash(instance, &SolverConfig::default())?.distribution;
    let spend: f64 = (0..m).filter(|&x| in_subset[x]).map(|x| delta.spend[x]).sum();
    let required: f64 = group.iter().map(|&i| instance.agents()[i].contribution).sum();
    let slack = tol * instance.pool();
    let holds = spend >= required - slack;
    let names: Vec<String> = group.iter().map(|&i| instance.agents()[i].name.clone()).collect();
    let evaluation = Evaluation {
        agent: names.join(","),
        point: required,
        lhs: spend,
        rhs: required,
        holds,
    };
    let witness = (!holds).then(|| Witness::CoreShortfall {
        group: names,
        projects: (0..m)
            .filter(|&x| in_subset[x])
            .map(|x| instance.projects()[x].clone())
            .collect(),
        spend,
        required,
    });
    Ok(AxiomReport::from_evaluations(Axiom::CoreShare, slack, vec![evaluation], witness))
}

/// Σ of an exact vector; used by tests of the exact LP path.
#[allow(dead_code)]
fn exact_sum(v: &[BigRational]) -> BigRational {
    v.iter().fold(BigRational::zero(), |acc, x| acc + x)
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

    fn compromise() -> Instance {
        validate_and_normalize(&raw(
            &["a", "b", "x"],
            &[("1", 1.0, &[1.5, 0.0, 1.0]), ("2", 1.0, &[0.0, 1.5, 1.0])],
        ))
        .unwrap()
    }

    fn two_agent() -> Instance {
        validate_and_normalize(&raw(
            &["a", "b"],
            &[("1", 1.0, &[1.0, 1.0]), ("2", 1.0, &[1.0, 0.0])],
        ))
        .unwrap()
    }

    #[test]
    fn grid_has_endpoints() {
        let g = contribution_grid(1.0, 21);
        assert_eq!(g.len(), 21);
        assert_eq!((g[0], g[10], g[20]), (0.0, 0.5, 1.0));
        assert_eq!(contribution_grid(0.0, 21), vec![0.0]);
    }

    #[test]
    fn efficiency_examples() {
        let inst = compromise();
        let r = check_efficiency(&inst, &Distribution::new(vec![1.0, 1.0, 0.0]), 2e-7).unwrap();
        match r.witness {
            Some(Witness::Dominating {
                utilities_after,
                distribution,
                ..
            }) => {
                assert!(utilities_after.iter().all(|&u| u >= 2.0 - 1e-6));
                assert!((distribution.spend["x"] - 2.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let t1 = pair();
        assert!(check_efficiency(&t1, &Distribution::new(vec![1.5, 0.5]), 2e-7)
            .unwrap()
            .holds());
        let single = validate_and_normalize(&raw(&["a", "b"], &[("1", 1.0, &[1.0, 2.0])])).unwrap();
        assert!(check_efficiency(&single, &Distribution::single(2, 1, 1.0), 1e-7)
            .unwrap()
            .holds());
    }

    #[test]
    fn float_and_exact_lp_agree() {
        let inst = compromise();
        let utils: Vec<Vec<f64>> = inst.agents().iter().map(|a| a.utilities.clone()).collect();
        let x = dominance_lp(&[1.0, 1.0, 0.0], &utils).unwrap().unwrap();
        assert!((x[2] - 2.0).abs() < 1e-12);
        let exact: Vec<Vec<BigRational>> = utils
            .iter()
            .map(|u| u.iter().map(|&v| rationalize(v, MAX_DENOMINATOR)).collect())
            .collect();
        let d: Vec<BigRational> = [1.0, 1.0, 0.0].iter().map(|&v| rationalize(v, 10)).collect();
        let xq = dominance_lp(&d, &exact).unwrap().unwrap();
        assert_eq!(to_f64(&exact_sum(&xq)), 2.0);
    }

    #[test]
    fn cic_nash_on_pair() {
        let inst = pair();
        for agent in 0..2 {
            let r = check_cic(MechanismId::Nash, &inst, agent, DEFAULT_GRID, DEFAULT_CIC_TOL).unwrap();
            assert!(r.holds(), "{r:?}");
            assert_eq!(r.tested_points, DEFAULT_GRID);
        }
    }

    // Closed forms for the pair profile with ε = 1 − c:
    // u₁(nash(c, 1)) + ε = 1.5 − 0.5ε and u₂(nash(1, c)) + ε = 6 − 2ε − 2·min(1.5, 2 − ε).
    #[test]
    fn cic_profile_matches_closed_forms() {
        let inst = pair();
        let cfg = SolverConfig::default();
        for s in cic_profile(MechanismId::Nash, &inst, 0, 21, &cfg).unwrap() {
            let eps = 1.0 - s.contribution;
            assert!((s.utility + eps - (1.5 - 0.5 * eps)).abs() < 1e-6, "{s:?}");
        }
        for s in cic_profile(MechanismId::Nash, &inst, 1, 21, &cfg).unwrap() {
            let eps = 1.0 - s.contribution;
            let closed = 6.0 - 2.0 * eps - 2.0 * 1.5f64.min(2.0 - eps);
            assert!((s.utility + eps - closed).abs() < 1e-6, "{s:?}");
        }
    }

    #[test]
    fn utilitarian_violates_cic_for_agent1() {
        let r = check_cic(MechanismId::Utilitarian, &pair(), 0, DEFAULT_GRID, DEFAULT_CIC_TOL).unwrap();
        match r.witness {
            Some(Witness::Contribution {
                agent_index,
                deviation,
                at_contribution,
                at_deviation,
                ..
            }) => {
                assert_eq!(agent_index, 0);
                assert_eq!(deviation, 0.0);
                assert_eq!((at_contribution, at_deviation), (-1.0, 0.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn anticut_violates_cic_for_agent2() {
        let r = check_cic_all(MechanismId::Anticut, &two_agent(), DEFAULT_GRID, DEFAULT_CIC_TOL).unwrap();
        match r.witness {
            Some(Witness::Contribution {
                agent,
                deviation,
                at_contribution,
                at_deviation,
                ..
            }) => {
                assert_eq!(agent, "2");
                assert_eq!(deviation, 0.0);
                assert_eq!((at_deviation, at_contribution), (0.5, 0.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strong_cic_trivial_for_non_contributor() {
        let inst = pair().with_contribution(0, 0.0).unwrap();
        assert!(check_strong_cic(MechanismId::Nash, &inst, 0, 1e-7).unwrap().holds());
    }

    #[test]
    fn strong_cic_fails_on_three_pets() {
        let eps = 0.25;
        let inst = validate_and_normalize(&raw(
            &["a", "b", "c", "x"],
            &[
                ("1", 1.0, &[2.0 - eps, 0.0, 0.0, 1.0]),
                ("2", 1.0, &[0.0, 2.0 - eps, 0.0, 1.0]),
                ("3", 1.0, &[0.0, 0.0, 2.0 - eps, 1.0]),
            ],
        ))
        .unwrap();
        let r = check_strong_cic_all(MechanismId::Nash, &inst, None, 1e-7).unwrap();
        assert!(!r.holds());
    }

    #[test]
    fn conjectured_cic_zero_extra_is_equality() {
        let inst = pair();
        let r = check_conjectured_cic(&inst, 1, &[0.0], 1e-7).unwrap();
        assert!(r.holds());
        assert!((r.evaluations[0].lhs - r.evaluations[0].rhs).abs() < 1e-6);
    }

    #[test]
    fn conjectured_cic_needs_budget() {
        assert!(matches!(
            check_conjectured_cic(&pair(), 1, &[0.5], 1e-7),
            Err(Error::ContributionExceedsBudget { .. })
        ));
    }

    #[test]
    fn core_share_examples() {
        let inst = pair();
        let r = check_core_share(&inst, &[0, 1], None, 1e-7).unwrap();
        assert!(r.holds());
        assert!((r.evaluations[0].lhs - 2.0).abs() < 1e-9);

        let split = validate_and_normalize(&raw(
            &["a", "b"],
            &[("1", 1.0, &[1.0, 0.0]), ("2", 1.0, &[0.0, 1.0])],
        ))
        .unwrap();
        for agent in 0..2 {
            let r = check_core_share(&split, &[agent], None, 1e-7).unwrap();
            assert!(r.holds());
            assert!(r.evaluations[0].lhs >= 1.0 - 1e-9);
        }
        assert!(matches!(
            check_core_share(&inst, &[1], Some(&[1]), 1e-7),
            Err(Error::GroupNotEligible(_))
        ));
    }
}
