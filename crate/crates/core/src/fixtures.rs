//! Built-in example profiles and the expectations each must meet.

use serde::Serialize;

use crate::axioms::{
    check_cic, check_cic_all, check_core_share, check_decomposability, check_efficiency, check_strong_cic_all,
    cic_profile, default_efficiency_tol, Witness, DEFAULT_CIC_TOL, DEFAULT_GRID,
};
use crate::batch;
use crate::decompose::{check_decomposable, check_strong_decomposable, proportional_decomposition};
use crate::error::Result;
use crate::mechanisms::{run_mechanism, MechanismId};
use crate::model::{Distribution, Instance};
use crate::solver::{solve_nash, SolverConfig};

#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub name: &'static str,
    pub description: &'static str,
    json: &'static str,
}

pub const FIXTURES: &[Fixture] = &[
    Fixture {
        name: "pair",
        description: "two agents, two projects, Nash gives 1.5a + 0.5b",
        json: include_str!("../fixtures/pair.json"),
    },
    Fixture {
        name: "irrational",
        description: "four approval agents with an irrational Nash solution",
        json: include_str!("../fixtures/irrational.json"),
    },
    Fixture {
        name: "tie",
        description: "approval sets {ac},{ad},{bc},{bd} with a segment of optima",
        json: include_str!("../fixtures/tie.json"),
    },
    Fixture {
        name: "compromise",
        description: "pet projects plus a compromise (eps = 0.5)",
        json: include_str!("../fixtures/compromise.json"),
    },
    Fixture {
        name: "three_pets",
        description: "three pet projects plus a compromise (eps = 0.25)",
        json: include_str!("../fixtures/three_pets.json"),
    },
    Fixture {
        name: "anticut_pair",
        description: "u1 = 1_{ab}, u2 = 1_{a}; anticut fails CIC",
        json: include_str!("../fixtures/anticut_pair.json"),
    },
    Fixture {
        name: "approval_triple",
        description: "u1 = 1_{ab}, u2 = 1_{ac}, u3 = 1_{d}; CIC but not decomposable",
        json: include_str!("../fixtures/approval_triple.json"),
    },
];

pub fn fixture(name: &str) -> Option<&'static Fixture> {
    FIXTURES.iter().find(|f| f.name == name)
}

impl Fixture {
    pub fn json(&self) -> &'static str {
        self.json
    }

    pub fn instance(&self) -> Instance {
        Instance::from_json(self.json).expect("embedded fixtures are valid")
    }

    /// Evaluates every expectation; errors count as failures.
    pub fn run(&self) -> Vec<Outcome> {
        let inst = self.instance();
        let mut out = Sink::new(self.name);
        let checks: &[(&str, Check)] = match self.name {
            "pair" => PAIR,
            "irrational" => IRRATIONAL,
            "tie" => TIE,
            "compromise" => COMPROMISE,
            "three_pets" => THREE_PETS,
            "anticut_pair" => TWO_AGENT,
            "approval_triple" => THREE_AGENT,
            _ => &[],
        };
        for (label, check) in checks {
            out.record(label, check(&inst));
        }
        out.results
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub fixture: &'static str,
    pub expectation: String,
    pub passed: bool,
    pub detail: String,
}

struct Sink {
    fixture: &'static str,
    results: Vec<Outcome>,
}

impl Sink {
    fn new(fixture: &'static str) -> Self {
        Sink {
            fixture,
            results: Vec::new(),
        }
    }

    fn record(&mut self, label: &str, result: Result<(bool, String)>) {
        let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
        self.results.push(Outcome {
            fixture: self.fixture,
            expectation: label.to_string(),
            passed,
            detail,
        });
    }
}

/// Runs the given fixtures as one batch; results keep fixture order.
pub fn run_fixtures(fixtures: &[&Fixture]) -> Vec<Outcome> {
    batch::map(fixtures, |f| f.run()).into_iter().flatten().collect()
}

type Check = fn(&Instance) -> Result<(bool, String)>;

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn nash(inst: &Instance) -> Result<Distribution> {
    Ok(solve_nash(inst, &SolverConfig::default())?.distribution)
}

fn utilities(inst: &Instance, d: &Distribution) -> Vec<f64> {
    inst.agents().iter().map(|a| a.utility(&d.spend)).collect()
}

fn expect_spend(inst: &Instance, id: MechanismId, want: &[f64], tol: f64) -> Result<(bool, String)> {
    let d = run_mechanism(id, inst)?;
    Ok((close(&d.spend, want, tol), format!("{:?}", d.spend)))
}

fn contribution_witness(w: &Option<Witness>) -> Option<(String, f64, f64, f64)> {
    match w {
        Some(Witness::Contribution {
            agent,
            deviation,
            at_contribution,
            at_deviation,
            ..
        }) => Some((agent.clone(), *deviation, *at_contribution, *at_deviation)),
        _ => None,
    }
}

fn subset_witness(w: &Option<Witness>) -> Option<Vec<String>> {
    match w {
        Some(Witness::Subset { agents, .. }) => Some(agents.clone()),
        _ => None,
    }
}

const PAIR: &[(&str, Check)] = &[
    ("nash = 1.5a + 0.5b", |i| expect_spend(i, MechanismId::Nash, &[1.5, 0.5], 1e-6)),
    ("decomposition d1 = a, d2 = 0.5a + 0.5b", |i| {
        let parts = proportional_decomposition(i, &nash(i)?)?.parts;
        let ok = close(&parts[0].spend, &[1.0, 0.0], 1e-6) && close(&parts[1].spend, &[0.5, 0.5], 1e-6);
        Ok((ok, format!("{:?} {:?}", parts[0].spend, parts[1].spend)))
    }),
    ("nash output is efficient", |i| {
        let r = check_efficiency(i, &nash(i)?, default_efficiency_tol(i.pool()))?;
        Ok((r.holds(), format!("{:?}", r.verdict)))
    }),
    ("utilitarian = 2b, not decomposable, witness {1}", |i| {
        let d = run_mechanism(MechanismId::Utilitarian, i)?;
        let r = check_decomposability(i, &d, false)?;
        let w = subset_witness(&r.witness);
        let ok = close(&d.spend, &[0.0, 2.0], 0.0) && w.as_deref() == Some(&["1".to_string()][..]);
        Ok((ok, format!("{:?} witness {{{}}}", d.spend, w.unwrap_or_default().join(","))))
    }),
    ("utilities: nash (1.5, 3), utilitarian (0, 6)", |i| {
        let un = utilities(i, &nash(i)?);
        let uu = utilities(i, &run_mechanism(MechanismId::Utilitarian, i)?);
        let ok = close(&un, &[1.5, 3.0], 1e-6) && close(&uu, &[0.0, 6.0], 1e-12);
        Ok((ok, format!("{un:?} {uu:?}")))
    }),
    ("nash CIC holds for both agents", |i| {
        let r = check_cic_all(MechanismId::Nash, i, DEFAULT_GRID, DEFAULT_CIC_TOL)?;
        Ok((r.holds(), format!("{} points", r.tested_points)))
    }),
    ("u1 + eps = 1.5 - 0.5 eps along the grid", |i| {
        let worst = cic_profile(MechanismId::Nash, i, 0, DEFAULT_GRID, &SolverConfig::default())?
            .iter()
            .map(|s| {
                let e = 1.0 - s.contribution;
                (s.utility + e - (1.5 - 0.5 * e)).abs()
            })
            .fold(0.0, f64::max);
        Ok((worst <= 1e-6, format!("max deviation {worst:.3e}")))
    }),
    ("u2 + eps = 6 - 2 eps - 2 min(1.5, 2 - eps) along the grid", |i| {
        let worst = cic_profile(MechanismId::Nash, i, 1, DEFAULT_GRID, &SolverConfig::default())?
            .iter()
            .map(|s| {
                let e = 1.0 - s.contribution;
                (s.utility + e - (6.0 - 2.0 * e - 2.0 * 1.5f64.min(2.0 - e))).abs()
            })
            .fold(0.0, f64::max);
        Ok((worst <= 1e-6, format!("max deviation {worst:.3e}")))
    }),
    ("utilitarian violates CIC, witness agent 1", |i| {
        let r = check_cic(MechanismId::Utilitarian, i, 0, DEFAULT_GRID, DEFAULT_CIC_TOL)?;
        let w = contribution_witness(&r.witness);
        let detail = match &w {
            Some((a, dev, at_c, at_dev)) => format!("agent {a}: {at_c} at full contribution, {at_dev} at {dev}"),
            None => "no witness".into(),
        };
        Ok((matches!(&w, Some((a, ..)) if a == "1"), detail))
    }),
];

const IRRATIONAL: &[(&str, Check)] = &[
    ("nash a = b = (7 - sqrt 17)/4, c = 4 - 2a, KKT <= 1e-8", |i| {
        let r = solve_nash(i, &SolverConfig::default())?;
        let a = (7.0 - 17f64.sqrt()) / 4.0;
        let ok = close(&r.distribution.spend, &[a, a, 4.0 - 2.0 * a], 1e-6) && r.kkt.max_residual <= 1e-8;
        Ok((ok, format!("{:?} kkt {:.2e}", r.distribution.spend, r.kkt.max_residual)))
    }),
    ("decomposition: four parts of total 1 summing to nash", |i| {
        let d = nash(i)?;
        let dec = proportional_decomposition(i, &d)?;
        let totals: Vec<f64> = dec.parts.iter().map(|p| p.spend.iter().sum()).collect();
        let ok = dec.parts.len() == 4
            && close(&totals, &[1.0; 4], 1e-8)
            && close(&dec.combined(i.num_projects()), &d.spend, 1e-8);
        Ok((ok, format!("totals {totals:?}")))
    }),
    ("core share of agent 4: d(c) >= 1", |i| {
        let r = check_core_share(i, &[3], None, 1e-7)?;
        Ok((r.holds(), format!("d(c) = {:.9}", r.evaluations[0].lhs)))
    }),
];

const TIE: &[(&str, Check)] = &[("every agent has utility 2", |i| {
    let u = utilities(i, &nash(i)?);
    Ok((close(&u, &[2.0; 4], 1e-6), format!("{u:?}")))
})];

const COMPROMISE: &[(&str, Check)] = &[
    ("a + b is strongly decomposable", |i| {
        let v = check_strong_decomposable(i, &Distribution::new(vec![1.0, 1.0, 0.0]))?;
        Ok((v.is_decomposable(), String::new()))
    }),
    ("a + b is dominated, witness utilities >= 2", |i| {
        let r = check_efficiency(i, &Distribution::new(vec![1.0, 1.0, 0.0]), default_efficiency_tol(i.pool()))?;
        match r.witness {
            Some(Witness::Dominating { utilities_after, .. }) => Ok((
                utilities_after.iter().all(|&u| u >= 2.0 - 1e-6),
                format!("{utilities_after:?}"),
            )),
            other => Ok((false, format!("{other:?}"))),
        }
    }),
    ("nash output is efficient but not strongly decomposable", |i| {
        let d = nash(i)?;
        let eff = check_efficiency(i, &d, default_efficiency_tol(i.pool()))?.holds();
        let strong = check_strong_decomposable(i, &d)?.is_decomposable();
        let plain = check_decomposable(i, &d)?.is_decomposable();
        Ok((eff && plain && !strong, format!("{:?}", d.spend)))
    }),
];

const THREE_PETS: &[(&str, Check)] = &[("nash violates strong CIC for some agent", |i| {
    let r = check_strong_cic_all(MechanismId::Nash, i, None, 1e-7)?;
    let w = contribution_witness(&r.witness);
    Ok((!r.holds(), format!("{w:?}")))
})];

const TWO_AGENT: &[(&str, Check)] = &[
    ("anticut(1,1) = a + b", |i| expect_spend(i, MechanismId::Anticut, &[1.0, 1.0], 0.0)),
    ("anticut(1,0) = 0.5a + 0.5b", |i| {
        expect_spend(&i.with_contribution(1, 0.0)?, MechanismId::Anticut, &[0.5, 0.5], 0.0)
    }),
    ("anticut violates CIC for agent 2 with gap 0.5 > 0", |i| {
        let r = check_cic(MechanismId::Anticut, i, 1, DEFAULT_GRID, DEFAULT_CIC_TOL)?;
        let w = contribution_witness(&r.witness);
        let ok = w == Some(("2".to_string(), 0.0, 0.0, 0.5));
        Ok((ok, format!("{w:?}")))
    }),
    ("nash CIC holds", |i| {
        let r = check_cic_all(MechanismId::Nash, i, DEFAULT_GRID, DEFAULT_CIC_TOL)?;
        Ok((r.holds(), String::new()))
    }),
];

const THREE_AGENT: &[(&str, Check)] = &[
    ("appendix_c(1,1,1) = a + 2d, not decomposable, witness {1,2}", |i| {
        let d = run_mechanism(MechanismId::AppendixC, i)?;
        let r = check_decomposability(i, &d, false)?;
        let w = subset_witness(&r.witness);
        let ok = close(&d.spend, &[1.0, 0.0, 0.0, 2.0], 0.0)
            && w.as_deref() == Some(&["1".to_string(), "2".to_string()][..]);
        Ok((ok, format!("{:?} witness {{{}}}", d.spend, w.unwrap_or_default().join(","))))
    }),
    ("appendix_c CIC holds for every agent", |i| {
        let r = check_cic_all(MechanismId::AppendixC, i, DEFAULT_GRID, DEFAULT_CIC_TOL)?;
        Ok((r.holds(), format!("{} points", r.tested_points)))
    }),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_fixture_parses_and_has_expectations() {
        for f in FIXTURES {
            assert!(f.instance().num_agents() > 0);
            assert!(!f.run().is_empty(), "{}", f.name);
        }
        assert!(fixture("nope").is_none());
    }

    #[test]
    fn all_expectations_pass() {
        let all: Vec<&Fixture> = FIXTURES.iter().collect();
        for o in run_fixtures(&all) {
            assert!(o.passed, "{}: {} ({})", o.fixture, o.expectation, o.detail);
        }
    }
}
