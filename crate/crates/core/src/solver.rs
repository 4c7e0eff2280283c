//! Nash product distribution via the proportional response dynamic.
//!
//! Each step, every contributing agent re-spends its contribution across
//! projects in proportion to the utility it currently derives from them:
//! `δ'(x) = δ(x)·s(x)` with `s(x) = Σ_i C_i·u_i(x)/u_i(δ)`. The log-Nash
//! objective never decreases along the sequence, and
//! `max_x log s(x)` bounds the remaining optimality gap, which gives a
//! certified stopping rule.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Distribution, Instance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Target for the certified gap in log-Nash units.
    pub epsilon: f64,
    pub max_iters: usize,
    pub record_trace: bool,
    /// Refine the dynamic's final iterate with active-set Newton steps on
    /// its support. The refined point is kept only if it has a higher
    /// objective and a smaller certified gap.
    pub polish: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1e-9,
            max_iters: 1_000_000,
            record_trace: false,
            polish: true,
        }
    }
}

impl SolverConfig {
    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    /// Plain dynamic, no final refinement.
    pub fn unpolished(mut self) -> Self {
        self.polish = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// State of the dynamic at one iterate. `step_l1` is the L1 distance from
/// the previous iterate (zero for the starting point).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub log_nash: f64,
    pub gap_bound: f64,
    pub step_l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    /// Mean of `s(x)` over the support; the multiplier of the budget constraint.
    pub lambda_estimate: f64,
    /// `s(x) = Σ_i C_i·u_i(x)/u_i(δ)` per project.
    pub stationarity: Vec<f64>,
    /// `|s(x) − 1|` on the support, `max(0, s(x) − 1)` off it.
    pub residuals: Vec<f64>,
    /// Implied multiplier of `δ(x) ≥ 0`: `max(0, 1 − s(x))` off the support, 0 on it.
    pub mu: Vec<f64>,
    pub max_residual: f64,
    pub support_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub distribution: Distribution,
    /// Number of dynamic steps taken.
    pub iterations: usize,
    pub gap_bound: f64,
    pub log_nash: f64,
    pub trace: Option<Vec<TraceRow>>,
    pub kkt: KktReport,
    /// Whether the Newton refinement replaced the dynamic's last iterate.
    pub polished: bool,
}

/// Contributing agents' data in flat form, so the inner loop does not chase
/// through `Agent` records.
struct Profile {
    names: Vec<String>,
    weights: Vec<f64>,
    /// Row-major `agents × projects`.
    utilities: Vec<f64>,
    projects: usize,
}

impl Profile {
    fn new(instance: &Instance) -> Self {
        let projects = instance.num_projects();
        let mut p = Profile {
            names: Vec::new(),
            weights: Vec::new(),
            utilities: Vec::new(),
            projects,
        };
        for agent in instance.agents().iter().filter(|a| a.contribution > 0.0) {
            p.names.push(agent.name.clone());
            p.weights.push(agent.contribution);
            p.utilities.extend_from_slice(&agent.utilities);
        }
        p
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.utilities[i * self.projects..(i + 1) * self.projects]
    }

    /// Fills `utils` with `u_i(δ)` and `s` with the stationarity values; returns `F(δ)`.
    fn evaluate(&self, spend: &[f64], utils: &mut [f64], s: &mut [f64]) -> Result<f64> {
        let mut objective = 0.0;
        for (i, u) in utils.iter_mut().enumerate() {
            *u = self.row(i).iter().zip(spend).map(|(a, b)| a * b).sum();
            if !(*u > 0.0) {
                return Err(Error::ZeroUtilityAgent(self.names[i].clone()));
            }
            objective += self.weights[i] * u.ln();
        }
        s.iter_mut().for_each(|v| *v = 0.0);
        for (i, &u) in utils.iter().enumerate() {
            let scale = self.weights[i] / u;
            for (sx, ux) in s.iter_mut().zip(self.row(i)) {
                *sx += scale * ux;
            }
        }
        Ok(objective)
    }
}

fn gap_from_stationarity(s: &[f64]) -> f64 {
    s.iter().copied().fold(f64::NEG_INFINITY, f64::max).ln().max(0.0)
}

fn rescale_to(spend: &mut [f64], total: f64) {
    let sum: f64 = spend.iter().sum();
    if sum > 0.0 {
        let k = total / sum;
        spend.iter_mut().for_each(|d| *d *= k);
    }
}

/// One step of the dynamic: `δ'(x) = Σ_i C_i·(u_i(x)/u_i(δ))·δ(x)`, rescaled
/// so the total stays exactly the pool. Agents without contribution play no role.
pub fn proportional_response_step(instance: &Instance, delta: &Distribution) -> Result<Distribution> {
    instance.check_pool_distribution(delta)?;
    let profile = Profile::new(instance);
    let mut utils = vec![0.0; profile.weights.len()];
    let mut s = vec![0.0; profile.projects];
    profile.evaluate(&delta.spend, &mut utils, &mut s)?;
    let mut spend: Vec<f64> = delta.spend.iter().zip(&s).map(|(d, k)| d * k).collect();
    let pool = instance.pool();
    rescale_to(&mut spend, pool);
    Ok(Distribution { total: pool, spend })
}

/// Certified bound `F(δ*) − F(δ) ≤ max_x log s(x)`, clamped at 0.
pub fn cover_gap_bound(instance: &Instance, delta: &Distribution) -> Result<f64> {
    instance.check_pool_distribution(delta)?;
    let profile = Profile::new(instance);
    if profile.weights.is_empty() {
        return Ok(0.0);
    }
    let mut utils = vec![0.0; profile.weights.len()];
    let mut s = vec![0.0; profile.projects];
    profile.evaluate(&delta.spend, &mut utils, &mut s)?;
    Ok(gap_from_stationarity(&s))
}

/// Default threshold separating support from non-support projects.
pub fn default_support_threshold(pool: f64) -> f64 {
    1e-7 * pool
}

/// First-order optimality residuals of `δ` for the log-Nash program.
pub fn kkt_check(
    instance: &Instance,
    delta: &Distribution,
    support_threshold: f64,
) -> Result<KktReport> {
    instance.check_pool_distribution(delta)?;
    let profile = Profile::new(instance);
    let mut utils = vec![0.0; profile.weights.len()];
    let mut s = vec![0.0; profile.projects];
    if !profile.weights.is_empty() {
        profile.evaluate(&delta.spend, &mut utils, &mut s)?;
    }
    Ok(kkt_from_stationarity(&delta.spend, s, support_threshold))
}

fn kkt_from_stationarity(spend: &[f64], s: Vec<f64>, support_threshold: f64) -> KktReport {
    let mut residuals = Vec::with_capacity(s.len());
    let mut mu = Vec::with_capacity(s.len());
    let (mut lambda_sum, mut support) = (0.0, 0usize);
    for (&d, &sx) in spend.iter().zip(&s) {
        if d > support_threshold {
            residuals.push((sx - 1.0).abs());
            mu.push(0.0);
            lambda_sum += sx;
            support += 1;
        } else {
            residuals.push((sx - 1.0).max(0.0));
            mu.push((1.0 - sx).max(0.0));
        }
    }
    KktReport {
        lambda_estimate: if support > 0 {
            lambda_sum / support as f64
        } else {
            0.0
        },
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        stationarity: s,
        residuals,
        mu,
        support_threshold,
    }
}

/// Runs the dynamic from the uniform full-support distribution.
pub fn solve_nash(instance: &Instance, config: &SolverConfig) -> Result<SolveResult> {
    let start = Distribution::uniform(instance.num_projects(), instance.pool());
    solve_nash_from(instance, config, &start)
}

/// Runs the dynamic from `start`, which should have full support on every
/// project some contributor accepts; it is rescaled to the pool first.
pub fn solve_nash_from(
    instance: &Instance,
    config: &SolverConfig,
    start: &Distribution,
) -> Result<SolveResult> {
    config.validate()?;
    let m = instance.num_projects();
    if start.spend.len() != m {
        return Err(Error::ProjectMismatch(format!(
            "start distribution has {} projects, expected {m}",
            start.spend.len()
        )));
    }
    let pool = instance.pool();
    let profile = Profile::new(instance);
    if profile.weights.is_empty() {
        return Ok(SolveResult {
            distribution: Distribution::zero(m),
            iterations: 0,
            gap_bound: 0.0,
            log_nash: 0.0,
            trace: config.record_trace.then(Vec::new),
            kkt: kkt_from_stationarity(&vec![0.0; m], vec![0.0; m], 0.0),
            polished: false,
        });
    }

    let mut spend = start.spend.clone();
    rescale_to(&mut spend, pool);
    let mut next = vec![0.0; m];
    let mut utils = vec![0.0; profile.weights.len()];
    let mut s = vec![0.0; m];
    let mut trace = config.record_trace.then(Vec::new);
    let mut step_l1 = 0.0;
    let mut iter = 0;

    loop {
        let log_nash = profile.evaluate(&spend, &mut utils, &mut s)?;
        let gap_bound = gap_from_stationarity(&s);
        if let Some(t) = trace.as_mut() {
            t.push(TraceRow {
                iter,
                log_nash,
                gap_bound,
                step_l1,
            });
        }
        let done = gap_bound <= config.epsilon;
        if done || iter >= config.max_iters {
            let mut result = SolveResult {
                kkt: kkt_from_stationarity(&spend, s, default_support_threshold(pool)),
                distribution: Distribution { total: pool, spend },
                iterations: iter,
                gap_bound,
                log_nash,
                trace,
                polished: false,
            };
            if config.polish {
                if let Some((spend, log_nash, s)) = polish(&profile, &result.distribution.spend, pool)
                {
                    let gap = gap_from_stationarity(&s);
                    if log_nash >= result.log_nash && gap <= result.gap_bound {
                        result.kkt = kkt_from_stationarity(&spend, s, default_support_threshold(pool));
                        result.distribution = Distribution { total: pool, spend };
                        result.log_nash = log_nash;
                        result.gap_bound = gap;
                        result.polished = true;
                    }
                }
            }
            if result.gap_bound <= config.epsilon {
                return Ok(result);
            }
            return Err(Error::MaxItersExceeded {
                iterations: iter,
                gap_bound: result.gap_bound,
                best: Box::new(result),
            });
        }

        for ((n, d), k) in next.iter_mut().zip(&spend).zip(&s) {
            *n = d * k;
        }
        rescale_to(&mut next, pool);
        step_l1 = next.iter().zip(&spend).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut spend, &mut next);
        iter += 1;
    }
}

const NEWTON_STEPS: usize = 60;

/// Active-set Newton refinement of a near-optimal point.
///
/// Projects with negligible spend start out fixed at zero; a Newton step on
/// the remaining simplex face that would drive a project negative is cut at
/// the boundary and that project is fixed at zero too. Every accepted step
/// raises the objective. Returns the refined spend, its objective and its
/// stationarity vector.
fn polish(profile: &Profile, spend: &[f64], pool: f64) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let m = profile.projects;
    let n = profile.weights.len();
    let floor = 1e-12 * pool;
    let mut free: Vec<bool> = spend.iter().map(|&d| d > floor).collect();
    let mut x: Vec<f64> = spend
        .iter()
        .zip(&free)
        .map(|(&d, &f)| if f { d } else { 0.0 })
        .collect();
    rescale_to(&mut x, pool);

    let mut utils = vec![0.0; n];
    let mut s = vec![0.0; m];
    let mut f = profile.evaluate(&x, &mut utils, &mut s).ok()?;
    let mut trial = vec![0.0; m];
    let mut trial_utils = vec![0.0; n];
    let mut trial_s = vec![0.0; m];

    for _ in 0..NEWTON_STEPS {
        let idx: Vec<usize> = (0..m).filter(|&j| free[j]).collect();
        let k = idx.len();
        let worst = idx.iter().map(|&j| (s[j] - 1.0).abs()).fold(0.0, f64::max);
        if k <= 1 || worst <= 1e-15 {
            break;
        }

        // Maximize g·d − ½ dᵀQd subject to Σ d = 0, where g = s and
        // Q = Σ_i C_i u_i u_iᵀ / u_i(δ)² is the negated Hessian on the face.
        let mut kkt = DMatrix::<f64>::zeros(k + 1, k + 1);
        let mut rhs = DVector::<f64>::zeros(k + 1);
        for (r, &xr) in idx.iter().enumerate() {
            for (c, &xc) in idx.iter().enumerate().skip(r) {
                let q: f64 = (0..n)
                    .map(|i| {
                        let row = profile.row(i);
                        profile.weights[i] * row[xr] * row[xc] / (utils[i] * utils[i])
                    })
                    .sum();
                kkt[(r, c)] = q;
                kkt[(c, r)] = q;
            }
            kkt[(r, k)] = 1.0;
            kkt[(k, r)] = 1.0;
            rhs[r] = s[xr];
        }
        // Q is singular whenever utilities do not pin down the spend (ties, clones).
        let damping = 1e-10 * (0..k).map(|r| kkt[(r, r)]).sum::<f64>() / k as f64;
        for r in 0..k {
            kkt[(r, r)] += damping;
        }
        let dir = kkt.lu().solve(&rhs)?;

        let mut alpha = 1.0;
        let mut blocking = None;
        for (r, &j) in idx.iter().enumerate() {
            if dir[r] < 0.0 && x[j] + dir[r] < 0.0 {
                let a = -x[j] / dir[r];
                if a < alpha {
                    alpha = a;
                    blocking = Some(j);
                }
            }
        }

        let mut accepted = false;
        while alpha > 1e-12 {
            trial.copy_from_slice(&x);
            for (r, &j) in idx.iter().enumerate() {
                trial[j] = (x[j] + alpha * dir[r]).max(0.0);
            }
            if let Some(j) = blocking {
                trial[j] = 0.0;
            }
            rescale_to(&mut trial, pool);
            if let Ok(ft) = profile.evaluate(&trial, &mut trial_utils, &mut trial_s) {
                if ft >= f {
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
            blocking = None;
        }
        if !accepted {
            break;
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut utils, &mut trial_utils);
        std::mem::swap(&mut s, &mut trial_s);
        f = profile.evaluate(&x, &mut utils, &mut s).ok()?;
        if let Some(j) = blocking {
            free[j] = false;
        }
    }
    Some((x, f, s))
}

/// Writes a trace as CSV with 17 significant digits.
pub fn write_trace_csv<W: Write>(mut out: W, trace: &[TraceRow]) -> io::Result<()> {
    writeln!(out, "iter,log_nash,gap_bound,step_l1")?;
    for row in trace {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e}",
            row.iter, row.log_nash, row.gap_bound, row.step_l1
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::raw;
    use crate::model::{log_nash_objective, utility_of, validate_and_normalize};

    fn pair() -> Instance {
        validate_and_normalize(&raw(
            &["a", "b"],
            &[("1", 1.0, &[1.0, 0.0]), ("2", 1.0, &[1.0, 3.0])],
        ))
        .unwrap()
    }

    // Hand evaluation of one step from a + b:
    // s(a) = 1/1 + 1/4, s(b) = 0 + 3/4.
    #[test]
    fn step_from_uniform_on_pair() {
        let d = proportional_response_step(&pair(), &Distribution::new(vec![1.0, 1.0])).unwrap();
        assert!((d.spend[0] - 1.25).abs() < 1e-15);
        assert!((d.spend[1] - 0.75).abs() < 1e-15);
        assert_eq!(d.total, 2.0);
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let opt = Distribution::new(vec![1.5, 0.5]);
        let d = proportional_response_step(&pair(), &opt).unwrap();
        assert!(d.l1_distance(&opt) < 1e-12);
    }

    #[test]
    fn single_agent_point_mass_stays() {
        let inst = validate_and_normalize(&raw(&["a", "b"], &[("1", 2.0, &[1.0, 1.0])])).unwrap();
        let d = proportional_response_step(&inst, &Distribution::single(2, 0, 2.0)).unwrap();
        assert_eq!(d.spend, vec![2.0, 0.0]);
    }

    #[test]
    fn step_rejects_zero_utility_agent() {
        let err = proportional_response_step(&pair(), &Distribution::single(2, 1, 2.0));
        assert!(matches!(err, Err(Error::ZeroUtilityAgent(name)) if name == "1"));
    }

    #[test]
    fn gap_bound_values() {
        let inst = pair();
        let at_opt = cover_gap_bound(&inst, &Distribution::new(vec![1.5, 0.5])).unwrap();
        assert!(at_opt < 1e-9);
        let uniform = cover_gap_bound(&inst, &Distribution::new(vec![1.0, 1.0])).unwrap();
        assert!((uniform - 1.25f64.ln()).abs() < 1e-15);
        assert!((uniform - 0.2231).abs() < 1e-4);
        let single = validate_and_normalize(&raw(&["a", "b"], &[("1", 1.0, &[1.0, 2.0])])).unwrap();
        assert_eq!(cover_gap_bound(&single, &Distribution::single(2, 1, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn kkt_values() {
        let inst = pair();
        let at_opt = kkt_check(&inst, &Distribution::new(vec![1.5, 0.5]), 1e-7).unwrap();
        assert!(at_opt.max_residual <= 1e-9);
        assert!((at_opt.lambda_estimate - 1.0).abs() < 1e-12);

        let all_a = kkt_check(&inst, &Distribution::single(2, 0, 2.0), 1e-7).unwrap();
        assert!((all_a.stationarity[1] - 1.5).abs() < 1e-15);
        assert!((all_a.residuals[1] - 0.5).abs() < 1e-15);
        assert!((all_a.max_residual - 0.5).abs() < 1e-15);

        let one = validate_and_normalize(&raw(&["a"], &[("1", 1.0, &[1.0])])).unwrap();
        let r = kkt_check(&one, &Distribution::single(1, 0, 1.0), 1e-7).unwrap();
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn solves_pair() {
        let inst = pair();
        let res = solve_nash(&inst, &SolverConfig::default()).unwrap();
        assert!((res.distribution.spend[0] - 1.5).abs() <= 1e-6);
        assert!((res.distribution.spend[1] - 0.5).abs() <= 1e-6);
        assert!(res.gap_bound <= 1e-9);
        assert!(res.kkt.max_residual <= 1e-8);
        assert_eq!(
            res.log_nash,
            log_nash_objective(&inst, &res.distribution).unwrap()
        );
    }

    #[test]
    fn all_zero_contributions_give_empty_distribution() {
        let inst = validate_and_normalize(&raw(&["a", "b"], &[("1", 0.0, &[1.0, 0.0])])).unwrap();
        let res = solve_nash(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(res.distribution, Distribution::zero(2));
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn zero_contribution_agent_is_ignored() {
        let inst = validate_and_normalize(&raw(
            &["a", "b"],
            &[("1", 0.0, &[1.0, 0.0]), ("2", 1.0, &[0.0, 1.0])],
        ))
        .unwrap();
        let res = solve_nash(&inst, &SolverConfig::default()).unwrap();
        assert!(res.distribution.spend[1] > 1.0 - 1e-6);
        assert!(utility_of(&inst, 0, &res.distribution).unwrap() < 1e-6);
    }

    #[test]
    fn max_iters_returns_best_so_far() {
        let cfg = SolverConfig {
            max_iters: 3,
            ..SolverConfig::default().unpolished()
        };
        match solve_nash(&pair(), &cfg) {
            Err(Error::MaxItersExceeded {
                iterations, best, ..
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(best.iterations, 3);
                assert!(best.distribution.is_valid());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn refinement_finishes_a_truncated_run() {
        let cfg = SolverConfig {
            max_iters: 3,
            ..SolverConfig::default()
        };
        let res = solve_nash(&pair(), &cfg).unwrap();
        assert!(res.polished);
        assert_eq!(res.iterations, 3);
        assert!(res.distribution.l1_distance(&Distribution::new(vec![1.5, 0.5])) < 1e-12);
    }

    // Agent 2 contributing 0.5 puts the optimum at 1.5·a with s(b) = 1 exactly,
    // where the dynamic alone only closes the spend on b like 1/k.
    #[test]
    fn refinement_settles_a_degenerate_optimum() {
        let inst = pair().with_contribution(1, 0.5).unwrap();
        let plain = solve_nash(&inst, &SolverConfig::default().unpolished()).unwrap();
        assert!(plain.distribution.spend[1] > 1e-6);
        let res = solve_nash(&inst, &SolverConfig::default()).unwrap();
        assert!(res.polished);
        assert!((res.distribution.spend[0] - 1.5).abs() < 1e-12);
        assert!(res.distribution.spend[1] < 1e-12);
        assert!(res.gap_bound <= plain.gap_bound);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SolverConfig {
            epsilon: 0.0,
            ..SolverConfig::default()
        };
        assert!(matches!(solve_nash(&pair(), &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn trace_csv_format() {
        let res = solve_nash(&pair(), &SolverConfig::default().with_trace()).unwrap();
        let trace = res.trace.unwrap();
        assert_eq!(trace.len(), res.iterations + 1);
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace[..2]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iter,log_nash,gap_bound,step_l1"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "0");
        // 17 significant digits: one before the point, sixteen after.
        assert_eq!(first[1].split('e').next().unwrap().len(), 18);
    }
}
