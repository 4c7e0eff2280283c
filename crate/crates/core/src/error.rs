use thiserror::Error;

use crate::solver::SolveResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("instance has no {0}")]
    EmptyInstance(&'static str),

    #[error("duplicate project identifier `{0}`")]
    DuplicateProject(String),

    #[error("duplicate agent name `{0}`")]
    DuplicateAgent(String),

    #[error("project identifiers must be nonempty (position {0})")]
    EmptyProjectName(usize),

    #[error("agent `{agent}`: utility for project `{project}` is negative or not finite ({value})")]
    NegativeUtility {
        agent: String,
        project: String,
        value: f64,
    },

    #[error("agent `{agent}`: no utility given for project `{project}`")]
    MissingUtility { agent: String, project: String },

    #[error("agent `{agent}`: utility given for unknown project `{project}`")]
    UnknownProject { agent: String, project: String },

    #[error("agent `{agent}`: contribution {contribution} is outside [0, budget = {budget}]")]
    ContributionExceedsBudget {
        agent: String,
        contribution: f64,
        budget: f64,
    },

    #[error("agent `{agent}`: budget {budget} is negative or not finite")]
    InvalidBudget { agent: String, budget: f64 },

    #[error("agent index {0} out of range")]
    NoSuchAgent(usize),

    #[error("distribution does not match the instance projects: {0}")]
    ProjectMismatch(String),

    #[error("distribution total {found} differs from the pool {expected}")]
    TotalMismatch { expected: f64, found: f64 },

    #[error("agent `{0}` has zero utility under the current distribution")]
    ZeroUtilityAgent(String),

    #[error("solver stopped after {iterations} iterations with gap bound {gap_bound:e}")]
    MaxItersExceeded {
        iterations: usize,
        gap_bound: f64,
        best: Box<SolveResult>,
    },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("distribution is not at the Nash optimum (max KKT residual {0:e})")]
    NotAtOptimum(f64),

    #[error("subset enumeration is limited to {limit} agents, instance has {agents}")]
    TooManyAgents { agents: usize, limit: usize },

    #[error("mechanism `{mechanism}` does not support this instance: {reason}")]
    UnsupportedInstance {
        mechanism: &'static str,
        reason: String,
    },

    #[error("linear program failed: {0}")]
    LpFailure(String),

    #[error("group is not eligible for the core-share check: {0}")]
    GroupNotEligible(String),

    #[error("unknown mechanism `{0}`")]
    UnknownMechanism(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
