use thiserror::Error;

use crate::solver::QpError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("polytope is empty")]
    EmptySet,
    #[error("polytope is unbounded")]
    Unbounded,
    #[error("seed point is not strictly inside the polytope")]
    SeedNotInterior,
    #[error("seed lies inside obstacle {obstacle}")]
    SeedInCollision { obstacle: usize },
    #[error("seed lies outside the domain")]
    SeedOutsideDomain,
    #[error("hull intersects obstacle {obstacle}")]
    HullInCollision { obstacle: usize },
    #[error("hull leaves the domain")]
    HullOutsideDomain,
    #[error("start and final sets are not connected")]
    NoPath,
    #[error("no free unexplored sample found after {attempts} attempts")]
    ExplorationSaturated { attempts: usize },
    #[error("start pose is in collision with obstacle {obstacle}")]
    StartInCollision { obstacle: usize },
    #[error("goal pose is in collision with obstacle {obstacle}")]
    GoalInCollision { obstacle: usize },
    #[error("sample budget of {budget} exhausted before the set path converged")]
    BudgetExceeded {
        budget: usize,
        graph: Box<crate::graph::SetGraph>,
    },
    #[error("hull cannot pass between sets {sets:?}")]
    PathInfeasible { sets: (usize, usize) },
    #[error("position left its set at step {step}")]
    TunnelViolation { step: usize },
    #[error("tracked point {point} would collide along its predicted motion")]
    PredictedCollision { point: usize },
    #[error("qp: {0}")]
    Qp(#[from] QpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Variant name used in metrics files and CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::EmptySet => "EmptySet",
            Error::Unbounded => "Unbounded",
            Error::SeedNotInterior => "SeedNotInterior",
            Error::SeedInCollision { .. } => "SeedInCollision",
            Error::SeedOutsideDomain => "SeedOutsideDomain",
            Error::HullInCollision { .. } => "HullInCollision",
            Error::HullOutsideDomain => "HullOutsideDomain",
            Error::NoPath => "NoPath",
            Error::ExplorationSaturated { .. } => "ExplorationSaturated",
            Error::StartInCollision { .. } => "StartInCollision",
            Error::GoalInCollision { .. } => "GoalInCollision",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::PathInfeasible { .. } => "PathInfeasible",
            Error::TunnelViolation { .. } => "TunnelViolation",
            Error::PredictedCollision { .. } => "PredictedCollision",
            Error::Qp(_) => "Qp",
            Error::Io(_) => "Io",
            Error::Parse(_) => "Parse",
        }
    }
}

impl Error {
    /// Process exit code: 1 for bad input, 3 for tracking violations, 2 for
    /// every planner failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Parse(_) | Error::Io(_) => 1,
            Error::TunnelViolation { .. } | Error::PredictedCollision { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
