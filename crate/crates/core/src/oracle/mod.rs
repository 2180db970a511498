//! Exact reference solutions and iterative baselines.

mod qp;

pub use qp::{
    solve_inequality_qp, solve_sampled_qp, InequalityQp, QpSolution, COMPLEMENTARITY_TOL, MAX_ITERATIONS, PRIMAL_TOL,
    STATIONARITY_TOL,
};

mod baselines;

pub use baselines::{
    discrete_pc_track, newton_corrections, oracle_trajectory, primal_dual_track, DiscretePcConfig, PrimalDualConfig,
    TrackedRun,
};
