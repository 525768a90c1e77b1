//! Weighted determinant maximization over block-diagonal PSD variables.

pub mod gap;
pub mod newton;
pub mod problem;
pub mod scaling;
pub mod solver;

pub use gap::{extended_duality_gap, gap_info, GapInfo};
pub use newton::{newton_direction, Direction, Layout};
pub use problem::{BlockDiag, BlockSpec, EqRow, MaxDetProblem, RowTerm};
pub use scaling::{nt_point, nt_scaling, NtBlock};
pub use solver::{
    initial_point, kkt_residuals, solve, solve_with_sink, IterationRecord, IterationSink,
    KktResiduals, SolverConfig, SolverSolution, SolverStatus,
};
