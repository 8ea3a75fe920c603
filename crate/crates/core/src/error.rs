use thiserror::Error;

use crate::cr_solver::CrSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("degenerate channel for cell {cell}: {reason}")]
    DegenerateChannel { cell: usize, reason: String },

    #[error("no zero-forcing direction exists for cell {cell}: cross channels span all {antennas} antennas")]
    Infeasible { cell: usize, antennas: usize },

    #[error("dual variables give a rank-deficient B matrix for cell {cell}")]
    DegenerateDual { cell: usize },

    #[error(
        "dual search for cell {} did not converge after {} iterations (gap {:.3e} bits)",
        best.cell,
        best.diagnostics.iterations,
        best.diagnostics.duality_gap
    )]
    NonConvergence { best: Box<CrSolution> },
}
