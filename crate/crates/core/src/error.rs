use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid chart: {0}")]
    Chart(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("path leaves the chart box at node {node:?}, point {point:?}")]
    ChartEscape { node: Vec<usize>, point: Vec<f64> },
    #[error("cubes are not composable along axis {axis}: faces differ by {gap:e}")]
    Composability { axis: usize, gap: f64 },
    #[error("time-dependent sections do not commute: residual {residual:e} > {tol:e}")]
    NotCommuting { residual: f64, tol: f64 },
    #[error("bracket has a component outside the kernel: {residual:e}")]
    NonKernel { residual: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("solution blew up at node {node:?}")]
    BlowUp { node: Vec<usize> },
    #[error("malformed cube document: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
