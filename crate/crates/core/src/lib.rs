//! Numerical workbench for Lie algebroids on a single coordinate chart.
//!
//! Algebroids are given by an anchor matrix and structure functions built
//! from [`expr::Expr`]. On top of that sit grid-sampled cubes (algebroid
//! morphisms out of `TIⁿ`), fibrations with Ehresmann connections, lifts of
//! cubes, and the transgression and monodromy maps.

pub mod algebroid;
pub mod cubes;
pub mod cutoff;
pub mod error;
pub mod expr;
pub mod fibration;
pub mod interp;
pub mod linalg;
pub mod numeric;
pub mod samples;
pub mod transgression;

pub use algebroid::{Algebroid, AxiomReport, Bivector, Chart, Section};
pub use cubes::{Cube, Residual, TimeSections};
pub use error::{Error, Result};
pub use expr::{Env, Expr, ExprError};
pub use fibration::{Curvature2Form, Fibration};
pub use transgression::{MonodromyReport, TransgressionResult};

