//! Critical points, strata and codimension-one bifurcations of fields on the
//! half-space `x >= 0` that are even under `x -> -x`.
//!
//! Fields are given as expressions in `x, y1, ..., y7` and evaluated over
//! truncated Taylor jets; everything downstream (classification, normal
//! forms, path tracking) works on those jets.

pub mod collar;
pub mod continuation;
pub mod critical;
pub mod exec;
pub mod expr;
pub mod field;
pub mod jet;
pub mod linalg;
pub mod plane;
pub mod poly;
pub mod strata;

pub use exec::Exec;
pub use expr::{parse_expression, Expr, Params, ParseError};
pub use jet::{Jet, JetError, Layout, MultiIndex, Parity, SymmetryMask};
