//! Turning non-guarded corecursive stream equations into structurally
//! recursive functions over indices.
//!
//! Pipeline: [`parser`] → [`guard`] (classify) → [`transform`] (derive) →
//! [`termination`] (structural check) → [`eval`] (compare against the lazy
//! unfolding of the original equation).

pub mod ast;
pub mod corpus;
pub mod diag;
pub mod eval;
pub mod guard;
pub mod nameless;
pub mod parser;
pub mod pretty;
pub mod termination;
pub mod transform;

pub use ast::{Environment, Ident, IndexDef, IndexExpr, Scalar, SurfaceDef};
pub use diag::{DiagCode, Diagnostic, SourceSpan};
pub use guard::{classify_guardedness, GuardReport, Guardedness};
pub use nameless::alpha_eq;
pub use parser::{parse_file, parse_program, Program};
pub use termination::{check_structural, StructReport};
pub use transform::{derive, Derivation, TransformError};
