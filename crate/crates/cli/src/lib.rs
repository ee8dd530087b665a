//! Problem files, an expression language for user-defined fields, CSV
//! output and the invariant suite behind the `varmech` command.

pub mod catalog;
pub mod checks;
pub mod expr;
pub mod run;
pub mod spec;
pub mod table;

pub use expr::{parse_expr, Expr, ParseError};
pub use run::{run_spec, Overrides, RunError, RunOutput};
pub use spec::{Kind, ProblemSpec, SpecError};
pub use table::{Table, TableError};
