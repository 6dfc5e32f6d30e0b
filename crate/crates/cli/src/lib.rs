pub mod expr;
pub mod run;
pub mod spec;

pub use expr::{parse_expression, Expr, SyntaxError};
pub use run::{run, run_file, RunError, RunOutcome};
pub use spec::{parse_runspec, Overrides, RunSpec, SpecError};
