//! Scenario language, query execution, result formats and built-in
//! scenarios on top of `histq-core`.

pub mod builtins;
pub mod dsl;
pub mod output;
pub mod run;
