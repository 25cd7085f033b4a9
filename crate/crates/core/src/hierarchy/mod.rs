//! The correlation-function hierarchy on finite site spaces: the generator
//! acting on correlation tables, its time integration and envelope checks.

mod integrate;
mod operator;
mod ruelle;
mod table;

pub use integrate::{integrate_hierarchy, StepControl};
pub use operator::{apply_hierarchy, Closure, Exclusion, HierarchyOptions};
pub use ruelle::{ruelle_bound_check, RuelleReport, RuelleRow};
pub use table::{CorrelationTable, TableEntry};
