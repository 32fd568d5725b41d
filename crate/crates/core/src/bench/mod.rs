//! Experiment generation, execution, metric logging and rate fitting.

mod problem;
mod rates;
mod record;
mod reference;
mod run;

pub use problem::*;
pub use rates::*;
pub use record::*;
pub use reference::*;
pub use run::*;
