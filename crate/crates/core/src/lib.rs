pub mod bath;
pub mod coherent;
pub mod dfs;
pub mod error;
pub mod fock;
pub mod grid;
pub mod pulse;
pub mod special;

pub use bath::{BathSpec, Integral};
pub use coherent::{BranchProfile, CoherenceTrace, Direction, PhaseSum, PhaseTerm};
pub use error::{Error, Result};
pub use grid::{FrequencyGrid, GridOptions, GridScheme};
