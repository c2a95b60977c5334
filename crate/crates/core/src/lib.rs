#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fw;
pub mod gmspace;
pub mod harness;
pub mod linearize;
pub mod oracles;
pub mod reference;
pub mod transport;

pub use error::{Error, Result};
pub use fw::{solve_gw, solve_pgw, FwConfig, FwInit, SolveReport, Termination};
pub use gmspace::{GaugeKind, GmSpace};
pub use transport::{solve_ot, solve_partial_ot, TransportPlan};
