//! Minimal pulsating travelling-wave speeds for the periodic KPP equation
//! `u_t = u_xx + b(x) u (1 - u)`.

pub mod coeff;
pub mod eigen;
pub mod error;
pub mod floquet;
pub mod front;
mod linalg;
pub mod pde;
pub mod speed;
pub mod svg;
pub mod sweep;

pub use coeff::{Atom, AtomDiscretization, MollifierSpec, PeriodicCoefficient};
pub use eigen::{EigenMethod, EigenPair, SolverConfig};
pub use error::{Error, Result};
pub use pde::{SimulationConfig, SimulationTrace};
pub use speed::{Direction, SpeedConfig, SpeedResult};
