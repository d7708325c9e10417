//! In-sample softmax Bellman operators, exact tabular solvers, and the
//! In-Sample Actor-Critic (InAC) for offline reinforcement learning, with
//! the Four Rooms experiments and a randomized property suite.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

pub mod agents;
pub mod data;
pub mod envs;
pub mod error;
pub mod experiment;
mod linalg;
pub mod nn;
pub mod mdp;
pub mod operators;
pub mod scalar;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
pub use mdp::{Policy, QTable, SupportSet, TabularMdp, VTable};
pub use operators::{BackupKind, EmptySupport, Temperature};
pub use scalar::Scalar;
pub use solvers::{SolveOptions, SolveReport};

pub type Mdp = TabularMdp<f64>;
pub type Mdp32 = TabularMdp<f32>;
pub type PolicyF64 = Policy<f64>;
pub type QTableF64 = QTable<f64>;
pub type VTableF64 = VTable<f64>;
pub type Tau = Temperature<f64>;
pub type Backup = BackupKind<f64>;
pub type Report = SolveReport<f64>;
