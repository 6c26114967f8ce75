//! Mesh-free strong-form solver for 3D linear elastostatics.
//!
//! A small ELU network maps coordinates to displacements. The loss collects
//! the equilibrium, Dirichlet and Neumann residuals at collocation points,
//! which needs second spatial derivatives of the network and, for training,
//! their parameter gradients; both are computed exactly in [`jet`].
//!
//! Training combines a mutation-based search over the individual parameters
//! ([`mga`]) with coarse and fine full-batch gradient descent ([`optim`]),
//! orchestrated by [`trainer`]. [`sensitivity`] screens the pipeline's
//! hyperparameters one at a time, and [`reference`] holds the closed-form
//! solution used to validate trained fields.

pub mod compare;
pub mod elasticity;
pub mod error;
pub mod exec;
pub mod jet;
pub mod mga;
pub mod network;
pub mod optim;
pub mod reference;
pub mod sampling;
pub mod sensitivity;
pub mod trainer;

pub use error::{Error, Result};
