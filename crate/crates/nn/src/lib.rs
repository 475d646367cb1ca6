//! Minimal differentiable numeric kernel.
//!
//! Everything here works on 64-bit floats and fixed architectures: dense
//! layers, LSTM cells, softmax and a few losses, each with a hand-derived
//! backward pass. There is no tape; callers chain forward caches and backward
//! calls themselves. Parameters live in a [`ParamSet`] keyed by name, are
//! optimized with [`Adamax`], and are persisted through the `CMN1` container in
//! [`container`].

pub mod adamax;
pub mod array;
pub mod container;
pub mod dense;
pub mod error;
pub mod gradcheck;
pub mod init;
pub mod lstm;
pub mod ops;
pub mod params;

pub use adamax::{Adamax, AdamaxConfig};
pub use array::NumArray;
pub use dense::Dense;
pub use error::{NnError, Result};
pub use gradcheck::grad_check;
pub use init::seeded_rng;
pub use lstm::{LstmCache, LstmLayer};
pub use params::ParamSet;
