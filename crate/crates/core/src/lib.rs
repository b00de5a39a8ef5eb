//! Directed last-passage site percolation on thin `n × ⌊n^α⌋` grids.
//!
//! The crate is organised bottom-up:
//!
//! * [`distributions`] finite-atom weight laws with a hi/lo mode split,
//! * [`lattice`] grid geometry, the last-passage dynamic program, geodesics,
//!   cylinder restriction and brute-force oracles,
//! * [`coupling`] the lo→hi flipping sequence `W^0, …, W^{rows·n}` and the
//!   reversed Lipschitz checks on its passage-time trajectory,
//! * [`estimation`] central moments, exponent fits, binomial windows and the
//!   thin-rectangle shape function,
//! * [`experiments`] reproducible, resumable, parallel orchestration,
//! * [`plot`] standalone SVG output for experiment records.

pub mod coupling;
pub mod distributions;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod lattice;
pub mod plot;
pub mod stream;

pub use error::{Error, Result};
