//! Exact Weingarten and Wick calculus for Haar unitaries, non-backtracking
//! spectral machinery, free-group operator norms and the linearization of
//! polynomial norms into linear-pencil norms.
//!
//! The crate is organised bottom-up:
//!
//! * [`symcore`]: permutations, pair partitions, set partitions, sign sequences.
//! * [`weingarten`]: exact unitary and orthogonal Weingarten tables, monotone
//!   Hurwitz counts, the 1/n series and Haar moment formulas.
//! * [`centered_wg`]: moments of products of centered ("bracketed") monomials.
//! * [`wick`]: Gaussian Wick calculus and the Haar/Gaussian comparison checks.
//! * [`freegroup`]: reduced words, free-group pencils, Cayley-tree truncations,
//!   resolvent entries and the Weyl sequence for non-backtracking spectral radii.
//! * [`nonbacktracking`]: finite non-backtracking operators and their companions.
//! * [`haarmodel`]: Haar sampling and the random tensor model.
//! * [`linearization`]: reduction of polynomial norms to linear pencils.
//! * [`cli`]: the `haarmoments` command line front end.

pub mod centered_wg;
pub mod cli;
pub mod error;
pub mod exact;
pub mod freegroup;
pub mod haarmodel;
pub mod linalg;
pub mod linearization;
pub mod nonbacktracking;
pub mod rng;
pub mod symcore;
pub mod weingarten;
pub mod wick;

pub use error::{Error, Result};
