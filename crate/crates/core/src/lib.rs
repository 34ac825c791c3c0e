//! One-time memories built from Wiesner (conjugate-coding) states, a random
//! oracle and conjunction obfuscation, together with the numerical machinery
//! used to stress-test the conjugate-basis guessing bound they rely on.
//!
//! Module map:
//!
//! - [`qsim`]: dense state vectors, density operators and POVMs for small
//!   m-qubit blocks.
//! - [`bound`]: the good/bad outcome partition, guessing probabilities, the
//!   analytic bound `1/2^m + 4 eps^(1/4)` and a constrained optimizer that
//!   searches for the strongest blockwise attack.
//! - [`gf`] and [`obf`]: GF(2^w) arithmetic and the conjunction obfuscator
//!   (pattern matching with wildcards, key released on accept).
//! - [`oracle`]: the random oracle `H(i, s)` in lazily-sampled and SHA-256
//!   modes, with a query transcript.
//! - [`otm`]: token preparation and honest evaluation.
//! - [`adversary`]: attack strategies, the security game and the simulator
//!   comparison.
//!
//! Trials, optimizer restarts and sweep points are independent and run on
//! rayon when the `parallel` feature is enabled (the default); see [`par`].

#![forbid(unsafe_code)]

pub mod adversary;
pub mod bits;
pub mod bound;
mod error;
pub mod gf;
pub mod obf;
pub mod oracle;
pub mod otm;
pub mod par;
pub mod qsim;
pub mod rng;

pub use error::{Error, Result};
