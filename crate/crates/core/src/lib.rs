//! Exact simulation toolkit for two-observer ("friends") measurement
//! protocols: dense complex linear algebra on small tensor-factored Hilbert
//! spaces, a classical stopping-time engine with Monte Carlo synchronization
//! experiments, projection-valued measurement processes driven by stopping
//! times, the detector-overlap conditional protocol, and entanglement
//! monogamy audits.
//!
//! # Reproducibility
//!
//! All randomness flows through [`SimRng`] (ChaCha8), a portable counter-based
//! generator. Experiments derive one independent stream per trial index via
//! [`trial_rng`], and reductions are performed in trial order, so every report
//! is bit-identical for a given `(config, seed)` regardless of how many worker
//! threads run the trials (see [`exec`]).

pub mod exec;
pub mod friends;
pub mod monogamy;
pub mod povm;
pub mod qstate;
pub mod stopping;

use rand::SeedableRng;

/// The crate-wide random number generator: ChaCha with 8 rounds, seeded from
/// a 64-bit value. Portable across platforms and rand releases.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Returns the generator for one trial: the base seed selects the key and the
/// trial index selects an independent ChaCha stream, so trials never overlap
/// no matter how many samples each one draws.
pub fn trial_rng(seed: u64, trial: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Default seed used by the command-line front end when none is given.
pub const DEFAULT_SEED: u64 = 0xF2F2;
