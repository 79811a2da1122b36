//! Periodic Fourier representation, Littlewood–Paley blocks and Besov norms.

mod character;
mod field;
mod grid;
mod ladder;
mod norms;

pub use character::{
    block_field, estimate_decay_character, radial_cutoff, shell_field, synth_decay_character,
    synth_with_cutoff, DecayCharacter, SynthMode,
};
pub use field::SpectralField;
pub use grid::{pad_coefficients, FftNd, GridConfig};
pub use ladder::{
    block, chi, fit_j_min, low_part, make_ladder, phi_j, smooth_step, ChiParams, DyadicLadder, LadderSummary,
};
pub use norms::{
    aggregate, besov_from_blocks, besov_norm, block_norms, low_part_block_norms, lp_norm, lp_norm_quadrature,
    plancherel_norm, Band, BesovSpec, BlockNorms, QUADRATURE_PAD,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid ladder: {0}")]
    InvalidLadder(String),
    #[error("block {0} is not resolved by the grid")]
    UnresolvedBlock(i32),
    #[error("block {0} is outside the ladder")]
    BlockOutOfRange(i32),
    #[error("band out of range: {0}")]
    BandOutOfRange(String),
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("decay character {0} is not resolvable on this grid")]
    UnresolvableSigma(f64),
    #[error("only {0} blocks carry norm above the floor, need 5")]
    InsufficientBlocks(usize),
    #[error("component mismatch: {0}")]
    ComponentMismatch(String),
    #[error("io: {0}")]
    Io(String),
}

/// Default grid and ladder for a dimension: `(N, L_box, j_min, j_max, J0)`.
///
/// Both leave at least five blocks with `2^j ≥ 4/L_box` at or below `J0 = −2`.
pub fn default_layout(d: usize) -> (usize, f64, i32, i32, i32) {
    match d {
        1 => (4096, 256.0, -7, 1, -2),
        _ => (1024, 256.0, -7, -1, -2),
    }
}

/// Grid and ladder from [`default_layout`].
pub fn default_ladder(d: usize) -> Result<DyadicLadder, SpectralError> {
    let (n, l, j_min, j_max, j0) = default_layout(d);
    make_ladder(GridConfig::new(d, n, l)?, j0, j_min, j_max)
}
