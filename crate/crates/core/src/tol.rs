//! Numerical tolerances shared across modules.

/// Hermiticity check on single matrices (max entry deviation).
pub const HERM: f64 = 1e-10;
/// Orthonormality / unitarity (Frobenius norm of `V†V - I`).
pub const ORTH: f64 = 1e-10;
/// Relative Frobenius error of spectral reconstructions.
pub const RECON: f64 = 1e-9;
/// Relative eigenvalue cutoff for numerical rank.
pub const RANK: f64 = 1e-9;
/// Most negative eigenvalue accepted in an effect.
pub const PSD: f64 = 1e-9;
/// Normalization error of a POVM, per unit dimension (Frobenius).
pub const NORM_PER_DIM: f64 = 1e-8;
/// Column sums of stochastic maps and sums of probability weights.
pub const STOCH: f64 = 1e-10;
/// Effect-wise deviation allowed when checking a projective-simulation witness.
pub const WITNESS: f64 = 1e-8;
/// Pairwise product relation `P_i P_j = δ_ij P_i` (Frobenius).
pub const PROJ: f64 = 1e-9;
/// Spectral pieces below this magnitude are discarded when fine-graining.
pub const PIECE: f64 = 1e-12;

/// POVM normalization tolerance in dimension `d`.
pub fn norm(d: usize) -> f64 {
    NORM_PER_DIM * d as f64
}

/// Runtime-adjustable subset of the tolerances, for callers that expose them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub psd: f64,
    pub norm_per_dim: f64,
    pub stoch: f64,
    pub witness: f64,
    pub proj: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            psd: PSD,
            norm_per_dim: NORM_PER_DIM,
            stoch: STOCH,
            witness: WITNESS,
            proj: PROJ,
        }
    }
}

impl Tolerances {
    pub fn norm(&self, d: usize) -> f64 {
        self.norm_per_dim * d as f64
    }
}
