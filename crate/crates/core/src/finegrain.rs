//! Fine-graining into rank-one POVMs with nearly equal effect magnitudes.

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, CVector, Matrix};
use crate::povm::{rank_above, Povm, StochasticMap};
use crate::tol;

/// Refinements larger than this are refused rather than allocated.
pub const MAX_REFINED_OUTCOMES: usize = 1 << 20;

/// A rank-one fine-graining together with the coarse-graining that undoes it.
#[derive(Clone, Debug)]
pub struct Refinement {
    /// Rank-one effects `α_j ψ_j ψ_j†`.
    pub refined: Povm,
    /// `post_process(recover, refined)` reproduces the input.
    pub recover: StochasticMap,
    pub alphas: Vec<f64>,
    /// Unit vectors `ψ_j`.
    pub vectors: Vec<CVector>,
    /// Zero-based input outcome each refined outcome came from.
    pub origin: Vec<usize>,
    /// `max α / min α`.
    pub flatness: f64,
}

impl Refinement {
    fn assemble(dim: usize, n_in: usize, pieces: Vec<(usize, f64, CVector, Option<Matrix>)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidPovm("no nonzero spectral pieces".into()));
        }
        let origin: Vec<usize> = pieces.iter().map(|p| p.0).collect();
        let recover = StochasticMap::relabel(n_in, &origin)?;
        let alphas: Vec<f64> = pieces.iter().map(|p| p.1).collect();
        let mut vectors = Vec::with_capacity(pieces.len());
        let mut effects = Vec::with_capacity(pieces.len());
        for (_, a, v, exact) in pieces {
            effects.push(exact.unwrap_or_else(|| Matrix::scaled_projector(a, &v)));
            vectors.push(v);
        }
        let max = alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = alphas.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            refined: Povm::new(dim, effects)?,
            recover,
            alphas,
            vectors,
            origin,
            flatness: max / min,
        })
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn max_alpha(&self) -> f64 {
        self.alphas.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_alpha(&self) -> f64 {
        self.alphas.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `⌈y⌉`, treating values within a relative `1e-12` of an integer as that integer.
pub(crate) fn tolerant_ceil(y: f64) -> usize {
    let r = y.round();
    if (y - r).abs() <= 1e-12 * y.abs().max(1.0) {
        r.max(1.0) as usize
    } else {
        y.ceil().max(1.0) as usize
    }
}

fn check_delta_eps(delta: f64, eps: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta {delta} outside (0, 1)")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps {eps} must be positive")));
    }
    Ok(())
}

fn equal_parts(x: f64, k: usize) -> Vec<f64> {
    let part = x / k as f64;
    let mut parts = vec![part; k];
    // Last part absorbs rounding so the parts sum to x.
    parts[k - 1] = x - part * (k - 1) as f64;
    parts
}

/// Splits each `x_i` into equal parts no larger than `eps` whose overall
/// max/min ratio is at most `1 + delta`.
///
/// Inputs that already satisfy both conditions are returned as single
/// parts. Otherwise every entry is cut into `⌈x_i/u⌉` equal parts with
/// `u = min(eps, delta · min x)`.
pub fn subdivide_weights(x: &[f64], delta: f64, eps: f64) -> Result<Vec<Vec<f64>>> {
    check_delta_eps(delta, eps)?;
    if x.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(bad) = x.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!("weight {bad} is not positive")));
    }
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(0.0, f64::max);
    if max <= eps * (1.0 + 1e-9) && max <= (1.0 + delta) * min {
        return Ok(x.iter().map(|&v| vec![v]).collect());
    }
    let u = eps.min(delta * min);
    let counts: Vec<usize> = x.iter().map(|&v| tolerant_ceil(v / u)).collect();
    let total: usize = counts.iter().sum();
    if total > MAX_REFINED_OUTCOMES {
        return Err(Error::InvalidParameter(format!(
            "subdivision would produce {total} parts (limit {MAX_REFINED_OUTCOMES})"
        )));
    }
    Ok(x.iter().zip(counts).map(|(&v, k)| equal_parts(v, k)).collect())
}

/// Spectral rank-one pieces `(effect index, eigenvalue, eigenvector)`,
/// skipping eigenvalues below the piece cutoff.
pub fn spectral_pieces(m: &Povm) -> Result<Vec<(usize, f64, CVector)>> {
    let mut out = Vec::new();
    for (i, e) in m.effects().iter().enumerate() {
        let s = eig_hermitian(e)?;
        for (lam, v) in s.eigenvalues.into_iter().zip(s.eigenvectors).rev() {
            if lam >= tol::PIECE {
                out.push((i, lam, v));
            }
        }
    }
    Ok(out)
}

/// Rank-one refinement with flatness `≤ 1 + delta` and magnitudes `≤ eps`.
pub fn flat_refine(m: &Povm, delta: f64, eps: f64) -> Result<Refinement> {
    check_delta_eps(delta, eps)?;
    m.validate().into_result()?;
    let pieces = spectral_pieces(m)?;
    let lambdas: Vec<f64> = pieces.iter().map(|p| p.1).collect();
    let parts = subdivide_weights(&lambdas, delta, eps)?;
    let mut out = Vec::new();
    for ((i, _, v), ps) in pieces.into_iter().zip(parts) {
        for a in ps {
            out.push((i, a, v.clone(), None));
        }
    }
    Refinement::assemble(m.dim(), m.len(), out)
}

/// Rank-one refinement used for the spectral decomposition alone, with no
/// flattening.
pub fn spectral_refine(m: &Povm) -> Result<Refinement> {
    let out = spectral_pieces(m)?
        .into_iter()
        .map(|(i, a, v)| (i, a, v, None))
        .collect();
    Refinement::assemble(m.dim(), m.len(), out)
}

/// Splits each rank-one effect `α_i ψψ†` into `⌈d·α_i⌉` equal parts so
/// every magnitude is at most `1/d`. Zero effects are skipped.
pub fn extremal_refine(m: &Povm) -> Result<Refinement> {
    let d = m.dim();
    m.validate().into_result()?;
    if m.len() > d * d {
        return Err(Error::InvalidPovm(format!(
            "{} outcomes exceed the d² = {} bound for extremal rank-one POVMs",
            m.len(),
            d * d
        )));
    }
    let mut out = Vec::new();
    for (i, e) in m.effects().iter().enumerate() {
        let s = eig_hermitian(e)?;
        let alpha = e.trace().re;
        if alpha < crate::povm::ZERO_EFFECT_TRACE {
            continue;
        }
        let rank = rank_above(&s.eigenvalues);
        if rank != 1 {
            return Err(Error::InvalidPovm(format!("effect {} has rank {rank}", i + 1)));
        }
        let v = s.eigenvectors.last().expect("nonempty spectrum").clone();
        let k = tolerant_ceil(d as f64 * alpha);
        let piece = if k == 1 { e.clone() } else { e.scale(1.0 / k as f64) };
        for _ in 0..k {
            out.push((i, alpha / k as f64, v.clone(), Some(piece.clone())));
        }
    }
    Refinement::assemble(d, m.len(), out)
}
