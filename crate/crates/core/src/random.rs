//! Seeded random instances: Haar unitaries, states and POVMs.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::linalg::{c, eig_hermitian, inner, vec_norm, CVector, Matrix, C64};
use crate::naimark::NearlyProjective;
use crate::povm::{Povm, StochasticMap};

fn gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re, im) / 2f64.sqrt()
}

/// Complex Gaussian vector of length `d`.
pub fn gaussian_vector(d: usize, rng: &mut impl Rng) -> CVector {
    (0..d).map(|_| gaussian(rng)).collect()
}

/// Uniformly random unit vector in `C^d`.
pub fn random_unit_vector(d: usize, rng: &mut impl Rng) -> CVector {
    let mut v = gaussian_vector(d, rng);
    let n = vec_norm(&v);
    for z in &mut v {
        *z /= n;
    }
    v
}

/// Haar-random unitary: Gram–Schmidt on a Ginibre matrix, column by column.
pub fn haar_unitary(d: usize, rng: &mut impl Rng) -> Matrix {
    let mut cols: Vec<CVector> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v = gaussian_vector(d, rng);
        for _ in 0..2 {
            for b in &cols {
                let p = inner(b, &v);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= p * y;
                }
            }
        }
        let n = vec_norm(&v);
        if n < 1e-8 {
            continue;
        }
        for z in &mut v {
            *z /= n;
        }
        cols.push(v);
    }
    Matrix::from_columns(d, &cols)
}

/// Pure state `ψψ†` for a uniformly random `ψ`.
pub fn random_pure_state(d: usize, rng: &mut impl Rng) -> Matrix {
    let v = random_unit_vector(d, rng);
    Matrix::outer(&v, &v)
}

/// Full-rank density matrix `GG†/tr(GG†)` with `G` Ginibre.
pub fn random_density_matrix(d: usize, rng: &mut impl Rng) -> Matrix {
    let g = Matrix::from_fn(d, d, |_, _| gaussian(rng));
    let w = &g * &g.adjoint();
    let t = w.trace().re;
    w.scale(1.0 / t).hermitian_part()
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian(d: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(d, d, |_, _| gaussian(rng)).hermitian_part()
}

fn inverse_sqrt(s: &Matrix) -> Matrix {
    let spec = eig_hermitian(&s.hermitian_part()).expect("frame operator is Hermitian");
    spec.map(|x| 1.0 / x.max(1e-300).sqrt()).hermitian_part()
}

/// Rank-one POVM `ψ̃_i ψ̃_i†` with `ψ̃_i = S^{-1/2} v_i`, `S = Σ v_i v_i†`,
/// for `n ≥ d` Gaussian vectors `v_i`.
pub fn random_rank_one_povm(d: usize, n: usize, rng: &mut impl Rng) -> Povm {
    assert!(n >= d, "a rank-one POVM on C^{d} needs at least {d} outcomes");
    let vs: Vec<CVector> = (0..n).map(|_| gaussian_vector(d, rng)).collect();
    let mut s = Matrix::zeros(d, d);
    for v in &vs {
        s.add_scaled(1.0, &Matrix::outer(v, v));
    }
    let r = inverse_sqrt(&s);
    let effects = vs
        .iter()
        .map(|v| {
            let w = r.mul_vec(v);
            Matrix::outer(&w, &w)
        })
        .collect();
    Povm::new(d, effects).expect("shapes agree")
}

/// POVM with `n` full-rank effects `S^{-1/2} G_i S^{-1/2}`, `G_i` Wishart.
pub fn random_mixed_povm(d: usize, n: usize, rng: &mut impl Rng) -> Povm {
    let gs: Vec<Matrix> = (0..n)
        .map(|_| {
            let g = Matrix::from_fn(d, d, |_, _| gaussian(rng));
            (&g * &g.adjoint()).hermitian_part()
        })
        .collect();
    let mut s = Matrix::zeros(d, d);
    for g in &gs {
        s += g;
    }
    let r = inverse_sqrt(&s);
    let effects = gs.iter().map(|g| (&(&r * g) * &r).hermitian_part()).collect();
    Povm::new(d, effects).expect("shapes agree")
}

/// Exactly flat rank-one POVM: the columns of `m` Haar unitaries, each
/// with magnitude `1/m`, giving `n = m·d` outcomes.
pub fn flat_povm(d: usize, m: usize, rng: &mut impl Rng) -> Povm {
    assert!(m >= 1);
    let mut vectors = Vec::with_capacity(m * d);
    for _ in 0..m {
        let u = haar_unitary(d, rng);
        vectors.extend((0..d).map(|j| u.column(j)));
    }
    Povm::rank_one(d, &vec![1.0 / m as f64; m * d], &vectors).expect("shapes agree")
}

/// Random probability vector (flat Dirichlet).
pub fn random_distribution(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = p.iter().sum();
    for x in &mut p {
        *x /= s;
    }
    p
}

/// Stochastic map with independent flat-Dirichlet columns.
pub fn random_stochastic_map(rows: usize, cols: usize, rng: &mut impl Rng) -> StochasticMap {
    let columns: Vec<Vec<f64>> = (0..cols).map(|_| random_distribution(rows, rng)).collect();
    StochasticMap::from_columns(rows, &columns).expect("columns are distributions")
}

/// Random nearly projective data: `l` unit vectors and amplitudes drawn
/// from `amp_range` such that `Σ A_i ψ_iψ_i† ≤ I`. Draws are rejected until
/// the bound holds; after 1000 failures the vectors are orthonormalized.
pub fn random_nearly_projective<R: Rng>(
    d: usize,
    l: usize,
    amp_range: std::ops::RangeInclusive<f64>,
    rng: &mut R,
) -> NearlyProjective {
    let draw = |rng: &mut R| -> (Vec<f64>, Vec<CVector>) {
        let amps = (0..l).map(|_| rng.random_range(amp_range.clone())).collect();
        let psis = (0..l).map(|_| random_unit_vector(d, rng)).collect();
        (amps, psis)
    };
    for _ in 0..1000 {
        let (amps, psis) = draw(rng);
        let mut s = Matrix::zeros(d, d);
        for (a, v) in amps.iter().zip(&psis) {
            s.add_scaled(*a, &Matrix::outer(v, v));
        }
        if crate::linalg::op_norm(&s).expect("Hermitian") <= 1.0 {
            return NearlyProjective { dim: d, amps, psis };
        }
    }
    let (amps, _) = draw(rng);
    let u = haar_unitary(d, rng);
    NearlyProjective {
        dim: d,
        amps,
        psis: (0..l).map(|j| u.column(j)).collect(),
    }
}
