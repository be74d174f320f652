//! Naimark dilations and the dimension-deficient construction.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finegrain::spectral_refine;
use crate::linalg::{
    complete_isometry, eig_hermitian, heisenberg_weyl, inner, CVector, Matrix, SpanSplit, C64,
};
use crate::povm::{rank_above, Povm, SpWitness, StochasticMap, WitnessComponent};
use crate::tol;

/// How states on `C^d` are placed in the ambient space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// `ρ` occupies the first `d` coordinates.
    Block,
    /// `ρ ⊗ |0⟩⟨0|` on `C^d ⊗ C^k`, with `|j⟩|a⟩` at index `j + d·a`.
    Tensor { ancilla_dim: usize },
}

/// A projective measurement on a larger space that reproduces a target
/// POVM after embedding the state and coarse-graining outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "DilationFile", try_from = "DilationFile")]
pub struct NaimarkDilation {
    pub base_dim: usize,
    pub ambient_dim: usize,
    pub layout: Layout,
    pub projective: Povm,
    pub coarse: StochasticMap,
}

#[derive(Serialize, Deserialize)]
struct DilationFile {
    base_dim: usize,
    ambient_dim: usize,
    layout: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ancilla_dim: Option<usize>,
    projective: Povm,
    coarse: StochasticMap,
}

impl From<NaimarkDilation> for DilationFile {
    fn from(n: NaimarkDilation) -> Self {
        let (layout, ancilla_dim) = match n.layout {
            Layout::Block => ("block".to_string(), None),
            Layout::Tensor { ancilla_dim } => ("tensor".to_string(), Some(ancilla_dim)),
        };
        Self {
            base_dim: n.base_dim,
            ambient_dim: n.ambient_dim,
            layout,
            ancilla_dim,
            projective: n.projective,
            coarse: n.coarse,
        }
    }
}

impl TryFrom<DilationFile> for NaimarkDilation {
    type Error = Error;
    fn try_from(f: DilationFile) -> Result<Self> {
        let layout = match (f.layout.as_str(), f.ancilla_dim) {
            ("block", _) => Layout::Block,
            ("tensor", Some(k)) if k >= 1 && k * f.base_dim == f.ambient_dim => {
                Layout::Tensor { ancilla_dim: k }
            }
            ("tensor", _) => {
                return Err(Error::Format("tensor layout needs ancilla_dim with base_dim·ancilla_dim = ambient_dim".into()))
            }
            (other, _) => return Err(Error::Format(format!("unknown layout {other:?}"))),
        };
        if f.projective.dim() != f.ambient_dim || f.ambient_dim < f.base_dim {
            return Err(Error::Format("projective measurement does not act on the ambient space".into()));
        }
        if f.coarse.cols() != f.projective.len() {
            return Err(Error::Format("coarse map arity differs from the projective measurement".into()));
        }
        Ok(Self {
            base_dim: f.base_dim,
            ambient_dim: f.ambient_dim,
            layout,
            projective: f.projective,
            coarse: f.coarse,
        })
    }
}

impl NaimarkDilation {
    /// `ρ̃` on the ambient space. Both layouts put `ρ` in the leading
    /// `d × d` block; they differ only in how the ambient index is read.
    pub fn embed(&self, rho: &Matrix) -> Matrix {
        rho.embed_top_left(self.ambient_dim)
    }

    /// `coarse(born(projective, ρ̃))`, unnormalized.
    pub fn statistics(&self, rho: &Matrix) -> Vec<f64> {
        self.coarse.apply(&self.projective.raw_born(&self.embed(rho)))
    }

    /// Effects the dilation induces on `C^d`: `Σ_a coarse_{i|a} P_W Π_a P_W`.
    pub fn induced_povm(&self) -> Result<Povm> {
        let d = self.base_dim;
        let mut effects = vec![Matrix::zeros(d, d); self.coarse.rows()];
        for (a, p) in self.projective.effects().iter().enumerate() {
            let block = Matrix::from_fn(d, d, |i, j| p[(i, j)]);
            for (i, e) in effects.iter_mut().enumerate() {
                let w = self.coarse.get(i, a);
                if w != 0.0 {
                    e.add_scaled(w, &block);
                }
            }
        }
        Povm::new(d, effects)
    }

    /// Largest `‖induced_i − target_i‖_F`, an ρ-independent form of the
    /// dilation condition.
    pub fn deviation_from(&self, target: &Povm) -> Result<f64> {
        crate::povm::effect_distance(&self.induced_povm()?, target)
    }
}

/// Unit eigenvector and magnitude of a rank-one effect.
fn rank_one_parts(e: &Matrix, index: usize) -> Result<(f64, CVector)> {
    let s = eig_hermitian(e)?;
    let rank = rank_above(&s.eigenvalues);
    if rank != 1 {
        return Err(Error::InvalidPovm(format!(
            "effect {} has rank {rank}, expected 1 (compact zero effects first)",
            index + 1
        )));
    }
    let lam = s.max();
    Ok((lam, s.eigenvectors.last().expect("nonempty").clone()))
}

/// Rows `√α_i ψ_i†` completed to a unitary; returns the conjugated rows
/// `φ_i`, whose first `d` entries are `√α_i ψ_i`.
fn naimark_vectors(alphas: &[f64], psis: &[CVector], d: usize) -> Result<Vec<CVector>> {
    let n = alphas.len();
    let v = Matrix::from_fn(n, d, |i, j| psis[i][j].conj() * alphas[i].sqrt());
    let u = complete_isometry(&v)?;
    Ok((0..n).map(|i| u.row(i).iter().map(|z| z.conj()).collect()).collect())
}

fn pad(v: &[C64], len: usize) -> CVector {
    let mut out = v.to_vec();
    out.resize(len, C64::new(0.0, 0.0));
    out
}

fn assemble_dilation(
    d: usize,
    ambient: usize,
    layout: Layout,
    phis: &[CVector],
    targets: &[usize],
    n_out: usize,
) -> Result<NaimarkDilation> {
    let mut effects: Vec<Matrix> = phis.iter().map(|p| Matrix::outer(p, p)).collect();
    let mut map = targets.to_vec();
    if phis.len() < ambient {
        let mut rest = Matrix::identity(ambient);
        for e in &effects {
            rest.add_scaled(-1.0, e);
        }
        effects.push(rest.hermitian_part());
        map.push(n_out - 1);
    }
    Ok(NaimarkDilation {
        base_dim: d,
        ambient_dim: ambient,
        layout,
        projective: Povm::new(ambient, effects)?,
        coarse: StochasticMap::relabel(n_out, &map)?,
    })
}

/// Standard dilation of a rank-one POVM into `C^ambient` (block layout).
/// Ambient dimensions beyond `n` form one extra projector merged into the
/// last outcome.
pub fn dilate_rank_one(m: &Povm, ambient: usize) -> Result<NaimarkDilation> {
    let d = m.dim();
    let n = m.len();
    if ambient < n {
        return Err(Error::InvalidParameter(format!("ambient dimension {ambient} < {n} outcomes")));
    }
    let parts: Vec<(f64, CVector)> = m
        .effects()
        .iter()
        .enumerate()
        .map(|(i, e)| rank_one_parts(e, i))
        .collect::<Result<_>>()?;
    let (alphas, psis): (Vec<f64>, Vec<CVector>) = parts.into_iter().unzip();
    let phis: Vec<CVector> = naimark_vectors(&alphas, &psis, d)?
        .into_iter()
        .map(|p| pad(&p, ambient))
        .collect();
    let targets: Vec<usize> = (0..n).collect();
    assemble_dilation(d, ambient, Layout::Block, &phis, &targets, n)
}

/// Dilation on `C^d ⊗ C^k` with the state prepared as `ρ ⊗ |0⟩⟨0|`.
/// `N` is first split into rank-one spectral pieces; their number must not
/// exceed `d·k`.
pub fn dilate_with_ancilla(n: &Povm, k: usize) -> Result<NaimarkDilation> {
    let d = n.dim();
    if k == 0 {
        return Err(Error::InvalidParameter("ancilla dimension must be at least 1".into()));
    }
    let refined = spectral_refine(n)?;
    let pieces = refined.len();
    if pieces > d * k {
        return Err(Error::Infeasible(format!(
            "{pieces} rank-one pieces do not fit in C^{d} ⊗ C^{k}"
        )));
    }
    let phis: Vec<CVector> = naimark_vectors(&refined.alphas, &refined.vectors, d)?
        .into_iter()
        .map(|p| pad(&p, d * k))
        .collect();
    assemble_dilation(
        d,
        d * k,
        Layout::Tensor { ancilla_dim: k },
        &phis,
        &refined.origin,
        n.len(),
    )
}

/// A POVM `(A_1ψ_1ψ_1†, …, A_lψ_lψ_l†, I − Σ A_iψ_iψ_i†)`.
#[derive(Clone, Debug)]
pub struct NearlyProjective {
    pub dim: usize,
    pub amps: Vec<f64>,
    pub psis: Vec<CVector>,
}

impl NearlyProjective {
    /// The POVM `(A_1ψ_1ψ_1†, …, A_lψ_lψ_l†, I − Σ A_iψ_iψ_i†)`.
    pub fn to_povm(&self) -> Result<Povm> {
        let d = self.dim;
        let mut effects: Vec<Matrix> = self
            .amps
            .iter()
            .zip(&self.psis)
            .map(|(a, v)| Matrix::scaled_projector(*a, v))
            .collect();
        let mut rest = Matrix::identity(d);
        for e in &effects {
            rest.add_scaled(-1.0, e);
        }
        effects.push(rest.hermitian_part());
        Povm::new(d, effects)
    }

    /// Reads the form off `N`: all effects but the last must be rank one and
    /// `l ≤ d/2`.
    pub fn parse(n: &Povm) -> Result<Self> {
        let d = n.dim();
        n.validate().into_result()?;
        let l = n.len() - 1;
        if 2 * l > d {
            return Err(Error::InvalidPovm(format!("{l} rank-one effects exceed d/2 = {}", d as f64 / 2.0)));
        }
        let mut amps = Vec::with_capacity(l);
        let mut psis = Vec::with_capacity(l);
        for i in 0..l {
            let (a, v) = rank_one_parts(n.effect(i), i)?;
            if a > 1.0 + tol::PSD {
                return Err(Error::InvalidPovm(format!("effect {} has norm {a} > 1", i + 1)));
            }
            amps.push(a.min(1.0));
            psis.push(v);
        }
        Ok(Self { dim: d, amps, psis })
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }
}

/// `P_W B P_W + (tr(B P_{W⊥})/|W⊥|) P_{W⊥}`.
pub fn twirl_average(b: &Matrix, w_basis: &[CVector]) -> Result<Matrix> {
    let d = b.rows();
    let split = SpanSplit::new(d, w_basis)?;
    let k = split.complement.len();
    if k == 0 {
        return Err(Error::InvalidParameter("W must be a proper subspace".into()));
    }
    let pw = split.projector(d);
    let pp = split.complement_projector(d);
    let mut out = &(&pw * b) * &pw;
    out.add_scaled(b.trace_product(&pp).re / k as f64, &pp);
    Ok(out)
}

/// Output of [`deficient_naimark`].
#[derive(Clone, Debug)]
pub struct DeficientNaimarkResult {
    /// `F_i = A_iψ_iψ_i† + ((1−A_i)/|W⊥|) P_{W⊥}`, remainder last.
    pub f: Povm,
    /// Rank-one projectors `φ_iφ_i†` and their complement.
    pub pw: Povm,
    pub witness: SpWitness,
    pub w_dim: usize,
    pub wperp_dim: usize,
    /// Orthonormal bases of `W` and `W⊥`.
    pub w_basis: Vec<CVector>,
    pub wperp_basis: Vec<CVector>,
    pub amps: Vec<f64>,
    pub psis: Vec<CVector>,
    /// Unit vectors `φ_i` on `C^d`.
    pub phis: Vec<CVector>,
}

impl DeficientNaimarkResult {
    pub fn projector_w(&self) -> Matrix {
        projector(self.f.dim(), &self.w_basis)
    }

    pub fn projector_wperp(&self) -> Matrix {
        projector(self.f.dim(), &self.wperp_basis)
    }
}

fn projector(d: usize, basis: &[CVector]) -> Matrix {
    let mut p = Matrix::zeros(d, d);
    for b in basis {
        p.add_scaled(1.0, &Matrix::outer(b, b));
    }
    p
}

/// Projectively simulable approximation `F` of a nearly projective `N` on
/// the same space, with an exact finite-twirl witness.
pub fn deficient_naimark(n: &Povm) -> Result<DeficientNaimarkResult> {
    let np = NearlyProjective::parse(n)?;
    deficient_naimark_parts(&np)
}

pub fn deficient_naimark_parts(np: &NearlyProjective) -> Result<DeficientNaimarkResult> {
    let d = np.dim;
    let l = np.len();
    let split = SpanSplit::new(d, &np.psis)?;
    let m = split.range.len();
    let k = split.complement.len();
    if k == 0 {
        return Err(Error::InvalidPovm("the vectors ψ_i span the whole space".into()));
    }
    // Adapted coordinates: W first, then W⊥.
    let basis: Vec<CVector> = split.range.iter().chain(&split.complement).cloned().collect();
    let b = Matrix::from_columns(d, &basis);
    let to_w = |v: &CVector| -> CVector { split.range.iter().map(|w| inner(w, v)).collect() };

    let psi_hat: Vec<CVector> = np.psis.iter().map(to_w).collect();
    let mut rest = Matrix::identity(m);
    for (a, v) in np.amps.iter().zip(&psi_hat) {
        rest.add_scaled(-a, &Matrix::outer(v, v));
    }
    let spec = eig_hermitian(&rest.hermitian_part())?;
    if spec.min() < -tol::PSD {
        return Err(Error::InvalidPovm(format!(
            "remainder restricted to W is not PSD (min eigenvalue {:.3e})",
            spec.min()
        )));
    }
    let mut alphas = np.amps.clone();
    let mut vecs = psi_hat.clone();
    for (mu, u) in spec.eigenvalues.iter().zip(&spec.eigenvectors).rev() {
        if *mu >= tol::PIECE {
            alphas.push(*mu);
            vecs.push(u.clone());
        }
    }
    if alphas.len() > d {
        return Err(Error::Infeasible(format!(
            "{} rank-one pieces on W do not fit in C^{d}",
            alphas.len()
        )));
    }
    let phis: Vec<CVector> = naimark_vectors(&alphas, &vecs, m)?
        .into_iter()
        .take(l)
        .map(|p| b.mul_vec(&pad(&p, d)))
        .collect();

    let mut pw_effects: Vec<Matrix> = phis.iter().map(|p| Matrix::outer(p, p)).collect();
    let mut pw_rest = Matrix::identity(d);
    for e in &pw_effects {
        pw_rest.add_scaled(-1.0, e);
    }
    pw_effects.push(pw_rest.hermitian_part());
    let pw = Povm::new(d, pw_effects)?;

    let p_w = projector(d, &split.range);
    let p_perp = projector(d, &split.complement);
    let kf = k as f64;
    let mut f_effects: Vec<Matrix> = np
        .amps
        .iter()
        .zip(&np.psis)
        .map(|(a, v)| {
            let mut e = Matrix::scaled_projector(*a, v);
            e.add_scaled((1.0 - a) / kf, &p_perp);
            e
        })
        .collect();
    let mut f_rest = Matrix::identity(d);
    for e in &f_effects {
        f_rest.add_scaled(-1.0, e);
    }
    f_effects.push(f_rest.hermitian_part());
    let f = Povm::new(d, f_effects)?;

    // U = s·P_W + B⊥ W_g B⊥†, s ∈ {+1, −1}, W_g over the Heisenberg–Weyl group.
    let bperp = Matrix::from_columns(d, &split.complement);
    let group = heisenberg_weyl(k)?;
    let weight = 1.0 / (2 * k * k) as f64;
    let mut components = Vec::with_capacity(2 * k * k);
    for s in [1.0, -1.0] {
        for g in &group {
            let mut u = p_w.scale(s);
            u += &(&(&bperp * g) * &bperp.adjoint());
            let effects = pw
                .effects()
                .iter()
                .map(|e| e.conjugate_by(&u).hermitian_part())
                .collect();
            components.push(WitnessComponent {
                weight,
                projective: Povm::new(d, effects)?,
                postproc: StochasticMap::identity(l + 1),
            });
        }
    }
    Ok(DeficientNaimarkResult {
        f,
        pw,
        witness: SpWitness {
            target_dim: d,
            components,
        },
        w_dim: m,
        wperp_dim: k,
        w_basis: split.range,
        wperp_basis: split.complement,
        amps: np.amps.clone(),
        psis: np.psis.clone(),
        phis,
    })
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layout::Block => write!(f, "block"),
            Layout::Tensor { ancilla_dim } => write!(f, "tensor (ancilla dimension {ancilla_dim})"),
        }
    }
}
