//! POVMs, stochastic post-processing maps and projective-simulation witnesses.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, eig_hermitian, CVector, Matrix};
use crate::tol::{self, Tolerances};

/// Reserved label of the failure outcome in postselected simulations.
pub const NULL_LABEL: &str = "∅";

/// Effects with trace below this are treated as zero by [`Povm::compact`].
pub const ZERO_EFFECT_TRACE: f64 = 1e-12;

/// A finite-outcome measurement on `C^dim`.
///
/// Construction does not validate; call [`Povm::validate`] or
/// [`Povm::checked`] when the input is untrusted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PovmFile", try_from = "PovmFile")]
pub struct Povm {
    dim: usize,
    effects: Vec<Matrix>,
    labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct PovmFile {
    dim: usize,
    labels: Vec<String>,
    effects: Vec<Matrix>,
}

impl From<Povm> for PovmFile {
    fn from(m: Povm) -> Self {
        Self {
            dim: m.dim,
            labels: m.labels,
            effects: m.effects,
        }
    }
}

impl TryFrom<PovmFile> for Povm {
    type Error = Error;
    fn try_from(f: PovmFile) -> Result<Self> {
        let labels = if f.labels.is_empty() {
            default_labels(f.effects.len())
        } else {
            f.labels
        };
        Povm::with_labels(f.dim, f.effects, labels)
    }
}

fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

fn check_shape(dim: usize, m: &Matrix, what: &str) -> Result<()> {
    if m.rows() != dim || m.cols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected {dim}x{dim}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

impl Povm {
    /// POVM with labels `1..=n`.
    pub fn new(dim: usize, effects: Vec<Matrix>) -> Result<Self> {
        let labels = default_labels(effects.len());
        Self::with_labels(dim, effects, labels)
    }

    pub fn with_labels(dim: usize, effects: Vec<Matrix>, labels: Vec<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch("dimension must be positive".into()));
        }
        if effects.is_empty() {
            return Err(Error::InvalidPovm("no effects".into()));
        }
        if labels.len() != effects.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} effects",
                labels.len(),
                effects.len()
            )));
        }
        for (i, e) in effects.iter().enumerate() {
            check_shape(dim, e, &format!("effect {}", i + 1))?;
        }
        Ok(Self {
            dim,
            effects,
            labels,
        })
    }

    /// Like [`Povm::new`] but rejects inputs that fail validation.
    pub fn checked(dim: usize, effects: Vec<Matrix>) -> Result<Self> {
        let m = Self::new(dim, effects)?;
        m.validate().into_result()?;
        Ok(m)
    }

    /// Rank-one POVM with effects `α_i ψ_i ψ_i†`.
    pub fn rank_one(dim: usize, alphas: &[f64], vectors: &[CVector]) -> Result<Self> {
        if alphas.len() != vectors.len() {
            return Err(Error::DimensionMismatch("alphas and vectors differ in length".into()));
        }
        let effects = alphas
            .iter()
            .zip(vectors)
            .map(|(&a, v)| {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch("vector length differs from dim".into()));
                }
                Ok(Matrix::scaled_projector(a, v))
            })
            .collect::<Result<_>>()?;
        Self::new(dim, effects)
    }

    /// Computational basis measurement on `C^d`.
    pub fn basis(d: usize) -> Self {
        let effects = (0..d)
            .map(|i| {
                let mut m = Matrix::zeros(d, d);
                m[(i, i)] = c(1.0, 0.0);
                m
            })
            .collect();
        Self::new(d, effects).expect("basis measurement is well formed")
    }

    /// The planar trine `(2/3) ψ_k ψ_k†`, `ψ_k` at angles 0°, 120°, 240°.
    pub fn trine() -> Self {
        let vectors: Vec<CVector> = (0..3)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                vec![c(t.cos(), 0.0), c(t.sin(), 0.0)]
            })
            .collect();
        Self::rank_one(2, &[2.0 / 3.0; 3], &vectors).expect("trine is well formed")
    }

    /// The one-outcome POVM `(I_d)`.
    pub fn trivial(d: usize) -> Self {
        Self::new(d, vec![Matrix::identity(d)]).expect("trivial POVM is well formed")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effects(&self) -> &[Matrix] {
        &self.effects
    }

    pub fn effect(&self, i: usize) -> &Matrix {
        &self.effects[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn into_effects(self) -> Vec<Matrix> {
        self.effects
    }

    /// Whether the last outcome carries the reserved failure label.
    pub fn has_failure_outcome(&self) -> bool {
        self.labels.last().is_some_and(|l| l == NULL_LABEL)
    }

    /// Real traces `tr M_i`.
    pub fn traces(&self) -> Vec<f64> {
        self.effects.iter().map(|e| e.trace().re).collect()
    }

    /// `Σ_i M_i`.
    pub fn effect_sum(&self) -> Matrix {
        let mut s = Matrix::zeros(self.dim, self.dim);
        for e in &self.effects {
            s += e;
        }
        s
    }

    pub fn validate(&self) -> ValidationReport {
        self.validate_with(&Tolerances::default())
    }

    /// Checks Hermiticity, positivity and normalization, collecting every violation.
    pub fn validate_with(&self, tols: &Tolerances) -> ValidationReport {
        let mut violations = Vec::new();
        for (i, e) in self.effects.iter().enumerate() {
            let dev = e.hermitian_deviation();
            if dev > tol::HERM {
                violations.push(Violation {
                    effect: Some(i),
                    kind: ViolationKind::NotHermitian,
                    magnitude: dev,
                    threshold: tol::HERM,
                });
                continue;
            }
            match eig_hermitian(e) {
                Ok(s) if s.min() < -tols.psd => violations.push(Violation {
                    effect: Some(i),
                    kind: ViolationKind::NotPositive,
                    magnitude: s.min(),
                    threshold: -tols.psd,
                }),
                Ok(_) => {}
                Err(_) => violations.push(Violation {
                    effect: Some(i),
                    kind: ViolationKind::NotHermitian,
                    magnitude: dev,
                    threshold: tol::HERM,
                }),
            }
        }
        let norm_err = (&self.effect_sum() - &Matrix::identity(self.dim)).frobenius_norm();
        if norm_err > tols.norm(self.dim) {
            violations.push(Violation {
                effect: None,
                kind: ViolationKind::NotNormalized,
                magnitude: norm_err,
                threshold: tols.norm(self.dim),
            });
        }
        ValidationReport { violations }
    }

    /// Born probabilities `tr(ρ M_i)` for a validated state.
    pub fn born(&self, rho: &Matrix) -> Result<Vec<f64>> {
        validate_state(rho, self.dim)?;
        Ok(self.born_unchecked(rho))
    }

    /// Born probabilities without validating `ρ`; small negatives are
    /// clipped and the result renormalized.
    pub fn born_unchecked(&self, rho: &Matrix) -> Vec<f64> {
        let mut p: Vec<f64> = self
            .effects
            .iter()
            .map(|e| rho.trace_product(e).re.max(0.0))
            .collect();
        let total: f64 = p.iter().sum();
        if total > 0.0 {
            for x in &mut p {
                *x /= total;
            }
        }
        p
    }

    /// Born value `tr(ρ M_i)` with no clipping or renormalization.
    pub fn raw_born(&self, rho: &Matrix) -> Vec<f64> {
        self.effects.iter().map(|e| rho.trace_product(e).re).collect()
    }

    pub fn is_projective(&self) -> bool {
        self.is_projective_with(tol::PROJ)
    }

    /// `P_i P_j = δ_ij P_i` for all pairs, in Frobenius norm.
    pub fn is_projective_with(&self, tol: f64) -> bool {
        self.projective_defect() <= tol
    }

    /// Largest `‖P_i P_j − δ_ij P_i‖_F` over all pairs.
    pub fn projective_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.effects.iter().enumerate() {
            for (j, b) in self.effects.iter().enumerate().skip(i) {
                let prod = a * b;
                let dev = if i == j {
                    (&prod - a).frobenius_norm()
                } else {
                    prod.frobenius_norm()
                };
                worst = worst.max(dev);
            }
        }
        worst
    }

    /// Numerical rank of effect `i`.
    pub fn effect_rank(&self, i: usize) -> Result<usize> {
        let s = eig_hermitian(&self.effects[i])?;
        Ok(rank_above(&s.eigenvalues))
    }

    /// Drops effects with trace below [`ZERO_EFFECT_TRACE`].
    pub fn compact(&self) -> Compacted {
        let kept: Vec<usize> = (0..self.len())
            .filter(|&i| self.effects[i].trace().re >= ZERO_EFFECT_TRACE)
            .collect();
        let effects = kept.iter().map(|&i| self.effects[i].clone()).collect();
        let labels = kept.iter().map(|&i| self.labels[i].clone()).collect();
        Compacted {
            povm: Self {
                dim: self.dim,
                effects,
                labels,
            },
            original_len: self.len(),
            kept,
        }
    }

    /// Copy with the final outcome relabelled as the failure outcome.
    pub fn with_failure_label(mut self) -> Self {
        if let Some(last) = self.labels.last_mut() {
            *last = NULL_LABEL.to_string();
        }
        self
    }
}

/// Rank of a spectrum using the shared relative cutoff.
pub(crate) fn rank_above(eigenvalues: &[f64]) -> usize {
    let m = eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let t = tol::RANK * if m > 0.0 { m.max(1.0) } else { 1.0 };
    eigenvalues.iter().filter(|&&l| l > t).count()
}

/// Result of [`Povm::compact`].
#[derive(Clone, Debug)]
pub struct Compacted {
    pub povm: Povm,
    /// Original index of each retained outcome.
    pub kept: Vec<usize>,
    pub original_len: usize,
}

impl Compacted {
    /// Map from compacted outcomes back to the original outcome list.
    pub fn expand(&self) -> StochasticMap {
        let mut q = StochasticMap::zeros(self.original_len, self.kept.len());
        for (j, &i) in self.kept.iter().enumerate() {
            q.set(i, j, 1.0);
        }
        q
    }
}

/// Checks that `ρ` is a density matrix on `C^dim`.
pub fn validate_state(rho: &Matrix, dim: usize) -> Result<()> {
    check_shape(dim, rho, "state")?;
    let dev = rho.hermitian_deviation();
    if dev > tol::HERM {
        return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:.3e})")));
    }
    let tr = rho.trace().re;
    if (tr - 1.0).abs() > tol::norm(dim) {
        return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
    }
    let min = eig_hermitian(rho)?.min();
    if min < -tol::PSD {
        return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
    }
    Ok(())
}

/// The depolarizing map `X ↦ tX + (1−t)(tr X/d) I`.
pub fn depolarize_operator(x: &Matrix, t: f64) -> Matrix {
    let d = x.rows();
    let mut out = x.scale(t);
    let shift = (1.0 - t) * x.trace() / d as f64;
    for i in 0..d {
        out[(i, i)] += shift;
    }
    out
}

fn check_visibility(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("visibility {t} outside [0, 1]")));
    }
    Ok(())
}

/// Effect-wise depolarization `Φ_t(M)`.
pub fn depolarize(m: &Povm, t: f64) -> Result<Povm> {
    check_visibility(t)?;
    Ok(Povm {
        dim: m.dim,
        effects: m.effects.iter().map(|e| depolarize_operator(e, t)).collect(),
        labels: m.labels.clone(),
    })
}

/// `Q(M)_i = Σ_j q_{i|j} M_j`.
pub fn post_process(q: &StochasticMap, m: &Povm) -> Result<Povm> {
    if q.cols() != m.len() {
        return Err(Error::DimensionMismatch(format!(
            "post-processing expects {} outcomes, POVM has {}",
            q.cols(),
            m.len()
        )));
    }
    let d = m.dim;
    let effects = (0..q.rows())
        .map(|i| {
            let mut acc = Matrix::zeros(d, d);
            for (j, e) in m.effects.iter().enumerate() {
                let w = q.get(i, j);
                if w != 0.0 {
                    acc.add_scaled(w, e);
                }
            }
            acc
        })
        .collect();
    Povm::new(d, effects)
}

/// Effect-wise convex combination. Shorter POVMs are padded with zero
/// effects; labels are taken from the longest input.
pub fn mix(weights: &[f64], povms: &[Povm]) -> Result<Povm> {
    if weights.len() != povms.len() || povms.is_empty() {
        return Err(Error::DimensionMismatch("weights and POVMs differ in length".into()));
    }
    if weights.iter().any(|&w| w < -tol::STOCH) {
        return Err(Error::InvalidParameter("negative mixing weight".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > tol::STOCH {
        return Err(Error::InvalidParameter(format!("mixing weights sum to {total}")));
    }
    let d = povms[0].dim;
    if povms.iter().any(|p| p.dim != d) {
        return Err(Error::DimensionMismatch("POVMs act on different dimensions".into()));
    }
    let longest = povms.iter().max_by_key(|p| p.len()).expect("nonempty");
    let n = longest.len();
    let mut effects = vec![Matrix::zeros(d, d); n];
    for (w, p) in weights.iter().zip(povms) {
        for (acc, e) in effects.iter_mut().zip(&p.effects) {
            acc.add_scaled(*w, e);
        }
    }
    Povm::with_labels(d, effects, longest.labels.clone())
}

/// `max_i ‖M_i − N_i‖_F`.
pub fn effect_distance(m: &Povm, n: &Povm) -> Result<f64> {
    if m.dim != n.dim || m.len() != n.len() {
        return Err(Error::DimensionMismatch(format!(
            "comparing {}-outcome POVM on C^{} with {}-outcome POVM on C^{}",
            m.len(),
            m.dim,
            n.len(),
            n.dim
        )));
    }
    Ok(m.effects
        .iter()
        .zip(&n.effects)
        .map(|(a, b)| (a - b).frobenius_norm())
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    NotHermitian,
    NotPositive,
    NotNormalized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// Zero-based effect index, `None` for whole-POVM violations.
    pub effect: Option<usize>,
    pub kind: ViolationKind,
    pub magnitude: f64,
    pub threshold: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.effect) {
            (ViolationKind::NotHermitian, Some(i)) => write!(
                f,
                "effect {} not Hermitian: deviation {:.3e} > {:.1e}",
                i + 1,
                self.magnitude,
                self.threshold
            ),
            (ViolationKind::NotPositive, Some(i)) => write!(
                f,
                "effect {} not PSD: min eigenvalue {:.6e} < {:.1e}",
                i + 1,
                self.magnitude,
                self.threshold
            ),
            (ViolationKind::NotNormalized, _) => write!(
                f,
                "effects do not sum to identity: ‖ΣM_i − I‖_F = {:.3e} > {:.1e}",
                self.magnitude, self.threshold
            ),
            (kind, None) => write!(f, "{kind:?}: {:.3e}", self.magnitude),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidPovm(
                self.violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
            ))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Column-stochastic matrix `q_{i|j}`: input outcome `j` is relabelled as
/// output `i` with probability `q_{i|j}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct StochasticMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<StochasticMap> for Vec<Vec<f64>> {
    fn from(q: StochasticMap) -> Self {
        (0..q.rows).map(|i| q.data[i * q.cols..(i + 1) * q.cols].to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for StochasticMap {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Format("ragged post-processing array".into()));
        }
        StochasticMap::new(rows.len(), cols, rows.into_iter().flatten().collect())
    }
}

impl StochasticMap {
    /// Validated constructor from row-major entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} map",
                data.len()
            )));
        }
        let q = Self { rows, cols, data };
        q.check()?;
        Ok(q)
    }

    pub(crate) fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut q = Self::zeros(n, n);
        for i in 0..n {
            q.set(i, i, 1.0);
        }
        q
    }

    /// Deterministic relabelling `j ↦ targets[j]` into `rows` outputs.
    pub fn relabel(rows: usize, targets: &[usize]) -> Result<Self> {
        let mut q = Self::zeros(rows, targets.len());
        for (j, &i) in targets.iter().enumerate() {
            if i >= rows {
                return Err(Error::DimensionMismatch(format!("target {i} >= {rows}")));
            }
            q.set(i, j, 1.0);
        }
        Ok(q)
    }

    /// Builds a map from its columns (each a distribution over outputs).
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut q = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(Error::DimensionMismatch("column length differs from rows".into()));
            }
            for (i, &v) in col.iter().enumerate() {
                q.set(i, j, v);
            }
        }
        q.check()?;
        Ok(q)
    }

    fn check(&self) -> Result<()> {
        if let Some(x) = self.data.iter().find(|x| !x.is_finite() || **x < -tol::STOCH) {
            return Err(Error::InvalidStochasticMap(format!("entry {x} is negative or not finite")));
        }
        for j in 0..self.cols {
            let s = self.column_sum(j);
            if (s - 1.0).abs() > tol::STOCH {
                return Err(Error::InvalidStochasticMap(format!(
                    "column {} sums to {s}",
                    j + 1
                )));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| self.get(i, j)).sum()
    }

    /// `self ∘ inner`: first apply `inner`, then `self`.
    pub fn compose(&self, inner: &StochasticMap) -> Result<Self> {
        if self.cols != inner.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose {}x{} after {}x{}",
                self.rows, self.cols, inner.rows, inner.cols
            )));
        }
        let mut out = Self::zeros(self.rows, inner.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..inner.cols {
                    out.data[i * inner.cols + j] += a * inner.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// Pushes a distribution over inputs forward to outputs.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        assert_eq!(p.len(), self.cols);
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * p[j]).sum())
            .collect()
    }
}

/// One term `p_k · Q_k(P_k)` of a projective-simulation witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessComponent {
    pub weight: f64,
    pub projective: Povm,
    pub postproc: StochasticMap,
}

/// Finite convex decomposition `Σ_k p_k Q_k(P_k)` into post-processed
/// projective measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpWitness {
    pub target_dim: usize,
    pub components: Vec<WitnessComponent>,
}

impl SpWitness {
    /// Effects of `Σ_k p_k Q_k(P_k)`.
    pub fn recombine(&self) -> Result<Povm> {
        let first = self
            .components
            .first()
            .ok_or_else(|| Error::Verification("witness has no components".into()))?;
        let n = first.postproc.rows();
        let d = self.target_dim;
        let mut effects = vec![Matrix::zeros(d, d); n];
        for (k, comp) in self.components.iter().enumerate() {
            if comp.projective.dim() != d {
                return Err(Error::DimensionMismatch(format!(
                    "component {} acts on C^{}, witness on C^{d}",
                    k + 1,
                    comp.projective.dim()
                )));
            }
            if comp.postproc.rows() != n || comp.postproc.cols() != comp.projective.len() {
                return Err(Error::DimensionMismatch(format!(
                    "component {} post-processing is {}x{}, expected {n}x{}",
                    k + 1,
                    comp.postproc.rows(),
                    comp.postproc.cols(),
                    comp.projective.len()
                )));
            }
            for (j, p) in comp.projective.effects().iter().enumerate() {
                for (i, acc) in effects.iter_mut().enumerate() {
                    let w = comp.postproc.get(i, j);
                    if w != 0.0 {
                        acc.add_scaled(comp.weight * w, p);
                    }
                }
            }
        }
        Povm::new(d, effects)
    }

    /// Rescales weights to sum to one after dropping components below `min_weight`.
    pub fn prune(&mut self, min_weight: f64) {
        self.components.retain(|c| c.weight >= min_weight);
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if total > 0.0 {
            for c in &mut self.components {
                c.weight /= total;
            }
        }
    }
}

/// Outcome of [`verify_sp_witness`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub max_deviation: f64,
    pub per_effect: Vec<f64>,
    pub weight_sum: f64,
    /// Zero-based indices of components whose measurement is not projective.
    pub non_projective: Vec<usize>,
    pub tol: f64,
    pub pass: bool,
}

impl fmt::Display for WitnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: max effect deviation {:.3e} (threshold {:.1e}), weight sum {:.12}",
            if self.pass { "pass" } else { "FAIL" },
            self.max_deviation,
            self.tol,
            self.weight_sum
        )?;
        if !self.non_projective.is_empty() {
            write!(f, ", {} non-projective components", self.non_projective.len())?;
        }
        Ok(())
    }
}

pub fn verify_sp_witness(w: &SpWitness, target: &Povm) -> Result<WitnessReport> {
    verify_sp_witness_with(w, target, &Tolerances::default())
}

/// Recombines the witness independently of how it was built and compares
/// it effect by effect against `target`.
pub fn verify_sp_witness_with(
    w: &SpWitness,
    target: &Povm,
    tols: &Tolerances,
) -> Result<WitnessReport> {
    if w.target_dim != target.dim() {
        return Err(Error::DimensionMismatch(format!(
            "witness on C^{}, target on C^{}",
            w.target_dim,
            target.dim()
        )));
    }
    let recombined = w.recombine()?;
    if recombined.len() != target.len() {
        return Err(Error::DimensionMismatch(format!(
            "witness has {} outcomes, target {}",
            recombined.len(),
            target.len()
        )));
    }
    let per_effect: Vec<f64> = recombined
        .effects()
        .iter()
        .zip(target.effects())
        .map(|(a, b)| (a - b).frobenius_norm())
        .collect();
    let max_deviation = per_effect.iter().copied().fold(0.0, f64::max);
    let weight_sum: f64 = w.components.iter().map(|c| c.weight).sum();
    let non_projective: Vec<usize> = w
        .components
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.projective.is_projective_with(tols.proj))
        .map(|(k, _)| k)
        .collect();
    let weights_ok = (weight_sum - 1.0).abs() <= tols.stoch
        && w.components.iter().all(|c| c.weight > 0.0);
    let pass = max_deviation <= tols.witness && non_projective.is_empty() && weights_ok;
    Ok(WitnessReport {
        max_deviation,
        per_effect,
        weight_sum,
        non_projective,
        tol: tols.witness,
        pass,
    })
}
