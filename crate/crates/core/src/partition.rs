//! Partition-based simulation with postselection.
//!
//! Grouping the outcomes of `M` into blocks `S_β` and rescaling each block
//! by `λ_β = ‖Σ_{i∈S_β} M_i‖` gives sub-measurements `N^(β)` whose mixture
//! reproduces `M` conditioned on not seeing the failure outcome. The
//! success probability is `q = 1/Σ_β λ_β`.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{op_norm, Matrix};
use crate::povm::{rank_above, Povm, NULL_LABEL};
use crate::tol;

/// Blocks whose norm falls below this are rejected by [`build_ensemble`].
pub const MIN_BLOCK_NORM: f64 = 1e-12;

/// Largest outcome count handled by exhaustive search.
pub const EXHAUSTIVE_LIMIT: usize = 12;

/// Disjoint nonempty blocks covering `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "PartitionFile", try_from = "PartitionFile")]
pub struct Partition {
    n: usize,
    subsets: Vec<Vec<usize>>,
}

/// On-disk form with 1-based indices.
#[derive(Serialize, Deserialize)]
struct PartitionFile {
    n: usize,
    subsets: Vec<Vec<usize>>,
}

impl From<Partition> for PartitionFile {
    fn from(p: Partition) -> Self {
        Self {
            n: p.n,
            subsets: p
                .subsets
                .into_iter()
                .map(|s| s.into_iter().map(|i| i + 1).collect())
                .collect(),
        }
    }
}

impl TryFrom<PartitionFile> for Partition {
    type Error = Error;
    fn try_from(f: PartitionFile) -> Result<Self> {
        let mut subsets = Vec::with_capacity(f.subsets.len());
        for s in f.subsets {
            let mut block = Vec::with_capacity(s.len());
            for i in s {
                if i == 0 {
                    return Err(Error::Format("partition indices are 1-based".into()));
                }
                block.push(i - 1);
            }
            subsets.push(block);
        }
        Partition::new(f.n, subsets)
    }
}

impl Partition {
    /// Validated constructor; indices are zero-based.
    pub fn new(n: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for s in &subsets {
            if s.is_empty() {
                return Err(Error::InvalidPartition("empty subset".into()));
            }
            for &i in s {
                if i >= n {
                    return Err(Error::InvalidPartition(format!("index {} out of range 1..={n}", i + 1)));
                }
                if seen[i] {
                    return Err(Error::InvalidPartition(format!("index {} appears twice", i + 1)));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("index {} not covered", missing + 1)));
        }
        Ok(Self { n, subsets })
    }

    /// The single block `{0, …, n−1}`.
    pub fn trivial(n: usize) -> Self {
        Self {
            n,
            subsets: vec![(0..n).collect()],
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            n,
            subsets: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    /// Number of blocks `r`.
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn max_size(&self) -> usize {
        self.subsets.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Block index of every outcome.
    pub fn assignment(&self) -> Vec<usize> {
        let mut a = vec![0; self.n];
        for (b, s) in self.subsets.iter().enumerate() {
            for &i in s {
                a[i] = b;
            }
        }
        a
    }
}

fn check_partition(m: &Povm, s: &Partition) -> Result<()> {
    if s.n != m.len() {
        return Err(Error::DimensionMismatch(format!(
            "partition of {} outcomes for a {}-outcome POVM",
            s.n,
            m.len()
        )));
    }
    Ok(())
}

fn block_sum(m: &Povm, block: &[usize]) -> Matrix {
    let d = m.dim();
    let mut acc = Matrix::zeros(d, d);
    for &i in block {
        acc += m.effect(i);
    }
    acc
}

/// `λ = ‖Σ_{i∈block} M_i‖`.
pub fn block_norm(m: &Povm, block: &[usize]) -> Result<f64> {
    op_norm(&block_sum(m, block).hermitian_part())
}

/// `λ_β` for every block.
pub fn block_norms(m: &Povm, s: &Partition) -> Result<Vec<f64>> {
    check_partition(m, s)?;
    s.subsets.iter().map(|b| block_norm(m, b)).collect()
}

/// `q(M, S) = (Σ_β λ_β)^{-1}`.
pub fn success_prob(m: &Povm, s: &Partition) -> Result<f64> {
    let lambdas = block_norms(m, s)?;
    if let Some(b) = lambdas.iter().position(|&l| l <= MIN_BLOCK_NORM) {
        return Err(zero_block(b));
    }
    Ok(1.0 / lambdas.iter().sum::<f64>())
}

fn zero_block(b: usize) -> Error {
    Error::InvalidPartition(format!(
        "block {} has vanishing norm; compact the POVM to drop zero effects first",
        b + 1
    ))
}

/// Mixture of sub-measurements realizing `(qM, (1−q)I)`.
#[derive(Clone, Debug)]
pub struct SimulationEnsemble {
    pub target: Povm,
    pub partition: Partition,
    /// `p_β = λ_β / Σλ`.
    pub weights: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub q: f64,
    /// `N^(β)` on its own outcomes: `M_i/λ_β` for `i ∈ S_β` in block order,
    /// then the failure effect `I − Σ_{i∈S_β} M_i/λ_β`.
    pub subs: Vec<Povm>,
}

impl SimulationEnsemble {
    pub fn len(&self) -> usize {
        self.subs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subs.is_empty()
    }

    /// `N^(β)` on the full outcome set `[n] ∪ {∅}`, failure last.
    pub fn full_sub(&self, beta: usize) -> Povm {
        let d = self.target.dim();
        let n = self.target.len();
        let mut effects = vec![Matrix::zeros(d, d); n + 1];
        let local = &self.subs[beta];
        for (j, &i) in self.partition.subsets[beta].iter().enumerate() {
            effects[i] = local.effect(j).clone();
        }
        effects[n] = local.effect(local.len() - 1).clone();
        let mut labels = self.target.labels().to_vec();
        labels.push(NULL_LABEL.to_string());
        Povm::with_labels(d, effects, labels).expect("shapes agree")
    }

    /// Independent recombination of `Σ_β p_β N^(β)` against `(qM, (1−q)I)`.
    pub fn verify(&self) -> EnsembleReport {
        let d = self.target.dim();
        let n = self.target.len();
        let mut acc = vec![Matrix::zeros(d, d); n];
        let mut null = Matrix::zeros(d, d);
        for (beta, sub) in self.subs.iter().enumerate() {
            let p = self.weights[beta];
            for (j, &i) in self.partition.subsets[beta].iter().enumerate() {
                acc[i].add_scaled(p, sub.effect(j));
            }
            null.add_scaled(p, sub.effect(sub.len() - 1));
        }
        let max_effect_deviation = acc
            .iter()
            .zip(self.target.effects())
            .map(|(a, m)| (a - &m.scale(self.q)).frobenius_norm())
            .fold(0.0, f64::max);
        let null_deviation = (&null - &Matrix::identity(d).scale(1.0 - self.q)).frobenius_norm();
        let weight_sum = self.weights.iter().sum();
        let sub_validation = self.subs.iter().all(|s| s.validate().is_ok());
        EnsembleReport {
            max_effect_deviation,
            null_deviation,
            weight_sum,
            subs_valid: sub_validation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    /// `max_i ‖Σ_β p_β N^(β)_i − q M_i‖_F`.
    pub max_effect_deviation: f64,
    /// `‖Σ_β p_β N^(β)_∅ − (1−q) I‖_F`.
    pub null_deviation: f64,
    pub weight_sum: f64,
    pub subs_valid: bool,
}

impl EnsembleReport {
    pub fn max_deviation(&self) -> f64 {
        self.max_effect_deviation.max(self.null_deviation)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_deviation() <= tol && (self.weight_sum - 1.0).abs() <= tol::STOCH && self.subs_valid
    }
}

pub fn build_ensemble(m: &Povm, s: &Partition) -> Result<SimulationEnsemble> {
    let lambdas = block_norms(m, s)?;
    if let Some(b) = lambdas.iter().position(|&l| l <= MIN_BLOCK_NORM) {
        return Err(zero_block(b));
    }
    let total: f64 = lambdas.iter().sum();
    let d = m.dim();
    let subs = s
        .subsets
        .iter()
        .zip(&lambdas)
        .map(|(block, &lam)| {
            let mut effects: Vec<Matrix> = block.iter().map(|&i| m.effect(i).scale(1.0 / lam)).collect();
            let mut fail = Matrix::identity(d);
            for e in &effects {
                fail.add_scaled(-1.0, e);
            }
            effects.push(fail.hermitian_part());
            let mut labels: Vec<String> = block.iter().map(|&i| m.labels()[i].clone()).collect();
            labels.push(NULL_LABEL.to_string());
            Povm::with_labels(d, effects, labels)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationEnsemble {
        target: m.clone(),
        partition: s.clone(),
        weights: lambdas.iter().map(|l| l / total).collect(),
        q: 1.0 / total,
        lambdas,
        subs,
    })
}

/// Per-block comparison against `(1/r)(1+√(rε))²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsEntry {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub r: usize,
    pub eps: f64,
    pub entries: Vec<KsEntry>,
    pub pass: bool,
}

/// Right-hand side `(1/r)(1+√(rε))²` of the partition norm bound.
pub fn ks_rhs(r: usize, eps: f64) -> f64 {
    let r = r as f64;
    (1.0 + (r * eps).sqrt()).powi(2) / r
}

/// Checks every block norm against the partition norm bound for rank-one
/// `M` with `‖M_i‖ ≤ eps`.
pub fn ks_bound_check(m: &Povm, s: &Partition, eps: f64) -> Result<KsReport> {
    check_partition(m, s)?;
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidParameter(format!("eps {eps} must be positive")));
    }
    for (i, e) in m.effects().iter().enumerate() {
        let spec = crate::linalg::eig_hermitian(e)?;
        let rank = rank_above(&spec.eigenvalues);
        if rank > 1 {
            return Err(Error::InvalidPovm(format!("effect {} has rank {rank}", i + 1)));
        }
        if spec.max() > eps * (1.0 + 1e-9) {
            return Err(Error::InvalidParameter(format!(
                "effect {} has norm {} > eps = {eps}",
                i + 1,
                spec.max()
            )));
        }
    }
    let lambdas = block_norms(m, s)?;
    Ok(ks_report(&lambdas, lambdas.len(), eps))
}

/// Block norms against the bound for `r` blocks; empty blocks are implicit.
pub fn ks_report(lambdas: &[f64], r: usize, eps: f64) -> KsReport {
    let rhs = ks_rhs(r, eps);
    let entries: Vec<KsEntry> = lambdas
        .iter()
        .map(|&lhs| KsEntry {
            lhs,
            rhs,
            pass: lhs <= rhs * (1.0 + 1e-12),
        })
        .collect();
    KsReport {
        r,
        eps,
        pass: entries.iter().all(|e| e.pass),
        entries,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedBounds {
    /// `1/(1+√C)²`.
    pub q_lower: f64,
    /// `d (ε/ε̃)(1+1/√C)²`.
    pub size_upper: f64,
}

/// Success-probability and block-size bounds for a partition meeting the
/// norm bound with `C = rε`.
pub fn predicted_bounds(eps: f64, eps_tilde: f64, c_param: f64, d: usize) -> Result<PredictedBounds> {
    if !(eps_tilde > 0.0 && eps_tilde <= eps) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < eps_tilde ≤ eps, got eps = {eps}, eps_tilde = {eps_tilde}"
        )));
    }
    if c_param.is_nan() || c_param <= 0.0 {
        return Err(Error::InvalidParameter(format!("C = {c_param} must be positive")));
    }
    let sc = c_param.sqrt();
    Ok(PredictedBounds {
        q_lower: 1.0 / (1.0 + sc).powi(2),
        size_upper: d as f64 * (eps / eps_tilde) * (1.0 + 1.0 / sc).powi(2),
    })
}

/// Independent uniform assignment of `n` outcomes to `r` blocks; empty
/// blocks are dropped.
pub fn random_partition(n: usize, r: usize, seed: u64) -> Result<Partition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_partition_with(n, r, &mut rng)
}

pub fn random_partition_with(n: usize, r: usize, rng: &mut impl Rng) -> Result<Partition> {
    if r == 0 {
        return Err(Error::InvalidParameter("r must be at least 1".into()));
    }
    let mut blocks = vec![Vec::new(); r];
    for i in 0..n {
        blocks[rng.random_range(0..r)].push(i);
    }
    blocks.retain(|b: &Vec<usize>| !b.is_empty());
    Partition::new(n, blocks)
}

/// `1/((1+√C)²(ratio/(κC)+1))`, the success probability guaranteed after
/// splitting every block into pieces of size at most `κd`.
pub fn improved_bound(c_param: f64, eps_ratio: f64, kappa: f64) -> Result<f64> {
    if !(c_param > 0.0 && kappa > 0.0 && eps_ratio >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need C > 0, kappa > 0, ratio ≥ 1; got C = {c_param}, kappa = {kappa}, ratio = {eps_ratio}"
        )));
    }
    Ok(1.0 / ((1.0 + c_param.sqrt()).powi(2) * (eps_ratio / (kappa * c_param) + 1.0)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Subpartition {
    pub partition: Partition,
    pub q: f64,
    /// Largest allowed block size `⌊κd⌋`.
    pub max_block: usize,
    /// `⌊κd⌋/d`, the κ actually enforced.
    pub kappa_effective: f64,
    /// Guaranteed value for the input partition's `C = rε` and `ε/ε̃`
    /// (with `κ_effective`); `None` when `M` is not rank-one.
    pub bound: Option<f64>,
}

/// Splits each block into `⌈|S_β|/⌊κd⌋⌉` contiguous, balanced chunks.
/// Blocks already of size `≤ κd` are left unchanged.
pub fn improved_subpartition(m: &Povm, s: &Partition, kappa: f64, d: usize) -> Result<Subpartition> {
    check_partition(m, s)?;
    if kappa.is_nan() || kappa <= 0.0 {
        return Err(Error::InvalidParameter(format!("kappa {kappa} must be positive")));
    }
    let max_block = (kappa * d as f64 + 1e-12).floor() as usize;
    if max_block == 0 {
        return Err(Error::InvalidParameter(format!("kappa·d = {} < 1", kappa * d as f64)));
    }
    let mut subsets = Vec::new();
    for block in &s.subsets {
        let parts = block.len().div_ceil(max_block);
        let base = block.len() / parts;
        let extra = block.len() % parts;
        let mut start = 0;
        for p in 0..parts {
            let len = base + usize::from(p < extra);
            subsets.push(block[start..start + len].to_vec());
            start += len;
        }
    }
    let partition = Partition::new(s.n, subsets)?;
    let q = success_prob(m, &partition)?;
    let kappa_effective = max_block as f64 / d as f64;
    let bound = rank_one_params(m).and_then(|(eps, eps_tilde)| {
        improved_bound(s.len() as f64 * eps, eps / eps_tilde, kappa_effective).ok()
    });
    Ok(Subpartition {
        partition,
        q,
        max_block,
        kappa_effective,
        bound,
    })
}

/// `(max α, min α)` when every effect is rank one and nonzero.
pub fn rank_one_params(m: &Povm) -> Option<(f64, f64)> {
    let mut max: f64 = 0.0;
    let mut min = f64::INFINITY;
    for e in m.effects() {
        let s = crate::linalg::eig_hermitian(e).ok()?;
        if rank_above(&s.eigenvalues) != 1 {
            return None;
        }
        max = max.max(s.max());
        min = min.min(s.max());
    }
    Some((max, min))
}

/// Options for [`optimize_partition_with`].
#[derive(Clone, Copy, Debug)]
pub struct OptimizeOptions {
    /// Local-search iterations; defaults to `200·n`.
    pub budget: Option<usize>,
    pub seed: u64,
    /// Exhaustive search is used when `n` is at most this.
    pub exhaustive_limit: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            budget: None,
            seed: 0,
            exhaustive_limit: EXHAUSTIVE_LIMIT,
        }
    }
}

/// Minimizes `Σ_β λ_β` over partitions into at most `r` blocks of size at
/// most `max_size`: exhaustively when `n ≤ 12`, otherwise by seeded greedy
/// construction followed by single-element relocation.
pub fn optimize_partition(
    m: &Povm,
    r: usize,
    max_size: usize,
    budget: Option<usize>,
    seed: u64,
) -> Result<Partition> {
    optimize_partition_with(
        m,
        r,
        max_size,
        OptimizeOptions {
            budget,
            seed,
            ..OptimizeOptions::default()
        },
    )
}

pub fn optimize_partition_with(m: &Povm, r: usize, max_size: usize, opts: OptimizeOptions) -> Result<Partition> {
    let n = m.len();
    if r == 0 || max_size == 0 || r.saturating_mul(max_size) < n {
        return Err(Error::Infeasible(format!(
            "{n} outcomes cannot fit in {r} blocks of size at most {max_size}"
        )));
    }
    let search = Search::new(m, r, max_size);
    let greedy = search.greedy(opts.seed, opts.budget.unwrap_or(200 * n))?;
    if n <= opts.exhaustive_limit {
        Ok(search.exhaustive(greedy))
    } else {
        Ok(greedy)
    }
}

struct Search<'a> {
    m: &'a Povm,
    r: usize,
    max_size: usize,
}

struct Blocks {
    members: Vec<Vec<usize>>,
    sums: Vec<Matrix>,
    norms: Vec<f64>,
}

fn norm_of(a: &Matrix) -> f64 {
    op_norm(&a.hermitian_part()).expect("block sums are Hermitian")
}

impl<'a> Search<'a> {
    fn new(m: &'a Povm, r: usize, max_size: usize) -> Self {
        Self { m, r, max_size }
    }

    fn greedy(&self, seed: u64, budget: usize) -> Result<Partition> {
        const CANDIDATES: usize = 32;
        let n = self.m.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut b = Blocks {
            members: Vec::new(),
            sums: Vec::new(),
            norms: Vec::new(),
        };
        let single: Vec<f64> = (0..n).map(|i| norm_of(self.m.effect(i))).collect();
        for &i in &order {
            let open: Vec<usize> = (0..b.members.len()).filter(|&k| b.members[k].len() < self.max_size).collect();
            let mut best: Option<(f64, Option<usize>)> = None;
            if b.members.len() < self.r {
                best = Some((single[i], None));
            }
            let cands: Vec<usize> = if open.len() > CANDIDATES {
                open.choose_multiple(&mut rng, CANDIDATES).copied().collect()
            } else {
                open
            };
            for k in cands {
                let mut s = b.sums[k].clone();
                s += self.m.effect(i);
                let inc = norm_of(&s) - b.norms[k];
                if best.is_none_or(|(v, _)| inc < v) {
                    best = Some((inc, Some(k)));
                }
            }
            let (_, target) = best.ok_or_else(|| Error::Infeasible("no block has room".into()))?;
            match target {
                None => {
                    b.members.push(vec![i]);
                    b.sums.push(self.m.effect(i).clone());
                    b.norms.push(single[i]);
                }
                Some(k) => {
                    b.members[k].push(i);
                    let e = self.m.effect(i).clone();
                    b.sums[k] += &e;
                    b.norms[k] = norm_of(&b.sums[k]);
                }
            }
        }
        self.local_search(&mut b, budget, &mut rng);
        let mut subsets = b.members;
        for s in &mut subsets {
            s.sort_unstable();
        }
        subsets.sort();
        Partition::new(n, subsets)
    }

    fn local_search(&self, b: &mut Blocks, budget: usize, rng: &mut ChaCha8Rng) {
        let n = self.m.len();
        if n == 0 {
            return;
        }
        let mut where_is = vec![0usize; n];
        for (k, s) in b.members.iter().enumerate() {
            for &i in s {
                where_is[i] = k;
            }
        }
        for _ in 0..budget {
            let i = rng.random_range(0..n);
            let from = where_is[i];
            let nblocks = b.members.len();
            let allow_new = nblocks < self.r && b.members[from].len() > 1;
            let choices = nblocks + usize::from(allow_new);
            let to = rng.random_range(0..choices);
            if to == from || (to < nblocks && b.members[to].len() >= self.max_size) {
                continue;
            }
            let e = self.m.effect(i);
            let mut from_sum = b.sums[from].clone();
            from_sum.add_scaled(-1.0, e);
            let from_norm = if b.members[from].len() == 1 { 0.0 } else { norm_of(&from_sum) };
            let (to_sum, to_norm_old) = if to == nblocks {
                (e.clone(), 0.0)
            } else {
                let mut s = b.sums[to].clone();
                s += e;
                (s, b.norms[to])
            };
            let to_norm = norm_of(&to_sum);
            let delta = (from_norm + to_norm) - (b.norms[from] + to_norm_old);
            if delta >= -1e-15 {
                continue;
            }
            if to == nblocks {
                b.members.push(vec![i]);
                b.sums.push(to_sum);
                b.norms.push(to_norm);
            } else {
                b.members[to].push(i);
                b.sums[to] = to_sum;
                b.norms[to] = to_norm;
            }
            b.members[from].retain(|&x| x != i);
            b.sums[from] = from_sum;
            b.norms[from] = from_norm;
            where_is[i] = to;
            if b.members[from].is_empty() {
                let last = b.members.len() - 1;
                b.members.swap_remove(from);
                b.sums.swap_remove(from);
                b.norms.swap_remove(from);
                if from != last {
                    for &x in &b.members[from] {
                        where_is[x] = from;
                    }
                }
            }
        }
    }

    /// Branch and bound over restricted-growth assignments. Partial block
    /// norms only grow as outcomes are added, so the running total bounds
    /// every completion from below.
    fn exhaustive(&self, incumbent: Partition) -> Partition {
        let n = self.m.len();
        let best_val = block_norms(self.m, &incumbent)
            .map(|l| l.iter().sum::<f64>())
            .unwrap_or(f64::INFINITY);
        let mut state = Exhaustive {
            m: self.m,
            r: self.r,
            max_size: self.max_size,
            best_val,
            best: None,
            members: Vec::new(),
            sums: Vec::new(),
            norms: Vec::new(),
        };
        state.recurse(0, 0.0);
        match state.best {
            Some(subsets) => Partition::new(n, subsets).expect("search emits partitions"),
            None => incumbent,
        }
    }
}

struct Exhaustive<'a> {
    m: &'a Povm,
    r: usize,
    max_size: usize,
    best_val: f64,
    best: Option<Vec<Vec<usize>>>,
    members: Vec<Vec<usize>>,
    sums: Vec<Matrix>,
    norms: Vec<f64>,
}

impl Exhaustive<'_> {
    fn recurse(&mut self, i: usize, total: f64) {
        let n = self.m.len();
        if total >= self.best_val - 1e-14 {
            return;
        }
        if i == n {
            self.best_val = total;
            self.best = Some(self.members.clone());
            return;
        }
        let remaining = n - i;
        let open_room: usize = self.members.iter().map(|s| self.max_size - s.len()).sum();
        let new_room = (self.r - self.members.len()) * self.max_size;
        if open_room + new_room < remaining {
            return;
        }
        let e = self.m.effect(i);
        for k in 0..self.members.len() {
            if self.members[k].len() >= self.max_size {
                continue;
            }
            let old_sum = self.sums[k].clone();
            let old_norm = self.norms[k];
            self.sums[k] += e;
            let new_norm = norm_of(&self.sums[k]);
            self.norms[k] = new_norm;
            self.members[k].push(i);
            self.recurse(i + 1, total - old_norm + new_norm);
            self.members[k].pop();
            self.sums[k] = old_sum;
            self.norms[k] = old_norm;
        }
        if self.members.len() < self.r {
            let nrm = norm_of(e);
            self.members.push(vec![i]);
            self.sums.push(e.clone());
            self.norms.push(nrm);
            self.recurse(i + 1, total + nrm);
            self.members.pop();
            self.sums.pop();
            self.norms.pop();
        }
    }
}
