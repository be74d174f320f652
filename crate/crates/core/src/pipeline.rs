//! End-to-end assemblies: certificates that `Φ_c(M)` is projectively
//! simulable, ancilla-assisted simulation with postselection, and the
//! randomized polynomial-time path.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finegrain::{flat_refine, spectral_refine, tolerant_ceil, Refinement};
use crate::linalg::Matrix;
use crate::naimark::{dilate_with_ancilla, NaimarkDilation, NearlyProjective};
use crate::noisysim::{build_plan_parts, critical_visibility_parts, PRUNE_WEIGHT};
use crate::partition::{
    build_ensemble, improved_bound, improved_subpartition, ks_report, optimize_partition_with, random_partition_with,
    rank_one_params, success_prob, KsReport, OptimizeOptions, Partition, SimulationEnsemble,
};
use crate::povm::{
    depolarize, effect_distance, post_process, verify_sp_witness_with, Povm, SpWitness, StochasticMap,
    WitnessComponent, WitnessReport,
};
use crate::tol::Tolerances;

pub const DEFAULT_DELTA: f64 = 0.05;

/// Largest number of random partitions drawn by [`randomized_search`].
pub const TRIAL_CAP: usize = 64;

/// `min(0.1, 1/d)`.
pub fn default_eps(d: usize) -> f64 {
    (1.0 / d as f64).min(0.1)
}

/// Success probability, visibility and `c` floors of the constant-noise
/// argument, each to be divided by the appropriate power of `1+δ`.
pub const Q_FLOOR: f64 = 0.068;
pub const T_FLOOR: f64 = 0.3;
pub const C_FLOOR: f64 = 0.0204;

/// Norm-bound parameter under which [`C_FLOOR`] is guaranteed.
pub const GUARANTEE_C: f64 = 5.0;

/// Guarantee bookkeeping only applies for `δ` at most this.
pub const GUARANTEE_DELTA: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Optimizer with exhaustive branch and bound for small outcome counts.
    #[default]
    Exhaustive,
    /// Optimizer with local search only.
    Greedy,
    /// Uniform random assignment followed by block splitting.
    Random,
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchMode::Exhaustive => "exhaustive",
            SearchMode::Greedy => "greedy",
            SearchMode::Random => "random",
        })
    }
}

impl std::str::FromStr for SearchMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(SearchMode::Exhaustive),
            "greedy" => Ok(SearchMode::Greedy),
            "random" => Ok(SearchMode::Random),
            other => Err(Error::InvalidParameter(format!("unknown search mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub delta: f64,
    pub eps: f64,
    pub search_mode: SearchMode,
    pub seed: u64,
    pub refined_outcomes: usize,
    pub flatness: f64,
    /// Partition of the refined outcomes.
    pub partition: Partition,
    pub q_found: f64,
    pub t_np_found: f64,
    /// `min_i A_i`.
    pub min_amplitude: f64,
    /// `α_min / max_β λ_β`, which every `A_i` must reach.
    pub amplitude_floor: f64,
    /// Norm bound with `r = ⌈5/ε⌉` on the blocks actually used.
    pub ks_check: KsReport,
    /// Subpartition bound for the random route.
    pub subpartition_bound: Option<f64>,
    pub guarantee_applies: bool,
    /// `0.0204/(1+δ)²`, asserted when `guarantee_applies`.
    pub c_guarantee: Option<f64>,
    pub witness_components: usize,
    pub witness_deviation: f64,
    pub witness_tol: f64,
    /// `‖Q(Q′(Φ_t(L))) − Φ_c(M)‖`, computed from the ensemble directly.
    pub composition_deviation: f64,
    pub verified: bool,
}

/// Witness that `Φ_{c_found}(M)` is projectively simulable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpCertificate {
    pub input: Povm,
    pub c_found: f64,
    pub witness: SpWitness,
    pub diagnostics: Diagnostics,
}

impl SpCertificate {
    /// Re-checks the witness against `Φ_{c_found}(input)`.
    pub fn verify(&self, tols: &Tolerances) -> Result<WitnessReport> {
        let target = depolarize(&self.input, self.c_found)?;
        verify_sp_witness_with(&self.witness, &target, tols)
    }
}

fn guarantee_c(delta: f64) -> f64 {
    C_FLOOR / (1.0 + delta).powi(2)
}

struct Stage<'a> {
    input: &'a Povm,
    refinement: &'a Refinement,
    delta: f64,
    eps: f64,
    mode: SearchMode,
    seed: u64,
    subpartition_bound: Option<f64>,
    tols: &'a Tolerances,
}

impl Stage<'_> {
    fn certify(&self, partition: Partition) -> Result<SpCertificate> {
        let m = self.input;
        let refined = &self.refinement.refined;
        let d = m.dim();
        let n = m.len();
        let ens = build_ensemble(refined, &partition)?;
        if partition.max_size() > d / 2 {
            return Err(Error::Infeasible(format!(
                "block of size {} exceeds d/2 = {}",
                partition.max_size(),
                d / 2
            )));
        }

        let alphas = &self.refinement.alphas;
        let max_lambda = ens.lambdas.iter().copied().fold(0.0, f64::max);
        let amplitude_floor = self.refinement.min_alpha() / max_lambda;
        let parts: Vec<NearlyProjective> = partition
            .subsets()
            .iter()
            .zip(&ens.lambdas)
            .map(|(block, &lam)| NearlyProjective {
                dim: d,
                amps: block.iter().map(|&i| (alphas[i] / lam).min(1.0)).collect(),
                psis: block.iter().map(|&i| self.refinement.vectors[i].clone()).collect(),
            })
            .collect();
        let min_amplitude = parts
            .iter()
            .flat_map(|p| p.amps.iter().copied())
            .fold(f64::INFINITY, f64::min);
        if min_amplitude < amplitude_floor * (1.0 - 1e-12) {
            return Err(Error::Verification(format!(
                "amplitude {min_amplitude} below α_min/max λ = {amplitude_floor}"
            )));
        }

        let visibilities: Vec<f64> = parts
            .par_iter()
            .map(critical_visibility_parts)
            .collect::<Result<_>>()?;
        let t_np = visibilities.iter().copied().fold(1.0, f64::min);
        let plans = parts
            .par_iter()
            .map(|p| build_plan_parts(p, t_np))
            .collect::<Result<Vec<_>>>()?;

        // Local outcome j of block β goes to the original outcome its refined
        // outcome came from; the failure outcome goes to tr(M_i)/d.
        let traces = m.traces();
        let null_column: Vec<f64> = traces.iter().map(|t| t / d as f64).collect();
        let mut components = Vec::new();
        for ((block, plan), &p_beta) in partition.subsets().iter().zip(&plans).zip(&ens.weights) {
            let mut columns: Vec<Vec<f64>> = block
                .iter()
                .map(|&i| self.refinement.recover.column(i))
                .collect();
            columns.push(null_column.clone());
            let local = StochasticMap::from_columns(n, &columns)?;
            for comp in &plan.full_witness.components {
                components.push(WitnessComponent {
                    weight: p_beta * comp.weight,
                    projective: comp.projective.clone(),
                    postproc: local.compose(&comp.postproc)?,
                });
            }
        }
        let mut witness = SpWitness {
            target_dim: d,
            components,
        };
        witness.prune(PRUNE_WEIGHT);

        let q = ens.q;
        let c_found = q * t_np;
        let target = depolarize(m, c_found)?;
        let report = verify_sp_witness_with(&witness, &target, self.tols)?;
        let composition_deviation = composition_deviation(&ens, self.refinement, t_np, &target)?;

        let r5 = tolerant_ceil(GUARANTEE_C / self.refinement.max_alpha());
        let ks_check = ks_report(&ens.lambdas, r5, self.refinement.max_alpha());
        let guarantee_applies = ks_check.pass
            && self.delta <= GUARANTEE_DELTA
            && self.refinement.flatness <= 1.0 + self.delta + 1e-12
            && q >= Q_FLOOR / (1.0 + self.delta);
        let c_guarantee = guarantee_applies.then(|| guarantee_c(self.delta));
        if let Some(floor) = c_guarantee {
            if c_found < floor - 1e-12 {
                return Err(Error::Verification(format!(
                    "c = {c_found} below the guaranteed {floor} despite the norm bound holding"
                )));
            }
        }
        let verified = report.pass && composition_deviation <= self.tols.witness;
        Ok(SpCertificate {
            input: m.clone(),
            c_found,
            diagnostics: Diagnostics {
                delta: self.delta,
                eps: self.eps,
                search_mode: self.mode,
                seed: self.seed,
                refined_outcomes: refined.len(),
                flatness: self.refinement.flatness,
                partition,
                q_found: q,
                t_np_found: t_np,
                min_amplitude,
                amplitude_floor,
                ks_check,
                subpartition_bound: self.subpartition_bound,
                guarantee_applies,
                c_guarantee,
                witness_components: witness.components.len(),
                witness_deviation: report.max_deviation,
                witness_tol: report.tol,
                composition_deviation,
                verified,
            },
            witness,
        })
    }
}

/// `Q(Q′(Φ_t(L)))` against `Φ_c(M)`, with `L = Σ_β p_β N^(β)` rebuilt
/// from the ensemble rather than from the witness.
fn composition_deviation(ens: &SimulationEnsemble, refinement: &Refinement, t: f64, target: &Povm) -> Result<f64> {
    let refined = &ens.target;
    let d = refined.dim();
    let n_ref = refined.len();
    let mut l_effects = vec![Matrix::zeros(d, d); n_ref + 1];
    for (beta, sub) in ens.subs.iter().enumerate() {
        let p = ens.weights[beta];
        for (j, &i) in ens.partition.subsets()[beta].iter().enumerate() {
            l_effects[i].add_scaled(p, sub.effect(j));
        }
        l_effects[n_ref].add_scaled(p, sub.effect(sub.len() - 1));
    }
    let l_noisy = depolarize(&Povm::new(d, l_effects)?, t)?;
    let null = l_noisy.effect(n_ref);
    let mut m_prime = Vec::with_capacity(n_ref);
    for (i, e) in l_noisy.effects()[..n_ref].iter().enumerate() {
        let mut x = e.clone();
        x.add_scaled(refined.effect(i).trace().re / d as f64, null);
        m_prime.push(x);
    }
    let recovered = post_process(&refinement.recover, &Povm::new(d, m_prime)?)?;
    effect_distance(&recovered, target)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta {delta} outside (0, 1]")));
    }
    Ok(())
}

fn search_partition(m: &Povm, max_size: usize, mode: SearchMode, seed: u64) -> Result<Partition> {
    let opts = OptimizeOptions {
        seed,
        exhaustive_limit: match mode {
            SearchMode::Greedy => 0,
            _ => OptimizeOptions::default().exhaustive_limit,
        },
        ..OptimizeOptions::default()
    };
    optimize_partition_with(m, m.len(), max_size, opts).map_err(|e| match e {
        Error::Infeasible(msg) => Error::Infeasible(format!("{msg}; try --mode random")),
        other => other,
    })
}

/// Certifies `Φ_c(M) ∈ SP(d)` for the largest `c = q·t_NP` this
/// construction reaches on the chosen partition.
pub fn certify_sp(m: &Povm, delta: f64, eps: f64, mode: SearchMode, seed: u64) -> Result<SpCertificate> {
    certify_sp_with(m, delta, eps, mode, seed, &Tolerances::default())
}

pub fn certify_sp_with(
    m: &Povm,
    delta: f64,
    eps: f64,
    mode: SearchMode,
    seed: u64,
    tols: &Tolerances,
) -> Result<SpCertificate> {
    check_delta(delta)?;
    m.validate_with(tols).into_result()?;
    let d = m.dim();
    if d < 2 {
        return Err(Error::InvalidParameter("certification needs d ≥ 2".into()));
    }
    let refinement = flat_refine(m, delta, eps)?;
    let mut stage = Stage {
        input: m,
        refinement: &refinement,
        delta,
        eps,
        mode,
        seed,
        subpartition_bound: None,
        tols,
    };
    let partition = match mode {
        SearchMode::Exhaustive | SearchMode::Greedy => search_partition(&refinement.refined, d / 2, mode, seed)?,
        SearchMode::Random => {
            let eps_max = refinement.max_alpha();
            let r = tolerant_ceil(GUARANTEE_C / eps_max);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coarse = random_partition_with(refinement.len(), r, &mut rng)?;
            let sub = improved_subpartition(&refinement.refined, &coarse, 0.5, d)?;
            stage.subpartition_bound = sub.bound;
            sub.partition
        }
    };
    stage.certify(partition)
}

/// How [`simulate_with_ancilla`] realized the measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AncillaRoute {
    /// `M` itself fits in `C^d ⊗ C^k`; `q = 1`.
    Direct,
    /// Fine-graining and partitioning into dilatable sub-measurements.
    Partitioned,
}

/// Mixture of projective measurements on `C^d ⊗ C^k` reproducing
/// `(qM, (1−q)I)` on states `ρ ⊗ |0⟩⟨0|`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AncillaSimulation {
    pub k: usize,
    pub route: AncillaRoute,
    pub weights: Vec<f64>,
    pub dilations: Vec<NaimarkDilation>,
    /// Projective outcomes to `[n] ∪ {∅}`, failure last.
    pub postprocs: Vec<StochasticMap>,
    pub q: f64,
    /// Partition of the refined outcomes for the partitioned route.
    pub partition: Option<Partition>,
    /// Guaranteed success probability for the refined POVM's parameters.
    pub predicted_q: Option<f64>,
}

impl AncillaSimulation {
    /// Outcome distribution over `[n] ∪ {∅}` for input `ρ`.
    pub fn statistics(&self, rho: &Matrix) -> Vec<f64> {
        let rows = self.postprocs[0].rows();
        let mut out = vec![0.0; rows];
        for ((p, dil), post) in self.weights.iter().zip(&self.dilations).zip(&self.postprocs) {
            let raw = dil.projective.raw_born(&dil.embed(rho));
            for (o, x) in out.iter_mut().zip(post.apply(&raw)) {
                *o += p * x;
            }
        }
        out
    }

    /// Effects induced on `C^d`, recombined over all dilations.
    pub fn induced(&self) -> Result<Povm> {
        let d = self.dilations[0].base_dim;
        let rows = self.postprocs[0].rows();
        let mut effects = vec![Matrix::zeros(d, d); rows];
        for ((p, dil), post) in self.weights.iter().zip(&self.dilations).zip(&self.postprocs) {
            let blocks: Vec<Matrix> = dil
                .projective
                .effects()
                .iter()
                .map(|e| Matrix::from_fn(d, d, |i, j| e[(i, j)]))
                .collect();
            let induced = post_process(post, &Povm::new(d, blocks)?)?;
            for (acc, e) in effects.iter_mut().zip(induced.effects()) {
                acc.add_scaled(*p, e);
            }
        }
        Povm::new(d, effects)
    }

    /// `max_i ‖induced_i − (qM, (1−q)I)_i‖_F`.
    pub fn deviation(&self, m: &Povm) -> Result<f64> {
        let d = m.dim();
        let mut target: Vec<Matrix> = m.effects().iter().map(|e| e.scale(self.q)).collect();
        target.push(Matrix::identity(d).scale(1.0 - self.q));
        effect_distance(&self.induced()?, &Povm::new(d, target)?)
    }
}

/// Simulates `M` with postselection using projective measurements on
/// `C^d ⊗ C^k`.
pub fn simulate_with_ancilla(
    m: &Povm,
    k: usize,
    delta: f64,
    eps: f64,
    mode: SearchMode,
    seed: u64,
) -> Result<AncillaSimulation> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("ancilla dimension {k} < 2")));
    }
    m.validate().into_result()?;
    let d = m.dim();
    let n = m.len();
    if spectral_refine(m)?.len() <= d * k {
        let dil = dilate_with_ancilla(m, k)?;
        let targets: Vec<usize> = (0..n).collect();
        let post = StochasticMap::relabel(n + 1, &targets)?.compose(&dil.coarse)?;
        return Ok(AncillaSimulation {
            k,
            route: AncillaRoute::Direct,
            weights: vec![1.0],
            dilations: vec![dil],
            postprocs: vec![post],
            q: 1.0,
            partition: None,
            predicted_q: Some(1.0),
        });
    }
    check_delta(delta)?;
    let refinement = flat_refine(m, delta, eps)?;
    let refined = &refinement.refined;
    let eps_max = refinement.max_alpha();
    let ratio = refinement.flatness;
    let (c_param, kappa) = if k == 2 {
        (1.0, 1.0 - 1.0 / d as f64)
    } else {
        let c = ancilla_tradeoff(k, ratio).map(|t| t.c_required).unwrap_or(1.0);
        (c, (k - 1) as f64)
    };
    let max_size = (k - 1) * d;
    let (partition, predicted_q) = match mode {
        SearchMode::Exhaustive | SearchMode::Greedy => {
            let p = search_partition(refined, max_size, mode, seed)?;
            let r = tolerant_ceil(c_param / eps_max);
            let kappa_eff = ((kappa * d as f64 + 1e-12).floor() / d as f64).min((k - 1) as f64);
            (p, improved_bound(r as f64 * eps_max, ratio, kappa_eff).ok())
        }
        SearchMode::Random => {
            let r = tolerant_ceil(c_param / eps_max);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coarse = random_partition_with(refinement.len(), r, &mut rng)?;
            let sub = improved_subpartition(refined, &coarse, kappa, d)?;
            (sub.partition, sub.bound)
        }
    };
    let ens = build_ensemble(refined, &partition)?;
    let dilations = ens
        .subs
        .par_iter()
        .map(|sub| dilate_with_ancilla(sub, k))
        .collect::<Result<Vec<_>>>()?;
    let postprocs = partition
        .subsets()
        .iter()
        .zip(&dilations)
        .map(|(block, dil)| {
            let mut targets: Vec<usize> = block.iter().map(|&i| refinement.origin[i]).collect();
            targets.push(n);
            StochasticMap::relabel(n + 1, &targets)?.compose(&dil.coarse)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AncillaSimulation {
        k,
        route: AncillaRoute::Partitioned,
        weights: ens.weights.clone(),
        dilations,
        postprocs,
        q: ens.q,
        partition: Some(partition),
        predicted_q,
    })
}

/// Norm-bound parameter and success-probability floor for ancilla
/// dimension `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tradeoff {
    pub k: usize,
    pub eps_ratio: f64,
    pub c_required: f64,
    pub q_lower: f64,
    /// The subpartition bound with `C = 1, κ = 1` was used (`k = 2`).
    pub subpartition_route: bool,
}

/// Smallest `C` with `ratio·(1+1/√C)² ≤ k−1` and the resulting
/// `q ≥ (1 − √(ratio/(k−1)))²`. For `k = 2` the equation has no solution
/// and the subpartition bound `1/(4(ratio+1))` is returned instead.
pub fn ancilla_tradeoff(k: usize, eps_ratio: f64) -> Result<Tradeoff> {
    if k < 2 || eps_ratio.is_nan() || eps_ratio < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "need k ≥ 2 and ratio ≥ 1, got k = {k}, ratio = {eps_ratio}"
        )));
    }
    if k == 2 {
        return Ok(Tradeoff {
            k,
            eps_ratio,
            c_required: 1.0,
            q_lower: improved_bound(1.0, eps_ratio, 1.0)?,
            subpartition_route: true,
        });
    }
    let x = (k - 1) as f64 / eps_ratio;
    if x <= 1.0 {
        return Err(Error::Infeasible(format!(
            "k = {k} is too small for ratio {eps_ratio}: need (k−1)/ratio > 1"
        )));
    }
    let sc = 1.0 / (x.sqrt() - 1.0);
    Ok(Tradeoff {
        k,
        eps_ratio,
        c_required: sc * sc,
        q_lower: (1.0 - 1.0 / x.sqrt()).powi(2),
        subpartition_route: false,
    })
}

/// Acceptance thresholds for a random partition into `⌈Cd⌉` blocks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomThresholds {
    pub d: usize,
    pub c_param: f64,
    pub r: usize,
    /// `∛((3C/2d)(1 + ln(4Cd)))`.
    pub delta: f64,
    /// `1/(3.44 + 2C ln d)`.
    pub q_min: f64,
    /// `(2/C)(1+δ)d`.
    pub size_max: f64,
}

pub fn random_thresholds(d: usize, c_param: f64) -> Result<RandomThresholds> {
    if d < 2 || c_param.is_nan() || c_param <= 0.0 {
        return Err(Error::InvalidParameter(format!("need d ≥ 2 and C > 0, got d = {d}, C = {c_param}")));
    }
    let df = d as f64;
    let delta = ((3.0 * c_param / (2.0 * df)) * (1.0 + (4.0 * c_param * df).ln())).cbrt();
    Ok(RandomThresholds {
        d,
        c_param,
        r: tolerant_ceil(c_param * df),
        delta,
        q_min: 1.0 / (3.44 + 2.0 * c_param * df.ln()),
        size_max: (2.0 / c_param) * (1.0 + delta) * df,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub q: f64,
    pub max_size: usize,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizedSearch {
    pub thresholds: RandomThresholds,
    /// Trials up to and including the first accepted one.
    pub trials: Vec<Trial>,
    pub partition: Option<Partition>,
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// One random partition of `M` evaluated against the thresholds.
pub fn random_trial(m: &Povm, th: &RandomThresholds, seed: u64, trial: usize) -> Result<(Partition, Trial)> {
    let p = random_partition_with(m.len(), th.r, &mut trial_rng(seed, trial))?;
    let q = success_prob(m, &p)?;
    let max_size = p.max_size();
    let accepted = q >= th.q_min && max_size as f64 <= th.size_max;
    Ok((p, Trial { q, max_size, accepted }))
}

fn check_randomized_input(m: &Povm) -> Result<()> {
    m.validate().into_result()?;
    let d = m.dim();
    let (eps, _) = rank_one_params(m)
        .ok_or_else(|| Error::InvalidPovm("input must be rank-one; apply extremal_refine first".into()))?;
    if eps > (1.0 + 1e-9) / d as f64 {
        return Err(Error::InvalidPovm(format!(
            "largest magnitude {eps} exceeds 1/d; apply extremal_refine first"
        )));
    }
    if m.len() > 2 * d * d {
        return Err(Error::InvalidPovm(format!("{} outcomes exceed 2d² = {}", m.len(), 2 * d * d)));
    }
    Ok(())
}

/// Draws random partitions (trial `t` uses stream `t` of the master seed)
/// until one meets both thresholds or [`TRIAL_CAP`] is reached.
pub fn randomized_search(m: &Povm, c_param: f64, seed: u64) -> Result<RandomizedSearch> {
    check_randomized_input(m)?;
    let th = random_thresholds(m.dim(), c_param)?;
    const BATCH: usize = 8;
    let mut trials = Vec::new();
    for start in (0..TRIAL_CAP).step_by(BATCH) {
        let batch = (start..(start + BATCH).min(TRIAL_CAP))
            .into_par_iter()
            .map(|t| random_trial(m, &th, seed, t))
            .collect::<Result<Vec<_>>>()?;
        for (p, trial) in batch {
            trials.push(trial);
            if trial.accepted {
                return Ok(RandomizedSearch {
                    thresholds: th,
                    trials,
                    partition: Some(p),
                });
            }
        }
    }
    Ok(RandomizedSearch {
        thresholds: th,
        trials,
        partition: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizedCertification {
    pub search: RandomizedSearch,
    /// `None` when every trial failed.
    pub certificate: Option<SpCertificate>,
}

/// Polynomial-time certification: accepted random partition, blocks split
/// to size `≤ d/2`, then the same assembly as [`certify_sp`].
pub fn randomized_certify(m: &Povm, c_param: f64, seed: u64) -> Result<RandomizedCertification> {
    let search = randomized_search(m, c_param, seed)?;
    let Some(coarse) = search.partition.clone() else {
        return Ok(RandomizedCertification {
            search,
            certificate: None,
        });
    };
    let d = m.dim();
    let refinement = spectral_refine(m)?;
    let sub = improved_subpartition(&refinement.refined, &coarse, 0.5, d)?;
    let tols = Tolerances::default();
    let stage = Stage {
        input: m,
        refinement: &refinement,
        delta: refinement.flatness - 1.0,
        eps: refinement.max_alpha(),
        mode: SearchMode::Random,
        seed,
        subpartition_bound: sub.bound,
        tols: &tols,
    };
    let certificate = stage.certify(sub.partition)?;
    Ok(RandomizedCertification {
        search,
        certificate: Some(certificate),
    })
}
