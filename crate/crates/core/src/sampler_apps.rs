//! Seeded Born-rule sampling, postselected sampling from a simulation
//! ensemble, and the state-discrimination and shadow-estimation checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, eig_hermitian, Matrix};
use crate::partition::SimulationEnsemble;
use crate::povm::{depolarize, validate_state, Povm};
use crate::random;

/// Shots drawn from one generator stream.
pub const SHARD_SHOTS: u64 = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    /// Per outcome; postselected runs append the failure count last.
    pub counts: Vec<u64>,
    pub shots: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    /// Over accepted shots only.
    pub empirical: Vec<f64>,
    pub exact: Vec<f64>,
    pub tv_distance: f64,
}

impl SampleReport {
    fn new(counts: Vec<u64>, shots: u64, n: usize, exact: Vec<f64>) -> Self {
        let accepted: u64 = counts[..n].iter().sum();
        let empirical: Vec<f64> = counts[..n]
            .iter()
            .map(|&k| if accepted == 0 { 0.0 } else { k as f64 / accepted as f64 })
            .collect();
        let tv_distance = 0.5 * empirical.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>();
        Self {
            counts,
            shots,
            accepted,
            acceptance_rate: accepted as f64 / shots as f64,
            empirical,
            exact,
            tv_distance,
        }
    }
}

/// Index `i` with `cdf[i-1] ≤ u < cdf[i]`, clamped to the last outcome.
fn draw(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&x| x <= u).min(cdf.len() - 1)
}

fn cdf(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = p
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

/// Runs `shots` draws split into shards of [`SHARD_SHOTS`]; shard `s`
/// uses stream `s` of the seed, so the counts do not depend on threading.
fn sharded<F>(shots: u64, seed: u64, outcomes: usize, one: F) -> Vec<u64>
where
    F: Fn(&mut ChaCha8Rng) -> usize + Sync,
{
    let shards = shots.div_ceil(SHARD_SHOTS);
    (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            let len = SHARD_SHOTS.min(shots - s * SHARD_SHOTS);
            let mut counts = vec![0u64; outcomes];
            for _ in 0..len {
                counts[one(&mut rng)] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; outcomes],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

/// `shots` independent draws from `born(M, ρ)`.
pub fn sample(m: &Povm, rho: &Matrix, shots: u64, seed: u64) -> Result<SampleReport> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    let exact = m.born(rho)?;
    let table = cdf(&exact);
    let counts = sharded(shots, seed, m.len(), |rng| draw(&table, rng.random::<f64>()));
    Ok(SampleReport::new(counts, shots, m.len(), exact))
}

/// Per shot: `β ∼ p_β`, then an outcome of `N^(β)`. The report's exact
/// distribution is `born(M, ρ)`, compared with the accepted shots.
pub fn sample_with_postselection(e: &SimulationEnsemble, rho: &Matrix, shots: u64, seed: u64) -> Result<SampleReport> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    let n = e.target.len();
    let exact = e.target.born(rho)?;
    let beta_table = cdf(&e.weights);
    // Local outcome tables mapped to global indices, failure = n.
    let tables: Vec<(Vec<f64>, Vec<usize>)> = e
        .subs
        .iter()
        .zip(e.partition.subsets())
        .map(|(sub, block)| {
            let mut targets = block.clone();
            targets.push(n);
            (cdf(&sub.born_unchecked(rho)), targets)
        })
        .collect();
    let counts = sharded(shots, seed, n + 1, |rng| {
        let beta = draw(&beta_table, rng.random::<f64>());
        let (table, targets) = &tables[beta];
        targets[draw(table, rng.random::<f64>())]
    });
    Ok(SampleReport::new(counts, shots, n, exact))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationReport {
    pub priors: Vec<f64>,
    pub states: Vec<Matrix>,
    pub p_succ_m: f64,
    pub p_succ_noisy: f64,
    pub c: f64,
    /// `c·p_succ(M) ≤ p_succ(Φ_c(M)) + 1e-12`.
    pub inequality_ok: bool,
}

/// `Σ_i p_i tr(σ_i M_i)` for `M` and for `Φ_c(M)`.
pub fn disc_success(priors: &[f64], states: &[Matrix], m: &Povm, c: f64) -> Result<DiscriminationReport> {
    if priors.len() != states.len() || states.len() != m.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} priors, {} states, {} outcomes",
            priors.len(),
            states.len(),
            m.len()
        )));
    }
    if priors.iter().any(|&p| p < 0.0) || (priors.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter("priors must form a distribution".into()));
    }
    for s in states {
        validate_state(s, m.dim())?;
    }
    let noisy = depolarize(m, c)?;
    let success = |povm: &Povm| -> f64 {
        priors
            .iter()
            .zip(states)
            .zip(povm.effects())
            .map(|((p, s), e)| p * s.trace_product(e).re)
            .sum::<f64>()
            .clamp(0.0, 1.0)
    };
    let p_succ_m = success(m);
    let p_succ_noisy = success(&noisy);
    Ok(DiscriminationReport {
        priors: priors.to_vec(),
        states: states.to_vec(),
        p_succ_m,
        p_succ_noisy,
        c,
        inequality_ok: c * p_succ_m <= p_succ_noisy + 1e-12,
    })
}

/// Orthonormal real coordinates of a Hermitian matrix: diagonal entries,
/// then `√2 Re x_jk` and `√2 Im x_jk` for `j < k`.
fn hermitian_coords(x: &Matrix) -> Vec<f64> {
    let d = x.rows();
    let s = std::f64::consts::SQRT_2;
    let mut v: Vec<f64> = (0..d).map(|j| x[(j, j)].re).collect();
    for j in 0..d {
        for k in j + 1..d {
            v.push(s * x[(j, k)].re);
            v.push(s * x[(j, k)].im);
        }
    }
    v
}

/// Minimum-norm `ê` with `Σ_i ê(i) M_i = O`, via the pseudo-inverse of the
/// frame operator over a Hermitian basis. Fails when no unbiased estimator
/// exists.
pub fn min_norm_estimator(m: &Povm, o: &Matrix) -> Result<Vec<f64>> {
    let coords: Vec<Vec<f64>> = m.effects().iter().map(hermitian_coords).collect();
    let dim = coords[0].len();
    let frame = Matrix::from_fn(dim, dim, |a, b| c(coords.iter().map(|v| v[a] * v[b]).sum(), 0.0));
    let spec = eig_hermitian(&frame)?;
    let cutoff = 1e-12 * spec.max_abs().max(1.0);
    let pinv = spec.map(|x| if x > cutoff { 1.0 / x } else { 0.0 });
    let target = hermitian_coords(o);
    let y: Vec<f64> = (0..dim)
        .map(|a| (0..dim).map(|b| pinv[(a, b)].re * target[b]).sum())
        .collect();
    let est: Vec<f64> = coords.iter().map(|v| v.iter().zip(&y).map(|(p, q)| p * q).sum()).collect();
    let residual = estimator_residual(m, o, &est);
    if residual > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "no unbiased estimator: residual ‖Σ ê_i M_i − O‖ = {residual:.3e}"
        )));
    }
    Ok(est)
}

/// `‖Σ_i ê(i) M_i − O‖_F`; zero exactly when `ê` is unbiased on all states.
pub fn estimator_residual(m: &Povm, o: &Matrix, est: &[f64]) -> f64 {
    let mut acc = o.scale(-1.0);
    for (e, &w) in m.effects().iter().zip(est) {
        acc.add_scaled(w, e);
    }
    acc.frobenius_norm()
}

/// `Σ_i ê(i)² M_i`, whose expectation in `ρ` is the second moment `Δ_M(O, ρ)`.
fn moment_operator(m: &Povm, est: &[f64]) -> Matrix {
    let d = m.dim();
    let mut acc = Matrix::zeros(d, d);
    for (e, &w) in m.effects().iter().zip(est) {
        acc.add_scaled(w * w, e);
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowEntry {
    /// Largest `|E_N ê′ − tr(ρO)|` over the sampled states, relative to
    /// `max(1, max|ê′|)`.
    pub bias: f64,
    /// Largest violation of the second-moment identity over sampled states,
    /// relative to `max(1, rhs)`.
    pub identity_deviation: f64,
    /// `max_ρ Δ_N(O, ρ)` and `(1/c²) max_ρ Δ_M(O, ρ)`.
    pub max_delta_noisy: f64,
    pub max_delta_bound: f64,
    pub bound_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowReport {
    pub c: f64,
    pub states_checked: usize,
    pub tol: f64,
    pub entries: Vec<ShadowEntry>,
    pub pass: bool,
}

/// Checks that `ê/c` is unbiased for `Φ_c(M)` and that
/// `Δ_N(O,ρ) = (1/c²)(cΔ_M(O,ρ) + (1−c)Δ_M(O,I/d))` on `n_states` random
/// states, plus the worst-case bound via the largest eigenvalue.
pub fn shadow_check(
    m: &Povm,
    observables: &[Matrix],
    estimators: &[Vec<f64>],
    c: f64,
    n_states: usize,
    seed: u64,
) -> Result<ShadowReport> {
    const TOL: f64 = 1e-9;
    if observables.len() != estimators.len() {
        return Err(Error::DimensionMismatch("one estimator per observable".into()));
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidParameter(format!("c = {c} outside (0, 1]")));
    }
    let d = m.dim();
    let noisy = depolarize(m, c)?;
    let maximally_mixed = Matrix::identity(d).scale(1.0 / d as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states: Vec<Matrix> = (0..n_states)
        .map(|j| {
            if j % 2 == 0 {
                random::random_pure_state(d, &mut rng)
            } else {
                random::random_density_matrix(d, &mut rng)
            }
        })
        .collect();
    let mut entries = Vec::with_capacity(observables.len());
    for (o, est) in observables.iter().zip(estimators) {
        if !o.is_hermitian(1e-10) || o.trace().norm() > 1e-10 {
            return Err(Error::InvalidParameter("observables must be traceless Hermitian".into()));
        }
        if est.len() != m.len() {
            return Err(Error::DimensionMismatch(format!(
                "estimator has {} values for {} outcomes",
                est.len(),
                m.len()
            )));
        }
        let residual = estimator_residual(m, o, est);
        if residual > TOL {
            return Err(Error::InvalidParameter(format!(
                "estimator is biased for M: residual {residual:.3e}"
            )));
        }
        let scaled: Vec<f64> = est.iter().map(|x| x / c).collect();
        let second = |p: &[f64], e: &[f64]| -> f64 { p.iter().zip(e).map(|(p, x)| p * x * x).sum() };
        let delta_mixed = second(&m.raw_born(&maximally_mixed), est);
        let scale = scaled.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        let mut bias: f64 = 0.0;
        let mut identity_deviation: f64 = 0.0;
        for rho in &states {
            let pn = noisy.raw_born(rho);
            let mean: f64 = pn.iter().zip(&scaled).map(|(p, x)| p * x).sum();
            bias = bias.max((mean - rho.trace_product(o).re).abs() / scale);
            let lhs = second(&pn, &scaled);
            let rhs = (c * second(&m.raw_born(rho), est) + (1.0 - c) * delta_mixed) / (c * c);
            identity_deviation = identity_deviation.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        }
        let max_delta_noisy = eig_hermitian(&moment_operator(&noisy, &scaled).hermitian_part())?.max();
        let max_delta_bound = eig_hermitian(&moment_operator(m, est).hermitian_part())?.max() / (c * c);
        entries.push(ShadowEntry {
            bias,
            identity_deviation,
            max_delta_noisy,
            max_delta_bound,
            bound_ok: max_delta_noisy <= max_delta_bound * (1.0 + 1e-12) + 1e-12,
        });
    }
    let pass = entries
        .iter()
        .all(|e| e.bias <= TOL && e.identity_deviation <= TOL && e.bound_ok);
    Ok(ShadowReport {
        c,
        states_checked: n_states,
        tol: TOL,
        entries,
        pass,
    })
}
