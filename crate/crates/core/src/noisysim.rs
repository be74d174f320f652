//! Projective simulation of depolarized nearly projective POVMs.
//!
//! For `N = (A_iψ_iψ_i†, …, remainder)` the depolarized measurement
//! `Φ_τ(N)` splits as `τF + (1−τ)C`, where `F` comes from the
//! dimension-deficient dilation and `C_i = a_i P_W + b_i P_{W⊥}` is a
//! post-processing of the two-outcome measurement `(P_W, P_{W⊥})`.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpanSplit};
use crate::naimark::{deficient_naimark_parts, DeficientNaimarkResult, NearlyProjective};
use crate::povm::{depolarize, Povm, SpWitness, StochasticMap, WitnessComponent};

/// Components lighter than this are dropped from assembled witnesses.
pub const PRUNE_WEIGHT: f64 = 1e-14;

/// Negative `b_i` down to this are accepted as zero.
pub const COEFF_SLACK: f64 = 1e-12;

fn visibility_from(np: &NearlyProjective, w_dim: usize) -> f64 {
    let k = (np.dim - w_dim) as f64;
    let w = w_dim as f64;
    np.amps
        .iter()
        .map(|&a| k * a / (w * (1.0 - a) + k))
        .fold(1.0, f64::min)
}

/// `t_N = min_i |W⊥|A_i / (|W|(1−A_i) + |W⊥|)`.
pub fn critical_visibility(n: &Povm) -> Result<f64> {
    let np = NearlyProjective::parse(n)?;
    critical_visibility_parts(&np)
}

pub fn critical_visibility_parts(np: &NearlyProjective) -> Result<f64> {
    let w_dim = SpanSplit::new(np.dim, &np.psis)?.range.len();
    if w_dim == np.dim && !np.is_empty() {
        return Err(Error::InvalidPovm("the vectors ψ_i span the whole space".into()));
    }
    Ok(visibility_from(np, w_dim))
}

/// Everything needed to certify `Φ_τ(N)` as projectively simulable.
#[derive(Clone, Debug)]
pub struct NoisySimPlan {
    pub t_crit: f64,
    pub tau: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub classical: Povm,
    pub classical_witness: SpWitness,
    pub full_witness: SpWitness,
    pub deficient: DeficientNaimarkResult,
    /// `Φ_τ(N)`.
    pub target: Povm,
}

pub fn build_plan(n: &Povm, tau: f64) -> Result<NoisySimPlan> {
    let np = NearlyProjective::parse(n)?;
    build_plan_parts(&np, tau)
}

pub fn build_plan_parts(np: &NearlyProjective, tau: f64) -> Result<NoisySimPlan> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!("tau {tau} outside [0, 1]")));
    }
    let d = np.dim;
    let l = np.len();
    let dn = deficient_naimark_parts(np)?;
    let k = dn.wperp_dim as f64;
    let t_crit = visibility_from(np, dn.w_dim);

    // b_i = a_i + τ/(1−τ)·(A_i−1)/|W⊥|, rewritten as a_i(t_i−τ)/((1−τ)t_i)
    // with t_i the per-outcome visibility, so that τ = t_i gives b_i = 0 exactly.
    let a: Vec<f64> = np.amps.iter().map(|&x| x / d as f64).collect();
    let w = dn.w_dim as f64;
    let mut b = Vec::with_capacity(l);
    for (i, (&ai, &amp)) in a.iter().zip(&np.amps).enumerate() {
        let ti = k * amp / (w * (1.0 - amp) + k);
        let bi = if ti >= 1.0 {
            ai
        } else if tau >= 1.0 {
            f64::NEG_INFINITY
        } else {
            ai * (ti - tau) / ((1.0 - tau) * ti)
        };
        if bi < -COEFF_SLACK {
            return Err(Error::Infeasible(format!(
                "tau = {tau} exceeds the critical visibility {t_crit}: b_{} = {bi:.3e} < 0",
                i + 1
            )));
        }
        b.push(bi.max(0.0));
    }
    let sum_a: f64 = a.iter().sum();
    let sum_b: f64 = b.iter().sum();

    let p_w = dn.projector_w();
    let p_perp = dn.projector_wperp();
    let mut c_effects: Vec<Matrix> = a
        .iter()
        .zip(&b)
        .map(|(&ai, &bi)| {
            let mut e = p_w.scale(ai);
            e.add_scaled(bi, &p_perp);
            e
        })
        .collect();
    let mut c_rest = p_w.scale(1.0 - sum_a);
    c_rest.add_scaled(1.0 - sum_b, &p_perp);
    c_effects.push(c_rest);
    let classical = Povm::new(d, c_effects)?;

    // (P_W, P_{W⊥}) padded with zero effects to at least l+1 outcomes.
    let arity = (l + 1).max(2);
    let mut proj = vec![p_w.clone(), p_perp.clone()];
    proj.resize(arity, Matrix::zeros(d, d));
    let mut col_w = a.clone();
    col_w.push(1.0 - sum_a);
    let mut col_perp = b.clone();
    col_perp.push(1.0 - sum_b);
    let mut columns = vec![col_w, col_perp];
    let mut fail = vec![0.0; l + 1];
    fail[l] = 1.0;
    columns.resize(arity, fail);
    let classical_component = WitnessComponent {
        weight: 1.0,
        projective: Povm::new(d, proj)?,
        postproc: StochasticMap::from_columns(l + 1, &columns)?,
    };
    let classical_witness = SpWitness {
        target_dim: d,
        components: vec![classical_component.clone()],
    };

    let mut components: Vec<WitnessComponent> = dn
        .witness
        .components
        .iter()
        .map(|c| WitnessComponent {
            weight: tau * c.weight,
            ..c.clone()
        })
        .collect();
    components.push(WitnessComponent {
        weight: 1.0 - tau,
        ..classical_component
    });
    let mut full_witness = SpWitness {
        target_dim: d,
        components,
    };
    full_witness.prune(PRUNE_WEIGHT);

    let target = depolarize(&np.to_povm()?, tau)?;
    Ok(NoisySimPlan {
        t_crit,
        tau,
        a,
        b,
        classical,
        classical_witness,
        full_witness,
        deficient: dn,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::{effect_distance, verify_sp_witness};
    use crate::random;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn qubit(a: f64) -> Povm {
        Povm::new(2, vec![Matrix::diag(&[a, 0.0]), Matrix::diag(&[1.0 - a, 1.0])]).unwrap()
    }

    #[test]
    fn critical_visibility_examples() {
        assert_eq!(critical_visibility(&qubit(1.0)).unwrap(), 1.0);
        assert!((critical_visibility(&qubit(0.5)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = random::haar_unitary(4, &mut rng);
        let np = NearlyProjective {
            dim: 4,
            amps: vec![0.5, 0.5],
            psis: vec![u.column(0), u.column(1)],
        };
        assert!((critical_visibility_parts(&np).unwrap() - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn tau_zero_is_classical() {
        let n = qubit(0.5);
        let plan = build_plan(&n, 0.0).unwrap();
        assert_eq!(plan.full_witness.components.len(), 1);
        let rep = verify_sp_witness(&plan.full_witness, &depolarize(&n, 0.0).unwrap()).unwrap();
        assert!(rep.pass);
    }

    #[test]
    fn boundary_and_tightness() {
        let n = qubit(0.5);
        let plan = build_plan(&n, 1.0 / 3.0).unwrap();
        assert!(plan.b[0].abs() < 1e-12);
        assert!((plan.a[0] - 0.25).abs() < 1e-15);
        assert!(verify_sp_witness(&plan.full_witness, &plan.target).unwrap().pass);
        match build_plan(&n, 1.0 / 3.0 + 1e-6) {
            Err(Error::Infeasible(msg)) => assert!(msg.contains("b_1")),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn projective_input_has_full_visibility() {
        let n = qubit(1.0);
        let plan = build_plan(&n, 1.0).unwrap();
        assert_eq!(plan.t_crit, 1.0);
        assert_eq!(plan.a, plan.b);
        assert!(verify_sp_witness(&plan.full_witness, &n).unwrap().pass);
    }

    #[test]
    fn random_decompositions_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let d = rng.random_range(2..=10);
            let l = rng.random_range(1..=d / 2);
            let np = random::random_nearly_projective(d, l, 0.3..=1.0, &mut rng);
            let t = critical_visibility_parts(&np).unwrap();
            let tau = t * rng.random_range(0.0..=1.0);
            let plan = build_plan_parts(&np, tau).unwrap();
            let mut recombined = plan.deficient.f.effects().to_vec();
            for (e, c) in recombined.iter_mut().zip(plan.classical.effects()) {
                *e = e.scale(tau);
                e.add_scaled(1.0 - tau, c);
            }
            let lhs = Povm::new(d, recombined).unwrap();
            assert!(effect_distance(&lhs, &plan.target).unwrap() <= 1e-10);
            assert!(plan.classical.validate().is_ok());
            assert!(verify_sp_witness(&plan.classical_witness, &plan.classical).unwrap().pass);
            assert!(verify_sp_witness(&plan.full_witness, &plan.target).unwrap().pass);
            let sa: f64 = plan.a.iter().sum();
            let sb: f64 = plan.b.iter().sum();
            assert!(sa <= l as f64 / d as f64 + 1e-15 && sb <= sa + 1e-15);
        }
    }

    #[test]
    fn visibility_floor_for_large_amplitudes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let delta = rng.random_range(0.0..=0.05);
            let d = 2 * rng.random_range(1..=5);
            let l = d / 2;
            let floor = 0.47 / (1.0 + delta);
            let u = random::haar_unitary(d, &mut rng);
            let np = NearlyProjective {
                dim: d,
                amps: (0..l).map(|_| rng.random_range(floor..=1.0)).collect(),
                psis: (0..l).map(|j| u.column(j)).collect(),
            };
            let t = critical_visibility_parts(&np).unwrap();
            assert!(t >= 0.3 / (1.0 + delta) - 1e-12, "{t}");
        }
    }
}
