//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use povmsim::finegrain::{extremal_refine, flat_refine};
use povmsim::linalg::Matrix;
use povmsim::naimark::{deficient_naimark_parts, dilate_rank_one, dilate_with_ancilla, NearlyProjective};
use povmsim::noisysim::{build_plan_parts, critical_visibility, critical_visibility_parts};
use povmsim::partition::{
    build_ensemble, improved_bound, optimize_partition, random_partition_with, success_prob, Partition,
};
use povmsim::pipeline::{
    ancilla_tradeoff, certify_sp, AncillaRoute, random_thresholds, random_trial, simulate_with_ancilla, SearchMode, C_FLOOR,
};
use povmsim::povm::{depolarize, depolarize_operator, effect_distance, post_process, verify_sp_witness};
use povmsim::sampler_apps::{disc_success, min_norm_estimator, sample, sample_with_postselection, shadow_check};
use povmsim::tol::Tolerances;
use povmsim::{random, Error, Povm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn postselection_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = rng(1000 + seed);
        let d = rng.random_range(2..=8);
        let m_count = rng.random_range(1..=2 * d);
        let m = random::flat_povm(d, m_count, &mut rng);
        let n = m.len();
        ensure!(n <= 2 * d * d, "n = {n} > 2d²");
        let random_p = ok(random_partition_with(n, rng.random_range(1..=n), &mut rng))?;
        let max_size = rng.random_range(1..=n);
        let searched = ok(optimize_partition(&m, n, max_size, Some(20 * n), seed))?;
        for p in [random_p, searched] {
            let e = ok(build_ensemble(&m, &p))?;
            let rep = e.verify();
            ensure!(rep.subs_valid, "seed {seed}: invalid sub-measurement");
            ensure!((rep.weight_sum - 1.0).abs() <= 1e-12, "seed {seed}: weights sum to {}", rep.weight_sum);
            worst = worst.max(rep.max_deviation());
        }
    }
    ensure!(worst <= 1e-9, "max deviation {worst:.3e} > 1e-9");
    Ok(format!("200 ensembles, max deviation {worst:.2e} ≤ 1e-9"))
}

fn exact_q_values() -> Outcome {
    let t = Povm::trine();
    let q1 = ok(success_prob(&t, &Partition::singletons(3)))?;
    let q2 = ok(success_prob(&t, &ok(Partition::new(3, vec![vec![0, 1], vec![2]]))?))?;
    ensure!((q1 - 0.5).abs() <= 1e-12, "singletons q = {q1}");
    ensure!((q2 - 0.6).abs() <= 1e-12, "{{1,2}},{{3}} q = {q2}");
    Ok(format!("q = {q1:.15} and {q2:.15}"))
}

fn randomized_guarantee() -> Outcome {
    let (d, c) = (16, 1.0);
    let th = ok(random_thresholds(d, c))?;
    let mut hits = 0;
    let seeds = 200;
    for seed in 0..seeds {
        // n = 2d² = 512 outcomes of magnitude 1/(2d).
        let m = random::flat_povm(d, 2 * d, &mut rng(5000 + seed));
        let (_, trial) = ok(random_trial(&m, &th, seed, 0))?;
        hits += usize::from(trial.accepted);
    }
    let frac = hits as f64 / seeds as f64;
    ensure!(frac >= 0.25 - 0.09, "first-trial success fraction {frac}");
    Ok(format!(
        "{hits}/{seeds} first trials accepted (q ≥ {:.4}, max|S| ≤ {:.1})",
        th.q_min, th.size_max
    ))
}

fn deficient_naimark() -> Outcome {
    let mut rng = rng(4);
    let mut worst_witness: f64 = 0.0;
    let mut worst_exact: f64 = 0.0;
    for inst in 0..50 {
        let d = rng.random_range(2..=10);
        let l = rng.random_range(1..=d / 2);
        let np = random::random_nearly_projective(d, l, 0.3..=1.0, &mut rng);
        let r = ok(deficient_naimark_parts(&np))?;
        let k = r.wperp_dim;
        ensure!(r.witness.components.len() == 2 * k * k, "instance {inst}: {} components", r.witness.components.len());
        let rep = ok(verify_sp_witness(&r.witness, &r.f))?;
        ensure!(rep.pass, "instance {inst}: witness fails: {rep}");
        worst_witness = worst_witness.max(rep.max_deviation);
        for comp in &r.witness.components {
            let proj = &comp.projective;
            worst_exact = worst_exact.max(proj.projective_defect());
            worst_exact = worst_exact.max((&proj.effect_sum() - &Matrix::identity(d)).frobenius_norm());
        }
        let pw = r.projector_w();
        let pp = r.projector_wperp();
        for (i, phi) in r.phis.iter().enumerate() {
            let proj = Matrix::outer(phi, phi);
            let a = np.amps[i];
            worst_exact = worst_exact.max((proj.trace_product(&pw).re - a).abs());
            worst_exact = worst_exact.max((proj.trace_product(&pp).re - (1.0 - a)).abs());
            let pure = &(&(&pw * &proj) * &pw) - &Matrix::scaled_projector(a, &np.psis[i]);
            worst_exact = worst_exact.max(pure.frobenius_norm());
        }
    }
    ensure!(worst_witness <= 1e-9, "witness deviation {worst_witness:.3e}");
    ensure!(worst_exact <= 1e-10, "projector / normalization defect {worst_exact:.3e}");
    Ok(format!(
        "50 instances, witness deviation {worst_witness:.2e}, projector and normalization defects {worst_exact:.2e}"
    ))
}

fn tightness() -> Outcome {
    let qubit = ok(Povm::new(2, vec![Matrix::diag(&[0.5, 0.0]), Matrix::diag(&[0.5, 1.0])]))?;
    let t1 = ok(critical_visibility(&qubit))?;
    let u = random::haar_unitary(4, &mut rng(50));
    let pair = NearlyProjective {
        dim: 4,
        amps: vec![0.5, 0.5],
        psis: vec![u.column(0), u.column(1)],
    };
    let t2 = ok(critical_visibility_parts(&pair))?;
    ensure!((t1 - 1.0 / 3.0).abs() <= 1e-12 && (t2 - 1.0 / 3.0).abs() <= 1e-12, "hand values {t1}, {t2}");

    let mut rng = rng(5);
    let mut min_b = f64::INFINITY;
    for inst in 0..50 {
        let d = rng.random_range(2..=10);
        let l = rng.random_range(1..=d / 2);
        let mut np = random::random_nearly_projective(d, l, 0.3..=1.0, &mut rng);
        np.amps[0] = np.amps[0].min(0.9);
        let t = ok(critical_visibility_parts(&np))?;
        let plan = ok(build_plan_parts(&np, t))?;
        min_b = min_b.min(plan.b.iter().copied().fold(f64::INFINITY, f64::min));
        ensure!(ok(verify_sp_witness(&plan.full_witness, &plan.target))?.pass, "instance {inst}: plan witness fails at t_N");
        match build_plan_parts(&np, t + 1e-6) {
            Err(Error::Infeasible(_)) => {}
            other => return Err(format!("instance {inst}: t_N + 1e-6 not rejected ({:?})", other.map(|p| p.tau))),
        }
    }
    ensure!(min_b >= -1e-12, "min b = {min_b}");
    Ok(format!("hand values 1/3, 50 instances valid at t_N and rejected above (min b {min_b:.1e})"))
}

fn end_to_end() -> Outcome {
    let tols = Tolerances::default();
    let mut rng = rng(6);
    let mut runs = 0;
    let mut guaranteed = 0;
    let mut worst: f64 = 0.0;
    let mut min_c = f64::INFINITY;
    for d in [2usize, 3, 4] {
        for j in 0..4 {
            let (m, delta, eps) = match (d, j % 2) {
                (2, 0) => (random::random_rank_one_povm(2, 3, &mut rng), 0.01, 0.1),
                (2, _) => (random::random_mixed_povm(2, 3, &mut rng), 0.05, 0.25),
                (_, 0) => (random::random_rank_one_povm(d, d + 2, &mut rng), 0.2, 1.0 / d as f64),
                _ => (random::random_mixed_povm(d, 2, &mut rng), 0.4, 1.0 / d as f64),
            };
            let mode = if j < 2 { SearchMode::Greedy } else { SearchMode::Random };
            let cert = ok(certify_sp(&m, delta, eps, mode, j as u64))?;
            let diag = &cert.diagnostics;
            ensure!(diag.verified, "d = {d}, run {j}: certificate not verified");
            let rep = ok(cert.verify(&tols))?;
            ensure!(rep.pass && rep.max_deviation <= 1e-8, "d = {d}, run {j}: {rep}");
            ensure!(
                (cert.c_found - diag.q_found * diag.t_np_found).abs() <= 1e-12,
                "c ≠ q·t"
            );
            if diag.guarantee_applies {
                let floor = C_FLOOR / (1.0 + delta).powi(2);
                ensure!(cert.c_found >= floor, "c = {} below {floor}", cert.c_found);
                guaranteed += 1;
            }
            worst = worst.max(rep.max_deviation);
            min_c = min_c.min(cert.c_found);
            runs += 1;
        }
    }
    ensure!(guaranteed > 0, "no run exercised the conditional guarantee");
    Ok(format!(
        "{runs} certificates, witness deviation {worst:.2e}, min c {min_c:.4}, {guaranteed} with c ≥ 0.0204/(1+δ)² asserted"
    ))
}

fn naimark_dilations() -> Outcome {
    let mut rng = rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.random_range(1..=5);
        let n = rng.random_range(d..=2 * d);
        let m = random::random_rank_one_povm(d, n, &mut rng);
        let rho = random::random_density_matrix(d, &mut rng);
        let born = m.born_unchecked(&rho);
        let block = ok(dilate_rank_one(&m, n))?;
        let tensor = ok(dilate_with_ancilla(&m, 2))?;
        for dil in [&block, &tensor] {
            ensure!(dil.projective.projective_defect() <= 1e-10, "dilation not projective");
            let stats = dil.statistics(&rho);
            for (s, b) in stats.iter().zip(&born) {
                worst = worst.max((s - b).abs());
            }
        }
    }
    ensure!(worst <= 1e-10, "dilation condition deviation {worst:.3e}");

    let trine = Povm::trine();
    let sim = ok(simulate_with_ancilla(&trine, 2, 0.05, 0.1, SearchMode::Exhaustive, 0))?;
    let dev_trine = ok(sim.deviation(&trine))?;
    let flat = random::flat_povm(4, 3, &mut rng);
    let sim4 = ok(simulate_with_ancilla(&flat, 2, 0.05, 0.5, SearchMode::Exhaustive, 0))?;
    let dev_flat = ok(sim4.deviation(&flat))?;
    let rho = random::random_density_matrix(4, &mut rng);
    let stats = sim4.statistics(&rho);
    let mut stat_dev: f64 = 0.0;
    for (s, b) in stats.iter().zip(flat.born_unchecked(&rho)) {
        stat_dev = stat_dev.max((s - sim4.q * b).abs());
    }
    stat_dev = stat_dev.max((stats[flat.len()] - (1.0 - sim4.q)).abs());
    ensure!(dev_trine <= 1e-8 && dev_flat <= 1e-8 && stat_dev <= 1e-8, "ancilla recombination {dev_trine:.2e}, {dev_flat:.2e}, {stat_dev:.2e}");
    ensure!(sim4.route == AncillaRoute::Partitioned && sim4.dilations.iter().all(|d| d.ambient_dim == 8), "d = 4 simulation not partitioned on C^8");
    Ok(format!(
        "dilation condition {worst:.2e} over 200 dilations; ancilla recombination {:.2e} (trine q = {}), {:.2e} (d = 4, q = {:.4})",
        dev_trine, sim.q, dev_flat.max(stat_dev), sim4.q
    ))
}

fn closed_forms() -> Outcome {
    let b5 = ok(improved_bound(5.0, 1.0, 0.5))?;
    let b1 = ok(improved_bound(1.0, 1.0, 1.0))?;
    let k5 = ok(ancilla_tradeoff(5, 1.0))?.q_lower;
    ensure!((b5 - 0.068).abs() < 5e-4, "C=5 bound {b5}");
    ensure!((b1 - 0.125).abs() < 1e-15, "C=1 bound {b1}");
    ensure!((k5 - 0.25).abs() < 1e-15, "k=5 tradeoff {k5}");
    Ok(format!("{b5:.4}, {b1}, {k5}"))
}

fn fine_graining() -> Outcome {
    let mut rng = rng(9);
    let mut worst_rec: f64 = 0.0;
    for _ in 0..40 {
        let d = rng.random_range(2..=4);
        let m = if rng.random_bool(0.5) {
            random::random_mixed_povm(d, rng.random_range(1..=4), &mut rng)
        } else {
            random::random_rank_one_povm(d, rng.random_range(d..=2 * d), &mut rng)
        };
        let delta = rng.random_range(0.1..=1.0);
        let eps = rng.random_range(0.05..=0.5);
        let r = ok(flat_refine(&m, delta, eps))?;
        worst_rec = worst_rec.max(ok(effect_distance(&ok(post_process(&r.recover, &r.refined))?, &m))?);
        ensure!(r.flatness <= (1.0 + delta) * (1.0 + 1e-12), "flatness {} > 1+δ", r.flatness);
        ensure!(r.max_alpha() <= eps * (1.0 + 1e-12), "cap {} > ε", r.max_alpha());
    }
    for _ in 0..40 {
        let d = rng.random_range(1..=5);
        let n = rng.random_range(d..=d * d);
        let m = random::random_rank_one_povm(d, n, &mut rng);
        let r = ok(extremal_refine(&m))?;
        worst_rec = worst_rec.max(ok(effect_distance(&ok(post_process(&r.recover, &r.refined))?, &m))?);
        ensure!(r.len() <= 2 * d * d, "n′ = {} > 2d²", r.len());
        ensure!(r.max_alpha() <= (1.0 + 1e-12) / d as f64, "α = {} > 1/d", r.max_alpha());
    }
    ensure!(worst_rec <= 1e-10, "recovery deviation {worst_rec:.3e}");
    Ok(format!("80 refinements, recovery deviation {worst_rec:.2e}"))
}

fn statistics() -> Outcome {
    let shots = 1_000_000u64;
    let half = Matrix::identity(2).scale(0.5);
    let r = ok(sample(&Povm::trine(), &half, shots, 0))?;
    let tv_bound = 4.0 * (3.0 / shots as f64).sqrt();
    ensure!(r.tv_distance <= tv_bound, "trine TV {} > {tv_bound}", r.tv_distance);

    let mut rng = rng(10);
    let mut ensembles = vec![
        ok(build_ensemble(&Povm::trine(), &Partition::singletons(3)))?,
        ok(build_ensemble(&Povm::basis(2), &Partition::trivial(2)))?,
    ];
    let m = random::flat_povm(3, 2, &mut rng);
    ensembles.push(ok(build_ensemble(&m, &ok(random_partition_with(6, 3, &mut rng))?))?);
    for (i, e) in ensembles.iter().enumerate() {
        let d = e.target.dim();
        let rho = if i == 0 { half.clone() } else { random::random_density_matrix(d, &mut rng) };
        let s = ok(sample_with_postselection(e, &rho, shots, i as u64))?;
        let q = e.q;
        let rate_bound = 5.0 * (q * (1.0 - q) / shots as f64).sqrt();
        ensure!((s.acceptance_rate - q).abs() <= rate_bound.max(1e-15), "ensemble {i}: rate {} vs q {q}", s.acceptance_rate);
        let n = e.target.len() as f64;
        let tv = 4.0 * (n / (q * shots as f64)).sqrt();
        ensure!(s.tv_distance <= tv, "ensemble {i}: TV {} > {tv}", s.tv_distance);
    }

    for inst in 0..100 {
        let d = rng.random_range(2..=4);
        let n = rng.random_range(2..=5);
        let m = random::random_mixed_povm(d, n, &mut rng);
        let priors = random::random_distribution(n, &mut rng);
        let states: Vec<Matrix> = (0..n).map(|_| random::random_density_matrix(d, &mut rng)).collect();
        let r = ok(disc_success(&priors, &states, &m, rng.random_range(0.0..=1.0)))?;
        ensure!(r.inequality_ok, "discrimination instance {inst}");
    }

    let basis = ok(shadow_check(&Povm::basis(2), &[Matrix::diag(&[1.0, -1.0])], &[vec![1.0, -1.0]], 0.5, 50, 0))?;
    ensure!(basis.pass && (basis.entries[0].max_delta_noisy - 4.0).abs() < 1e-9, "qubit shadow check");
    let m = random::random_rank_one_povm(3, 9, &mut rng);
    let mut o = random::random_hermitian(3, &mut rng);
    let t = o.trace().re / 3.0;
    o.add_scaled(-t, &Matrix::identity(3));
    let est = ok(min_norm_estimator(&m, &o))?;
    let rep = ok(shadow_check(&m, &[o], &[est], 0.02, 50, 1))?;
    ensure!(rep.pass, "random shadow check: {:?}", rep.entries);
    Ok(format!(
        "trine TV {:.2e}, 3 postselected ensembles within 5σ, 100 discrimination instances, variance identity {:.1e}",
        r.tv_distance, rep.entries[0].identity_deviation
    ))
}

fn depolarizing_algebra() -> Outcome {
    let mut rng = rng(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.random_range(1..=5);
        let n = rng.random_range(1..=5);
        let m = random::random_mixed_povm(d, n, &mut rng);
        let (s, t) = (rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
        let lhs = ok(depolarize(&ok(depolarize(&m, t))?, s))?;
        worst = worst.max(ok(effect_distance(&lhs, &ok(depolarize(&m, s * t))?))?);

        let rho = random::random_density_matrix(d, &mut rng);
        let noisy = ok(depolarize(&m, t))?;
        let rho_t = depolarize_operator(&rho, t);
        for (a, b) in noisy.effects().iter().zip(m.effects()) {
            worst = worst.max((rho.trace_product(a) - rho_t.trace_product(b)).norm());
        }

        let q = random::random_stochastic_map(rng.random_range(1..=4), n, &mut rng);
        let a = ok(post_process(&q, &ok(depolarize(&m, t))?))?;
        let b = ok(depolarize(&ok(post_process(&q, &m))?, t))?;
        worst = worst.max(ok(effect_distance(&a, &b))?);
    }
    ensure!(worst <= 1e-10, "identity deviation {worst:.3e}");
    Ok(format!("300 identities, max deviation {worst:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("postselection identity", postselection_identity, Duration::from_secs(30)),
        ("exact q values", exact_q_values, Duration::MAX),
        ("randomized-partition guarantee", randomized_guarantee, Duration::from_secs(300)),
        ("dimension-deficient Naimark", deficient_naimark, Duration::MAX),
        ("critical visibility tightness", tightness, Duration::MAX),
        ("end-to-end certification", end_to_end, Duration::MAX),
        ("Naimark dilations", naimark_dilations, Duration::MAX),
        ("closed-form constants", closed_forms, Duration::MAX),
        ("fine-graining", fine_graining, Duration::MAX),
        ("statistical suite", statistics, Duration::MAX),
        ("depolarizing algebra", depolarizing_algebra, Duration::MAX),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = match result {
            Ok(_) if elapsed > *limit => Err(format!("took {elapsed:.1?}, limit {limit:.0?}")),
            r => r,
        };
        match result {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}; {elapsed:.2?})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why}; {elapsed:.2?})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
