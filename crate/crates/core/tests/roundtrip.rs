use povmsim::naimark::{dilate_with_ancilla, NaimarkDilation};
use povmsim::noisysim::{build_plan_parts, critical_visibility_parts};
use povmsim::partition::{build_ensemble, random_partition, Partition};
use povmsim::pipeline::{certify_sp, simulate_with_ancilla, AncillaSimulation, SearchMode, SpCertificate};
use povmsim::povm::{effect_distance, verify_sp_witness};
use povmsim::random;
use povmsim::tol::Tolerances;
use povmsim::{Povm, SpWitness};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn reparse<T: serde::Serialize + serde::de::DeserializeOwned>(x: &T) -> T {
    serde_json::from_str(&serde_json::to_string_pretty(x).unwrap()).unwrap()
}

#[test]
fn certificate_survives_serialization() {
    let cert = certify_sp(&Povm::trine(), 0.05, 0.1, SearchMode::Exhaustive, 0).unwrap();
    let back: SpCertificate = reparse(&cert);
    assert_eq!(back, cert);
    assert!(back.verify(&Tolerances::default()).unwrap().pass);
    let w: SpWitness = reparse(&back.witness);
    assert_eq!(w, cert.witness);
}

#[test]
fn dilation_and_ancilla_files() {
    let t = Povm::trine();
    let dil = dilate_with_ancilla(&t, 2).unwrap();
    let back: NaimarkDilation = reparse(&dil);
    assert_eq!(back, dil);
    assert!(back.deviation_from(&t).unwrap() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let m = random::flat_povm(4, 3, &mut rng);
    let sim = simulate_with_ancilla(&m, 2, 0.05, 0.5, SearchMode::Exhaustive, 0).unwrap();
    let back: AncillaSimulation = reparse(&sim);
    assert_eq!(back.deviation(&m).unwrap(), sim.deviation(&m).unwrap());
}

#[test]
fn malformed_files_are_rejected() {
    assert!(serde_json::from_str::<Povm>(r#"{"dim":2,"labels":[],"effects":[[[[1.0,0.0]]]]}"#).is_err());
    assert!(serde_json::from_str::<Partition>(r#"{"n":3,"subsets":[[0,1],[1,2]]}"#).is_err());
    let dil = serde_json::to_value(dilate_with_ancilla(&Povm::trine(), 2).unwrap()).unwrap();
    let mut bad = dil.clone();
    bad["ancilla_dim"] = serde_json::json!(3);
    assert!(serde_json::from_value::<NaimarkDilation>(bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn plans_are_exact_below_critical_visibility(seed in any::<u64>(), frac in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 2 + (seed % 6) as usize;
        let np = random::random_nearly_projective(d, d / 2, 0.2..=1.0, &mut rng);
        let t = critical_visibility_parts(&np).unwrap();
        let plan = build_plan_parts(&np, frac * t).unwrap();
        let rep = verify_sp_witness(&plan.full_witness, &plan.target).unwrap();
        prop_assert!(rep.pass, "{}", rep);
    }

    #[test]
    fn ensembles_reproduce_their_target(seed in any::<u64>(), r in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random::random_mixed_povm(3, 6, &mut rng);
        let p = random_partition(6, r, seed).unwrap();
        let e = build_ensemble(&m, &p).unwrap();
        prop_assert!(e.verify().passes(1e-9));
        prop_assert!(e.q > 0.0 && e.q <= 1.0 + 1e-12);
    }

    #[test]
    fn certified_witnesses_verify(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random::random_rank_one_povm(2, 3, &mut rng);
        let cert = certify_sp(&m, 0.2, 0.25, SearchMode::Greedy, seed).unwrap();
        prop_assert!(cert.diagnostics.verified);
        let rep = cert.verify(&Tolerances::default()).unwrap();
        prop_assert!(rep.pass, "{}", rep);
        prop_assert!(effect_distance(&cert.input, &m).unwrap() == 0.0);
    }
}
