use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use povmsim::{Matrix, Povm, SpWitness};
use tempfile::TempDir;

fn povmsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_povmsim"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn setup() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let trine = dir.path().join("trine.povm");
    fs::write(&trine, serde_json::to_string(&Povm::trine()).unwrap()).unwrap();
    let state = serde_json::json!({ "dim": 2, "matrix": Matrix::diag(&[0.75, 0.25]) });
    fs::write(dir.path().join("rho.json"), state.to_string()).unwrap();
    fs::write(dir.path().join("basis2.povm"), serde_json::to_string(&Povm::basis(2)).unwrap()).unwrap();
    (dir, trine)
}

#[test]
fn validate_basis() {
    let (dir, _) = setup();
    let out = povmsim(&["validate", "basis2.povm"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("ok"));
}

#[test]
fn invalid_povm_and_missing_file() {
    let (dir, _) = setup();
    let bad = Povm::new(2, vec![Matrix::diag(&[1.0, 0.5])]).unwrap();
    fs::write(dir.path().join("bad.povm"), serde_json::to_string(&bad).unwrap()).unwrap();
    assert_eq!(code(&povmsim(&["validate", "bad.povm"], dir.path())), 1);
    assert_eq!(code(&povmsim(&["validate", "missing.povm"], dir.path())), 3);
    fs::write(dir.path().join("junk.povm"), "{").unwrap();
    assert_eq!(code(&povmsim(&["validate", "junk.povm"], dir.path())), 3);
}

#[test]
fn certify_then_check() {
    let (dir, _) = setup();
    let out = povmsim(
        &["certify-sp", "trine.povm", "--mode", "exhaustive", "--seed", "0", "-o", "trine.cert"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = povmsim(&["check-witness", "trine.cert", "trine.povm"], dir.path());
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("pass"));
}

#[test]
fn tampered_witness_is_rejected() {
    let (dir, _) = setup();
    assert_eq!(code(&povmsim(&["certify-sp", "trine.povm", "-o", "trine.cert"], dir.path())), 0);
    let cert: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("trine.cert")).unwrap()).unwrap();
    let mut w: SpWitness = serde_json::from_value(cert["witness"].clone()).unwrap();
    let first = &mut w.components[0].postproc;
    let cols: Vec<Vec<f64>> = (0..first.cols())
        .map(|j| {
            let mut col = vec![0.0; first.rows()];
            col[(j + 1) % first.rows()] = 1.0;
            col
        })
        .collect();
    *first = povmsim::StochasticMap::from_columns(first.rows(), &cols).unwrap();
    fs::write(dir.path().join("tampered.wit"), serde_json::to_string(&w).unwrap()).unwrap();
    let out = povmsim(&["check-witness", "tampered.wit", "trine.povm", "--noise", "0.3"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("max deviation"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max deviation"));
}

#[test]
fn outputs_are_byte_identical() {
    let (dir, _) = setup();
    let runs: [&[&str]; 4] = [
        &["certify-sp", "trine.povm", "--mode", "random", "--seed", "7", "-o"],
        &["partition", "trine.povm", "--mode", "greedy", "--max-size", "2", "-o"],
        &["dilate", "trine.povm", "--ancilla", "2", "-o"],
        &["sample", "trine.povm", "rho.json", "--shots", "20000", "--seed", "3", "-o"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let a = format!("a{i}.json");
        let b = format!("b{i}.json");
        for f in [&a, &b] {
            let mut full = args.to_vec();
            full.push(f);
            let out = povmsim(&full, dir.path());
            assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        }
        assert_eq!(fs::read(dir.path().join(&a)).unwrap(), fs::read(dir.path().join(&b)).unwrap(), "{args:?}");
    }
}

#[test]
fn written_files_read_back() {
    let (dir, _) = setup();
    assert_eq!(code(&povmsim(&["finegrain", "trine.povm", "--eps", "0.2", "-o", "fine.povm"], dir.path())), 0);
    assert_eq!(code(&povmsim(&["validate", "fine.povm"], dir.path())), 0);
    assert_eq!(code(&povmsim(&["partition", "trine.povm", "--max-size", "2", "-o", "part.json"], dir.path())), 0);
    let out = povmsim(&["sample", "trine.povm", "rho.json", "--ensemble", "part.json", "--shots", "50000"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("q = 6.000000e-1"));
    assert_eq!(code(&povmsim(&["dilate", "trine.povm", "-o", "dil.json"], dir.path())), 0);
    let dil: povmsim::naimark::NaimarkDilation =
        serde_json::from_str(&fs::read_to_string(dir.path().join("dil.json")).unwrap()).unwrap();
    assert!(dil.deviation_from(&Povm::trine()).unwrap() < 1e-10);
}

#[test]
fn parameter_errors() {
    let (dir, _) = setup();
    assert_eq!(code(&povmsim(&["tradeoff", "--k", "3", "--ratio", "3"], dir.path())), 4);
    assert_eq!(code(&povmsim(&["certify-sp", "trine.povm", "--delta=-1"], dir.path())), 4);
    assert_eq!(code(&povmsim(&["certify-sp", "trine.povm", "--mode", "sideways"], dir.path())), 1);
    let out = povmsim(&["tradeoff", "--k", "5"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("0.250000"));
}

#[test]
fn demos_run() {
    let (dir, _) = setup();
    for which in ["discrimination", "shadow"] {
        let out = povmsim(&["demo", which, "--seed", "1"], dir.path());
        assert_eq!(code(&out), 0, "{which}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
