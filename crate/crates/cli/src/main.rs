use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use povmsim::finegrain::{extremal_refine, flat_refine, spectral_refine, Refinement};
use povmsim::naimark::dilate_rank_one;
use povmsim::partition::{
    block_norms, build_ensemble, optimize_partition_with, random_partition, success_prob, OptimizeOptions, Partition,
};
use povmsim::pipeline::{
    ancilla_tradeoff, certify_sp_with, default_eps, simulate_with_ancilla, SearchMode, SpCertificate, DEFAULT_DELTA,
};
use povmsim::povm::{depolarize, effect_distance, post_process, validate_state, verify_sp_witness_with};
use povmsim::sampler_apps::{disc_success, min_norm_estimator, sample, sample_with_postselection, shadow_check};
use povmsim::tol::Tolerances;
use povmsim::{random, Error, Matrix, Povm, SpWitness};

#[derive(Parser)]
#[command(name = "povmsim", version, about = "Projective simulation of noisy POVMs")]
struct Cli {
    #[command(flatten)]
    tols: TolArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TolArgs {
    /// Most negative eigenvalue accepted in an effect.
    #[arg(long, global = true, default_value_t = povmsim::tol::PSD)]
    tol_psd: f64,
    /// Normalization error per unit dimension.
    #[arg(long, global = true, default_value_t = povmsim::tol::NORM_PER_DIM)]
    tol_norm: f64,
    /// Column sums of stochastic maps and weight sums.
    #[arg(long, global = true, default_value_t = povmsim::tol::STOCH)]
    tol_stoch: f64,
    /// Effect-wise deviation allowed for a witness.
    #[arg(long, global = true, default_value_t = povmsim::tol::WITNESS)]
    tol_witness: f64,
    /// Projector relation `P_i P_j = δ_ij P_i`.
    #[arg(long, global = true, default_value_t = povmsim::tol::PROJ)]
    tol_proj: f64,
}

impl TolArgs {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            psd: self.tol_psd,
            norm_per_dim: self.tol_norm,
            stoch: self.tol_stoch,
            witness: self.tol_witness,
            proj: self.tol_proj,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Refine {
    Flat,
    Spectral,
    Extremal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Demo {
    Discrimination,
    Shadow,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a file holds a valid POVM.
    Validate { povm: PathBuf },
    /// Split a POVM into flat rank-one pieces.
    Finegrain {
        povm: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        /// Largest refined magnitude; defaults to min(0.1, 1/d).
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, value_enum, default_value = "flat")]
        kind: Refine,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Find a partition of the outcomes and its success probability.
    Partition {
        povm: PathBuf,
        /// Maximum number of blocks; defaults to the number of outcomes.
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, default_value = "exhaustive")]
        mode: SearchMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_size: Option<usize>,
        /// Local-search iterations.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Certify a depolarizing level at which the POVM is projectively simulable.
    CertifySp {
        povm: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value = "exhaustive")]
        mode: SearchMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Naimark dilation, optionally restricted to an ancilla of dimension k.
    Dilate {
        povm: PathBuf,
        #[arg(long)]
        ancilla: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value = "exhaustive")]
        mode: SearchMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Verify a witness or certificate against a depolarized POVM.
    CheckWitness {
        witness: PathBuf,
        povm: PathBuf,
        /// Visibility c; defaults to the certificate's value, or 1 for a bare witness.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Sample measurement outcomes, optionally through a postselected ensemble.
    Sample {
        povm: PathBuf,
        state: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Partition file written by `partition`.
        #[arg(long)]
        ensemble: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Worked examples on random instances.
    Demo {
        #[arg(value_enum)]
        which: Demo,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Success-probability bound for a k-dimensional ancilla.
    Tradeoff {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        ratio: f64,
    },
}

/// A density matrix on disk.
#[derive(Serialize, Deserialize)]
struct StateFile {
    dim: usize,
    matrix: Matrix,
}

/// Output of `partition`, read back by `sample --ensemble`.
#[derive(Serialize, Deserialize)]
struct PartitionFile {
    partition: Partition,
    q: f64,
    lambdas: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WitnessInput {
    Certificate(Box<SpCertificate>),
    Witness(SpWitness),
}

struct Failure {
    code: u8,
    message: String,
}

type CliResult = Result<(), Failure>;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Verification(_) => 2,
            Error::Format(_) => 3,
            Error::Infeasible(_) | Error::InvalidParameter(_) => 4,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn fail(code: u8, message: impl Display) -> Failure {
    Failure {
        code,
        message: message.to_string(),
    }
}

fn read<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| fail(3, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| fail(3, format!("{}: {e}", path.display())))
}

fn write<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult {
    let Some(path) = path else { return Ok(()) };
    let mut text = serde_json::to_string_pretty(value).map_err(|e| fail(3, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| fail(3, format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read_povm(path: &Path, tols: &Tolerances) -> Result<Povm, Failure> {
    let m: Povm = read(path)?;
    let report = m.validate_with(tols);
    if !report.is_ok() {
        return Err(fail(1, format!("{}: {report}", path.display())));
    }
    Ok(m)
}

fn row(name: &str, value: impl Display, threshold: impl Display) {
    println!("{name:<24} {value:<24} {threshold}");
}

fn check_row(name: &str, value: f64, op: &str, threshold: f64) -> bool {
    let ok = match op {
        "≤" => value <= threshold,
        _ => value >= threshold,
    };
    row(name, format!("{value:.6e}"), format!("{op} {threshold:.6e}  {}", if ok { "ok" } else { "FAIL" }));
    ok
}

fn validate(path: &Path, tols: &Tolerances) -> CliResult {
    let m = read_povm(path, tols)?;
    println!("ok: {} outcomes on C^{}", m.len(), m.dim());
    Ok(())
}

fn finegrain(path: &Path, delta: f64, eps: Option<f64>, kind: Refine, out: Option<&Path>, tols: &Tolerances) -> CliResult {
    let m = read_povm(path, tols)?;
    let eps = eps.unwrap_or_else(|| default_eps(m.dim()));
    let r: Refinement = match kind {
        Refine::Flat => flat_refine(&m, delta, eps)?,
        Refine::Spectral => spectral_refine(&m)?,
        Refine::Extremal => extremal_refine(&m)?,
    };
    let recovery = effect_distance(&post_process(&r.recover, &r.refined)?, &m)?;
    row("quantity", "value", "threshold");
    row("outcomes", r.len(), format!("input {}", m.len()));
    let mut ok = check_row("recovery deviation", recovery, "≤", 1e-10);
    if let Refine::Flat = kind {
        ok &= check_row("flatness", r.flatness, "≤", 1.0 + delta);
        ok &= check_row("max magnitude", r.max_alpha(), "≤", eps);
    } else {
        row("flatness", format!("{:.6}", r.flatness), "-");
        row("max magnitude", format!("{:.6}", r.max_alpha()), "-");
    }
    write(out, &r.refined)?;
    if ok {
        Ok(())
    } else {
        Err(fail(2, "refinement checks failed"))
    }
}

#[allow(clippy::too_many_arguments)]
fn partition(
    path: &Path,
    r: Option<usize>,
    mode: SearchMode,
    seed: u64,
    max_size: Option<usize>,
    budget: Option<usize>,
    out: Option<&Path>,
    tols: &Tolerances,
) -> CliResult {
    let m = read_povm(path, tols)?;
    let n = m.len();
    let r = r.unwrap_or(n);
    let p = match mode {
        SearchMode::Random => random_partition(n, r, seed)?,
        SearchMode::Exhaustive | SearchMode::Greedy => {
            let mut opts = OptimizeOptions {
                budget,
                seed,
                ..OptimizeOptions::default()
            };
            if mode == SearchMode::Greedy {
                opts.exhaustive_limit = 0;
            }
            optimize_partition_with(&m, r, max_size.unwrap_or(n), opts)?
        }
    };
    if let Some(s) = max_size {
        if p.max_size() > s {
            return Err(fail(4, format!("random partition has a block of size {} > {s}", p.max_size())));
        }
    }
    let q = success_prob(&m, &p)?;
    let lambdas = block_norms(&m, &p)?;
    println!("{:<8} {:<14} outcomes", "block", "norm");
    for (b, (s, l)) in p.subsets().iter().zip(&lambdas).enumerate() {
        let labels: Vec<String> = s.iter().map(|&i| m.labels()[i].clone()).collect();
        println!("{:<8} {:<14.10} {}", b + 1, l, labels.join(" "));
    }
    println!("q = {q:.15}");
    write(out, &PartitionFile { partition: p, q, lambdas })
}

fn certify(
    path: &Path,
    delta: f64,
    eps: Option<f64>,
    mode: SearchMode,
    seed: u64,
    out: Option<&Path>,
    tols: &Tolerances,
) -> CliResult {
    let m = read_povm(path, tols)?;
    let eps = eps.unwrap_or_else(|| default_eps(m.dim()));
    let cert = certify_sp_with(&m, delta, eps, mode, seed, tols).map_err(|e| {
        let mut f = Failure::from(e);
        if f.code == 4 && mode != SearchMode::Random {
            f.message.push_str("; try --mode random");
        }
        f
    })?;
    let diag = &cert.diagnostics;
    row("quantity", "value", "threshold");
    row("refined outcomes", diag.refined_outcomes, "-");
    check_row("flatness", diag.flatness, "≤", 1.0 + delta);
    row("blocks", diag.partition.len(), format!("max size {}", diag.partition.max_size()));
    row("q", format!("{:.6e}", diag.q_found), "-");
    row("t_np", format!("{:.6e}", diag.t_np_found), "-");
    check_row("min amplitude", diag.min_amplitude, "≥", diag.amplitude_floor);
    check_row("witness deviation", diag.witness_deviation, "≤", diag.witness_tol);
    check_row("composition deviation", diag.composition_deviation, "≤", diag.witness_tol);
    match diag.c_guarantee {
        Some(g) if diag.guarantee_applies => {
            check_row("c", cert.c_found, "≥", g);
        }
        _ => row("c", format!("{:.6e}", cert.c_found), "no guarantee applies"),
    }
    write(out, &cert)?;
    if diag.verified {
        Ok(())
    } else {
        Err(fail(2, "certificate did not verify"))
    }
}

#[allow(clippy::too_many_arguments)]
fn dilate(
    path: &Path,
    ancilla: Option<usize>,
    delta: f64,
    eps: Option<f64>,
    mode: SearchMode,
    seed: u64,
    out: Option<&Path>,
    tols: &Tolerances,
) -> CliResult {
    let m = read_povm(path, tols)?;
    let tol = tols.witness;
    match ancilla {
        None => {
            let r = spectral_refine(&m)?;
            let mut dil = dilate_rank_one(&r.refined, r.len())?;
            dil.coarse = r.recover.compose(&dil.coarse)?;
            row("quantity", "value", "threshold");
            row("ambient dimension", dil.ambient_dim, "-");
            let dev = dil.deviation_from(&m)?;
            let ok = check_row("dilation deviation", dev, "≤", tol);
            write(out, &dil)?;
            if ok {
                Ok(())
            } else {
                Err(fail(2, "dilation does not reproduce the POVM"))
            }
        }
        Some(k) => {
            let eps = eps.unwrap_or_else(|| default_eps(m.dim()));
            let sim = simulate_with_ancilla(&m, k, delta, eps, mode, seed)?;
            let dev = sim.deviation(&m)?;
            row("quantity", "value", "threshold");
            row("route", format!("{:?}", sim.route).to_lowercase(), "-");
            row("ambient dimension", m.dim() * k, "-");
            row("dilations", sim.dilations.len(), "-");
            match sim.predicted_q {
                Some(p) => check_row("q", sim.q, "≥", p),
                None => {
                    row("q", format!("{:.6e}", sim.q), "-");
                    true
                }
            };
            let ok = check_row("recombination deviation", dev, "≤", tol);
            write(out, &sim)?;
            if ok {
                Ok(())
            } else {
                Err(fail(2, "ancilla simulation does not reproduce (qM, (1-q)I)"))
            }
        }
    }
}

fn check_witness(wpath: &Path, ppath: &Path, noise: Option<f64>, tols: &Tolerances) -> CliResult {
    let m = read_povm(ppath, tols)?;
    let (witness, default_c) = match read::<WitnessInput>(wpath)? {
        WitnessInput::Certificate(cert) => {
            if effect_distance(&cert.input, &m).map_or(true, |d| d > tols.witness) {
                return Err(fail(2, "certificate was issued for a different POVM"));
            }
            (cert.witness, cert.c_found)
        }
        WitnessInput::Witness(w) => (w, 1.0),
    };
    let c = noise.unwrap_or(default_c);
    let target = depolarize(&m, c)?;
    let rep = verify_sp_witness_with(&witness, &target, tols)?;
    row("quantity", "value", "threshold");
    row("visibility c", format!("{c:.6e}"), "-");
    row("components", witness.components.len(), "-");
    check_row("max deviation", rep.max_deviation, "≤", rep.tol);
    check_row("weight sum error", (rep.weight_sum - 1.0).abs(), "≤", tols.stoch);
    row("non-projective", rep.non_projective.len(), "= 0");
    if rep.pass {
        println!("pass");
        Ok(())
    } else {
        Err(fail(2, format!("witness rejected: max deviation {:.3e} (threshold {:.1e})", rep.max_deviation, rep.tol)))
    }
}

#[allow(clippy::too_many_arguments)]
fn sample_cmd(
    ppath: &Path,
    spath: &Path,
    shots: u64,
    seed: u64,
    ensemble: Option<&Path>,
    out: Option<&Path>,
    tols: &Tolerances,
) -> CliResult {
    let m = read_povm(ppath, tols)?;
    let state: StateFile = read(spath)?;
    if state.dim != m.dim() {
        return Err(fail(1, format!("state on C^{}, POVM on C^{}", state.dim, m.dim())));
    }
    validate_state(&state.matrix, state.dim)?;
    let report = match ensemble {
        None => sample(&m, &state.matrix, shots, seed)?,
        Some(p) => {
            let pf: PartitionFile = read(p)?;
            let e = build_ensemble(&m, &pf.partition)?;
            let r = sample_with_postselection(&e, &state.matrix, shots, seed)?;
            let sigma = (e.q * (1.0 - e.q) / shots as f64).sqrt();
            row("acceptance rate", format!("{:.6e}", r.acceptance_rate), format!("q = {:.6e}", e.q));
            check_row("|rate − q|", (r.acceptance_rate - e.q).abs(), "≤", 5.0 * sigma);
            r
        }
    };
    println!("{:<10} {:<12} {:<14} exact", "outcome", "count", "empirical");
    for (i, label) in m.labels().iter().enumerate() {
        println!(
            "{:<10} {:<12} {:<14.8} {:.8}",
            label, report.counts[i], report.empirical[i], report.exact[i]
        );
    }
    if report.counts.len() > m.len() {
        println!("{:<10} {}", povmsim::povm::NULL_LABEL, report.counts[m.len()]);
    }
    let n = m.len() as f64;
    let bound = 4.0 * (n / report.accepted.max(1) as f64).sqrt();
    check_row("TV distance", report.tv_distance, "≤", bound);
    write(out, &report)
}

fn demo(which: Demo, seed: u64, tols: &Tolerances) -> CliResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 3;
    // Shadow estimation needs an informationally complete measurement.
    let n = match which {
        Demo::Discrimination => 5,
        Demo::Shadow => d * d,
    };
    let m = random::random_rank_one_povm(d, n, &mut rng);
    let cert = certify_sp_with(&m, 0.2, 1.0 / d as f64, SearchMode::Greedy, seed, tols)?;
    let c = cert.c_found;
    println!("random rank-one POVM with {n} outcomes on C^{d}, certified c = {c:.6}");
    match which {
        Demo::Discrimination => {
            let priors = random::random_distribution(m.len(), &mut rng);
            let states: Vec<Matrix> = (0..m.len()).map(|_| random::random_pure_state(d, &mut rng)).collect();
            let r = disc_success(&priors, &states, &m, c)?;
            row("quantity", "value", "threshold");
            row("p_succ(M)", format!("{:.8}", r.p_succ_m), "-");
            check_row("p_succ(noisy)", r.p_succ_noisy, "≥", c * r.p_succ_m - 1e-12);
            if r.inequality_ok {
                Ok(())
            } else {
                Err(fail(2, "discrimination inequality violated"))
            }
        }
        Demo::Shadow => {
            let mut o = random::random_hermitian(d, &mut rng);
            let shift = o.trace().re / d as f64;
            o.add_scaled(-shift, &Matrix::identity(d));
            let est = min_norm_estimator(&m, &o)?;
            let r = shadow_check(&m, &[o], &[est], c, 20, rng.random())?;
            let e = &r.entries[0];
            row("quantity", "value", "threshold");
            check_row("bias", e.bias, "≤", r.tol);
            check_row("identity deviation", e.identity_deviation, "≤", r.tol);
            check_row("max Δ(noisy)", e.max_delta_noisy, "≤", e.max_delta_bound * (1.0 + r.tol));
            if r.pass {
                Ok(())
            } else {
                Err(fail(2, "shadow checks failed"))
            }
        }
    }
}

fn tradeoff(k: usize, ratio: f64) -> CliResult {
    let t = ancilla_tradeoff(k, ratio)?;
    row("quantity", "value", "-");
    row("ancilla dimension", t.k, "-");
    row("flatness ratio", t.eps_ratio, "-");
    row("norm constant C", format!("{:.6}", t.c_required), "-");
    row("q lower bound", format!("{:.6}", t.q_lower), "-");
    row("route", if t.subpartition_route { "subpartition" } else { "partition" }, "-");
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let tols = cli.tols.tolerances();
    let t = &tols;
    match cli.command {
        Command::Validate { povm } => validate(&povm, t),
        Command::Finegrain { povm, delta, eps, kind, output } => finegrain(&povm, delta, eps, kind, output.as_deref(), t),
        Command::Partition { povm, r, mode, seed, max_size, budget, output } => {
            partition(&povm, r, mode, seed, max_size, budget, output.as_deref(), t)
        }
        Command::CertifySp { povm, delta, eps, mode, seed, output } => {
            certify(&povm, delta, eps, mode, seed, output.as_deref(), t)
        }
        Command::Dilate { povm, ancilla, delta, eps, mode, seed, output } => {
            dilate(&povm, ancilla, delta, eps, mode, seed, output.as_deref(), t)
        }
        Command::CheckWitness { witness, povm, noise } => check_witness(&witness, &povm, noise, t),
        Command::Sample { povm, state, shots, seed, ensemble, output } => {
            sample_cmd(&povm, &state, shots, seed, ensemble.as_deref(), output.as_deref(), t)
        }
        Command::Demo { which, seed } => demo(which, seed, t),
        Command::Tradeoff { k, ratio } => tradeoff(k, ratio),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
