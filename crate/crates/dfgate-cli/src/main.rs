//! Batch front end for the encoded controlled-Z toolbox.
//!
//! Subcommands `verify | search | noise | split | spectrum` take JSON
//! configs and emit CSV/JSON artifacts, each artifact accompanied by a
//! reproduction manifest. Exit codes: 0 = pass, 1 = quantitative fail,
//! 2 = usage or I/O error. `DFGATE_THREADS` caps the worker pool.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use dfgate::encoding::{
    gauge_block_basis, logical_basis_four, pair_basis, EncodingKind, EncodingLayout,
    GaugeBlockLabel,
};
use dfgate::error::Error as LibError;
use dfgate::invariants::fm_objective;
use dfgate::linalg::herm_eig;
use dfgate::noise::{
    noise_sweep, quadratic_fit_window, JitterModel, NoiseConfig, NoiseKind, SweepPoint,
};
use dfgate::optimize::{run_search, SearchConfig, SequenceTemplate};
use dfgate::pulse::{
    alpha_split, compile_sequence, gate_time, gate_unitary, PulseLabel, PulseParameters,
    TWO_PI,
};
use dfgate::spin::{supercoherent_hamiltonian, Site};

/// Thresholds the verify report checks against.
const FM_THRESHOLD: f64 = 1e-10;
const LEAKAGE_THRESHOLD: f64 = 1e-10;
/// A search counts as converged onto a gate at this figure of merit.
const SEARCH_SUCCESS_FM: f64 = 1e-8;
/// Both linear constraints of a pulse split must close to this residual.
const SPLIT_RESIDUAL: f64 = 1e-12;

#[derive(Parser)]
#[command(
    name = "dfgate",
    version,
    about = "Synthesize, verify, and stress-test controlled-Z gates on \
             decoherence-free encoded qubits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a pulse sequence against the controlled-Z thresholds.
    Verify(VerifyArgs),
    /// Search for pulse sequences realizing a controlled-Z gate.
    Search(SearchArgs),
    /// Monte-Carlo noise sweep writing fidelity/leakage CSV curves.
    Noise(NoiseArgs),
    /// Split the merged symmetric pulse between two ring fractions.
    Split(SplitArgs),
    /// Print the always-on protecting Hamiltonian spectrum.
    Spectrum(SpectrumArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EncodingArg {
    #[value(name = "4", alias = "four")]
    Four,
    #[value(name = "3", alias = "three")]
    Three,
    #[value(name = "both")]
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    /// Gaussian jitter on the pulse phases.
    Coupling,
    /// One quasi-static field per encoded qubit.
    MagneticCollective,
    /// An independent quasi-static field on every site.
    MagneticIndividual,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum JitterModelArg {
    /// Jitter the six sequence phases independently (default).
    SixPhase,
    /// Jitter the five compiled pulse areas, ring fraction fixed.
    FivePulse,
}

#[derive(Args)]
struct VerifyArgs {
    /// Parameter source: "builtin" or a JSON file with the six phases.
    #[arg(long, default_value = "builtin")]
    params: String,
    /// Which encodings to score.
    #[arg(long, value_enum, default_value = "both")]
    encoding: EncodingArg,
    /// Optional JSON report path (manifest written next to it).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    /// Comma-separated pulse labels, e.g. "asymp,parallel,times,box,ring,asymp".
    #[arg(long, default_value = "asymp,parallel,times,box,ring,asymp")]
    template: String,
    /// JSON file overriding the default search settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Restart-count override.
    #[arg(long)]
    restarts: Option<usize>,
    /// Optional JSON result path (manifest written next to it).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseArgs {
    /// Noise channel to sweep.
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Encoding under test.
    #[arg(long, value_enum)]
    encoding: EncodingArg,
    /// Strength grid "lo:hi:count" with inclusive endpoints.
    #[arg(long)]
    grid: String,
    /// Monte-Carlo samples per grid point.
    #[arg(long, default_value_t = 250)]
    samples: usize,
    /// Master seed; each (point, sample) pair gets its own stream.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Which knobs coupling jitter perturbs (ignored for field noise).
    #[arg(long, value_enum, default_value = "six-phase")]
    jitter_model: JitterModelArg,
    /// Fit window "lo:hi" for the quadratic coefficient; defaults to
    /// 0:0.05 for coupling jitter and 0:0.01 for field noise.
    #[arg(long)]
    fit_window: Option<String>,
    /// CSV output path (manifest written next to it); stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    /// Larger achievable ring fraction.
    #[arg(long)]
    alpha_a: f64,
    /// Smaller achievable ring fraction.
    #[arg(long)]
    alpha_b: f64,
    /// Extra 2π windings added to the box phase.
    #[arg(short, long, default_value_t = 0)]
    n: u32,
    /// Parameter source: "builtin" or a JSON file with the six phases.
    #[arg(long, default_value = "builtin")]
    params: String,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Exchange coupling of the always-on Hamiltonian.
    #[arg(long, default_value_t = 1.0)]
    j_sc: f64,
    /// Optional JSON report path (manifest written next to it).
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Anything that must stop the run with exit code 2.
#[derive(Debug)]
struct Fatal(String);

impl std::fmt::Display for Fatal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<LibError> for Fatal {
    fn from(e: LibError) -> Self {
        Fatal(e.to_string())
    }
}

impl From<std::io::Error> for Fatal {
    fn from(e: std::io::Error) -> Self {
        Fatal(e.to_string())
    }
}

impl From<serde_json::Error> for Fatal {
    fn from(e: serde_json::Error) -> Self {
        Fatal(e.to_string())
    }
}

/// Whether the command's quantitative checks passed.
type Verdict = bool;

fn main() -> ExitCode {
    // behave like a standard pipeline tool when the reader hangs up
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    init_thread_pool();
    let outcome = match cli.command {
        Command::Verify(args) => cmd_verify(&args),
        Command::Search(args) => cmd_search(&args),
        Command::Noise(args) => cmd_noise(&args),
        Command::Split(args) => cmd_split(&args),
        Command::Spectrum(args) => cmd_spectrum(&args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Cap the worker pool when DFGATE_THREADS is set.
fn init_thread_pool() {
    if let Ok(Ok(n)) = std::env::var("DFGATE_THREADS").map(|v| v.parse::<usize>()) {
        if n >= 1 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

/// Everything needed to reproduce a run, written next to each artifact.
#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    config: serde_json::Value,
    seed: Option<u64>,
    build: String,
    timestamp: String,
}

impl RunManifest {
    fn new(command: &'static str, config: serde_json::Value, seed: Option<u64>) -> Self {
        let timestamp = time::OffsetDateTime::now_utc()
            .format(&time::format_description::well_known::Rfc3339)
            .unwrap_or_else(|_| "unknown".into());
        Self {
            command,
            config,
            seed,
            build: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            timestamp,
        }
    }
}

/// Write through a sibling temp file so readers never see a torn file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Fatal> {
    let mut name = path
        .file_name()
        .ok_or_else(|| Fatal(format!("not a writable file path: {}", path.display())))?
        .to_os_string();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    fs::write(&tmp, contents).map_err(|e| Fatal(format!("{}: {e}", path.display())))?;
    fs::rename(&tmp, path).map_err(|e| Fatal(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Write an artifact plus its manifest (at `<stem>.manifest.json`).
fn write_artifact(path: &Path, contents: &str, manifest: &RunManifest) -> Result<(), Fatal> {
    write_atomic(path, contents)?;
    let manifest_path = path.with_extension("manifest.json");
    let body = serde_json::to_string_pretty(manifest)?;
    write_atomic(&manifest_path, &(body + "\n"))
}

/// CSV numbers carry 12 significant digits.
fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

fn load_params(source: &str) -> Result<PulseParameters, Fatal> {
    if source == "builtin" {
        return Ok(PulseParameters::cz_solution());
    }
    let text = fs::read_to_string(source).map_err(|e| Fatal(format!("{source}: {e}")))?;
    let params: PulseParameters =
        serde_json::from_str(&text).map_err(|e| Fatal(format!("{source}: {e}")))?;
    let a = params.to_array();
    if a.iter().any(|t| !t.is_finite()) {
        return Err(Fatal(format!("{source}: phases must all be finite")));
    }
    Ok(params)
}

fn block_name(label: GaugeBlockLabel) -> &'static str {
    match label {
        GaugeBlockLabel::OneOne => "(1,+1)",
        GaugeBlockLabel::OneZero => "(1,0)",
        GaugeBlockLabel::OneMinusOne => "(1,-1)",
        GaugeBlockLabel::ZeroZero => "(0,0)",
    }
}

// ---------------------------------------------------------------- verify

fn cmd_verify(args: &VerifyArgs) -> Result<Verdict, Fatal> {
    let params = load_params(&args.params)?;
    let sequence = compile_sequence(&params)?;
    let t = gate_time(&params);
    let alpha = sequence.alpha();
    println!("parameters: {}", args.params);
    println!("gate time T = {t:.12}");
    println!("ring fraction alpha = {alpha:.12}");

    let mut pass = true;
    let mut report = json!({
        "parameters": params,
        "gate_time": t,
        "ring_fraction": alpha,
    });

    if args.encoding != EncodingArg::Three {
        let layout = EncodingLayout::standard(EncodingKind::FourQubit);
        let u = gate_unitary(&params, &layout)?;
        let basis = pair_basis(&layout)?;
        let projected = dfgate::encoding::project_to_logical(&u, &basis)?;
        let fm = fm_objective(&projected)?;
        let leak = dfgate::encoding::leakage(&u, &basis)?;
        let ok = fm < FM_THRESHOLD && leak < LEAKAGE_THRESHOLD;
        pass &= ok;
        println!("four-qubit  fm = {fm:.3e}  leakage = {leak:.3e}  [{}]", verdict(ok));
        report["four_qubit"] = json!({ "fm": fm, "leakage": leak, "pass": ok });
    }

    if args.encoding != EncodingArg::Four {
        let layout = EncodingLayout::standard(EncodingKind::ThreeQubit);
        let u = gate_unitary(&params, &layout)?;
        let basis = pair_basis(&layout)?;
        let leak = dfgate::encoding::leakage(&u, &basis)?;
        let mut blocks = serde_json::Map::new();
        let mut blocks_ok = true;
        for label in GaugeBlockLabel::ALL {
            let block = gauge_block_basis(&layout, label)?;
            let projected = dfgate::encoding::project_to_logical(&u, &block)?;
            let fm = fm_objective(&projected)?;
            let ok = fm < FM_THRESHOLD;
            blocks_ok &= ok;
            println!(
                "three-qubit block {}  fm = {fm:.3e}  [{}]",
                block_name(label),
                verdict(ok)
            );
            blocks.insert(block_name(label).into(), json!(fm));
        }
        let leak_ok = leak < LEAKAGE_THRESHOLD;
        println!(
            "three-qubit pair leakage = {leak:.3e}  [{}]",
            verdict(leak_ok)
        );
        pass &= blocks_ok && leak_ok;
        report["three_qubit"] = json!({
            "block_fm": blocks,
            "pair_leakage": leak,
            "pass": blocks_ok && leak_ok,
        });
    }

    report["pass"] = json!(pass);
    println!("verdict: {}", verdict(pass));
    if let Some(path) = &args.output {
        let manifest = RunManifest::new(
            "verify",
            json!({ "params": args.params, "encoding": encoding_name(args.encoding),
                    "resolved_params": params, "output": path }),
            None,
        );
        let body = serde_json::to_string_pretty(&report)? + "\n";
        write_artifact(path, &body, &manifest)?;
    }
    Ok(pass)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn encoding_name(e: EncodingArg) -> &'static str {
    match e {
        EncodingArg::Four => "4",
        EncodingArg::Three => "3",
        EncodingArg::Both => "both",
    }
}

// ---------------------------------------------------------------- search

fn parse_template(text: &str) -> Result<SequenceTemplate, Fatal> {
    let mut labels = Vec::new();
    for raw in text.split(',') {
        let name = raw.trim().to_ascii_lowercase();
        let label = match name.as_str() {
            "asymp" => PulseLabel::Asymp,
            "parallel" => PulseLabel::Parallel,
            "times" => PulseLabel::Times,
            "box" => PulseLabel::Box,
            "ring" => PulseLabel::Ring,
            "symmetric" => PulseLabel::Symmetric,
            other => {
                return Err(Fatal(format!(
                    "unknown pulse label {other:?}; expected asymp, parallel, \
                     times, box, or ring"
                )))
            }
        };
        labels.push(label);
    }
    Ok(SequenceTemplate::new(labels)?)
}

fn cmd_search(args: &SearchArgs) -> Result<Verdict, Fatal> {
    let template = parse_template(&args.template)?;
    let mut config = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| Fatal(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<SearchConfig>(&text)
                .map_err(|e| Fatal(format!("{}: {e}", path.display())))?
        }
        None => SearchConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(restarts) = args.restarts {
        config.restarts = restarts;
    }
    let layout = EncodingLayout::standard(EncodingKind::FourQubit);
    let results = run_search(&template, &config, &layout)?;
    let best = &results[0];
    let pass = best.fm < SEARCH_SUCCESS_FM;
    println!(
        "best of {} restarts: fm = {:.3e}, leakage = {:.3e}, {} evaluations  [{}]",
        results.len(),
        best.fm,
        best.leakage,
        results.iter().map(|r| r.evaluations).sum::<u64>(),
        verdict(pass)
    );
    for (k, theta) in best.thetas.iter().enumerate() {
        println!("  theta[{k}] = {theta:.12}");
    }
    let report = json!({
        "template": template,
        "config": config,
        "best": best,
        "restart_fms": results.iter().map(|r| r.fm).collect::<Vec<_>>(),
        "success_threshold": SEARCH_SUCCESS_FM,
        "pass": pass,
    });
    if let Some(path) = &args.output {
        let manifest = RunManifest::new(
            "search",
            json!({ "template": template, "config": config, "output": path }),
            Some(config.seed),
        );
        let body = serde_json::to_string_pretty(&report)? + "\n";
        write_artifact(path, &body, &manifest)?;
    }
    Ok(pass)
}

// ---------------------------------------------------------------- noise

fn parse_grid(text: &str) -> Result<Vec<f64>, Fatal> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, count] = parts.as_slice() else {
        return Err(Fatal(format!("grid {text:?} is not of the form lo:hi:count")));
    };
    let lo: f64 = lo
        .parse()
        .map_err(|_| Fatal(format!("grid lower bound {lo:?} is not a number")))?;
    let hi: f64 = hi
        .parse()
        .map_err(|_| Fatal(format!("grid upper bound {hi:?} is not a number")))?;
    let count: usize = count
        .parse()
        .map_err(|_| Fatal(format!("grid count {count:?} is not an integer")))?;
    if count == 0 {
        return Err(Fatal("grid count must be at least 1".into()));
    }
    if lo > hi {
        return Err(Fatal(format!("grid bounds are out of order: {lo} > {hi}")));
    }
    if count == 1 {
        if lo != hi {
            return Err(Fatal(
                "a single-point grid needs equal bounds (lo == hi)".into(),
            ));
        }
        return Ok(vec![lo]);
    }
    Ok((0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect())
}

fn parse_window(text: &str) -> Result<(f64, f64), Fatal> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi] = parts.as_slice() else {
        return Err(Fatal(format!("window {text:?} is not of the form lo:hi")));
    };
    let lo: f64 = lo
        .parse()
        .map_err(|_| Fatal(format!("window bound {lo:?} is not a number")))?;
    let hi: f64 = hi
        .parse()
        .map_err(|_| Fatal(format!("window bound {hi:?} is not a number")))?;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Fatal(format!("window bounds are out of order: {lo} > {hi}")));
    }
    Ok((lo, hi))
}

fn render_csv(points: &[SweepPoint], fit: Option<f64>, window: (f64, f64)) -> String {
    let mut out = String::from("strength,mean_fp,stderr_fp,mean_leakage,p_e_bound\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt12(p.strength),
            fmt12(p.mean_fp),
            fmt12(p.stderr_fp),
            fmt12(p.mean_leakage),
            fmt12(p.failure_bound()),
        );
    }
    match fit {
        Some(c) => {
            let _ = writeln!(out, "# fit c={} window={},{}", fmt12(c), window.0, window.1);
        }
        None => {
            let _ = writeln!(
                out,
                "# fit unavailable (needs two distinct nonzero strengths) window={},{}",
                window.0, window.1
            );
        }
    }
    out
}

fn cmd_noise(args: &NoiseArgs) -> Result<Verdict, Fatal> {
    let (kind, default_window) = match args.kind {
        KindArg::Coupling => (NoiseKind::CouplingJitter, (0.0, 0.05)),
        KindArg::MagneticCollective => (NoiseKind::MagneticCollective, (0.0, 0.01)),
        KindArg::MagneticIndividual => (NoiseKind::MagneticIndividual, (0.0, 0.01)),
    };
    let encoding = match args.encoding {
        EncodingArg::Four => EncodingKind::FourQubit,
        EncodingArg::Three => EncodingKind::ThreeQubit,
        EncodingArg::Both => {
            return Err(Fatal(
                "noise sweeps run one encoding at a time; pass --encoding 4 or 3".into(),
            ))
        }
    };
    let window = match &args.fit_window {
        Some(text) => parse_window(text)?,
        None => default_window,
    };
    let config = NoiseConfig {
        kind,
        strength_grid: parse_grid(&args.grid)?,
        samples: args.samples,
        seed: args.seed,
        encoding,
        jitter_model: match args.jitter_model {
            JitterModelArg::SixPhase => JitterModel::SixPhase,
            JitterModelArg::FivePulse => JitterModel::FivePulse,
        },
    };
    let layout = EncodingLayout::standard(encoding);
    let params = PulseParameters::cz_solution();
    let points = noise_sweep(&config, &params, &layout)?;
    let fit = quadratic_fit_window(&points, window.0, window.1).ok();
    let csv = render_csv(&points, fit, window);
    match &args.output {
        Some(path) => {
            let manifest = RunManifest::new(
                "noise",
                json!({
                    "noise": config,
                    "fit_window": { "lo": window.0, "hi": window.1 },
                    "params": params,
                    "output": path,
                }),
                Some(config.seed),
            );
            write_artifact(path, &csv, &manifest)?;
            match fit {
                Some(c) => println!(
                    "wrote {} points to {} (fit c = {:.4} over [{}, {}])",
                    points.len(),
                    path.display(),
                    c,
                    window.0,
                    window.1
                ),
                None => println!("wrote {} points to {}", points.len(), path.display()),
            }
        }
        None => print!("{csv}"),
    }
    Ok(true)
}

// ---------------------------------------------------------------- split

fn cmd_split(args: &SplitArgs) -> Result<Verdict, Fatal> {
    if !(args.alpha_a.is_finite() && args.alpha_b.is_finite()) {
        return Err(Fatal("ring fractions must be finite numbers".into()));
    }
    let params = load_params(&args.params)?;
    let theta_box_n = params.theta_box + TWO_PI * f64::from(args.n);
    let alpha_n = params.theta_ring / theta_box_n;
    println!("ring fraction alpha(n={}) = {alpha_n:.12}", args.n);
    match alpha_split(args.alpha_a, args.alpha_b, args.n, &params) {
        Ok((t_a, t_b)) => {
            let sum_residual = (t_a + t_b - theta_box_n).abs();
            let weighted_residual =
                (args.alpha_a * t_a + args.alpha_b * t_b - params.theta_ring).abs();
            let ok = sum_residual < SPLIT_RESIDUAL && weighted_residual < SPLIT_RESIDUAL;
            println!("t_a = {t_a:.12}  (at alpha_a = {})", args.alpha_a);
            println!("t_b = {t_b:.12}  (at alpha_b = {})", args.alpha_b);
            println!("combined duration = {:.12}", t_a + t_b);
            println!("added time vs n=0 merged pulse = {:.12}", TWO_PI * f64::from(args.n));
            println!(
                "constraint residuals: duration = {sum_residual:.3e}, \
                 ring phase = {weighted_residual:.3e}  [{}]",
                verdict(ok)
            );
            Ok(ok)
        }
        Err(LibError::InfeasibleSplit {
            alpha_a,
            alpha_n,
            alpha_b,
        }) => {
            println!(
                "infeasible: need alpha_a > alpha(n) > alpha_b, got \
                 {alpha_a} > {alpha_n:.6} > {alpha_b} — both durations must be \
                 positive; raise n to lower alpha(n) or widen the fractions"
            );
            Ok(false)
        }
        Err(e) => Err(e.into()),
    }
}

// ---------------------------------------------------------------- spectrum

fn cmd_spectrum(args: &SpectrumArgs) -> Result<Verdict, Fatal> {
    if !(args.j_sc.is_finite() && args.j_sc > 0.0) {
        return Err(Fatal("--j-sc must be a positive number".into()));
    }
    let j = args.j_sc;
    let sites = [Site(1), Site(2), Site(3), Site(4)];
    let h = supercoherent_hamiltonian(j, &sites, 4)?;
    let (vals, _) = herm_eig(h.matrix())?;

    // cluster eigenvalues into degenerate groups
    let tol = 1e-9 * j.max(1.0);
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for &v in vals.iter() {
        match groups.last_mut() {
            Some((level, count)) if (v - *level).abs() < tol => *count += 1,
            _ => groups.push((v, 1)),
        }
    }
    println!("always-on spectrum at J_SC = {j}:");
    for (level, count) in &groups {
        println!("  E = {level:>10.6}  multiplicity {count}");
    }
    let expected = [(-6.0 * j, 2usize), (-2.0 * j, 9), (6.0 * j, 5)];
    let spectrum_ok = groups.len() == 3
        && groups
            .iter()
            .zip(&expected)
            .all(|((v, c), (ev, ec))| (v - ev).abs() < tol && c == ec);
    let gap = if groups.len() >= 2 {
        groups[1].0 - groups[0].0
    } else {
        f64::NAN
    };
    println!("gap above the ground space = {gap:.6} (4 J_SC)");

    // the two logical states must span the ground space
    let layout = EncodingLayout::standard(EncodingKind::FourQubit);
    let basis = logical_basis_four(&layout)?;
    let ground = groups.first().map(|g| g.0).unwrap_or(f64::NAN);
    let mut residual: f64 = 0.0;
    for col in basis.matrix().columns() {
        let hcol = h.matrix().dot(&col.to_owned());
        let diff: Array2<Complex64> = (&hcol - &col.mapv(|z| z * ground))
            .insert_axis(ndarray::Axis(1));
        residual = residual.max(dfgate::linalg::fro_norm(&diff));
    }
    let residual_ok = residual < 1e-12 * j.max(1.0);
    println!(
        "logical ground-state residual = {residual:.3e}  [{}]",
        verdict(residual_ok)
    );
    let pass = spectrum_ok && residual_ok;
    println!("verdict: {}", verdict(pass));

    if let Some(path) = &args.output {
        let report = json!({
            "j_sc": j,
            "levels": groups.iter().map(|(v, c)| json!({"energy": v, "multiplicity": c})).collect::<Vec<_>>(),
            "gap": gap,
            "logical_residual": residual,
            "pass": pass,
        });
        let manifest = RunManifest::new(
            "spectrum",
            json!({ "j_sc": j, "output": path }),
            None,
        );
        let body = serde_json::to_string_pretty(&report)? + "\n";
        write_artifact(path, &body, &manifest)?;
    }
    Ok(pass)
}
