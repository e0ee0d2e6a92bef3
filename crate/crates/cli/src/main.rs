//! `dkg` — numerical laboratory for the Klein-Gordon equation on `Z^d`.
//!
//! Every subcommand exercises one quantitative claim about the lattice
//! dispersion ω(ξ) = sqrt(1 + Σ 2(1-cos ξ_j)): kernel evaluation, sup-norm
//! and ray decay rates (t^{-3/4}, t^{-7/6}, t^{-3/2}log t in d = 2, 3, 4),
//! singularity classification of critical points, caustic geometry,
//! polynomial root systems, nonexistence scans, nonlinear evolution, and
//! mixed space-time norm studies.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 memory budget exceeded,
//! 4 numerical failure (a required quantity could not be produced).

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use dkg_core::critical::{
    caustic_scan, classify, verify_d2_lemma, verify_d3_condition, DEFAULT_TAU_COS,
    DEFAULT_TAU_DEGEN,
};
use dkg_core::decay::{fit_decay, ray_decay, sup_scan, write_sup_csv};
use dkg_core::dispersion::{group_speed_sup, Frequency};
use dkg_core::kernel::{
    aliasing_risk, kernel_fft, recommended_n, write_kernel_binary, write_kernel_csv, Amplitude,
};
use dkg_core::pde::{run_simulation, write_series_csv, RunConfig};
use dkg_core::roots::{find_real_roots, write_roots_csv};
use dkg_core::strichartz::{resolvent_ratio, strichartz_ratio_study, StrichartzPair};

const EXIT_USAGE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser)]
#[command(
    name = "dkg",
    about = "Dispersive analysis of the discrete Klein-Gordon equation",
    version
)]
struct Cli {
    /// Thread-pool size (0 = default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output directory for CSV/JSON/binary artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for randomized scans and trials.
    #[arg(long, global = true, default_value_t = 2026)]
    seed: u64,
    /// Memory budget in bytes; grid commands refuse to start beyond it.
    #[arg(long, global = true, default_value_t = 6 * 1024 * 1024 * 1024)]
    max_mem: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AmpArg {
    /// a(ξ) = 1
    One,
    /// a(ξ) = 1/ω(ξ)
    InvOmega,
}

impl From<AmpArg> for Amplitude {
    fn from(a: AmpArg) -> Amplitude {
        match a {
            AmpArg::One => Amplitude::One,
            AmpArg::InvOmega => Amplitude::InverseOmega,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the kernel ∫ e^{i(x·ξ - tω)} a dξ on a lattice box
    /// (spectrally accurate equispaced quadrature; binary + CSV slice).
    Kernel(KernelArgs),
    /// Measure the sup-norm decay M(t) = max_x |I(t,x)| and fit the
    /// exponent (expected 3/4, 7/6, 3/2 with log in d = 2, 3, 4).
    Decay(DecayArgs),
    /// Fit |I(t, round(vt))| along a fixed velocity ray; the exponent
    /// matches the singularity class of the critical points over v.
    Ray(RayArgs),
    /// Classify the critical point at a frequency: A1/A2/A3/A5, D4minus,
    /// T444 (with log), or the d=4 rank-residual class, plus the exact
    /// rational decay exponent.
    Classify(ClassifyArgs),
    /// Scan for the caustic set det Hφ = 0 and its image velocities.
    Caustics(CausticsArgs),
    /// Solve the degenerate-case polynomial system by multistart Newton;
    /// reproduces the four tabulated real roots.
    Roots(RootsArgs),
    /// Brute-force nonexistence scans backing the classification's
    /// no-solution claims.
    Verify(VerifyArgs),
    /// Evolve the (non)linear lattice Klein-Gordon equation on a periodic
    /// box from a JSON config; writes a time-series CSV.
    Simulate(SimulateArgs),
    /// Admissibility arithmetic and the semigroup mixed-norm ratio study
    /// (sharp endpoints (8/3,∞), (12/7,∞), (4/3+,∞)).
    Strichartz(StrichartzArgs),
    /// Empirical resolvent-inequality ratio for √(1-Δ) on a periodic box
    /// (d = 3, 4).
    Resolvent(ResolventArgs),
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value_t = AmpArg::One)]
    amp: AmpArg,
    /// Skip the binary dump (CSV slice only).
    #[arg(long)]
    no_binary: bool,
}

#[derive(Args)]
struct DecayArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    n: usize,
    /// Comma-separated sample times, e.g. "100,150,200".
    #[arg(long, value_delimiter = ',')]
    t_list: Vec<f64>,
    #[arg(long, value_enum, default_value_t = AmpArg::One)]
    amp: AmpArg,
    /// Fit log(M / log t) instead of log M (d=4).
    #[arg(long)]
    log_correction: bool,
}

#[derive(Args)]
struct RayArgs {
    /// Velocity components, e.g. "0.4472,0.4472".
    #[arg(long, value_delimiter = ',')]
    v: Vec<f64>,
    #[arg(long)]
    n: usize,
    #[arg(long, value_delimiter = ',')]
    t_list: Vec<f64>,
    #[arg(long, value_enum, default_value_t = AmpArg::One)]
    amp: AmpArg,
    #[arg(long)]
    log_correction: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Frequency components in radians, e.g. "1.5708,1.5708,1.5708".
    #[arg(long, value_delimiter = ',')]
    xi: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_TAU_COS)]
    tau_c: f64,
    #[arg(long, default_value_t = DEFAULT_TAU_DEGEN)]
    tau_d: f64,
}

#[derive(Args)]
struct CausticsArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 128)]
    grid: usize,
}

#[derive(Args)]
struct RootsArgs {
    #[arg(long, default_value_t = 10_000)]
    starts: usize,
    /// Half-width of the search cube.
    #[arg(long = "box", default_value_t = 15.0)]
    box_half: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(subcommand)]
    claim: VerifyClaim,
}

#[derive(Subcommand)]
enum VerifyClaim {
    /// The two-variable system (determinant zero + higher degeneracy) has no
    /// solution with 0 < c₁ < 1, -1 < c₂ < 0.
    D2Lemma {
        #[arg(long, default_value_t = 2000)]
        grid: usize,
    },
    /// The three-variable system has no solution inside the open unit cube.
    D3Condition {
        #[arg(long, default_value_t = 400)]
        grid: usize,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON run configuration (fields: d, m, dt, t_max, s, sign, epsilon,
    /// data: "delta"|"random", seed, outputs: ["energy","l2","linf",…]).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 20)]
    sample_every: usize,
}

#[derive(Args)]
struct StrichartzArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    q: f64,
    /// Spatial exponent; "inf" for ℓ^∞.
    #[arg(long, default_value = "inf")]
    r: String,
    /// Also run the ratio study over [0, t_max] and [0, 2 t_max].
    #[arg(long)]
    study: bool,
    #[arg(long, default_value_t = 32.0)]
    t_max: f64,
    #[arg(long, default_value_t = 128)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    trials: usize,
}

#[derive(Args)]
struct ResolventArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    lambda_re: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda_im: f64,
    #[arg(long, default_value_t = 8)]
    trials: usize,
    #[arg(long, default_value_t = 16)]
    m: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        dkg_core::par::set_thread_count(cli.threads);
    }
    if let Err(e) = std::fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create output directory {}: {e}", cli.out.display());
        return ExitCode::from(EXIT_USAGE);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CmdError {
    code: u8,
    message: String,
}

fn usage(msg: impl Into<String>) -> CmdError {
    CmdError { code: EXIT_USAGE, message: msg.into() }
}

fn numeric(msg: impl Into<String>) -> CmdError {
    CmdError { code: EXIT_NUMERIC, message: msg.into() }
}

fn io_err(e: std::io::Error) -> CmdError {
    CmdError { code: EXIT_USAGE, message: e.to_string() }
}

/// Working-set estimate for a kernel-type grid command: complex values plus
/// transform scratch plus two real outputs.
fn check_grid_budget(d: usize, n: usize, max_mem: u64) -> Result<(), CmdError> {
    let est = 4u64.saturating_mul(16).saturating_mul((n as u64).saturating_pow(d as u32));
    if est > max_mem {
        return Err(CmdError {
            code: EXIT_RESOURCE,
            message: format!(
                "estimated working set {est} bytes exceeds --max-mem {max_mem} (n={n}, d={d})"
            ),
        });
    }
    Ok(())
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>, CmdError> {
    File::create(out.join(name)).map(BufWriter::new).map_err(io_err)
}

fn write_json(out: &Path, name: &str, value: &serde_json::Value) -> Result<(), CmdError> {
    let mut w = create(out, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| usage(e.to_string()))?;
    writeln!(w).map_err(io_err)
}

fn run(cli: &Cli) -> Result<(), CmdError> {
    match &cli.command {
        Command::Kernel(a) => cmd_kernel(cli, a),
        Command::Decay(a) => cmd_decay(cli, a),
        Command::Ray(a) => cmd_ray(cli, a),
        Command::Classify(a) => cmd_classify(cli, a),
        Command::Caustics(a) => cmd_caustics(cli, a),
        Command::Roots(a) => cmd_roots(cli, a),
        Command::Verify(a) => cmd_verify(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Strichartz(a) => cmd_strichartz(cli, a),
        Command::Resolvent(a) => cmd_resolvent(cli, a),
    }
}

fn validate_dim(d: usize) -> Result<(), CmdError> {
    if !(1..=4).contains(&d) {
        return Err(usage(format!("--dim must be 1..=4, got {d}")));
    }
    Ok(())
}

fn cmd_kernel(cli: &Cli, a: &KernelArgs) -> Result<(), CmdError> {
    validate_dim(a.dim)?;
    if a.n == 0 || a.n % 2 != 0 {
        return Err(usage(format!("--n must be a positive even number, got {}", a.n)));
    }
    check_grid_budget(a.dim, a.n, cli.max_mem)?;
    if aliasing_risk(a.dim, a.n, a.t) {
        eprintln!(
            "warning: AliasingRisk: n = {} undersamples t = {} (recommended n ≥ {})",
            a.n,
            a.t,
            recommended_n(a.dim, a.t)
        );
    }
    let grid = kernel_fft(a.t, a.dim, a.n, a.amp.into());
    if !a.no_binary {
        let mut w = create(&cli.out, "kernel.bin")?;
        write_kernel_binary(&grid, &mut w).map_err(io_err)?;
    }
    let mut fixed: Vec<Option<i64>> = vec![None; a.dim];
    for f in fixed.iter_mut().skip(2) {
        *f = Some(0);
    }
    let mut w = create(&cli.out, "kernel.csv")?;
    write_kernel_csv(&grid, &mut w, &fixed).map_err(io_err)?;
    let (max, site) = grid.max_abs();
    println!(
        "kernel d={} t={} n={}: max |I| = {} at {:?}; wrote kernel.csv{}",
        a.dim,
        a.t,
        a.n,
        dkg_core::fmt_f64(max),
        site,
        if a.no_binary { "" } else { " and kernel.bin" }
    );
    Ok(())
}

fn cmd_decay(cli: &Cli, a: &DecayArgs) -> Result<(), CmdError> {
    validate_dim(a.dim)?;
    if a.t_list.len() < 6 {
        return Err(usage("--t-list needs at least 6 sample times"));
    }
    check_grid_budget(a.dim, a.n, cli.max_mem)?;
    for &t in &a.t_list {
        if aliasing_risk(a.dim, a.n, t) {
            eprintln!("warning: AliasingRisk at t = {t} with n = {}", a.n);
        }
    }
    let samples = sup_scan(a.dim, a.amp.into(), &a.t_list, a.n);
    let mut w = create(&cli.out, "decay.csv")?;
    write_sup_csv(&samples, &mut w).map_err(io_err)?;
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.t, s.sup)).collect();
    let fit = fit_decay(&pairs, a.log_correction).map_err(|e| usage(e.to_string()))?;
    write_json(&cli.out, "decay_fit.json", &serde_json::to_value(&fit).unwrap())?;
    println!(
        "decay d={}: fitted exponent {} (r² {}) over t ∈ [{}, {}]; wrote decay.csv, decay_fit.json",
        a.dim,
        dkg_core::fmt_f64(fit.exponent),
        dkg_core::fmt_f64(fit.r_squared),
        fit.t_window.0,
        fit.t_window.1
    );
    Ok(())
}

fn cmd_ray(cli: &Cli, a: &RayArgs) -> Result<(), CmdError> {
    let d = a.v.len();
    validate_dim(d)?;
    if a.t_list.len() < 6 {
        return Err(usage("--t-list needs at least 6 sample times"));
    }
    check_grid_budget(d, a.n, cli.max_mem)?;
    let fit = ray_decay(&a.v, a.amp.into(), &a.t_list, a.n, a.log_correction)
        .map_err(|e| usage(e.to_string()))?;
    write_json(&cli.out, "ray_fit.json", &serde_json::to_value(&fit).unwrap())?;
    if fit.rapid_decay {
        let speed = a.v.iter().map(|x| x * x).sum::<f64>().sqrt();
        println!(
            "ray |v| = {} lies outside the group-velocity ball (max {}): rapid decay, all samples < 1e-10",
            dkg_core::fmt_f64(speed),
            dkg_core::fmt_f64(group_speed_sup(d))
        );
    } else {
        println!(
            "ray v = {:?}: fitted exponent {} (r² {}); wrote ray_fit.json",
            a.v,
            dkg_core::fmt_f64(fit.exponent),
            dkg_core::fmt_f64(fit.r_squared)
        );
    }
    Ok(())
}

fn cmd_classify(cli: &Cli, a: &ClassifyArgs) -> Result<(), CmdError> {
    validate_dim(a.xi.len())?;
    let xi = Frequency::new(a.xi.clone());
    let report = classify(&xi, a.tau_c, a.tau_d).map_err(|e| usage(e.to_string()))?;
    write_json(&cli.out, "classify.json", &serde_json::to_value(&report).unwrap())?;
    println!(
        "class {}, singular index {}, decay exponent {}{}; margin {}",
        report.class,
        report.singular_index,
        report.decay_exponent,
        if report.log_correction { " (×log t)" } else { "" },
        dkg_core::fmt_f64(report.degeneracy_margin)
    );
    if report.ambiguous {
        eprintln!("warning: a decision quantity sits within a decade of its threshold");
    }
    Ok(())
}

fn cmd_caustics(cli: &Cli, a: &CausticsArgs) -> Result<(), CmdError> {
    validate_dim(a.dim)?;
    if a.grid < 32 {
        return Err(usage("--grid must be at least 32"));
    }
    let points = caustic_scan(a.dim, a.grid);
    let mut w = create(&cli.out, "caustics.csv")?;
    let xi_cols: Vec<String> = (1..=a.dim).map(|j| format!("xi{j}")).collect();
    let v_cols: Vec<String> = (1..=a.dim).map(|j| format!("v{j}")).collect();
    writeln!(w, "{},{},det", xi_cols.join(","), v_cols.join(",")).map_err(io_err)?;
    for p in &points {
        let xi: Vec<String> = p.xi.iter().map(|x| dkg_core::fmt_f64(*x)).collect();
        let v: Vec<String> = p.velocity.iter().map(|x| dkg_core::fmt_f64(*x)).collect();
        writeln!(w, "{},{},{}", xi.join(","), v.join(","), dkg_core::fmt_f64(p.hessian_det))
            .map_err(io_err)?;
    }
    println!(
        "caustics d={}: {} points with |det Hφ| ≤ 1e-10; wrote caustics.csv",
        a.dim,
        points.len()
    );
    Ok(())
}

fn cmd_roots(cli: &Cli, a: &RootsArgs) -> Result<(), CmdError> {
    if a.starts < 10_000 {
        return Err(usage("--starts must be at least 10000"));
    }
    if a.box_half < 15.0 {
        return Err(usage("--box must be at least 15"));
    }
    let roots = find_real_roots(a.starts, a.box_half, cli.seed);
    let mut w = create(&cli.out, "roots.csv")?;
    write_roots_csv(&roots, &mut w).map_err(io_err)?;
    let matched: Vec<Option<usize>> = roots.iter().map(|r| r.matches_known(1e-4)).collect();
    let json = serde_json::json!({
        "roots": roots,
        "known_matches": matched,
    });
    write_json(&cli.out, "roots.json", &json)?;
    let found: usize = matched.iter().flatten().collect::<std::collections::HashSet<_>>().len();
    println!(
        "roots: {} real roots found, {found}/4 tabulated roots matched; wrote roots.csv, roots.json",
        roots.len()
    );
    if found < 4 {
        return Err(numeric("the four tabulated real roots were not all recovered"));
    }
    Ok(())
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs) -> Result<(), CmdError> {
    let (label, report) = match a.claim {
        VerifyClaim::D2Lemma { grid } => {
            if grid < 500 {
                return Err(usage("--grid must be at least 500"));
            }
            ("d2-lemma", verify_d2_lemma(grid))
        }
        VerifyClaim::D3Condition { grid } => {
            if grid < 200 {
                return Err(usage("--grid must be at least 200"));
            }
            ("d3-condition", verify_d3_condition(grid))
        }
    };
    write_json(&cli.out, &format!("verify_{label}.json"), &serde_json::to_value(&report).unwrap())?;
    println!(
        "verify {label}: min residual {} at {:?}; {} candidate cells, {} interior common zeros",
        dkg_core::fmt_f64(report.min_residual),
        report.witness,
        report.candidate_cells,
        report.common_zeros.len()
    );
    if report.min_residual <= 0.0 || !report.common_zeros.is_empty() {
        return Err(numeric("scan found a common zero; the nonexistence claim is violated"));
    }
    Ok(())
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<(), CmdError> {
    let text = std::fs::read_to_string(&a.config).map_err(io_err)?;
    let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| usage(e.to_string()))?;
    if a.sample_every == 0 {
        return Err(usage("--sample-every must be positive"));
    }
    check_grid_budget(cfg.d, cfg.m, cli.max_mem)?;
    let series = run_simulation(&cfg, a.sample_every).map_err(|e| numeric(e.to_string()))?;
    let mut w = create(&cli.out, "series.csv")?;
    write_series_csv(&series, &mut w).map_err(io_err)?;
    let last = series.rows.last().unwrap();
    println!(
        "simulate d={} m={} to t={}: {} samples of [{}]; final t={}; wrote series.csv",
        cfg.d,
        cfg.m,
        cfg.t_max,
        series.rows.len(),
        series.columns.join(","),
        dkg_core::fmt_f64(last.0)
    );
    Ok(())
}

fn cmd_strichartz(cli: &Cli, a: &StrichartzArgs) -> Result<(), CmdError> {
    if !(2..=4).contains(&a.dim) {
        return Err(usage("--dim must be 2, 3, or 4"));
    }
    let r = if a.r == "inf" {
        f64::INFINITY
    } else {
        a.r.parse::<f64>().map_err(|_| usage("--r must be a number or \"inf\""))?
    };
    let pair = StrichartzPair::new(a.q, r, a.dim);
    let admissible = pair.is_admissible();
    let sharp = pair.is_sharp();
    println!(
        "pair (q={}, r={}) in d={}: admissible = {admissible}, sharp = {sharp}",
        a.q, a.r, a.dim
    );
    if a.study {
        let study = strichartz_ratio_study(a.dim, &pair, a.trials, a.t_max, a.m, cli.seed);
        write_json(&cli.out, "strichartz_study.json", &serde_json::to_value(&study).unwrap())?;
        println!(
            "ratio {} over [0,{}], {} over [0,{}]: growth {}%",
            dkg_core::fmt_f64(study.ratio),
            a.t_max,
            dkg_core::fmt_f64(study.ratio_doubled),
            2.0 * a.t_max,
            dkg_core::fmt_f64(100.0 * study.growth)
        );
        if !admissible {
            eprintln!("warning: inadmissible pair; the study is a diagnostic only");
        }
    } else {
        write_json(
            &cli.out,
            "strichartz.json",
            &serde_json::json!({ "pair": pair, "admissible": admissible, "sharp": sharp }),
        )?;
    }
    Ok(())
}

fn cmd_resolvent(cli: &Cli, a: &ResolventArgs) -> Result<(), CmdError> {
    let lambda = Complex64::new(a.lambda_re, a.lambda_im);
    let ratio = resolvent_ratio(a.dim, lambda, a.trials, a.m, cli.seed)
        .map_err(|e| numeric(e.to_string()))?;
    write_json(
        &cli.out,
        "resolvent.json",
        &serde_json::json!({
            "d": a.dim,
            "lambda": [a.lambda_re, a.lambda_im],
            "trials": a.trials,
            "m": a.m,
            "ratio": ratio,
        }),
    )?;
    println!(
        "resolvent d={} λ={}{:+}i: max ratio {} over {} trials",
        a.dim,
        a.lambda_re,
        a.lambda_im,
        dkg_core::fmt_f64(ratio),
        a.trials
    );
    Ok(())
}
