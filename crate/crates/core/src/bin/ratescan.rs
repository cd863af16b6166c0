//! Command-line front end: scan a count track for differential regions,
//! simulate benchmark data, or cross-check the sampler against exact
//! enumeration on tiny inputs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ratescan::ebayes::estimate_gamma_hyperparams;
use ratescan::multires::run_multiscale;
use ratescan::sampler::run_chain;
use ratescan::{io, oracle, simulate, Error, Hyperparams, PiUpdate, Result, SamplerConfig};

#[derive(Parser)]
#[command(
    name = "ratescan",
    version,
    about = "Detect regions where two groups of sparse event counts have different rates",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the multiresolution scan on a track file and write result tables
    Scan(ScanArgs),
    /// Generate a synthetic two-peak benchmark track
    Simulate(SimulateArgs),
    /// Compare the sampler against exact enumeration on a tiny track
    Oracle(OracleArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Shape of the Gamma base measure; estimated from the data if omitted
    #[arg(long)]
    alpha: Option<f64>,
    /// Rate of the Gamma base measure; estimated from the data if omitted
    #[arg(long)]
    beta: Option<f64>,
    /// Concentration of the Dirichlet process
    #[arg(long, default_value_t = 1.0, value_name = "M")]
    dp_precision: f64,
    /// Prior probability that a position is differential
    #[arg(long, default_value_t = 0.5)]
    pi: f64,
}

#[derive(Args)]
struct ChainArgs {
    /// Gibbs sweeps per tested node
    #[arg(long, default_value_t = 10_000)]
    sweeps: usize,
    /// Sweeps discarded before averaging
    #[arg(long, default_value_t = 2_000)]
    burnin: usize,
    /// Master seed; the same seed reproduces results byte for byte
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ScanArgs {
    /// Input track CSV (position,count1,count2[,exposure1,exposure2])
    #[arg(long)]
    input: PathBuf,
    /// Directory receiving omegas.csv, flagged.csv, plotdata.csv, decisions.log
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Maximum tree depth; pruning decides how much of it is visited
    #[arg(long, default_value_t = 10)]
    depth: usize,
    /// Test every position directly instead of descending the tree
    #[arg(long, conflicts_with = "depth")]
    full_scan: bool,
    /// Posterior probability above which a position or region is called
    #[arg(long, default_value_t = 0.5)]
    xi: f64,
    /// Resample pi under a Beta(A,B) prior instead of keeping it fixed
    #[arg(long, value_name = "A,B", value_parser = parse_beta_pair)]
    update_pi: Option<(f64, f64)>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Interior grid points; the track gets this many bins plus one
    #[arg(long, default_value_t = 35)]
    interior: usize,
    /// Independent observation pairs drawn from each intensity
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output track CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// Input track CSV; exact enumeration handles at most a few positions
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    chain: ChainArgs,
}

fn parse_beta_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated values A,B")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad value {a:?}"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad value {b:?}"))?;
    if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
        Ok((a, b))
    } else {
        Err("prior weights must be positive and finite".into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.command {
        Command::Scan(args) => cmd_scan(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Oracle(args) => cmd_oracle(args),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Resolve alpha and beta, estimating whichever was not given on the command
/// line from the pooled counts.
fn resolve_base_measure(args: &ModelArgs, track: &ratescan::CountTrack) -> (f64, f64, bool) {
    match (args.alpha, args.beta) {
        (Some(a), Some(b)) => (a, b, false),
        _ => {
            let (ea, eb) = estimate_gamma_hyperparams(track);
            (args.alpha.unwrap_or(ea), args.beta.unwrap_or(eb), true)
        }
    }
}

fn cmd_scan(args: ScanArgs) -> Result<()> {
    let track = io::read_track(&args.input)?;
    let (alpha, beta, estimated) = resolve_base_measure(&args.model, &track);
    let hp = Hyperparams::new(alpha, beta, args.model.dp_precision, args.model.pi, args.xi)?;
    let mut cfg = SamplerConfig::new(args.chain.sweeps, args.chain.burnin, args.chain.seed)?;
    if let Some((a, b)) = args.update_pi {
        cfg = cfg.with_pi_update(PiUpdate::BetaConjugate { a, b })?;
    }
    let depth = if args.full_scan { 0 } else { args.depth };

    let total1: u64 = track.counts(0).iter().sum();
    let total2: u64 = track.counts(1).iter().sum();
    println!("track: {} positions, group totals {total1} / {total2}", track.len());
    println!(
        "model: alpha={alpha:.4}{} beta={beta:.4}{} M={} pi={} xi={}",
        if estimated { " (estimated)" } else { "" },
        if estimated { " (estimated)" } else { "" },
        args.model.dp_precision,
        args.model.pi,
        args.xi,
    );

    let result = run_multiscale(&track, &hp, &cfg, depth)?;

    let mut omegas = result.position_omegas.clone();
    omegas.sort_by_key(|&(p, _)| p);
    if omegas.iter().map(|&(p, _)| p).ne(track.positions().iter().copied()) {
        return Err(Error::InvalidState("scan output does not cover the track".into()));
    }
    let mut flagged = result.flagged.clone();
    flagged.sort_by_key(|&(p, _)| p);

    for level in 0..result.stats.pruned_per_level.len() {
        println!(
            "level {level}: {} pruned, {} expanded, {} leaves",
            result.stats.pruned_per_level[level],
            result.stats.expanded_per_level[level],
            result.stats.leaves_per_level[level],
        );
    }
    println!("sampler invocations: {}", result.stats.sampler_invocations);
    println!("flagged {} of {} positions with omega > {}", flagged.len(), track.len(), args.xi);

    std::fs::create_dir_all(&args.out)?;
    io::write_omegas(args.out.join("omegas.csv"), &omegas)?;
    io::write_omegas(args.out.join("flagged.csv"), &flagged)?;
    io::write_plotdata(args.out.join("plotdata.csv"), &track, &omegas)?;
    io::write_decision_log(args.out.join("decisions.log"), &result.nodes)?;
    println!(
        "wrote omegas.csv, flagged.csv, plotdata.csv, decisions.log to {}",
        args.out.display()
    );
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let track = simulate::make_two_peak_tracks(args.interior, args.replicates, args.seed);
    io::write_track(&args.out, &track)?;
    let total1: u64 = track.counts(0).iter().sum();
    let total2: u64 = track.counts(1).iter().sum();
    println!(
        "wrote {} positions ({} replicates per group, seed {}, totals {total1} / {total2}) to {}",
        track.len(),
        args.replicates,
        args.seed,
        args.out.display()
    );
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let track = io::read_track(&args.input)?;
    let (alpha, beta, _) = resolve_base_measure(&args.model, &track);
    let hp = Hyperparams::new(alpha, beta, args.model.dp_precision, args.model.pi, 0.5)?;
    let exact = oracle::exact_omegas(&track, &hp)?;
    let cfg = SamplerConfig::new(args.chain.sweeps, args.chain.burnin, args.chain.seed)?;
    let summary = run_chain(&track, &hp, &cfg)?;
    println!("{:>10} {:>8} {:>8} {:>9}", "position", "exact", "sampled", "abs diff");
    let mut max_diff = 0.0f64;
    for ((&p, &ex), &om) in track.positions().iter().zip(&exact).zip(&summary.omegas) {
        let diff = (ex - om).abs();
        max_diff = max_diff.max(diff);
        println!("{p:>10} {ex:>8.4} {om:>8.4} {diff:>9.4}");
    }
    println!("max abs diff: {max_diff:.4}");
    Ok(())
}
