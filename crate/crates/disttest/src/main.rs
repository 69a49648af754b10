use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use disttest::distances;
use disttest::distributions::{rng_from_seed, Sampler, StreamSampler};
use disttest::equivalence::{
    test_equivalence_l2_vs_hellinger, test_equivalence_l2_vs_tv, EquivalenceConfig, EquivalenceMode,
};
use disttest::error::Error;
use disttest::estimation::{
    estimate_l2_distance, estimate_tv_plugin, median_of_k, meta_test_from_estimator, DistanceKind,
    EstimatorSpec,
};
use disttest::harness::{self, parse_config, run_experiment, ExperimentConfig};
use disttest::identity::{
    test_identity_chi2_vs_hellinger, test_identity_l2_vs_hellinger, test_identity_l2_vs_tv,
    Decision, IdentityConfig, Stage, TestVerdict,
};
use disttest::instances::{
    chi2_reduction, hellinger_far_blocks, kl_untestable_pair, l2_near_pair, paninski_pair,
};
use disttest::io;

/// Testers, distance oracles, instance generators, and a Monte Carlo
/// harness for distribution identity and equivalence testing.
#[derive(Parser)]
#[command(name = "disttest", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print all six distances between two distribution files.
    Dist {
        /// First distribution file.
        #[arg(long)]
        p: PathBuf,
        /// Second distribution file.
        #[arg(long)]
        q: PathBuf,
    },
    /// Generate an instance pair and write it to distribution files.
    Instance(InstanceArgs),
    /// Run a single tester and print its verdict.
    #[command(subcommand)]
    Test(TestCommand),
    /// Estimate a distance between two sampled distributions.
    Estimate(EstimateArgs),
    /// Run a configured Monte Carlo experiment.
    Simulate(RunArgs),
    /// Run a parameter sweep over a config template.
    Sweep(RunArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Family: paninski | l2-near | hellinger-far-blocks | kl-untestable |
    /// chi2-reduction.
    #[arg(long)]
    family: String,
    /// Support size (ignored by kl-untestable and chi2-reduction).
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Family parameter: TV distance for paninski, l2 target for l2-near,
    /// Hellinger bound for hellinger-far-blocks, delta for kl-untestable.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Input distribution files for chi2-reduction.
    #[arg(long)]
    p: Option<PathBuf>,
    #[arg(long)]
    q: Option<PathBuf>,
    /// Where to write the generated pair.
    #[arg(long)]
    out_p: PathBuf,
    #[arg(long)]
    out_q: PathBuf,
}

#[derive(Subcommand)]
enum TestCommand {
    /// Identity testing: explicit reference q, sample access to p.
    Identity(IdentityArgs),
    /// Equivalence testing: sample access to both p and q.
    Equivalence(EquivalenceArgs),
    /// Estimation-based meta-tester.
    Meta(MetaArgs),
}

#[derive(Args)]
struct IdentityArgs {
    /// Mode: chi2-hellinger | l2-tv | l2-hellinger.
    #[arg(long)]
    mode: String,
    /// Reference distribution file.
    #[arg(long)]
    q: PathBuf,
    /// Unknown distribution file (sampled internally).
    #[arg(long, conflicts_with = "p_samples")]
    p: Option<PathBuf>,
    /// Pre-recorded sample stream for p (zero-based symbols).
    #[arg(long)]
    p_samples: Option<PathBuf>,
    #[arg(long)]
    epsilon: f64,
    /// Main-stage sample constant.
    #[arg(long = "C", default_value_t = IdentityConfig::DEFAULT_SAMPLE_CONST)]
    sample_const: f64,
    /// Preliminary-stage sample constant.
    #[arg(long, default_value_t = IdentityConfig::DEFAULT_PRELIM_CONST)]
    k1: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EquivalenceArgs {
    /// Mode: l2-tv | l2-hellinger.
    #[arg(long)]
    mode: String,
    /// First distribution file (sampled internally).
    #[arg(long, conflicts_with = "p_samples")]
    p: Option<PathBuf>,
    #[arg(long)]
    p_samples: Option<PathBuf>,
    /// Second distribution file (sampled internally).
    #[arg(long, conflicts_with = "q_samples")]
    q: Option<PathBuf>,
    #[arg(long)]
    q_samples: Option<PathBuf>,
    /// Support size; required when both inputs are sample streams.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    epsilon: f64,
    #[arg(long = "C", default_value_t = EquivalenceConfig::DEFAULT_SAMPLE_CONST)]
    sample_const: f64,
    /// Per-stream budget override.
    #[arg(long)]
    m_override: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MetaArgs {
    /// Estimated distance: tv | l2.
    #[arg(long)]
    distance: String,
    /// Close-case bound on the estimated distance.
    #[arg(long)]
    eps1: f64,
    /// Far-case bound on the other distance (caller-declared separation).
    #[arg(long)]
    eps2: f64,
    /// Per-stream budget for the plug-in TV estimator.
    #[arg(long, default_value_t = 100_000)]
    budget: u64,
    #[arg(long)]
    p: PathBuf,
    #[arg(long)]
    q: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EstimateArgs {
    /// Distance to estimate: tv | l2.
    #[arg(long)]
    distance: String,
    #[arg(long)]
    p: PathBuf,
    #[arg(long)]
    q: PathBuf,
    /// Per-stream budget (tv mode).
    #[arg(long, default_value_t = 100_000)]
    m: u64,
    /// Additive error target (l2 mode).
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// l2 learner constant.
    #[arg(long = "K", default_value_t = 20.0)]
    learn_const: f64,
    /// Median-of-k amplification; 1 disables it.
    #[arg(long, default_value_t = 1)]
    amplify: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    /// key=value experiment config file.
    config: PathBuf,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides for the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long = "C")]
    sample_const: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) | Error::InvalidParameter(_) => 1,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Dist { p, q } => cmd_dist(&p, &q),
        Command::Instance(args) => cmd_instance(args),
        Command::Test(cmd) => match cmd {
            TestCommand::Identity(args) => cmd_test_identity(args),
            TestCommand::Equivalence(args) => cmd_test_equivalence(args),
            TestCommand::Meta(args) => cmd_test_meta(args),
        },
        Command::Estimate(args) => cmd_estimate(args),
        Command::Simulate(args) => cmd_run(args, false),
        Command::Sweep(args) => cmd_run(args, true),
    }
}

fn cmd_dist(p_path: &Path, q_path: &Path) -> Result<(), Error> {
    let p = io::read_distribution(p_path)?;
    let q = io::read_distribution(q_path)?;
    println!("tv={:.12}", distances::tv_dist(&p, &q)?);
    println!("kl={:.12}", distances::kl_dist(&p, &q)?);
    println!("hellinger={:.12}", distances::hellinger_dist(&p, &q)?);
    println!("chi2={:.12}", distances::chi2_dist(&p, &q)?);
    println!("l2={:.12}", distances::l2_dist(&p, &q)?);
    println!("triangle={:.12}", distances::triangle_dist(&p, &q)?);
    Ok(())
}

fn cmd_instance(args: InstanceArgs) -> Result<(), Error> {
    let (first, second) = match args.family.as_str() {
        "paninski" => paninski_pair(args.n, args.epsilon, args.seed)?,
        "l2-near" => l2_near_pair(args.n, args.epsilon, args.seed)?,
        "hellinger-far-blocks" => hellinger_far_blocks(args.n, args.epsilon, args.seed)?,
        "kl-untestable" => kl_untestable_pair(args.epsilon)?,
        "chi2-reduction" => {
            let (p_path, q_path) = match (&args.p, &args.q) {
                (Some(p), Some(q)) => (p, q),
                _ => {
                    return Err(Error::Config(
                        "chi2-reduction needs --p and --q input files".into(),
                    ))
                }
            };
            let p = io::read_distribution(p_path)?;
            let q = io::read_distribution(q_path)?;
            chi2_reduction(&p, &q)?
        }
        other => return Err(Error::Config(format!("unknown instance family '{other}'"))),
    };
    io::write_distribution(&args.out_p, &first)?;
    io::write_distribution(&args.out_q, &second)?;
    println!(
        "wrote {} and {}",
        args.out_p.display(),
        args.out_q.display()
    );
    Ok(())
}

enum AnySampler {
    Alias(disttest::distributions::AliasSampler),
    Stream(StreamSampler),
}

impl Sampler for AnySampler {
    fn n(&self) -> usize {
        match self {
            AnySampler::Alias(s) => s.n(),
            AnySampler::Stream(s) => s.n(),
        }
    }

    fn draw<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize, Error> {
        match self {
            AnySampler::Alias(s) => s.draw(rng),
            AnySampler::Stream(s) => s.draw(rng),
        }
    }
}

fn load_sampler(
    dist_path: &Option<PathBuf>,
    samples_path: &Option<PathBuf>,
    n: usize,
    role: &str,
) -> Result<AnySampler, Error> {
    match (dist_path, samples_path) {
        (Some(path), None) => {
            let dist = io::read_distribution(path)?;
            if dist.n() != n {
                return Err(Error::MismatchedSupport(dist.n(), n));
            }
            Ok(AnySampler::Alias(dist.sampler()?))
        }
        (None, Some(path)) => Ok(AnySampler::Stream(StreamSampler::new(
            io::read_samples(path)?,
            n,
        )?)),
        _ => Err(Error::Config(format!(
            "{role}: provide exactly one of a distribution file or a sample stream"
        ))),
    }
}

fn print_verdict(v: &TestVerdict) {
    let decision = match v.decision {
        Decision::Accept => "accept",
        Decision::Reject => "reject",
    };
    let stage = match v.stage {
        Stage::Prelim => "prelim",
        Stage::Main => "main",
    };
    println!("decision={decision}");
    println!("stage={stage}");
    println!("statistic={:.6}", v.statistic);
    println!("threshold={:.6}", v.threshold);
    println!("samples={}", v.samples_drawn);
}

fn cmd_test_identity(args: IdentityArgs) -> Result<(), Error> {
    let q = io::read_distribution(&args.q)?;
    let mut p = load_sampler(&args.p, &args.p_samples, q.n(), "p")?;
    let cfg = IdentityConfig::with_constants(
        args.epsilon,
        IdentityConfig::DEFAULT_C1,
        IdentityConfig::DEFAULT_C2,
        args.sample_const,
        args.k1,
    )?;
    if args.epsilon > 1.0 {
        eprintln!("warning: epsilon {} clamped to 1", args.epsilon);
    }
    let verdict = match args.mode.as_str() {
        "chi2-hellinger" => test_identity_chi2_vs_hellinger(&mut p, &q, &cfg, args.seed)?,
        "l2-tv" => test_identity_l2_vs_tv(&mut p, &q, &cfg, args.seed)?,
        "l2-hellinger" => test_identity_l2_vs_hellinger(&mut p, &q, &cfg, args.seed)?,
        other => return Err(Error::Config(format!("unknown identity mode '{other}'"))),
    };
    print_verdict(&verdict);
    Ok(())
}

fn cmd_test_equivalence(args: EquivalenceArgs) -> Result<(), Error> {
    let n = match args.n {
        Some(n) => n,
        None => {
            let path = args.p.as_ref().or(args.q.as_ref()).ok_or_else(|| {
                Error::Config("--n is required when both inputs are sample streams".into())
            })?;
            io::read_distribution(path)?.n()
        }
    };
    let mut p = load_sampler(&args.p, &args.p_samples, n, "p")?;
    let mut q = load_sampler(&args.q, &args.q_samples, n, "q")?;
    if args.epsilon > 1.0 {
        eprintln!("warning: epsilon {} clamped to 1", args.epsilon);
    }
    let verdict = match args.mode.as_str() {
        "l2-tv" => {
            let mut cfg = EquivalenceConfig::with_constants(
                args.epsilon,
                args.sample_const,
                EquivalenceMode::Tv,
            )?;
            cfg.m_override = args.m_override;
            test_equivalence_l2_vs_tv(&mut p, &mut q, n, &cfg, args.seed)?
        }
        "l2-hellinger" => {
            let mut cfg = EquivalenceConfig::with_constants(
                args.epsilon,
                args.sample_const,
                EquivalenceMode::Hellinger,
            )?;
            cfg.m_override = args.m_override;
            test_equivalence_l2_vs_hellinger(&mut p, &mut q, n, &cfg, args.seed)?
        }
        other => return Err(Error::Config(format!("unknown equivalence mode '{other}'"))),
    };
    print_verdict(&verdict);
    Ok(())
}

fn cmd_test_meta(args: MetaArgs) -> Result<(), Error> {
    let p = io::read_distribution(&args.p)?;
    let q = io::read_distribution(&args.q)?;
    if p.n() != q.n() {
        return Err(Error::MismatchedSupport(p.n(), q.n()));
    }
    let spec = match args.distance.as_str() {
        "tv" => EstimatorSpec::tv_plugin(args.budget, args.eps1 / 4.0)?,
        "l2" => EstimatorSpec::l2(args.eps1 / 4.0)?,
        other => return Err(Error::Config(format!("unknown distance '{other}'"))),
    };
    let mut sp = p.sampler()?;
    let mut sq = q.sampler()?;
    let verdict =
        meta_test_from_estimator(&spec, args.eps1, args.eps2, &mut sp, &mut sq, args.seed)?;
    print_verdict(&verdict);
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), Error> {
    let p = io::read_distribution(&args.p)?;
    let q = io::read_distribution(&args.q)?;
    if p.n() != q.n() {
        return Err(Error::MismatchedSupport(p.n(), q.n()));
    }
    let kind = match args.distance.as_str() {
        "tv" => DistanceKind::Tv,
        "l2" => DistanceKind::L2,
        other => return Err(Error::Config(format!("unknown distance '{other}'"))),
    };
    let one_run = |run_seed: u64| -> Result<f64, Error> {
        let mut sp = p.sampler()?;
        let mut sq = q.sampler()?;
        let mut rng = rng_from_seed(run_seed);
        let est = match kind {
            DistanceKind::Tv => estimate_tv_plugin(&mut sp, &mut sq, args.m, &mut rng)?,
            DistanceKind::L2 => {
                estimate_l2_distance(&mut sp, &mut sq, args.epsilon, args.learn_const, &mut rng)?
            }
        };
        Ok(est.value)
    };
    let per_run = match kind {
        DistanceKind::Tv => 2 * args.m,
        DistanceKind::L2 => EstimatorSpec::l2(args.epsilon)?.sample_budget,
    };
    let (value, samples) = if args.amplify <= 1 {
        (one_run(args.seed)?, per_run)
    } else {
        (
            median_of_k(args.amplify, args.seed, one_run)?,
            per_run * args.amplify as u64,
        )
    };
    println!("estimate={value:.6}");
    println!("samples={samples}");
    Ok(())
}

fn apply_overrides(cfg: &mut ExperimentConfig, args: &RunArgs) {
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(c) = args.sample_const {
        cfg.sample_const = c;
    }
    if let Some(epsilon) = args.epsilon {
        if cfg.instance_epsilon == cfg.epsilon {
            cfg.instance_epsilon = epsilon;
        }
        cfg.epsilon = epsilon;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
}

fn cmd_run(args: RunArgs, is_sweep: bool) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.config)?;
    let (mut template, grid) = parse_config(&text)?;
    apply_overrides(&mut template, &args);

    let mut csv = String::from(harness::CSV_HEADER);
    csv.push('\n');
    let mut total_wall = 0.0;
    if is_sweep {
        let rows = harness::sweep(&template, &grid)?;
        for (cfg, summary) in &rows {
            csv.push_str(&harness::csv_row(cfg, summary));
            csv.push('\n');
            total_wall += summary.wall_time;
        }
    } else {
        let summary = run_experiment(&template)?;
        csv.push_str(&harness::csv_row(&template, &summary));
        csv.push('\n');
        total_wall = summary.wall_time;
        eprintln!(
            "accepts={} rejects={} rate={:.4} ci=[{:.4},{:.4}] mean_samples={:.1} capped={}",
            summary.accept_count,
            summary.reject_count,
            summary.accept_rate(),
            summary.wilson_low,
            summary.wilson_high,
            summary.mean_samples,
            summary.capped_trials,
        );
    }
    match &args.out {
        Some(path) => std::fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    eprintln!("wall time: {total_wall:.3}s");
    Ok(())
}
