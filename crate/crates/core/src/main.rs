//! Command-line surface: calibration printouts, benchmark tables, set-union
//! and n-gram extraction runs, counterexample replays, the privacy audit, data
//! generation, and the sparse-vs-dense equivalence test.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dpgram::audit::run_audit;
use dpgram::calibration::{calibrate_sigma, compose_sigma, rho1, rho_policy_gaussian};
use dpgram::data::{
    gen_synthetic, load_corpus, load_report, load_text_corpus, save_corpus, CorpusKind, GenKnobs,
    LevelStats, ReleaseReport, REPORT_FORMAT_VERSION,
};
use dpgram::dpne::{adaptive_counterexample_ratio, run_afp_dpne, DpneConfig};
use dpgram::dpsu::{
    benchmark_surcharge_table, l1_counterexample_trace, run_policy_gaussian,
    spillover_surcharge_table, DpsuOptions,
};
use dpgram::histogram::Policy;
use dpgram::stats::{equivalence_pvalue, standard_equiv_scenarios};
use dpgram::Error;

#[derive(Parser)]
#[command(
    name = "dpgram",
    version,
    about = "Differentially private set union and n-gram extraction"
)]
struct Cli {
    /// RNG seed shared by every randomized stage.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the machine-readable result to this path.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads for parallelizable stages (generation, probing).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Print calibrated noise and thresholds for one parameter set.
    Calibrate(CalibrateArgs),
    /// Emit the spillover-surcharge benchmark table.
    TableB1(TableArgs),
    /// Set-union mechanism.
    Dpsu {
        #[command(subcommand)]
        cmd: DpsuCmd,
    },
    /// Multi-level n-gram extraction.
    Dpne {
        #[command(subcommand)]
        cmd: DpneCmd,
    },
    /// Replay the recorded counterexamples.
    Counterexample {
        #[command(subcommand)]
        cmd: CounterexampleCmd,
    },
    /// One-run empirical privacy audit with canaries.
    Audit(AuditArgs),
    /// Generate a synthetic corpus.
    GenData(GenDataArgs),
    /// Chi-square test: sparse level mechanism vs dense reference.
    EquivTest(EquivArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    eps: f64,
    /// delta as exp(X); e.g. -10 for e^-10.
    #[arg(long, allow_hyphen_values = true)]
    delta_exp: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Contribution bound for the spillover threshold.
    #[arg(long, default_value_t = 10)]
    delta0: u64,
    #[arg(long, default_value_t = 1.0)]
    sensitivity: f64,
    /// Composed level count.
    #[arg(long, default_value_t = 1)]
    levels: u32,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, allow_hyphen_values = true, default_value_t = -10.0)]
    delta_exp: f64,
    #[arg(long, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    delta0_list: Option<Vec<u64>>,
}

#[derive(Subcommand)]
enum DpsuCmd {
    /// Run the Policy Gaussian mechanism over a corpus.
    Run(DpsuRunArgs),
}

#[derive(Args)]
struct DpsuRunArgs {
    /// NDJSON corpus path; omit to generate a benchmark corpus.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 20_000)]
    users: u64,
    #[arg(long, default_value_t = 50_000)]
    vocab: u32,
    #[arg(long, default_value_t = 3.0)]
    eps: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = -10.0)]
    delta_exp: f64,
    #[arg(long, default_value_t = 10)]
    delta0: u64,
    /// Histogram cutoff; defaults to rho_pg + 3 sigma.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum, default_value_t = PolicyArg::L2)]
    policy: PolicyArg,
    /// Allow the greedy policy even though it has no valid privacy proof.
    #[arg(long)]
    allow_non_private: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    L2,
    L1,
}

#[derive(Subcommand)]
enum DpneCmd {
    /// Run the full multi-level extraction.
    Run(DpneRunArgs),
}

#[derive(Args)]
struct DpneRunArgs {
    /// NDJSON corpus path; omit to generate a synthetic corpus.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Treat --input as plain text, one document per line.
    #[arg(long)]
    text: bool,
    #[arg(long, value_enum, default_value_t = KindArg::Zipf)]
    kind: KindArg,
    #[arg(long, default_value_t = 5_000)]
    users: u64,
    #[arg(long, default_value_t = 500)]
    vocab: u32,
    /// Config file: either a bare config document or an emitted report
    /// (its config echo is reused). Flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta_exp: Option<f64>,
    /// Level count T.
    #[arg(long)]
    levels: Option<u32>,
    /// Uniform per-level contribution bound.
    #[arg(long)]
    delta0: Option<u64>,
    /// Explicit per-level contribution bounds (comma separated).
    #[arg(long, value_delimiter = ',')]
    bounds: Option<Vec<u64>>,
    /// FIP tolerance m ("inf" disables pruning).
    #[arg(long)]
    fip_m: Option<f64>,
    /// HT discount factor gamma.
    #[arg(long)]
    ht_gamma: Option<f64>,
    /// Spurious fraction eta.
    #[arg(long)]
    eta: Option<f64>,
    /// Audit sanity mode: no noise, zero thresholds. NOT PRIVATE.
    #[arg(long)]
    broken: bool,
    /// Include released n-grams (token strings) in the report.
    #[arg(long)]
    emit_items: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Zipf,
    Clustered,
    HeavyTail,
}

impl From<KindArg> for CorpusKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Zipf => CorpusKind::Zipf,
            KindArg::Clustered => CorpusKind::Clustered,
            KindArg::HeavyTail => CorpusKind::HeavyTail,
        }
    }
}

#[derive(Subcommand)]
enum CounterexampleCmd {
    /// Replay the greedy-policy expansion trace; exits nonzero if the final
    /// distance fails to exceed 1.
    L1Descent,
    /// Print the support-adaptive thresholding privacy-loss amplification.
    Adaptive {
        #[arg(long, default_value_t = 2.54)]
        sigma: f64,
        #[arg(long, default_value_t = 10.0)]
        rho: f64,
        #[arg(long, default_value_t = 100)]
        delta0: u64,
    },
}

#[derive(Args)]
struct AuditArgs {
    /// NDJSON corpus path; omit to generate a synthetic corpus.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    users: u64,
    #[arg(long, default_value_t = 500)]
    vocab: u32,
    #[arg(long, default_value_t = 4.0)]
    eps: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = -10.0)]
    delta_exp: f64,
    #[arg(long, default_value_t = 6)]
    levels: u32,
    #[arg(long, default_value_t = 100)]
    delta0: u64,
    #[arg(long, default_value_t = 200)]
    canaries: u64,
    #[arg(long, default_value_t = 3)]
    runs: u64,
    /// Audit the broken (no-noise) mechanism as a sanity check.
    #[arg(long)]
    broken: bool,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, value_enum, default_value_t = KindArg::Zipf)]
    kind: KindArg,
    #[arg(long)]
    users: u64,
    #[arg(long, default_value_t = 500)]
    vocab: u32,
    /// Use the frozen set-union benchmark knobs (Pareto set sizes).
    #[arg(long)]
    dpsu_sets: bool,
}

#[derive(Args)]
struct EquivArgs {
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        eprintln!("error: failed to configure thread pool: {e}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> dpgram::Result<ExitCode> {
    match &cli.command {
        Command::Calibrate(args) => calibrate(&cli, args),
        Command::TableB1(args) => table_b1(&cli, args),
        Command::Dpsu {
            cmd: DpsuCmd::Run(args),
        } => dpsu_run(&cli, args),
        Command::Dpne {
            cmd: DpneCmd::Run(args),
        } => dpne_run(&cli, args),
        Command::Counterexample { cmd } => counterexample(&cli, cmd),
        Command::Audit(args) => audit(&cli, args),
        Command::GenData(args) => gen_data(&cli, args),
        Command::EquivTest(args) => equiv_test(&cli, args),
    }
}

fn resolve_delta(delta: Option<f64>, delta_exp: Option<f64>) -> f64 {
    delta.unwrap_or_else(|| delta_exp.unwrap_or(-10.0).exp())
}

fn emit(cli: &Cli, value: &serde_json::Value, text: String, csv: String) -> dpgram::Result<()> {
    let rendered = match cli.format {
        Format::Text => text,
        Format::Json => serde_json::to_string_pretty(value)?,
        Format::Csv => csv,
    };
    println!("{rendered}");
    if let Some(path) = &cli.output {
        std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    }
    Ok(())
}

fn calibrate(cli: &Cli, args: &CalibrateArgs) -> dpgram::Result<ExitCode> {
    let delta = resolve_delta(args.delta, args.delta_exp);
    let sigma_star = calibrate_sigma(args.eps, delta / 2.0, args.sensitivity)?;
    let sigma_level = compose_sigma(sigma_star, args.levels);
    let rho_1 = rho1(sigma_level / args.sensitivity, delta / 2.0, args.delta0)?;
    let (rho_pg, rho_zero) = rho_policy_gaussian(args.eps, delta, args.delta0)?;
    let value = serde_json::json!({
        "epsilon": args.eps,
        "delta": delta,
        "sensitivity": args.sensitivity,
        "levels": args.levels,
        "delta0": args.delta0,
        "sigma_star": sigma_star,
        "sigma_per_level": sigma_level,
        "rho1": rho_1,
        "rho_pg": rho_pg,
        "rho_zero": rho_zero,
    });
    let text = format!(
        "epsilon           {}\ndelta             {:.6e}\nsigma*            {:.6}\nsigma per level   {:.6}\nrho1 (D1={})      {:.4}\nrho_pg            {:.4}\nrho_zero          {:.4}",
        args.eps, delta, sigma_star, sigma_level, args.delta0, rho_1, rho_pg, rho_zero
    );
    let csv = format!(
        "epsilon,delta,sigma_star,sigma_per_level,rho1,rho_pg,rho_zero\n{},{:e},{},{},{},{},{}",
        args.eps, delta, sigma_star, sigma_level, rho_1, rho_pg, rho_zero
    );
    emit(cli, &value, text, csv)?;
    Ok(ExitCode::SUCCESS)
}

fn table_b1(cli: &Cli, args: &TableArgs) -> dpgram::Result<ExitCode> {
    let rows = match (&args.eps_list, &args.delta0_list) {
        (None, None) if args.delta_exp == -10.0 => benchmark_surcharge_table()?,
        _ => {
            let eps = args
                .eps_list
                .clone()
                .unwrap_or_else(|| vec![1.0, 3.0, 5.0, 8.0]);
            let d0 = args.delta0_list.clone().unwrap_or_else(|| vec![10, 100]);
            spillover_surcharge_table(&eps, &d0, args.delta_exp.exp())?
        }
    };
    let value = serde_json::to_value(&rows)?;
    let mut text = String::from("eps   delta0   rho_pg   rho_zero   surcharge   relative\n");
    let mut csv = String::from("epsilon,delta0,rho_pg,rho_zero,surcharge,relative\n");
    for r in &rows {
        text.push_str(&format!(
            "{:<5} {:<8} {:<8.2} {:<10.2} {:<11.2} {:.1}%\n",
            r.epsilon,
            r.delta0,
            r.rho_pg,
            r.rho_zero,
            r.surcharge,
            r.relative * 100.0
        ));
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.epsilon, r.delta0, r.rho_pg, r.rho_zero, r.surcharge, r.relative
        ));
    }
    emit(cli, &value, text.trim_end().into(), csv.trim_end().into())?;
    Ok(ExitCode::SUCCESS)
}

fn dpsu_run(cli: &Cli, args: &DpsuRunArgs) -> dpgram::Result<ExitCode> {
    let started = Instant::now();
    let corpus = match &args.input {
        Some(path) => load_corpus(path)?,
        None => gen_synthetic(
            CorpusKind::Zipf,
            args.users,
            args.vocab,
            cli.seed,
            &GenKnobs::dpsu_benchmark(),
        )?,
    };
    let items: Vec<Vec<u64>> = corpus
        .users()
        .iter()
        .map(|u| {
            let mut v: Vec<u64> = u.tokens.iter().map(|&t| t as u64).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    let delta = args.delta_exp.exp();
    let options = DpsuOptions {
        policy: match args.policy {
            PolicyArg::L2 => Policy::L2Descent,
            PolicyArg::L1 => Policy::L1Descent,
        },
        cutoff_gamma: args.gamma,
        allow_non_private_policy: args.allow_non_private,
        rng_seed: cli.seed,
    };
    let out = run_policy_gaussian(&items, args.eps, delta, args.delta0, &options)?;
    let wall = started.elapsed().as_secs_f64();
    let report = ReleaseReport {
        format_version: REPORT_FORMAT_VERSION,
        tool: "dpsu".into(),
        config: serde_json::json!({
            "epsilon": args.eps, "delta": delta, "delta0": args.delta0,
            "gamma": out.cutoff_gamma, "policy": if out.private { "l2" } else { "l1" },
            "users": items.len(),
        }),
        seed: cli.seed,
        levels: vec![LevelStats {
            level: 1,
            released: out.released.len() as u64,
            genuine: out.released.len() as u64,
            spurious: 0,
            rho_base: out.rho_pg,
            sigma: out.sigma,
            candidate_count: out.support_size,
            imputed_margin_lookups: 0,
        }],
        total_released: out.released.len() as u64,
        total_genuine: out.released.len() as u64,
        total_spurious: 0,
        wall_clock_secs: wall,
        released_items: None,
    };
    let value = serde_json::to_value(&report)?;
    let text = format!(
        "released {} of {} support items (sigma {:.4}, rho_pg {:.4}, gamma {:.4}, private: {})",
        out.released.len(),
        out.support_size,
        out.sigma,
        out.rho_pg,
        out.cutoff_gamma,
        out.private
    );
    let csv = format!(
        "released,support,sigma,rho_pg,gamma,private\n{},{},{},{},{},{}",
        out.released.len(),
        out.support_size,
        out.sigma,
        out.rho_pg,
        out.cutoff_gamma,
        out.private
    );
    emit(cli, &value, text, csv)?;
    Ok(ExitCode::SUCCESS)
}

fn load_dpne_config(args: &DpneRunArgs, seed: u64) -> dpgram::Result<DpneConfig> {
    // defaults < config file < flags
    let mut config = DpneConfig::new(4.0, 100);
    if let Some(path) = &args.config {
        config = match load_report(path) {
            Ok(report) => serde_json::from_value(report.config)?,
            Err(_) => {
                let raw = std::fs::read_to_string(path)?;
                serde_json::from_str(&raw)?
            }
        };
    }
    if let Some(eps) = args.eps {
        config.epsilon = eps;
    }
    if let Some(x) = args.delta_exp {
        config.delta = x.exp();
    }
    if let Some(t) = args.levels {
        config.max_length = t;
        let bound = config.contribution_bounds.first().copied().unwrap_or(100);
        config.contribution_bounds = vec![bound; t as usize];
    }
    if let Some(d0) = args.delta0 {
        config.contribution_bounds = vec![d0; config.max_length as usize];
    }
    if let Some(bounds) = &args.bounds {
        config.contribution_bounds = bounds.clone();
    }
    if let Some(m) = args.fip_m {
        config.fip_tolerance = m;
    }
    if let Some(g) = args.ht_gamma {
        config.ht_discount = g;
    }
    if let Some(e) = args.eta {
        config.spurious_fraction = e;
    }
    if args.broken {
        config.broken_no_noise = true;
    }
    config.rng_seed = seed;
    Ok(config)
}

fn dpne_run(cli: &Cli, args: &DpneRunArgs) -> dpgram::Result<ExitCode> {
    let started = Instant::now();
    let corpus = match &args.input {
        Some(path) if args.text => load_text_corpus(path)?,
        Some(path) => load_corpus(path)?,
        None => gen_synthetic(
            args.kind.into(),
            args.users,
            args.vocab,
            cli.seed,
            &GenKnobs::default(),
        )?,
    };
    let config = load_dpne_config(args, cli.seed)?;
    let outcome = run_afp_dpne(&corpus, &config)?;
    let wall = started.elapsed().as_secs_f64();

    let levels: Vec<LevelStats> = outcome
        .levels
        .iter()
        .map(|l| LevelStats {
            level: l.level,
            released: l.released.len() as u64,
            genuine: l.genuine_count,
            spurious: l.spurious_count,
            rho_base: l.rho_base,
            sigma: l.sigma,
            candidate_count: l.candidate_count,
            imputed_margin_lookups: l.imputed_margin_lookups,
        })
        .collect();
    let released_items = args.emit_items.then(|| {
        outcome
            .levels
            .iter()
            .map(|l| l.released.iter().map(|w| w.display(&corpus)).collect())
            .collect()
    });
    let report = ReleaseReport {
        format_version: REPORT_FORMAT_VERSION,
        tool: "dpne".into(),
        config: serde_json::to_value(&config)?,
        seed: cli.seed,
        total_released: levels.iter().map(|l| l.released).sum(),
        total_genuine: levels.iter().map(|l| l.genuine).sum(),
        total_spurious: levels.iter().map(|l| l.spurious).sum(),
        levels,
        wall_clock_secs: wall,
        released_items,
    };
    report.validate()?;
    let value = serde_json::to_value(&report)?;
    let mut text = format!(
        "sigma* {:.4}, per-level sigma {:.4}, rho1 {:.4}\nlevel  released  genuine  spurious  rho_base\n",
        outcome.sigma_star, outcome.sigma_per_level, outcome.rho1
    );
    for l in &report.levels {
        text.push_str(&format!(
            "{:<6} {:<9} {:<8} {:<9} {:.4}\n",
            l.level, l.released, l.genuine, l.spurious, l.rho_base
        ));
    }
    text.push_str(&format!(
        "total released {} (genuine {}, spurious {}) in {:.2}s",
        report.total_released, report.total_genuine, report.total_spurious, wall
    ));
    let mut csv = String::from("level,released,genuine,spurious,rho_base,sigma\n");
    for l in &report.levels {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            l.level, l.released, l.genuine, l.spurious, l.rho_base, l.sigma
        ));
    }
    emit(cli, &value, text, csv.trim_end().into())?;
    Ok(ExitCode::SUCCESS)
}

fn counterexample(cli: &Cli, cmd: &CounterexampleCmd) -> dpgram::Result<ExitCode> {
    match cmd {
        CounterexampleCmd::L1Descent => {
            let trace = l1_counterexample_trace();
            let value = serde_json::to_value(&trace)?;
            let mut text = String::new();
            for step in &trace.per_user {
                text.push_str(&format!(
                    "user {} items {:?}: H1 = ({:.3}, {:.3}, {:.3}), H2 = ({:.3}, {:.3}, {:.3}), ||diff|| = {:.3}\n",
                    step.user,
                    step.items,
                    step.h1[0],
                    step.h1[1],
                    step.h1[2],
                    step.h2[0],
                    step.h2[1],
                    step.h2[2],
                    step.diff_norm
                ));
            }
            text.push_str(&format!(
                "final difference ({:.3}, {:.3}, {:.3}), norm {:.3}",
                trace.diff_vector[0], trace.diff_vector[1], trace.diff_vector[2], trace.diff_norm
            ));
            let csv = format!(
                "diff_a,diff_b,diff_c,norm\n{},{},{},{}",
                trace.diff_vector[0], trace.diff_vector[1], trace.diff_vector[2], trace.diff_norm
            );
            emit(cli, &value, text, csv)?;
            if trace.diff_norm > 1.0 {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("expansion not reproduced: norm {} <= 1", trace.diff_norm);
                Ok(ExitCode::from(1))
            }
        }
        CounterexampleCmd::Adaptive { sigma, rho, delta0 } => {
            let r = adaptive_counterexample_ratio(*sigma, *rho, *delta0);
            let value = serde_json::to_value(r)?;
            let text = format!(
                "P[release | user present, observed threshold rho/2] = {:.4}\nP[release | user absent, threshold rho]            = {:.3e}\nadaptive privacy-loss ratio                        = {:.0}\nuniform-threshold ratio                            = {:.2}",
                r.p_in, r.p_out, r.ratio, r.uniform_ratio
            );
            let csv = format!(
                "p_in,p_out,ratio,uniform_ratio\n{},{},{},{}",
                r.p_in, r.p_out, r.ratio, r.uniform_ratio
            );
            emit(cli, &value, text, csv)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn audit(cli: &Cli, args: &AuditArgs) -> dpgram::Result<ExitCode> {
    let corpus = match &args.input {
        Some(path) => load_corpus(path)?,
        None => gen_synthetic(
            CorpusKind::Zipf,
            args.users,
            args.vocab,
            cli.seed,
            &GenKnobs::default(),
        )?,
    };
    let mut config = DpneConfig::new(args.eps, args.delta0);
    config.max_length = args.levels;
    config.contribution_bounds = vec![args.delta0; args.levels as usize];
    config.delta = args.delta_exp.exp();
    config.broken_no_noise = args.broken;
    let record = run_audit(&corpus, &config, args.canaries, args.runs, cli.seed)?;
    let value = serde_json::to_value(&record)?;
    let fraction = record.correct as f64 / record.total_guesses as f64;
    let text = format!(
        "correct {}/{} (fraction {:.3}), p-value {:.3}, verdict {}",
        record.correct,
        record.total_guesses,
        fraction,
        record.p_value,
        if record.pass { "PASS" } else { "FAIL" }
    );
    let csv = format!(
        "correct,total,fraction,p_value,pass\n{},{},{},{},{}",
        record.correct, record.total_guesses, fraction, record.p_value, record.pass
    );
    emit(cli, &value, text, csv)?;
    Ok(ExitCode::SUCCESS)
}

fn gen_data(cli: &Cli, args: &GenDataArgs) -> dpgram::Result<ExitCode> {
    let knobs = if args.dpsu_sets {
        GenKnobs::dpsu_benchmark()
    } else {
        GenKnobs::default()
    };
    let corpus = gen_synthetic(args.kind.into(), args.users, args.vocab, cli.seed, &knobs)?;
    match &cli.output {
        Some(path) => {
            save_corpus(&corpus, path)?;
            println!("wrote {} users to {}", corpus.n_users(), path.display());
        }
        None => {
            return Err(Error::Config("gen-data requires --output".into()));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn equiv_test(cli: &Cli, args: &EquivArgs) -> dpgram::Result<ExitCode> {
    let scenarios = standard_equiv_scenarios();
    let mut rows = Vec::new();
    let mut all_pass = true;
    let mut text = String::new();
    for (i, s) in scenarios.iter().enumerate() {
        let (stat, dof, p) = equivalence_pvalue(
            s,
            args.trials,
            dpgram::sampling::derive_seed(cli.seed, i as u64),
        )?;
        let pass = p > 0.01;
        all_pass &= pass;
        rows.push(serde_json::json!({
            "scenario": s.name, "stat": stat, "dof": dof, "p_value": p, "pass": pass,
        }));
        text.push_str(&format!(
            "{}: chi2 = {:.2} (dof {}), p = {:.4} -> {}\n",
            s.name,
            stat,
            dof,
            p,
            if pass { "ok" } else { "DIVERGED" }
        ));
    }
    let value = serde_json::Value::Array(rows);
    let csv = {
        let mut c = String::from("scenario,p_value\n");
        for r in value.as_array().unwrap() {
            c.push_str(&format!("{},{}\n", r["scenario"], r["p_value"]));
        }
        c.trim_end().to_string()
    };
    emit(cli, &value, text.trim_end().into(), csv)?;
    if all_pass {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}
