use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use passive_qkd::optimizer::{optimize_mu, sweep_loss_in, DEFAULT_MU_RANGE};
use passive_qkd::rate::{seed_budget, solve_epsilon};
use passive_qkd::report::sweep_to_csv;
use passive_qkd::session::{run_session, SessionStatus};
use passive_qkd::{make_error_rates, HashFamily, ProtocolParams, RateBreakdown};

/// Exit status of `simulate` when the session ends without a final key.
const EXIT_NO_KEY: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "pqkd", version, about = "Passive-basis QKD key-rate engine and session simulator")]
struct Cli {
    #[command(flatten)]
    params: ParamArgs,
    #[command(subcommand)]
    command: Command,
}

/// Parameter sources, lowest precedence first: built-in defaults, the params
/// file, then individual flags.
#[derive(Args, Debug, Default)]
struct ParamArgs {
    /// Parameter file: JSON if the name ends in `.json`, otherwise `name = value` lines.
    #[arg(long, global = true, env = "PQKD_PARAMS")]
    params: Option<PathBuf>,
    #[arg(long, global = true)]
    dark_count_prob: Option<String>,
    #[arg(long, global = true)]
    detector_efficiency: Option<String>,
    #[arg(long, global = true)]
    misalignment_error: Option<String>,
    #[arg(long, global = true)]
    ec_efficiency: Option<String>,
    #[arg(long, global = true, visible_alias = "mu")]
    mean_pair_number: Option<String>,
    #[arg(long, global = true, visible_alias = "q")]
    basis_reconciliation_factor: Option<String>,
    #[arg(long, global = true)]
    phase_est_failure_prob: Option<String>,
    #[arg(long, global = true)]
    block_size: Option<String>,
    #[arg(long, global = true, visible_alias = "family")]
    hash_family: Option<String>,
    #[arg(long, global = true)]
    extractor_failure_prob: Option<String>,
    #[arg(long, global = true)]
    channel_loss_db: Option<String>,
}

impl ParamArgs {
    fn resolve(&self) -> Result<ProtocolParams> {
        let mut p = match &self.params {
            Some(path) => load_params(path)?,
            None => ProtocolParams::default(),
        };
        let flags = [
            ("dark_count_prob", &self.dark_count_prob),
            ("detector_efficiency", &self.detector_efficiency),
            ("misalignment_error", &self.misalignment_error),
            ("ec_efficiency", &self.ec_efficiency),
            ("mean_pair_number", &self.mean_pair_number),
            ("basis_reconciliation_factor", &self.basis_reconciliation_factor),
            ("phase_est_failure_prob", &self.phase_est_failure_prob),
            ("block_size", &self.block_size),
            ("hash_family", &self.hash_family),
            ("extractor_failure_prob", &self.extractor_failure_prob),
            ("channel_loss_db", &self.channel_loss_db),
        ];
        for (name, value) in flags {
            if let Some(v) = value {
                p.set_field(name, v)
                    .with_context(|| format!("--{}", name.replace('_', "-")))?;
            }
        }
        p.validate()?;
        Ok(p)
    }
}

fn load_params(path: &Path) -> Result<ProtocolParams> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let p = if is_json {
        ProtocolParams::from_json_str(&text)
    } else {
        ProtocolParams::from_config_str(&text)
    };
    p.with_context(|| format!("in {}", path.display()))
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep channel loss, optimizing mu at every point; CSV on stdout.
    Rate(RateArgs),
    /// Run one seeded protocol session and write its report and transcript.
    Simulate(SimulateArgs),
    /// Solve the reassignment count and print the seed budget of every family.
    Epsilon(EpsilonArgs),
    /// Find the mean pair number maximizing the passive key rate.
    OptimizeMu(OptimizeArgs),
}

#[derive(Args, Debug)]
struct RateArgs {
    /// Loss points in dB, `start:end:step` (inclusive) or a single value.
    #[arg(long, default_value = "0:40:2", value_parser = parse_loss_range)]
    loss: LossRange,
    /// Search interval for mu, `lo:hi`.
    #[arg(long, value_parser = parse_mu_range)]
    mu_range: Option<(f64, f64)>,
    /// Use the configured mean pair number instead of optimizing it.
    #[arg(long, conflicts_with = "mu_range")]
    fixed_mu: bool,
    /// Print a JSON array of rate breakdowns instead of CSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Number of coincidence windows.
    #[arg(long, default_value_t = 1_000_000, value_parser = parse_count)]
    pulses: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Channel loss in dB; overrides `--channel-loss-db`.
    #[arg(long)]
    loss: Option<f64>,
    /// Where to write the JSON session report.
    #[arg(long, default_value = "session.json")]
    report: PathBuf,
    /// Where to write the public transcript.
    #[arg(long, default_value = "transcript.log")]
    transcript: PathBuf,
}

#[derive(Args, Debug)]
struct EpsilonArgs {
    #[arg(long, value_parser = parse_count)]
    n_r: u64,
    #[arg(long, value_parser = parse_count)]
    n_s: u64,
    /// Aggregate bit error rate; sets both bases unless given per basis.
    #[arg(long, default_value_t = 0.0)]
    e_b: f64,
    /// Aggregate phase error upper bound; sets both bases unless given per basis.
    #[arg(long, default_value_t = 0.0)]
    e_p: f64,
    #[arg(long)]
    e_bx: Option<f64>,
    #[arg(long)]
    e_bz: Option<f64>,
    #[arg(long)]
    e_px: Option<f64>,
    #[arg(long)]
    e_pz: Option<f64>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    /// Channel loss in dB; overrides `--channel-loss-db`.
    #[arg(long)]
    loss: Option<f64>,
    #[arg(long, value_parser = parse_mu_range)]
    mu_range: Option<(f64, f64)>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct LossRange(Vec<f64>);

fn parse_loss_range(s: &str) -> std::result::Result<LossRange, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite() && *x >= 0.0)
            .ok_or_else(|| format!("`{t}` is not a non-negative number"))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [single] => Ok(LossRange(vec![num(single)?])),
        [start, end, step] => {
            let (start, end, step) = (num(start)?, num(end)?, num(step)?);
            if end <= start {
                return Err(format!("range end {end} must exceed start {start}"));
            }
            if step <= 0.0 {
                return Err("step must be positive".into());
            }
            // index-based so accumulated rounding cannot drop the end point
            let n = ((end - start) / step + 1e-9).floor() as u64;
            Ok(LossRange((0..=n).map(|i| start + i as f64 * step).collect()))
        }
        _ => Err(format!("expected `start:end:step` or a single value, got `{s}`")),
    }
}

fn parse_mu_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected `lo:hi`")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if !(lo > 0.0 && lo <= hi) {
        return Err(format!("need 0 < lo <= hi, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

/// Accepts plain integers and exact float notation such as `1e7`.
fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a count"))?;
    if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(format!("`{s}` is not a count"))
    }
}

fn cmd_rate(params: &ProtocolParams, args: &RateArgs) -> Result<()> {
    let range = if args.fixed_mu {
        (params.mean_pair_number, params.mean_pair_number)
    } else {
        args.mu_range.unwrap_or(DEFAULT_MU_RANGE)
    };
    let points = sweep_loss_in(params, &args.loss.0, range)?;
    if args.json {
        let rows: Vec<&RateBreakdown> = points.iter().map(|p| &p.breakdown).collect();
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        print!("{}", sweep_to_csv(&points));
    }
    Ok(())
}

fn cmd_simulate(params: &ProtocolParams, args: &SimulateArgs) -> Result<ExitCode> {
    let params = match args.loss {
        Some(l) => params.with_loss(l),
        None => params.clone(),
    };
    params.validate()?;
    let r = run_session(&params, args.pulses, args.seed)?;
    fs::write(&args.report, serde_json::to_string_pretty(&r)? + "\n")
        .with_context(|| format!("writing {}", args.report.display()))?;
    fs::write(&args.transcript, r.transcript.to_log())
        .with_context(|| format!("writing {}", args.transcript.display()))?;
    println!("{}", r.summary_line());
    Ok(if r.status == SessionStatus::Success {
        ExitCode::SUCCESS
    } else {
        eprintln!("pqkd: no final key ({:?})", r.status);
        ExitCode::from(EXIT_NO_KEY)
    })
}

fn cmd_epsilon(params: &ProtocolParams, args: &EpsilonArgs) -> Result<()> {
    if args.n_s > args.n_r {
        bail!("n_s = {} exceeds n_r = {}", args.n_s, args.n_r);
    }
    let rates = make_error_rates(
        args.e_bx.unwrap_or(args.e_b),
        args.e_bz.unwrap_or(args.e_b),
        args.e_px.unwrap_or(args.e_p),
        args.e_pz.unwrap_or(args.e_p),
    )?;
    let f = params.ec_efficiency;
    let eps = solve_epsilon(args.n_r, args.n_s, &rates, f, params.hash_family)?;
    println!("family={} epsilon={eps}", params.hash_family);
    println!("{:<20} {:>10} {:>16} {:>16} {:>16}", "family", "epsilon", "seed_supply", "seed_demand", "n_f");
    for family in HashFamily::ALL {
        let e = solve_epsilon(args.n_r, args.n_s, &rates, f, family)?;
        let b = seed_budget(args.n_r, args.n_s, e, &rates, f, family);
        println!(
            "{:<20} {:>10} {:>16.3} {:>16.3} {:>16.3}",
            family.as_str(),
            e,
            b.supply,
            b.demand,
            b.n_f
        );
    }
    Ok(())
}

fn cmd_optimize(params: &ProtocolParams, args: &OptimizeArgs) -> Result<()> {
    let params = match args.loss {
        Some(l) => params.with_loss(l),
        None => params.clone(),
    };
    params.validate()?;
    let opt = optimize_mu(&params, args.mu_range.unwrap_or(DEFAULT_MU_RANGE))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&opt)?);
    } else {
        println!(
            "loss_db={:e} mu_opt={:e} rate={:e} no_key={}",
            params.channel_loss_db, opt.mu_opt, opt.rate_opt, opt.no_key
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let params = cli.params.resolve()?;
    match &cli.command {
        Command::Rate(a) => cmd_rate(&params, a)?,
        Command::Simulate(a) => return cmd_simulate(&params, a),
        Command::Epsilon(a) => cmd_epsilon(&params, a)?,
        Command::OptimizeMu(a) => cmd_optimize(&params, a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("pqkd: {e:#}");
            ExitCode::FAILURE
        }
    }
}
