use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use turnpike::error::Error;
use turnpike::harness::config::{DeltaRule, ScenarioConfig, Sharpe, MAX_PRECISION, MIN_PRECISION};
use turnpike::harness::output::{self, Format, DEFAULT_PRECISION};
use turnpike::harness::scenario::{self, ScenarioRow};
use turnpike::harness::tables::{self, TableOverrides};
use turnpike::harness::verify::{self, Suite};
use turnpike::market::MarketParams;
use turnpike::dual::UtilitySpec;

#[derive(Parser)]
#[command(name = "turnpike", version, about = "Optimal investment and consumption with turnpike limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the derived market constants and the threshold exponent.
    Derive {
        #[command(flatten)]
        market: MarketArgs,
        /// Also classify this pair of dual exponents.
        #[arg(long, num_args = 2, value_names = ["Q1", "Q2"], allow_negative_numbers = true)]
        classify: Option<Vec<f64>>,
    },
    /// Optimal strategy on a grid of wealth levels and horizons.
    Strategy {
        #[command(flatten)]
        market: MarketArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Limiting strategy as the horizon grows.
    Limit {
        #[command(flatten)]
        market: MarketArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Regenerate one of the reference tables.
    Table {
        #[arg(long)]
        id: u32,
        /// Override the horizons, e.g. `1,10,100`.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        wealth: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run a verification suite and print one JSON line per check.
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario file.
    Scenario {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args)]
struct MarketArgs {
    #[arg(long, default_value_t = 0.02, allow_negative_numbers = true)]
    r: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    /// Sharpe ratio; defaults to 0.2 unless --mu is given.
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// Discount rate, a number or an affine rule in r such as `0.02+r/2`.
    #[arg(long, default_value = "0.02+r/2")]
    delta: DeltaRule,
}

impl MarketArgs {
    fn params(&self) -> MarketParams {
        MarketParams {
            r: self.r,
            sigma: self.sigma,
            mu: self.mu,
            theta: self.theta.or(if self.mu.is_none() { Some(0.2) } else { None }),
            delta: self.delta.at(self.r),
        }
    }
}

#[derive(Args)]
struct ProblemArgs {
    /// Terminal-wealth dual utility, e.g. `power:q=-2` or `nonhara:p=3/4`.
    #[arg(long)]
    u1: UtilitySpec,
    /// Consumption dual utility.
    #[arg(long)]
    u2: UtilitySpec,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    x: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,25,50,100")]
    t: Vec<f64>,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    /// Decimal places.
    #[arg(long, value_parser = clap::value_parser!(u8).range(MIN_PRECISION as i64..=MAX_PRECISION as i64))]
    precision: Option<u8>,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn threads() -> Result<usize, Failure> {
    match std::env::var("TURNPIKE_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("TURNPIKE_THREADS must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn emit(text: &str, path: Option<&PathBuf>) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn scenario_from_flags(market: &MarketArgs, problem: &ProblemArgs, out: &OutputArgs) -> Result<ScenarioConfig, Failure> {
    for (name, values) in [("x", &problem.x), ("t", &problem.t)] {
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Failure::Usage(format!("--{name} values must be positive")));
        }
    }
    if !problem.t.windows(2).all(|w| w[0] < w[1]) {
        return Err(Failure::Usage("--t must be strictly increasing".to_string()));
    }
    let sharpe = match (market.theta, market.mu) {
        (Some(_), Some(_)) => return Err(Failure::Usage("give only one of --theta and --mu".to_string())),
        (_, Some(mu)) => Sharpe::Mu(mu),
        (theta, None) => Sharpe::Theta(theta.unwrap_or(0.2)),
    };
    Ok(ScenarioConfig {
        sigma: market.sigma,
        sharpe,
        delta: market.delta,
        utility1: problem.u1,
        utility2: problem.u2,
        x: problem.x.clone(),
        t: problem.t.clone(),
        r: vec![market.r],
        format: out.format.unwrap_or_default(),
        precision: out.precision.map_or(DEFAULT_PRECISION, usize::from),
        path: out.out.clone(),
    })
}

fn run_rows(cfg: &ScenarioConfig, keep: impl Fn(&ScenarioRow) -> bool) -> Result<(), Failure> {
    // Reject bad markets and utilities before any grid work.
    for &r in &cfg.r {
        cfg.market(r).derive()?;
    }
    let rows: Vec<ScenarioRow> = scenario::run_scenario(cfg, threads()?)?.into_iter().filter(keep).collect();
    emit(&scenario::render(&rows, cfg.format, cfg.precision)?, cfg.path.as_ref())?;
    match rows.iter().find_map(|r| r.error.as_ref()) {
        Some(e) => Err(Failure::Numerical(e.clone())),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Derive { market, classify } => {
            let d = market.params().derive()?;
            let mut v = serde_json::json!({
                "r": d.r, "sigma": d.sigma, "theta": d.theta, "delta": d.delta,
                "alpha": d.alpha, "a": d.a, "beta": d.beta, "q_star": d.q_star, "p_star": d.p_star,
            });
            if let Some(q) = classify {
                let regime = d.classify(q[0], q[1]);
                v["regime"] = serde_json::json!(format!("{:?}", regime.kind));
                v["q_min"] = serde_json::json!(regime.q_min);
            }
            emit(&format!("{v}\n"), None)
        }
        Command::Strategy { market, problem, out } => {
            run_rows(&scenario_from_flags(&market, &problem, &out)?, |r| !r.is_limit())
        }
        Command::Limit { market, problem, out } => {
            let mut cfg = scenario_from_flags(&market, &problem, &out)?;
            cfg.t = vec![1.0];
            run_rows(&cfg, ScenarioRow::is_limit)
        }
        Command::Table { id, times, rates, wealth, out } => {
            let overrides = TableOverrides { times, rates, wealth };
            let rows = tables::run_table(id, &overrides, threads()?)?;
            let text = output::render(
                &rows,
                out.format.unwrap_or_default(),
                out.precision.map_or(DEFAULT_PRECISION, usize::from),
            )?;
            emit(&text, out.out.as_ref())
        }
        Command::Verify { suite, out } => {
            let run = || verify::run_verify(suite);
            let report = match threads()? {
                0 => run(),
                n => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Failure::Usage(e.to_string()))?
                    .install(run),
            };
            emit(&report.to_json_lines(), out.as_ref())?;
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Verification)
            }
        }
        Command::Scenario { config, out } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", config.display())))?;
            let mut cfg = ScenarioConfig::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", config.display())))?;
            if let Some(f) = out.format {
                cfg.format = f;
            }
            if let Some(p) = out.precision {
                cfg.precision = p.into();
            }
            if out.out.is_some() {
                cfg.path = out.out;
            }
            run_rows(&cfg, |_| true)
        }
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
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Verification) => {
            eprintln!("verification failed");
            ExitCode::from(3)
        }
    }
}
