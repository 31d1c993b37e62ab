//! `ccwm`: experiment driver and JSON-lines watermark service.

mod commands;
mod config;
mod error;
mod manifest;
mod output;
mod serve;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ccwm_core::partition::PartitionStrategy;
use ccwm_core::protocol::{reference_vectors, ProtocolVector, SharedKey, DEFAULT_CONTEXT_WINDOW};
use ccwm_core::simulator::Scheme;
use ccwm_core::{max_coupling, ProbVector};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::Job;
use crate::config::{load, parse_grid, parse_list, CurveParams};
use crate::error::{invalid, CliError, CliResult};
use crate::manifest::RunManifest;
use crate::output::json_bytes;
use crate::serve::WatermarkParams;

#[derive(Parser)]
#[command(name = "ccwm", version, about = "Correlated-channel watermark experiments and service")]
struct Cli {
    /// Worker threads for Monte Carlo runs (default: all cores). Results do
    /// not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact max-min detection rate and its large-vocabulary approximation
    /// over a grid of lambda.
    MaxminCurve {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        m: usize,
        /// `start:stop:count` or a comma-separated list.
        #[arg(long, default_value = "0.05:1:96")]
        lambda_grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// One-shot detection-rate simulations.
    OneShot {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Multi-token ROC sweeps.
    Roc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detection/perception frontier for a small token distribution.
    Tradeoff {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Exit with status 3 if any point is not a proven optimum.
        #[arg(long)]
        require_certified: bool,
    },
    /// Prints the maximum coupling of a distribution with uniform side
    /// information.
    Coupling {
        /// Comma-separated probabilities over the k bins.
        #[arg(long)]
        py: String,
    },
    /// Prints the randomness derived for one step.
    Derive {
        #[command(flatten)]
        key: KeyArgs,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value = "balanced")]
        strategy: PartitionStrategy,
        /// Comma-separated previous token ids.
        #[arg(long, default_value = "")]
        context: String,
        #[arg(long, default_value_t = 0)]
        step: u64,
    },
    /// Scores a token sequence with the match-count z-test.
    Detect {
        #[command(flatten)]
        wm: WatermarkArgs,
        #[arg(long)]
        vocab_size: usize,
        #[arg(long, default_value = "")]
        context: String,
        #[arg(long)]
        tokens: String,
    },
    /// Writes the 100 interoperability vectors.
    ProtocolVectors {
        /// Destination file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prints a JSON schema.
    Schema { name: SchemaName },
    /// Re-runs a manifest into a fresh directory and checks the artifacts are
    /// byte-identical.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// JSON-lines watermarking service on stdin/stdout.
    Serve {
        #[command(flatten)]
        wm: WatermarkArgs,
    },
}

#[derive(Args)]
struct KeyArgs {
    /// Shared secret key, hex encoded (at least 16 bytes).
    #[arg(long, env = "CCWM_KEY_HEX", hide_env_values = true)]
    key_hex: String,
    /// Context window: number of previous tokens hashed per step.
    #[arg(long, default_value_t = DEFAULT_CONTEXT_WINDOW)]
    h: usize,
}

impl KeyArgs {
    fn key(&self) -> CliResult<SharedKey> {
        let bytes = hex::decode(self.key_hex.trim()).map_err(|e| invalid(format!("--key-hex: {e}")))?;
        Ok(SharedKey::new(bytes, self.h)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Cc,
    RedGreen,
}

#[derive(Args)]
struct WatermarkArgs {
    #[command(flatten)]
    key: KeyArgs,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, value_enum, default_value = "cc")]
    scheme: SchemeArg,
    /// Logit boost for the red-green scheme.
    #[arg(long, default_value_t = 2.0)]
    delta: f64,
    /// Probability that a step is watermarked.
    #[arg(long, default_value_t = 1.0)]
    coin_bias: f64,
    #[arg(long, default_value = "balanced")]
    strategy: PartitionStrategy,
}

impl WatermarkArgs {
    fn params(&self) -> CliResult<WatermarkParams> {
        let p = WatermarkParams {
            key: self.key.key()?,
            k: self.k,
            scheme: match self.scheme {
                SchemeArg::Cc => Scheme::Cc,
                SchemeArg::RedGreen => Scheme::RedGreen { delta: self.delta },
            },
            coin_bias: self.coin_bias,
            strategy: self.strategy,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaName {
    Experiments,
    Tradeoff,
    StepRequest,
    StepResponse,
    DetectRequest,
    DetectResponse,
}

impl SchemaName {
    fn text(self) -> &'static str {
        match self {
            SchemaName::Experiments => include_str!("../schemas/experiments.schema.json"),
            SchemaName::Tradeoff => include_str!("../schemas/tradeoff.schema.json"),
            SchemaName::StepRequest => include_str!("../schemas/step_request.schema.json"),
            SchemaName::StepResponse => include_str!("../schemas/step_response.schema.json"),
            SchemaName::DetectRequest => include_str!("../schemas/detect_request.schema.json"),
            SchemaName::DetectResponse => include_str!("../schemas/detect_response.schema.json"),
        }
    }
}

fn print_json(value: &impl serde::Serialize) -> CliResult<()> {
    let bytes = json_bytes(value)?;
    std::io::stdout()
        .write_all(&bytes)
        .map_err(|e| CliError::Other(e.into()))
}

fn run_job(job: Job, out: &Path, require_certified: bool) -> CliResult<()> {
    let done = job.run(out)?;
    print_json(&done.summary)?;
    if require_certified && done.uncertified > 0 {
        return Err(CliError::Uncertified(format!(
            "{} frontier point(s) are best-found, not proven optimal",
            done.uncertified
        )));
    }
    Ok(())
}

fn replay(manifest_path: &Path, out: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", manifest_path.display())))?;
    let recorded: RunManifest =
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", manifest_path.display())))?;
    let source_dir = manifest_path.parent().unwrap_or(Path::new("."));
    let done = Job::from_manifest(&recorded)?.run(out)?;
    let mut mismatched = Vec::new();
    for name in &recorded.artifacts {
        let before = std::fs::read(source_dir.join(name))
            .map_err(|e| CliError::Other(anyhow::anyhow!("reading recorded artifact {name}: {e}")))?;
        let after = std::fs::read(out.join(name)).unwrap_or_default();
        if before != after {
            mismatched.push(name.clone());
        }
    }
    if done.manifest.artifacts != recorded.artifacts {
        mismatched.push("<artifact list>".into());
    }
    print_json(&serde_json::json!({
        "subcommand": recorded.subcommand,
        "artifacts": recorded.artifacts.len(),
        "identical": mismatched.is_empty(),
        "mismatched": mismatched,
    }))?;
    if mismatched.is_empty() {
        Ok(())
    } else {
        Err(CliError::Other(anyhow::anyhow!("replay differs in {}", mismatched.join(", "))))
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::MaxminCurve { k, m, lambda_grid, out } => {
            let p = CurveParams {
                k,
                m,
                lambda_grid: parse_grid(&lambda_grid)?,
            };
            commands::validate_curve(&p)?;
            run_job(Job::MaxminCurve(p), &out, false)
        }
        Command::OneShot { config, out } => run_job(Job::OneShot(load(&config)?), &out, false),
        Command::Roc { config, out } => run_job(Job::Roc(load(&config)?), &out, false),
        Command::Tradeoff {
            config,
            out,
            require_certified,
        } => run_job(Job::Tradeoff(load(&config)?), &out, require_certified),
        Command::Coupling { py } => {
            let py = ProbVector::new(parse_list(&py)?)?;
            let c = max_coupling(&py);
            let ch = c.channel();
            let channel: Vec<Option<Vec<f64>>> = (0..c.k()).map(|y| ch.row(y).map(<[f64]>::to_vec)).collect();
            print_json(&serde_json::json!({
                "joint": c.rows(),
                "match_probability": c.match_prob(),
                "channel": channel,
            }))
        }
        Command::Derive {
            key,
            k,
            m,
            strategy,
            context,
            step,
        } => {
            let v = ProtocolVector::compute(&key.key()?, parse_list(&context)?, step, k, m, strategy)?;
            print_json(&v)
        }
        Command::Detect {
            wm,
            vocab_size,
            context,
            tokens,
        } => {
            let r = serve::detect(&wm.params()?, vocab_size, &parse_list(&context)?, &parse_list(&tokens)?)?;
            print_json(&r)
        }
        Command::ProtocolVectors { out } => {
            let bytes = json_bytes(&reference_vectors()?)?;
            match out {
                Some(path) => output::write_atomic(&path, &bytes).map_err(CliError::Other),
                None => std::io::stdout()
                    .write_all(&bytes)
                    .map_err(|e| CliError::Other(e.into())),
            }
        }
        Command::Schema { name } => {
            print!("{}", name.text());
            Ok(())
        }
        Command::Replay { manifest, out } => replay(&manifest, &out),
        Command::Serve { wm } => {
            let params = wm.params()?;
            let stdin = std::io::stdin().lock();
            let stdout = std::io::stdout().lock();
            serve::serve(params, stdin, stdout).map_err(CliError::Other)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
