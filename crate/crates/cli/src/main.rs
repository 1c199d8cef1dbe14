//! `pnc`: end-to-end demo, scenario runner, benchmark, ledger inspection and
//! key generation.
//!
//! Exit codes: 0 success, 1 protocol run or assertion failure, 2 usage,
//! configuration or input error.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_backend, parse_bits, parse_format, CliConfig, ConfigError, FileConfig, Format, CONFIG_ENV};
use pnc_ssi::codec::Wire;
use pnc_ssi::crypto::keystore::{self, KeystoreContent, DEFAULT_ITERATIONS};
use pnc_ssi::crypto::{drbg, Concrete, CryptoSuite, Symbolic};
use pnc_ssi::harness::bench::{bench, BenchConfig, Flow};
use pnc_ssi::harness::demo::{run_demo, DemoConfig};
use pnc_ssi::harness::{run_scenario, Backend, HarnessError, Scenario};
use pnc_ssi::ledger::{object_counts, render_genesis, DidRecord, Ledger, Role};

#[derive(Parser)]
#[command(name = "pnc", version, about = "SSI contract authentication for EV charging")]
struct Cli {
    /// Config file (TOML). Flags override its values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Crypto backend: concrete or symbolic.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Issuer modulus size in bits, or a profile: test (512), full (2048).
    #[arg(long, global = true)]
    bits: Option<String>,
    /// Seed for every random choice in the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output format: table or csv.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Repeat for more detail on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs steps 1 to 12 with one actor of each kind.
    Demo {
        /// Revoke the credential before charging.
        #[arg(long)]
        revoke_before_charge: bool,
        /// Write the resulting ledger dump to a file.
        #[arg(long)]
        save_ledger: Option<PathBuf>,
        /// Write the trace export to a file.
        #[arg(long)]
        export_trace: Option<PathBuf>,
    },
    /// Runs a scenario file and evaluates its assertions.
    Scenario {
        /// Scenario file; falls back to `scenario` in the config file.
        path: Option<PathBuf>,
        /// Write the trace export to a file.
        #[arg(long)]
        export_trace: Option<PathBuf>,
    },
    /// Measures per-message time and size.
    Bench {
        #[arg(long)]
        repetitions: Option<usize>,
        /// Comma-separated: install, charge.
        #[arg(long, value_delimiter = ',')]
        flows: Vec<String>,
    },
    /// Ledger inspection.
    Ledger {
        #[command(subcommand)]
        command: LedgerCommand,
    },
    /// Generates a DID key pair into a passphrase-encrypted keystore.
    Keygen {
        /// steward, emsp, ev or oem.
        #[arg(long)]
        role: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write a genesis file listing this steward.
        #[arg(long)]
        genesis: Option<PathBuf>,
        /// Environment variable holding the passphrase.
        #[arg(long)]
        passphrase_env: Option<String>,
        #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
        iterations: u32,
    },
}

#[derive(Subcommand)]
enum LedgerCommand {
    /// Prints a ledger as newline-delimited hex records. Without --input,
    /// dumps the ledger produced by the demo.
    Dump {
        /// Ledger dump to read instead of running the demo.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Replays a dump and prints object counts and operations.
    Summary {
        /// Ledger dump to read instead of running the demo.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) | CliError::Harness(HarnessError::Setup(_)) => 1,
            _ => 2,
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

macro_rules! with_suite {
    ($cfg:expr, $f:ident ( $($arg:expr),* )) => {
        match $cfg.backend {
            Backend::Concrete => $f(Concrete, $($arg),*),
            Backend::Symbolic => $f(Symbolic::new($cfg.seed), $($arg),*),
        }
    };
}

fn resolve(cli: &Cli) -> Result<CliConfig, CliError> {
    let mut cfg = CliConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(FileConfig::load(path)?)?;
    }
    if let Some(b) = &cli.backend {
        cfg.backend = parse_backend(b)?;
    }
    if let Some(b) = &cli.bits {
        cfg.bits = parse_bits(b)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = &cli.format {
        cfg.format = parse_format(f)?;
    }
    cfg.verbosity = cfg.verbosity.max(cli.verbose);
    match &cli.command {
        Command::Demo { revoke_before_charge, save_ledger, export_trace } => {
            cfg.revoke_before_charge |= revoke_before_charge;
            if save_ledger.is_some() {
                cfg.save_ledger = save_ledger.clone();
            }
            if export_trace.is_some() {
                cfg.export_trace = export_trace.clone();
            }
        }
        Command::Scenario { path, export_trace } => {
            if path.is_some() {
                cfg.scenario = path.clone();
            }
            if export_trace.is_some() {
                cfg.export_trace = export_trace.clone();
            }
        }
        Command::Bench { repetitions, .. } => {
            if let Some(n) = repetitions {
                cfg.repetitions = *n;
            }
        }
        Command::Keygen { passphrase_env, .. } => {
            if let Some(p) = passphrase_env {
                cfg.passphrase_env = p.clone();
            }
        }
        Command::Ledger { .. } => {}
    }
    Ok(cfg)
}

fn demo<S: CryptoSuite>(suite: S, cfg: &CliConfig) -> Result<(), CliError> {
    let dc = DemoConfig { seed: cfg.seed, modulus_bits: cfg.bits, revoke_before_charge: cfg.revoke_before_charge };
    let report = run_demo(suite, &dc)?;
    match cfg.format {
        Format::Table => print!("{}", report.render()),
        Format::Csv => {
            println!("step,title,ok,detail");
            for s in &report.steps {
                println!("{},{},{},{}", s.number, s.title, s.ok, s.detail.replace(',', ";"));
            }
        }
    }
    if cfg.verbosity > 0 {
        for f in &report.world.failures {
            eprintln!("{} on {}: {}", f.actor, f.message.as_deref().unwrap_or("flow start"), f.error);
        }
    }
    if let Some(path) = &cfg.save_ledger {
        fs::write(path, report.world.ledger.dump()).map_err(io(path))?;
    }
    if let Some(path) = &cfg.export_trace {
        fs::write(path, report.world.export_trace()).map_err(io(path))?;
    }
    match (&report.error, report.billed()) {
        (None, true) => Ok(()),
        (Some(e), _) => Err(CliError::Failed(format!("demo failed: {}: {e}", e.name()))),
        (None, false) => Err(CliError::Failed("demo did not reach billing".into())),
    }
}

fn scenario(cli: &Cli, cfg: &CliConfig) -> Result<(), CliError> {
    let path = cfg.scenario.as_ref().ok_or_else(|| CliError::Usage("no scenario path given".into()))?;
    let text = fs::read_to_string(path).map_err(io(path))?;
    let mut s = Scenario::parse(&text)?;
    if cli.backend.is_some() {
        s.backend = cfg.backend;
    }
    if cli.seed.is_some() {
        s.seed = cfg.seed;
    }
    let run = run_scenario(&s)?;
    if let Some(out) = &cfg.export_trace {
        fs::write(out, &run.trace_export).map_err(io(out))?;
    }
    match cfg.format {
        Format::Table => {
            println!("{} messages, {} trace events, {} handler errors", run.messages, run.events, run.failures.len());
            for a in &run.assertions {
                println!("{} {} ({})", if a.pass { "PASS" } else { "FAIL" }, a.name, a.detail);
            }
        }
        Format::Csv => {
            println!("assertion,pass,detail");
            for a in &run.assertions {
                println!("{},{},{}", a.name, a.pass, a.detail.replace(',', ";"));
            }
        }
    }
    if cfg.verbosity > 0 {
        for f in &run.failures {
            eprintln!("{f}");
        }
    }
    if run.all_pass() {
        Ok(())
    } else {
        Err(CliError::Failed("scenario assertions failed".into()))
    }
}

fn run_bench<S: CryptoSuite>(suite: S, cfg: &CliConfig, flows: &[String]) -> Result<(), CliError> {
    let mut selected = Vec::new();
    for f in flows {
        selected.push(match f.as_str() {
            "install" => Flow::CredentialInstallation,
            "charge" => Flow::ChargeAuthorization,
            other => return Err(CliError::Usage(format!("unknown flow {other:?}; use install or charge"))),
        });
    }
    if selected.is_empty() {
        selected = vec![Flow::CredentialInstallation, Flow::ChargeAuthorization];
    }
    if cfg.backend == Backend::Symbolic {
        eprintln!("note: symbolic backend timings do not reflect real cryptography");
    }
    let bc = BenchConfig { seed: cfg.seed, modulus_bits: cfg.bits, repetitions: cfg.repetitions, flows: selected };
    let report = bench(suite, &bc)?;
    match cfg.format {
        Format::Table => print!("{}", report.render_table()),
        Format::Csv => print!("{}", report.render_csv()),
    }
    Ok(())
}

fn load_ledger<S: CryptoSuite>(suite: S, cfg: &CliConfig, input: Option<&Path>) -> Result<Ledger<S>, CliError> {
    match input {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io(path))?;
            Ledger::from_dump(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        }
        None => {
            let dc = DemoConfig { seed: cfg.seed, modulus_bits: cfg.bits, revoke_before_charge: false };
            Ok(run_demo(suite, &dc)?.world.ledger)
        }
    }
}

fn ledger_dump<S: CryptoSuite>(suite: S, cfg: &CliConfig, input: Option<&Path>) -> Result<(), CliError> {
    print!("{}", load_ledger(suite, cfg, input)?.dump());
    Ok(())
}

fn ledger_summary<S: CryptoSuite>(suite: S, cfg: &CliConfig, input: Option<&Path>) -> Result<(), CliError> {
    let ledger = load_ledger(suite, cfg, input)?;
    let counts = object_counts(&ledger.snapshot());
    match cfg.format {
        Format::Table => {
            println!("version {}", ledger.version());
            for (k, v) in &counts {
                println!("{k:<10} {v}");
            }
            for e in ledger.log() {
                println!("{:>4} {:<18} {} ({})", e.version, e.op.name(), e.caller, e.caller_role.as_str());
            }
        }
        Format::Csv => {
            println!("object,count");
            for (k, v) in &counts {
                println!("{k},{v}");
            }
        }
    }
    Ok(())
}

fn keygen<S: CryptoSuite>(
    suite: S,
    cfg: &CliConfig,
    role: &str,
    out: &Path,
    genesis: Option<&Path>,
    iterations: u32,
) -> Result<(), CliError> {
    if !["steward", "emsp", "ev", "oem"].contains(&role) {
        return Err(CliError::Usage(format!("unknown role {role:?}; use steward, emsp, ev or oem")));
    }
    if genesis.is_some() && role != "steward" {
        return Err(CliError::Usage("--genesis needs --role steward".into()));
    }
    let passphrase = std::env::var(&cfg.passphrase_env)
        .map_err(|_| CliError::Usage(format!("set the passphrase in ${}", cfg.passphrase_env)))?;
    let keys = suite.gen_did_keys(&mut drbg(cfg.seed, &format!("keygen/{role}")));
    let content = KeystoreContent { role: role.into(), did: keys.did.clone(), secret: keys.secret.clone() };
    let store = keystore::seal(&content, &passphrase, iterations, &mut drbg(cfg.seed, &format!("keygen/{role}/seal")));
    fs::write(out, hex::encode(store.to_bytes()) + "\n").map_err(io(out))?;
    if let Some(path) = genesis {
        let record = DidRecord::new(keys.did.clone(), &keys.public, Role::Steward);
        fs::write(path, render_genesis(&[record])).map_err(io(path))?;
    }
    println!("{}", keys.did);
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    match &cli.command {
        Command::Demo { .. } => with_suite!(cfg, demo(&cfg)),
        Command::Scenario { .. } => scenario(cli, &cfg),
        Command::Bench { flows, .. } => with_suite!(cfg, run_bench(&cfg, flows)),
        Command::Ledger { command: LedgerCommand::Dump { input } } => {
            with_suite!(cfg, ledger_dump(&cfg, input.as_deref()))
        }
        Command::Ledger { command: LedgerCommand::Summary { input } } => {
            with_suite!(cfg, ledger_summary(&cfg, input.as_deref()))
        }
        Command::Keygen { role, out, genesis, iterations, .. } => {
            with_suite!(cfg, keygen(&cfg, role, out, genesis.as_deref(), *iterations))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
