//! The `carewatch` command.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use carewatch_analysis::Feature;
use carewatch_cli::config::BUILTIN;
use carewatch_cli::{
    cmd_run, cmd_simulate, load, write_report, Api, CliError, ConfigError, Endpoint, Overrides, RunOptions, Tokens,
    EXIT_OK,
};
use carewatch_core::Pseudonym;
use carewatch_sync::{serve_forever, Platform, Server};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// In-home behavioral monitoring: simulation, sync, analysis and reports.
///
/// Exit codes: 0 success, 2 invalid configuration or arguments, 3 component
/// failure, 4 unknown pseudonym or no results.
#[derive(Parser)]
#[command(name = "carewatch", version)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate homes and write event logs plus a ground-truth manifest.
    Simulate(ScenarioArgs),
    /// Simulate, sync through gateways, analyze and store results.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// TOML file of detector thresholds replacing the scenario's.
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// How gateways reach a locally started platform.
        #[arg(long, value_enum, default_value_t = Mode::InProcess)]
        mode: Mode,
        /// Use an already running platform instead of a local one. Role
        /// tokens come from CAREWATCH_{GATEWAY,CLINICIAN,ANALYST,LOCATION}_TOKEN.
        #[arg(long, env = "CAREWATCH_PLATFORM_URL")]
        platform_url: Option<String>,
        /// Keep a copy of every sync frame under <out>/traffic.
        #[arg(long)]
        capture_traffic: bool,
    },
    /// Write plot-ready tables of a subject's stored results.
    Report {
        /// Run directory holding the platform store and credentials.
        #[arg(long)]
        out: PathBuf,
        /// Pseudonym of the subject.
        #[arg(long)]
        subject: String,
        #[arg(long)]
        from: Option<NaiveDate>,
        #[arg(long)]
        to: Option<NaiveDate>,
        /// Comma-separated feature names; all features when absent.
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<String>>,
        /// Result version; the latest when absent.
        #[arg(long)]
        version: Option<u32>,
        /// Destination directory; defaults to <out>/report/<subject>.
        #[arg(long)]
        dest: Option<PathBuf>,
        #[arg(long, env = "CAREWATCH_PLATFORM_URL")]
        platform_url: Option<String>,
        /// Analyst token for --platform-url.
        #[arg(long, env = "CAREWATCH_TOKEN")]
        token: Option<String>,
    },
    /// Serve the platform of a run directory over HTTP.
    Serve {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "CAREWATCH_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// List the bundled scenarios, usable as `--config builtin:<name>`.
    Scenarios,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file, or `builtin:<name>`.
    #[arg(long)]
    config: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    from: Option<NaiveDate>,
    #[arg(long)]
    to: Option<NaiveDate>,
    /// Only this home id.
    #[arg(long)]
    subject: Option<String>,
}

impl ScenarioArgs {
    fn overrides(&self, thresholds: Option<PathBuf>) -> Overrides {
        Overrides { seed: self.seed, from: self.from, to: self.to, subject: self.subject.clone(), thresholds }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Gateways call the platform directly.
    InProcess,
    /// Gateways talk HTTP to a platform server started for the run.
    Http,
}

fn env_tokens() -> Result<Tokens, CliError> {
    let get = |role: &str| {
        let var = format!("CAREWATCH_{role}_TOKEN");
        std::env::var(&var).map_err(|_| ConfigError { path: var, message: "required with --platform-url".into() })
    };
    Ok(Tokens {
        gateway: get("GATEWAY")?,
        clinician: get("CLINICIAN")?,
        analyst: get("ANALYST")?,
        location: get("LOCATION")?,
    })
}

fn open_local(out: &std::path::Path) -> Result<(Arc<Platform>, Tokens), CliError> {
    let tokens = Tokens::load_or_create(&out.join("credentials.json"))?;
    let platform =
        Platform::open(out.join("platform"), tokens.credentials()).map_err(|e| CliError::component("platform", e))?;
    Ok((Arc::new(platform), tokens))
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate(args) => {
            let cfg = load(&args.config, &args.overrides(None))?;
            let m = cmd_simulate(&cfg, &args.out)?;
            for h in &m.homes {
                println!(
                    "{}: {} days, {} events, {} dropped by faults",
                    h.home,
                    h.days.len(),
                    h.emitted(),
                    h.dropped()
                );
            }
        }
        Command::Run { scenario, thresholds, mode, platform_url, capture_traffic } => {
            let cfg = load(&scenario.config, &scenario.overrides(thresholds))?;
            let out = &scenario.out;
            let mut server = None;
            let api = match platform_url {
                Some(url) => Api { endpoint: Endpoint::Remote(url), tokens: env_tokens()? },
                None => {
                    let (platform, tokens) = open_local(out)?;
                    let endpoint = match mode {
                        Mode::InProcess => Endpoint::Local(platform),
                        Mode::Http => {
                            let s = Server::start(platform, "127.0.0.1:0".parse().expect("addr"))
                                .map_err(|e| CliError::component("platform", e))?;
                            let url = s.url();
                            server = Some(s);
                            Endpoint::Remote(url)
                        }
                    };
                    Api { endpoint, tokens }
                }
            };
            let summary = cmd_run(&cfg, &api, out, &RunOptions { capture_traffic });
            if let Some(s) = server {
                s.stop().map_err(|e| CliError::component("platform", e))?;
            }
            let summary = summary?;
            for h in &summary.homes {
                println!(
                    "{} -> {}: {} events stored, {} missing samples, {} change report(s)",
                    h.home,
                    h.pseudonym,
                    h.stored,
                    h.missing_samples,
                    h.reports.len()
                );
                for r in &h.reports {
                    println!("  {} {} from {} to {}", r.feature, r.direction.verb(), r.start, r.end);
                }
            }
        }
        Command::Report { out, subject, from, to, features, version, dest, platform_url, token } => {
            let range = match (from, to) {
                (None, None) => None,
                (f, t) => Some((f.unwrap_or(NaiveDate::MIN), t.unwrap_or(NaiveDate::MAX))),
            };
            let features = features
                .map(|names| {
                    names
                        .iter()
                        .map(|n| n.parse::<Feature>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| ConfigError { path: "features".into(), message: e.to_string() })
                })
                .transpose()?;
            let api = match platform_url {
                Some(url) => {
                    let analyst = token.ok_or_else(|| ConfigError {
                        path: "token".into(),
                        message: "required with --platform-url".into(),
                    })?;
                    let none = String::new();
                    Api {
                        endpoint: Endpoint::Remote(url),
                        tokens: Tokens { gateway: none.clone(), clinician: none.clone(), analyst, location: none },
                    }
                }
                None => {
                    let (platform, tokens) = open_local(&out)?;
                    Api { endpoint: Endpoint::Local(platform), tokens }
                }
            };
            let p = Pseudonym::new(&subject);
            let stored = api.results(&p, range, version)?;
            let dest = dest.unwrap_or_else(|| out.join("report").join(&subject));
            for path in write_report(&stored, features.as_deref(), &dest)? {
                println!("{}", path.display());
            }
        }
        Command::Serve { out, addr } => {
            let (platform, _) = open_local(&out)?;
            eprintln!("serving {} on http://{addr}", out.join("platform").display());
            serve_forever(platform, addr).map_err(|e| CliError::component("platform", e))?;
        }
        Command::Scenarios => {
            for (name, text) in BUILTIN {
                let about = text.lines().take_while(|l| l.starts_with('#')).map(|l| l.trim_start_matches('#').trim());
                println!("builtin:{name}\t{}", about.collect::<Vec<_>>().join(" "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { tracing::Level::INFO } else { tracing::Level::WARN };
    tracing_subscriber::fmt().with_max_level(level).with_writer(std::io::stderr).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
