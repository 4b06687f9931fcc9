use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vif_core::physio::{encode_sample, simulate_to_vec, Scenario};
use vif_core::runtime::{write_transcript, SessionConfig};
use vif_core::script::{lint_story, parse_script, Diagnostic};
use vif_core::session::{play_files, serve, stream_samples, ServeConfig};

#[derive(Parser)]
#[command(name = "vif", version, about = "Physiology-driven interactive fiction engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a story and print diagnostics as JSON lines.
    Lint { file: PathBuf },
    /// Play a story headless against a sensor scenario and an input script.
    Play {
        file: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        inputs: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Transcript path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        session: SessionArgs,
    },
    /// Serve a live session to one reader, with sensors on a TCP/UDP port.
    Serve {
        file: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, default_value_t = 8080)]
        client_port: u16,
        #[arg(long, default_value_t = 9000)]
        sensor_port: u16,
        /// Also append the transcript to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        session: SessionArgs,
    },
    /// Generate simulated sensor samples and send them to a sensor port.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// host:port of a sensor port; samples go to stdout when omitted.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Send as fast as possible instead of in real time.
        #[arg(long)]
        fast: bool,
    },
}

#[derive(Args)]
struct SessionArgs {
    /// Length of a game day in real seconds.
    #[arg(long, default_value_t = 600.0)]
    day_seconds: f64,
    #[arg(long, default_value_t = 45.0)]
    half_fov: f64,
    #[arg(long, default_value_t = 1000)]
    dwell_ms: u64,
}

impl SessionArgs {
    fn config(&self) -> SessionConfig {
        SessionConfig {
            game_day_real_seconds: self.day_seconds,
            half_fov: self.half_fov,
            dwell_threshold_ms: self.dwell_ms,
            ..SessionConfig::default()
        }
    }
}

fn print_diagnostics(diags: &[Diagnostic]) {
    let mut out = std::io::stdout().lock();
    for d in diags {
        let _ = writeln!(out, "{}", d.to_json_line());
    }
}

fn read(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("vif: cannot read {}: {e}", path.display());
        ExitCode::from(1)
    })
}

fn lint(file: &PathBuf) -> Result<(), ExitCode> {
    let source = read(file)?;
    match parse_script(&source) {
        Ok(parsed) => {
            let mut diags = parsed.diagnostics;
            diags.extend(lint_story(&parsed.story));
            diags.sort_by_key(|d| d.line);
            print_diagnostics(&diags);
            if diags.iter().any(Diagnostic::is_error) {
                return Err(ExitCode::from(2));
            }
            Ok(())
        }
        Err(e) => {
            print_diagnostics(e.diagnostics());
            if e.diagnostics().is_empty() {
                eprintln!("vif: {e}");
            }
            Err(ExitCode::from(2))
        }
    }
}

fn run(cli: Cli) -> Result<(), ExitCode> {
    match cli.command {
        Command::Lint { file } => lint(&file),
        Command::Play {
            file,
            scenario,
            inputs,
            seed,
            out,
            session,
        } => {
            let transcript = play_files(&file, scenario.as_deref(), inputs.as_deref(), seed, session.config())
                .map_err(|e| {
                    print_diagnostics(e.diagnostics());
                    eprintln!("vif: {e}");
                    ExitCode::from(e.exit_code() as u8)
                })?;
            let text = write_transcript(&transcript);
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| {
                    eprintln!("vif: cannot write {}: {e}", path.display());
                    ExitCode::from(1)
                }),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Serve {
            file,
            host,
            client_port,
            sensor_port,
            out,
            session,
        } => {
            let story = match parse_script(&read(&file)?) {
                Ok(parsed) => parsed.story,
                Err(e) => {
                    print_diagnostics(e.diagnostics());
                    eprintln!("vif: {e}");
                    return Err(ExitCode::from(2));
                }
            };
            let mut config = ServeConfig::new(
                SocketAddr::new(host, client_port),
                SocketAddr::new(host, sensor_port),
            );
            config.session = session.config();
            config.transcript = out;
            let handle = serve(story, config).map_err(|e| {
                eprintln!("vif: {e}");
                ExitCode::from(1)
            })?;
            eprintln!(
                "vif: reader ws://{} sensors {} (tcp+udp)",
                handle.client_addr(),
                handle.sensor_addr()
            );
            handle.wait();
            Ok(())
        }
        Command::Simulate {
            scenario,
            target,
            seed,
            fast,
        } => {
            let scenario = Scenario::parse(&read(&scenario)?).map_err(|e| {
                eprintln!("vif: {e}");
                ExitCode::from(3)
            })?;
            let samples = simulate_to_vec(&scenario, seed);
            match target {
                Some(target) => {
                    let n = stream_samples(&samples, &target, !fast).map_err(|e| {
                        eprintln!("vif: sending to {target}: {e}");
                        ExitCode::from(1)
                    })?;
                    log::info!("sent {n} samples to {target}");
                }
                None => {
                    let mut out = std::io::stdout().lock();
                    for s in &samples {
                        let _ = writeln!(out, "{}", encode_sample(s));
                    }
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
