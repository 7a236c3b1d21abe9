//! `junction`: validate, simulate, check, and serve junction descriptions.
//!
//! Any file argument may be `builtin:<name>` to use a shipped fixture, e.g.
//! `builtin:paper.junction` or `builtin:emergency_road1.scn`.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use junction_core::dsl::{self, Compiled};
use junction_core::safety::{check_trace, reachable_set};
use junction_core::vcd::write_vcd;
use junction_core::{fixtures, run, PhaseTable, Scenario, Trace};
use junction_service::ServiceConfig;

const BUILTIN: &str = "builtin:";

#[derive(Parser)]
#[command(name = "junction", version, about = "Four-road traffic junction controller tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a junction file and print diagnostics.
    Validate { junction: String },
    /// Simulate a scenario. Prints CSV to stdout unless --csv or --vcd is given.
    Run {
        junction: String,
        scenario: String,
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        vcd: Option<PathBuf>,
    },
    /// Simulate a scenario and report safety violations.
    Check { junction: String, scenario: String },
    /// List every output word the controller can reach.
    Reach { junction: String },
    /// Print a Verilog module implementing the controller.
    EmitHdl {
        junction: String,
        #[arg(long, default_value = "junction_controller")]
        module: String,
    },
    /// Run the live controller service.
    Serve {
        junction: String,
        #[arg(long, env = "JUNCTION_LISTEN", default_value = "127.0.0.1:7400")]
        listen: SocketAddr,
        /// WebSocket address serving `/ws`.
        #[arg(long, env = "JUNCTION_WS_LISTEN")]
        ws_listen: Option<SocketAddr>,
        #[arg(long, env = "JUNCTION_TICK_MS", default_value_t = 1000,
              value_parser = clap::value_parser!(u64).range(1..))]
        tick_ms: u64,
        #[arg(long, env = "JUNCTION_MAX_CLIENTS", default_value_t = 64,
              value_parser = clap::value_parser!(u64).range(1..))]
        max_clients: u64,
    },
}

/// A failure that has already been reported to the user.
struct Failed;

type CmdResult = Result<(), Failed>;

fn fail(message: impl std::fmt::Display) -> Failed {
    eprintln!("error: {message}");
    Failed
}

fn read_input(arg: &str) -> Result<String, Failed> {
    match arg.strip_prefix(BUILTIN) {
        Some(name) => fixtures::by_name(name)
            .map(str::to_string)
            .ok_or_else(|| fail(format!("no builtin fixture named '{name}'"))),
        None => std::fs::read_to_string(arg).map_err(|e| fail(format!("cannot read {arg}: {e}"))),
    }
}

fn origin_name(arg: &str) -> &str {
    arg.strip_prefix(BUILTIN).unwrap_or(arg)
}

fn print_diagnostics(diags: &[dsl::Diagnostic], source: &str, origin: &str) {
    for d in diags {
        eprintln!("{}", d.render(source, origin));
    }
}

fn compile(arg: &str) -> Result<Compiled, Failed> {
    let source = read_input(arg)?;
    let origin = origin_name(arg);
    match dsl::compile(&source) {
        Ok(compiled) => {
            print_diagnostics(&compiled.warnings, &source, origin);
            Ok(compiled)
        }
        Err(diags) => {
            print_diagnostics(&diags, &source, origin);
            Err(Failed)
        }
    }
}

fn load_table(arg: &str) -> Result<PhaseTable, Failed> {
    compile(arg).map(|c| c.table)
}

fn load_scenario(arg: &str) -> Result<Scenario, Failed> {
    let text = read_input(arg)?;
    let name = Path::new(origin_name(arg))
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    Scenario::parse(name, &text).map_err(|e| fail(format!("{}: {e}", origin_name(arg))))
}

fn simulate(junction: &str, scenario: &str) -> Result<(PhaseTable, Trace), Failed> {
    let table = load_table(junction)?;
    let scenario = load_scenario(scenario)?;
    let trace = run(&scenario, &table);
    Ok((table, trace))
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| fail(format!("cannot write {}: {e}", path.display())))
}

fn cmd_validate(junction: &str) -> CmdResult {
    let compiled = compile(junction)?;
    println!(
        "ok: junction '{}' ({} warning(s))",
        compiled.table.name(),
        compiled.warnings.len()
    );
    Ok(())
}

fn cmd_run(junction: &str, scenario: &str, csv: Option<&Path>, vcd: Option<&Path>) -> CmdResult {
    let (_, trace) = simulate(junction, scenario)?;
    if let Some(path) = csv {
        write_file(path, &trace.to_csv())?;
    }
    if let Some(path) = vcd {
        let text = write_vcd(&trace).map_err(fail)?;
        write_file(path, &text)?;
    }
    if csv.is_none() && vcd.is_none() {
        print!("{}", trace.to_csv());
    }
    Ok(())
}

fn cmd_check(junction: &str, scenario: &str) -> CmdResult {
    let (table, trace) = simulate(junction, scenario)?;
    let violations = check_trace(&trace, &table).map_err(fail)?;
    for v in &violations {
        println!("{v}");
    }
    println!("{} ticks, {} violation(s)", trace.len(), violations.len());
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failed)
    }
}

fn cmd_reach(junction: &str) -> CmdResult {
    let table = load_table(junction)?;
    let reach = reachable_set(&table);
    let mut tags: BTreeMap<_, Vec<&str>> = BTreeMap::new();
    for (mode, word) in &reach.outputs {
        tags.entry(*word).or_default().push(mode.as_str());
    }
    for (word, modes) in &tags {
        let mark = if reach.conflicting.contains(word) { " CONFLICT" } else { "" };
        println!("{word} {}{mark}", modes.join(","));
    }
    println!(
        "{} words, {} states, {} transitions, {} conflicting",
        tags.len(),
        reach.states,
        reach.transitions,
        reach.conflicting.len()
    );
    if reach.conflicting.is_empty() {
        Ok(())
    } else {
        Err(Failed)
    }
}

fn cmd_emit_hdl(junction: &str, module: &str) -> CmdResult {
    let table = load_table(junction)?;
    let text = dsl::emit_hdl(&table, module).map_err(fail)?;
    print!("{text}");
    Ok(())
}

fn cmd_serve(junction: &str, config: ServiceConfig) -> CmdResult {
    let junction = match junction.strip_prefix(BUILTIN) {
        Some("paper.junction") => None,
        Some(other) => return Err(fail(format!("no builtin junction named '{other}'"))),
        None => Some(PathBuf::from(junction)),
    };
    let config = ServiceConfig { junction, ..config };
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let runtime = tokio::runtime::Runtime::new().map_err(fail)?;
    runtime
        .block_on(junction_service::serve(config))
        .map_err(fail)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { junction } => cmd_validate(junction),
        Command::Run {
            junction,
            scenario,
            csv,
            vcd,
        } => cmd_run(junction, scenario, csv.as_deref(), vcd.as_deref()),
        Command::Check { junction, scenario } => cmd_check(junction, scenario),
        Command::Reach { junction } => cmd_reach(junction),
        Command::EmitHdl { junction, module } => cmd_emit_hdl(junction, module),
        Command::Serve {
            junction,
            listen,
            ws_listen,
            tick_ms,
            max_clients,
        } => cmd_serve(
            junction,
            ServiceConfig {
                listen: *listen,
                ws_listen: *ws_listen,
                tick_period_ms: *tick_ms,
                junction: None,
                max_clients: *max_clients as usize,
            },
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failed) => ExitCode::from(1),
    }
}
