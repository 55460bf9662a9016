use clap::{Args, Parser, Subcommand, ValueEnum};
use epconc::circuits::PermDirection;
use epconc::cli::{
    cmd_export, cmd_run, cmd_verify, CliError, NetworkKind, OutputFormat, RunConfig, VerifyScope,
};
use epconc::protocol::Engine;
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulator and analysis toolkit for concentrating the entanglement of
/// partially entangled qubit pairs into perfect EPR pairs.
#[derive(Parser)]
#[command(name = "epconc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded protocol trials and print the yield table.
    Run(RunArgs),
    /// Run the exhaustive self-verification suites.
    Verify {
        /// Which suite to run.
        #[arg(value_enum, default_value_t = ScopeArg::All)]
        scope: ScopeArg,
    },
    /// Write one of the reversible networks as a text netlist.
    Export(ExportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Coefficient of |00⟩ in each shared pair, strictly inside (0, 1).
    /// The default 0.70710678118654752 is the balanced (EPR) point.
    #[arg(long, default_value_t = std::f64::consts::FRAC_1_SQRT_2)]
    alpha: f64,
    /// Number of shared pairs.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Number of independent trials.
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Base seed; trial i draws from stream i of this seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Simulation backend.
    #[arg(long, value_enum, default_value_t = EngineArg::Mirrored)]
    engine: EngineArg,
    /// Output format.
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
    /// Write the report here instead of stdout. Relative paths land in
    /// $EPCONC_OUTPUT_DIR when that variable is set.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Which network to export.
    #[arg(value_enum)]
    network: NetworkArg,
    /// Number of data qubits (shared pairs).
    #[arg(long)]
    n: usize,
    /// Hamming weight; required for perm and cascade.
    #[arg(long)]
    j: Option<usize>,
    /// Direction of the ranking permutation.
    #[arg(long, value_enum, default_value_t = DirectionArg::Inverse)]
    direction: DirectionArg,
    /// Write the netlist here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Full,
    Mirrored,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    All,
    Combinat,
    Circuits,
    Protocol,
    Analysis,
}

#[derive(Clone, Copy, ValueEnum)]
enum NetworkArg {
    Hamming,
    Perm,
    Cascade,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Forward,
    Inverse,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders its own message; help/version requests are a
            // success, anything else is a validation failure
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run(args) => {
            let config = RunConfig {
                alpha: args.alpha,
                n: args.n,
                trials: args.trials,
                seed: args.seed,
                engine: match args.engine {
                    EngineArg::Full => Engine::Full,
                    EngineArg::Mirrored => Engine::Mirrored,
                },
                format: match args.format {
                    FormatArg::Table => OutputFormat::Table,
                    FormatArg::Csv => OutputFormat::Csv,
                    FormatArg::Json => OutputFormat::Json,
                },
                output: args.output,
            };
            let report = cmd_run(&config)?;
            match report.written_to {
                Some(path) => println!("wrote {}", path.display()),
                None => print!("{}", report.rendered),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { scope } => {
            let scope = match scope {
                ScopeArg::All => VerifyScope::All,
                ScopeArg::Combinat => VerifyScope::Combinat,
                ScopeArg::Circuits => VerifyScope::Circuits,
                ScopeArg::Protocol => VerifyScope::Protocol,
                ScopeArg::Analysis => VerifyScope::Analysis,
            };
            let report = cmd_verify(scope);
            print!("{}", report.render());
            if report.all_passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
        Command::Export(args) => {
            let kind = match args.network {
                NetworkArg::Hamming => NetworkKind::Hamming,
                NetworkArg::Perm => NetworkKind::Perm,
                NetworkArg::Cascade => NetworkKind::Cascade,
            };
            let direction = match args.direction {
                DirectionArg::Forward => PermDirection::ForwardF,
                DirectionArg::Inverse => PermDirection::InverseF,
            };
            let netlist = cmd_export(kind, args.n, args.j, direction)?;
            match args.output {
                Some(path) => {
                    let full = epconc::cli::resolve_output_path(&path);
                    if let Some(parent) = full.parent() {
                        if !parent.as_os_str().is_empty() {
                            std::fs::create_dir_all(parent)?;
                        }
                    }
                    std::fs::write(&full, &netlist)?;
                    println!("wrote {}", full.display());
                }
                None => print!("{netlist}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
