use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use combqfi::comb::validate_comb;
use combqfi::io::read_comb;
use combqfi_cli::{parse_config, run_experiment, write_csv, ExperimentConfig, ExperimentKind, WORKERS_ENV};

const EXIT_INVALID: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "combqfi", version, about = "Quantum Fisher information of parametrized quantum combs")]
struct Cli {
    /// Overrides the seed given in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output path given in the config file.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the causality constraints of a comb file.
    Validate {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Comb QFI on both SDP routes at every grid point.
    Qfi { config: PathBuf },
    /// Comb QFI over the configured grid.
    Sweep { config: PathBuf },
    /// Comb QFI plus the recovered optimal probe.
    Probe { config: PathBuf },
    /// Optimized checkerboard probe against the comb QFI.
    Variational { config: PathBuf },
    /// Optimal adaptive use of N copies of one collision step.
    ChannelNcopy { config: PathBuf },
}

fn validate(path: &Path, tol: f64) -> ExitCode {
    let comb = match read_comb(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match validate_comb(&comb.op, &comb.structure, tol) {
        Ok(r) => {
            println!("{r}");
            if r.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_INVALID)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn load(path: &Path, kind: ExperimentKind, cli: &Cli) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut cfg = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(k) = cfg.experiment {
        if k != kind {
            return Err(format!("{}: config is for '{}', not '{}'", path.display(), k.name(), kind.name()));
        }
    }
    if let Some(s) = cli.seed {
        cfg.set_seed(s);
    }
    if let Some(o) = &cli.output {
        cfg.output = Some(o.clone());
    }
    Ok(cfg)
}

fn workers() -> Result<Option<usize>, String> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{WORKERS_ENV} must be a positive integer, got '{v}'")),
        },
    }
}

fn experiment(path: &Path, kind: ExperimentKind, cli: &Cli) -> ExitCode {
    let cfg = match load(path, kind, cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let pool = match workers().and_then(|n| {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = n {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| e.to_string())
    }) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let outcomes = pool.install(|| run_experiment(kind, &cfg));
    let rows: Vec<_> = outcomes.iter().map(|o| o.row.clone()).collect();

    let written = match &cfg.output {
        Some(p) => File::create(p).map_err(|e| e.into()).and_then(|f| write_csv(&rows, BufWriter::new(f))),
        None => write_csv(&rows, io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("error: writing results: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }

    // The summary goes to stdout unless stdout already carries the CSV.
    let mut summary: Box<dyn Write> = if cfg.output.is_some() { Box::new(io::stdout().lock()) } else { Box::new(io::stderr().lock()) };
    let mut failed = 0;
    for o in &outcomes {
        let r = &o.row;
        let head = format!("{} {} {} N={} t_tot={:.4}", r.experiment, r.scenario, r.interaction, r.n, r.t_tot);
        let _ = match (&o.error, r.qfi) {
            (Some(e), _) => {
                failed += 1;
                writeln!(summary, "{head}: FAILED: {e}")
            }
            (None, Some(q)) => writeln!(summary, "{head}: {q:.10e} ({})", o.note),
            (None, None) => Ok(()),
        };
    }
    let _ = writeln!(summary, "{} points, {} failed", outcomes.len(), failed);
    if failed > 0 {
        ExitCode::from(EXIT_SOLVER)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.cmd {
        Command::Validate { file, tol } => validate(file, *tol),
        Command::Qfi { config } => experiment(config, ExperimentKind::Qfi, &cli),
        Command::Sweep { config } => experiment(config, ExperimentKind::Sweep, &cli),
        Command::Probe { config } => experiment(config, ExperimentKind::Probe, &cli),
        Command::Variational { config } => experiment(config, ExperimentKind::Variational, &cli),
        Command::ChannelNcopy { config } => experiment(config, ExperimentKind::ChannelNcopy, &cli),
    }
}
