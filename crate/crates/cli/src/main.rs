use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rateless_core::codebook::build_codebook;
use rateless_core::experiment::{
    configure_threads, preset, run_experiment, ExperimentConfig, ExperimentReport, SUMMARY_HEADER,
};
use rateless_core::oracle::{oracle_capacity, oracle_mmi, oracle_types, OracleReport};
use rateless_core::types::CompositionSpec;

/// Rateless coding with randomized training over channels driven by an
/// arbitrary state sequence.
#[derive(Parser)]
#[command(name = "rateless-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration (or every configuration of a preset).
    Run(RunArgs),
    /// Run a preset and write one summary row per point.
    Sweep(RunArgs),
    /// Exhaustive small-instance cross-checks.
    Oracle {
        #[arg(value_enum, default_value_t = OracleKind::All)]
        kind: OracleKind,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Materialize a codebook and write it in the binary dump format.
    DumpCodebook {
        #[arg(long)]
        k: usize,
        /// Code symbols per chunk.
        #[arg(long)]
        c: usize,
        #[arg(long)]
        m_star: usize,
        /// Input weights, e.g. `1,1`.
        #[arg(long, default_value = "1,1", value_delimiter = ',')]
        input: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory for CSV and summary files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Mmi,
    Capacity,
    Types,
    All,
}

fn configs(args: &RunArgs) -> Result<Vec<ExperimentConfig>, String> {
    let mut cfgs = match (&args.config, &args.preset) {
        (Some(path), _) => vec![ExperimentConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))?],
        (None, Some(name)) => preset(name).map_err(|e| e.to_string())?,
        (None, None) => return Err("one of --config or --preset is required".into()),
    };
    for cfg in &mut cfgs {
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        if let Some(t) = args.trials {
            cfg.trials = t;
        }
        if let Some(o) = &args.out {
            cfg.out = Some(o.clone());
        }
    }
    Ok(cfgs)
}

fn run_all(cfgs: &[ExperimentConfig]) -> Result<Vec<ExperimentReport>, String> {
    let mut reports = Vec::new();
    for cfg in cfgs {
        let rep = run_experiment(cfg).map_err(|e| format!("{}: {e}", cfg.name))?;
        if let Some(dir) = &cfg.out {
            rep.write(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        }
        reports.push(rep);
    }
    Ok(reports)
}

fn run(args: RunArgs, sweep: bool) -> Result<bool, String> {
    let cfgs = configs(&args)?;
    let reports = run_all(&cfgs)?;
    let mut stdout = io::stdout().lock();
    if sweep {
        let mut table = format!("{SUMMARY_HEADER}\n");
        for r in &reports {
            table.push_str(&r.summary.csv_row());
            table.push('\n');
        }
        if let Some(dir) = &args.out {
            let name = args.preset.as_deref().unwrap_or("sweep");
            std::fs::write(dir.join(format!("{name}_summary.csv")), &table).map_err(|e| e.to_string())?;
        }
        let _ = stdout.write_all(table.as_bytes());
    } else {
        for r in &reports {
            let _ = writeln!(stdout, "{}", r.summary.to_text());
        }
    }
    Ok(reports.iter().all(|r| r.summary.passed()))
}

fn oracle(kind: OracleKind, seed: u64) -> bool {
    let reports: Vec<OracleReport> = match kind {
        OracleKind::Mmi => vec![oracle_mmi(seed)],
        OracleKind::Capacity => vec![oracle_capacity(seed)],
        OracleKind::Types => vec![oracle_types(seed)],
        OracleKind::All => vec![oracle_mmi(seed), oracle_capacity(seed), oracle_types(seed)],
    };
    for r in &reports {
        println!("{r}");
    }
    reports.iter().all(OracleReport::passed)
}

fn dump(k: usize, c: usize, m_star: usize, input: &[usize], seed: u64, out: &PathBuf) -> Result<(), String> {
    let comp = CompositionSpec::from_weights(input, c).map_err(|e| e.to_string())?;
    let cb = build_codebook(m_star, c, k, &comp, seed).map_err(|e| e.to_string())?;
    let file = File::create(out).map_err(|e| format!("{}: {e}", out.display()))?;
    let mut w = BufWriter::new(file);
    cb.write_to(&mut w).map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())?;
    println!("wrote {} codewords of length {} to {}", cb.len(), m_star * c, out.display());
    Ok(())
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args, false),
        Command::Sweep(args) => run(args, true),
        Command::Oracle { kind, seed } => Ok(oracle(kind, seed)),
        Command::DumpCodebook { k, c, m_star, input, seed, out } => dump(k, c, m_star, &input, seed, &out).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
