use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use levydrift_cli::{run_file, Overrides};

#[derive(Parser)]
#[command(
    name = "levydrift",
    version,
    about = "Drift-criterion classification and simulation of Lévy-type processes"
)]
struct Args {
    /// Run specification (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory; overrides the `output` field.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulator seed; overrides `simulate.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "LEVYDRIFT_THREADS")]
    threads: Option<usize>,
    /// Classifier margin tolerance; overrides `search.margin_tol`.
    #[arg(long)]
    margin_tol: Option<f64>,
    /// Outer scan radius; overrides `search.r_max`.
    #[arg(long)]
    rmax: Option<f64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let ov = Overrides {
        out: args.out,
        seed: args.seed,
        margin_tol: args.margin_tol,
        r_max: args.rmax,
    };
    match run_file(&args.spec, &ov) {
        Ok(outcome) => {
            for p in &outcome.artifacts {
                println!("{}", p.display());
            }
            if let Some(v) = &outcome.verify {
                for d in &v.discrepancies {
                    eprintln!("discrepancy: {d}");
                }
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
