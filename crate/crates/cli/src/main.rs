use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use degsl_cli::{run, RunConfig, RunOptions};

/// Weighted Sturm-Liouville solver with admissibility certificates.
#[derive(Debug, Parser)]
#[command(name = "degsl", version)]
struct Args {
    /// JSON run configuration.
    config: PathBuf,
    /// Quadrature exactness degree (overrides the config).
    #[arg(long)]
    quad_degree: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Output path prefix (overrides the config).
    #[arg(long)]
    out: Option<String>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(3);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(3);
        }
    }
    let options = RunOptions {
        quad_degree: args.quad_degree,
        out: args.out,
    };
    let result = RunConfig::load(&args.config).and_then(|cfg| run(&cfg, &options));
    match result {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            ExitCode::from(outcome.status as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
