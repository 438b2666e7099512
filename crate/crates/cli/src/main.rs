use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nhgeom_cli::{parse_config, resolve_output_dir, run, CliError, ConfigError, OUTPUT_DIR_ENV};

/// Run one nhgeom experiment described by a JSON config.
#[derive(Debug, Parser)]
#[command(name = "nhgeom", version)]
struct Args {
    /// Experiment config (JSON); `-` reads stdin.
    config: PathBuf,
    /// Output directory; overrides the environment and the config.
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
    /// Seed for randomly drawn inputs; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn read(path: &PathBuf) -> Result<Vec<u8>, CliError> {
    let result = if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        std::io::Read::read_to_end(&mut std::io::stdin(), &mut buf).map(|_| buf)
    } else {
        std::fs::read(path)
    };
    result.map_err(|e| ConfigError::Read(format!("{}: {e}", path.display())).into())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let outcome = read(&args.config).and_then(|text| {
        let mut config = parse_config(&text)?;
        if args.seed.is_some() {
            config.seed = args.seed;
        }
        let env = std::env::var(OUTPUT_DIR_ENV).ok();
        let dir = resolve_output_dir(&config, args.output_dir.as_deref(), env.as_deref());
        run(&config, &dir)
    });
    match outcome {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for file in &report.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
