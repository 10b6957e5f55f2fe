use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use conormal_cli::args::Args;
use conormal_cli::{run, CliError, ExperimentConfig, Report};

fn emit(cfg: &ExperimentConfig, report: &Report) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    let io = |path: &str| {
        let path = path.to_string();
        move |source| CliError::Io { path, source }
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, &report.data).map_err(io(&path.display().to_string()))?,
        None => stdout.write_all(report.data.as_bytes()).map_err(io("<stdout>"))?,
    }
    stdout.write_all(report.table.as_bytes()).map_err(io("<stdout>"))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match args.resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("conormal: {e}");
            return ExitCode::from(2);
        }
    };
    if args.print_config {
        print!("{cfg}");
        return ExitCode::SUCCESS;
    }
    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("conormal: {e}");
            return ExitCode::from(match e {
                CliError::Solver(_) => 1,
                _ => 2,
            });
        }
    };
    if let Err(e) = emit(&cfg, &report) {
        eprintln!("conormal: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(report.exit_code() as u8)
}
