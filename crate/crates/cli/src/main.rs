use std::process::ExitCode;

use clap::Parser;
use omnimotion_cli::args::{Cli, Command};
use omnimotion_cli::serve::{serve, AppState};
use omnimotion_cli::{run, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Serve(a) => serve_blocking(a),
        other => run(other, cli.seed).map(|out| {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            if !out.stdout.is_empty() {
                println!("{}", out.stdout);
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn serve_blocking(a: &omnimotion_cli::args::ServeArgs) -> Result<(), CliError> {
    let state = AppState::load(&a.erp, a.frames, a.export_dir.clone())?;
    if let Some(w) = state.geometry().aspect_warning() {
        eprintln!("warning: {w}");
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::io("tokio runtime", e))?;
    rt.block_on(serve(state, &a.host, a.port))
}
