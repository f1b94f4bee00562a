use std::process::ExitCode;

use clap::Parser;
use cqlqg_cli::error::EXIT_PARSE;
use cqlqg_cli::Cli;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_PARSE } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CQLQG_LOG", "warn")).init();
    match cli.configure_threads().and_then(|()| cqlqg_cli::run(&cli)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
