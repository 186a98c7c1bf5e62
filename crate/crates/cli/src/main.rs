use clap::Parser;
use fiscrisk_cli::{exit_code, run, RunConfig};
use fiscrisk_core::ErrorCategory;

fn main() {
    let config = match RunConfig::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            std::process::exit(exit_code(ErrorCategory::Argument));
        }
        Err(e) => e.exit(),
    };
    let level = match config.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    std::process::exit(run(config));
}
