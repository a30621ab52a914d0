//! `ecap`: command-line front end for ecap-core.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let threads = cli.threads.or_else(ecap_core::env_threads);
    let result = match threads {
        Some(n) => ecap_core::with_threads(n, || commands::run(&cli.command)),
        None => commands::run(&cli.command),
    };
    match result {
        Ok(mut summary) => {
            if let Some(obj) = summary.as_object_mut() {
                obj.insert("status".into(), "ok".into());
                obj.insert("threads".into(), threads.into());
                obj.insert("config".into(), serde_json::to_value(&cli.command).unwrap_or_default());
            }
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("ecap: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
