use clap::Parser;

use bjj_core::cli::{exit_code, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = run(&cli.command);
    match &result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => eprintln!("bjj: {e}"),
    }
    std::process::exit(exit_code(&result));
}
