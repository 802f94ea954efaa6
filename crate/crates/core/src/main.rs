use clap::Parser;
use folmi::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("FOLMI_LOG")).init();
    std::process::exit(run(Cli::parse()));
}
