use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = se2e::cli::Cli::parse();
    if let Err(err) = se2e::cli::run(cli) {
        eprintln!("{}", err.to_json());
        std::process::exit(err.code);
    }
}
