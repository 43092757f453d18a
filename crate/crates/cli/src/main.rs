use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("SPARSEKIT_LOG", "warn"))
        .init();
    let cli = sparsekit_cli::Cli::parse();
    std::process::exit(sparsekit_cli::run(cli));
}
