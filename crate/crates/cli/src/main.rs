use std::io::{self, BufReader};

use tracing_subscriber::EnvFilter;

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(io::stderr)
        .init();
    let args: Vec<String> = std::env::args().collect();
    let mut input = BufReader::new(io::stdin());
    let code = sqlclarify_cli::run(
        &args,
        &sqlclarify_cli::process_env,
        &mut input,
        &mut io::stdout(),
        &mut io::stderr(),
    );
    std::process::exit(code);
}
