use clap::Parser;

fn main() {
    let cli = sess::cli::Cli::parse();
    if let Err(err) = sess::cli::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code);
    }
}
