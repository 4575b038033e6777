use clap::Parser;

fn main() {
    let args = sps_cli::Args::parse();
    std::process::exit(sps_cli::run(&args));
}
