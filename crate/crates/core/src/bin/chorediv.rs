use clap::Parser;

fn main() {
    let cli = chorediv::cli::Cli::parse();
    let code = chorediv::cli::main_with(cli, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
