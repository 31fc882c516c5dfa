use clap::Parser;

fn main() {
    let cli = ldw_cli::Cli::parse();
    let code = match ldw_cli::run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            2
        }
    };
    std::process::exit(code);
}
