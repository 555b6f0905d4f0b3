use clap::Parser;

fn main() {
    let cli = metanic_cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match metanic_cli::run(cli, &mut stdout) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
