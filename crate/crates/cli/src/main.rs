use clap::Parser;

fn main() {
    let cli = respike_cli::Cli::parse();
    match respike_cli::execute(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
