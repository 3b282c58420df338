use clap::Parser;

fn main() {
    let cli = ader_cli::Cli::parse();
    match ader_cli::execute(&cli) {
        Ok(report) => println!("{report}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
