use clap::error::ErrorKind;
use clap::Parser;
use prisel_cli::{run, Cli, CliError};

fn fail(err: &CliError) -> ! {
    eprintln!("{}", err.report());
    std::process::exit(err.exit_code());
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => fail(&CliError::Usage(e.to_string())),
    };
    if let Err(e) = run(&cli) {
        fail(&e);
    }
}
