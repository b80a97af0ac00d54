use std::process::ExitCode;

fn main() -> ExitCode {
    cura_cli::commands::run()
}
