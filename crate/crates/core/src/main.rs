use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(fraclap::cli::run(std::env::args_os()))
}
