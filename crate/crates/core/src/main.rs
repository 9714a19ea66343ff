use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(switchopt::cli::run(std::env::args_os()) as u8)
}
