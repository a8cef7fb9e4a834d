use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(apweights::cli::main_from_args(std::env::args()) as u8)
}
