use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(royalty_core::cli::run(std::env::args_os()))
}
