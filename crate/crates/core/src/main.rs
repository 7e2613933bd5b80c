use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(holder_lab::cli::main_with_args(std::env::args_os()))
}
