use std::process::ExitCode;

fn main() -> ExitCode {
    prony_lab::cli::main_with_args(std::env::args_os())
}
