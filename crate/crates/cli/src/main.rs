use std::process::ExitCode;

fn main() -> ExitCode {
    balcube_cli::cli::dispatch(std::env::args_os())
}
