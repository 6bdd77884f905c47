use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(spdmd_cli::run(std::env::args_os()))
}
