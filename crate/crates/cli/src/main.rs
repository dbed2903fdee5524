use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(lrmf_cli::run(std::env::args_os()))
}
