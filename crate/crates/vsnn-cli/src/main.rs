use std::process::ExitCode;

fn main() -> ExitCode {
    vsnn_cli::run(std::env::args_os())
}
