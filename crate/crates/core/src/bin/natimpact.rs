use std::process::ExitCode;

fn main() -> ExitCode {
    natimpact::cli::main_with_args(std::env::args_os())
}
