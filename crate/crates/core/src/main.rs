use std::process::ExitCode;

fn main() -> ExitCode {
    phasemem::cli::main_with_args(std::env::args_os())
}
