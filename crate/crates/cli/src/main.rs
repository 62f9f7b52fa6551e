use std::process::ExitCode;

fn main() -> ExitCode {
    fp2mol_cli::main_with_args(std::env::args_os())
}
