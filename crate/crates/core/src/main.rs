use std::process::ExitCode;

fn main() -> ExitCode {
    heligate::cli::main()
}
