use std::process::ExitCode;

fn main() -> ExitCode {
    billiards::cli::main()
}
