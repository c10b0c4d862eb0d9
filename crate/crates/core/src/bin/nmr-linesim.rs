use std::process::ExitCode;

fn main() -> ExitCode {
    nmr_linesim::cli::main()
}
