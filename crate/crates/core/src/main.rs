use std::process::ExitCode;

fn main() -> ExitCode {
    ratiolimit::cli::run()
}
