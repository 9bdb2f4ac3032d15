use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(amenable_kit::cli::run())
}
