use std::process::ExitCode;

fn main() -> ExitCode {
    psdreg::cli::run()
}
