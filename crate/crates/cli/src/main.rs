use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let bundle = qfc_cli::run_command(std::env::args_os());
    let _ = std::io::stdout().write_all(bundle.stdout.as_bytes());
    let _ = std::io::stderr().write_all(bundle.stderr.as_bytes());
    ExitCode::from(bundle.exit_code as u8)
}
