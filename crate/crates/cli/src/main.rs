use std::process::ExitCode;

use semidiscrete_cli::{execute, parse_and_validate, CliError};

fn main() -> ExitCode {
    let code = match parse_and_validate(std::env::args_os()) {
        Ok(invocation) => execute(&invocation),
        Err(CliError::Usage(e)) => {
            let code = e.exit_code();
            let _ = e.print();
            code
        }
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    };
    ExitCode::from(code as u8)
}
