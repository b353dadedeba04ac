use std::process::ExitCode;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .init();
    match interlangue_cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let interlangue_cli::CliError::Help(text) = &e {
                print!("{text}");
                return ExitCode::SUCCESS;
            }
            eprintln!("interlangue: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
