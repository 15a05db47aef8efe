use std::io::{self, BufReader};
use std::process::ExitCode;

fn main() -> ExitCode {
    let stdin = io::stdin();
    let mut input = BufReader::new(stdin.lock());
    let mut out = io::stdout().lock();
    let mut err = io::stderr().lock();
    let code = itt_cli::run(
        std::env::args_os(),
        itt_cli::Io {
            input: &mut input,
            out: &mut out,
            err: &mut err,
        },
    );
    ExitCode::from(code)
}
