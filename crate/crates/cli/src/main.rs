use std::io;
use std::process::ExitCode;

use racefix_cli::Io;

fn main() -> ExitCode {
    let stdin = io::stdin();
    let mut input = stdin.lock();
    let mut out = io::stdout().lock();
    let mut err = io::stderr().lock();
    let code = racefix_cli::run(
        std::env::args_os(),
        &mut Io {
            input: &mut input,
            out: &mut out,
            err: &mut err,
        },
    );
    ExitCode::from(code as u8)
}
