//! Reference scorer process: serves the `dummy-length` metric over stdin/stdout.

use std::io::{self, BufWriter};
use std::process::ExitCode;

use isoforge::selection::scorer::serve_ndjson;
use isoforge::selection::DummyLengthScorer;

fn main() -> ExitCode {
    let stdin = io::stdin().lock();
    let stdout = BufWriter::new(io::stdout().lock());
    match serve_ndjson(&DummyLengthScorer, stdin, stdout) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("isoforge-dummy-scorer: {e}");
            ExitCode::FAILURE
        }
    }
}
