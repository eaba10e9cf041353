use std::io::{self, Write};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let stdin = io::stdin();
    let mut input = stdin.lock();
    let mut out = io::stdout().lock();
    let mut err = io::stderr().lock();
    let code = bioamb::cli::run_cli(&args, &mut input, &mut out, &mut err);
    let _ = out.flush();
    std::process::exit(code);
}
