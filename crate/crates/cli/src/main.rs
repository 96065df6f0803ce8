use std::io::Write;

fn main() {
    let mut stdout = std::io::stdout().lock();
    let outcome = corruptbench_cli::run(std::env::args_os(), &mut stdout);
    let _ = stdout.flush();
    if !outcome.summary.is_empty() {
        if outcome.code == 0 {
            eprintln!("{}", outcome.summary);
        } else {
            eprintln!("error: {}", outcome.summary);
        }
    }
    std::process::exit(outcome.code);
}
