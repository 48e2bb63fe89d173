use std::io::Write;

fn main() {
    let inv = twoway::cli::run_command(std::env::args_os());
    // a closed pipe downstream is not worth a panic
    if !inv.stdout.is_empty() {
        let _ = writeln!(std::io::stdout(), "{}", inv.stdout.trim_end());
    }
    if !inv.stderr.is_empty() {
        let _ = writeln!(std::io::stderr(), "{}", inv.stderr.trim_end());
    }
    std::process::exit(inv.status);
}
