use std::process::exit;

fn main() {
    exit(sem_cli::run(std::env::args_os()));
}
