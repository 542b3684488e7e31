use std::collections::HashMap;

fn main() {
    let env: HashMap<String, String> = std::env::vars().collect();
    std::process::exit(vqaug::cli::run(std::env::args_os(), &env));
}
