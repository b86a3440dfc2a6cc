fn main() {
    std::process::exit(causal_games::cli::main_with_args());
}
