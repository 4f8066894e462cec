fn main() {
    std::process::exit(markov_voi::cli::run(std::env::args_os()));
}
