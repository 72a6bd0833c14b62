fn main() {
    std::process::exit(bipartite_cli::run(std::env::args_os()));
}
