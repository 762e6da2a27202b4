fn main() {
    std::process::exit(elastic_enhancement::cli::main_with_args(std::env::args()));
}
