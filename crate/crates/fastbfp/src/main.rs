fn main() { std::process::exit(fastbfp::cli::run()) }
