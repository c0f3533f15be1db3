fn main() { std::process::exit(dialect_atlas::cli::dispatch()) }
