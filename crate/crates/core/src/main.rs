fn main() {
    std::process::exit(orlicz_distort::cli::main_entry());
}
