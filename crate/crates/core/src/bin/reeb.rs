fn main() {
    std::process::exit(reeb_core::cli::run(std::env::args_os()));
}
