fn main() {
    std::process::exit(oim::cli::run(std::env::args_os()));
}
