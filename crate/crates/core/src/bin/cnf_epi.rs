fn main() {
    std::process::exit(cnf_epi::cli::run(std::env::args_os()));
}
