fn main() {
    ccmsim::cli::init_logging();
    std::process::exit(ccmsim::cli::main(std::env::args_os()));
}
