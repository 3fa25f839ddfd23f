fn main() {
    std::process::exit(xbar_sim::cli::main_exit(std::env::args_os()));
}
