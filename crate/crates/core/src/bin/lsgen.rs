fn main() {
    std::process::exit(lsgen::cli::main_with(std::env::args_os().skip(1)));
}
