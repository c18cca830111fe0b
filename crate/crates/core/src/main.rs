fn main() {
    std::process::exit(vdga::cli::main_with(std::env::args_os()));
}
