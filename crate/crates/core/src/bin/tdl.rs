fn main() {
    std::process::exit(tdl_core::cli::main());
}
