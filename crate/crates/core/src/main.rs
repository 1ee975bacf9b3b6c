fn main() {
    std::process::exit(hjb_pi::cli::main());
}
