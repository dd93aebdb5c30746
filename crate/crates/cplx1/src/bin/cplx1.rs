fn main() {
    std::process::exit(cplx1::cli::main());
}
