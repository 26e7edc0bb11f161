fn main() {
    std::process::exit(hupstab::cli::main_with_args());
}
