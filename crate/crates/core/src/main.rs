fn main() {
    std::process::exit(amc_core::cli::main_entry());
}
