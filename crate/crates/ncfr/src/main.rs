fn main() {
    let code = ncfr::cli::run(std::env::args_os());
    std::process::exit(code);
}
