fn main() {
    std::process::exit(riesz_balayage::cli::run(std::env::args_os()));
}
