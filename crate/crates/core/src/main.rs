fn main() {
    std::process::exit(haarmoments::cli::dispatch(std::env::args_os()));
}
