fn main() {
    std::process::exit(gtaccess::cli::run(std::env::args_os()));
}
