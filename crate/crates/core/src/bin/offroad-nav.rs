fn main() {
    std::process::exit(offroad_nav::cli::run(std::env::args_os()));
}
