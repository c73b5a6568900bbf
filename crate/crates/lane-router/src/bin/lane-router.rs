fn main() {
    std::process::exit(lane_router::cli::run(std::env::args_os()));
}
