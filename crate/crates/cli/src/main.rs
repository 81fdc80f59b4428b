fn main() {
    std::process::exit(pulseaug_cli::run(std::env::args_os()));
}
