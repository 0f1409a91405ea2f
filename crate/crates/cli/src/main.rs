fn main() {
    std::process::exit(carnot_lift_cli::run(std::env::args_os()));
}
