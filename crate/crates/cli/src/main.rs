fn main() {
    std::process::exit(ghic::run(std::env::args_os()));
}
