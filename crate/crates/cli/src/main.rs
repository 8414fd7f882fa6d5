fn main() {
    std::process::exit(imcrawler::run_cli(std::env::args_os()));
}
