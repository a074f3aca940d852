fn main() {
    std::process::exit(tosca::run_cli(std::env::args_os().skip(1)));
}
