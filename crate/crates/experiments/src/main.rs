fn main() {
    std::process::exit(mtem_experiments::app::main_with(std::env::args_os()));
}
