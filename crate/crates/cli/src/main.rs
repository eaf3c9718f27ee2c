fn main() {
    std::process::exit(toploc::main_with(std::env::args_os()));
}
