fn main() {
    std::process::exit(oper_spectra::app::main_with_args(std::env::args_os()));
}
