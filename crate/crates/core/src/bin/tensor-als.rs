fn main() {
    let code = tensor_als::cli::main_with(std::env::args_os(), &mut std::io::stdout());
    std::process::exit(code);
}
