fn main() {
    let code = endcut::cli::main_with(std::env::args_os().collect(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
