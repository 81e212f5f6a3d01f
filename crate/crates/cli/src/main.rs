fn main() {
    let dir = rerope_cli::output_dir_from_env();
    let code = rerope_cli::run(std::env::args_os(), &dir, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
