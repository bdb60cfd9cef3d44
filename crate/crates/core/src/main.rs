fn main() {
    let code = itrg::cli::run_cli(std::env::args_os(), &|k| std::env::var(k).ok());
    std::process::exit(code);
}
