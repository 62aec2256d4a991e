use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::new().filter_or("LVMARKET_LOG", "warn")).init();
    std::process::exit(lvmarket_cli::cli_main(std::env::args_os()));
}
