fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(code) = ebm_heat::cli::main_with_args(std::env::args_os()) {
        std::process::exit(code);
    }
}
