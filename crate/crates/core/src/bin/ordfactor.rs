fn main() {
    // library warnings (empty rows, unused tags, failed grid points) go to stderr
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(ordinal_factor::cli::cli_main(std::env::args_os()));
}
