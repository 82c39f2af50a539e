use protodoctor::cli;

fn main() {
    let _ = env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("PROTODOCTOR_LOG", "warn"),
    )
    .try_init();
    if let Err(e) = cli::run() {
        // One line per failure, category first, so wrappers can match on it.
        let raw = e.to_string().replace('\n', "; ");
        let message = raw
            .strip_prefix(&format!("{}: ", e.category()))
            .unwrap_or(&raw);
        eprintln!("error[{}]: {message}", e.category());
        std::process::exit(e.exit_code());
    }
}
