use clap::Parser;
use lifespan::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        let mut message = e.to_string();
        for cause in e.chain().skip(1) {
            let text = cause.to_string();
            if !message.contains(&text) {
                message = format!("{message}: {text}");
            }
        }
        eprintln!("error: {message}");
        std::process::exit(1);
    }
}
