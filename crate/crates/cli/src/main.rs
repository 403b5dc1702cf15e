use clap::Parser;
use featurekit_cli::{commands, Cli};

/// Context chain joined with `: `. Library errors already embed their
/// cause, so a cause whose text is already shown is skipped.
fn report(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !msg.contains(&c) {
            msg.push_str(": ");
            msg.push_str(&c);
        }
    }
    msg
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    if let Err(e) = commands::run(&cli, &mut out) {
        eprintln!("error: {}", report(&e));
        std::process::exit(1);
    }
}
