use std::io;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let level = match qthermo::cli::verbosity(&args) {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let code = qthermo::cli::execute(args, &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
