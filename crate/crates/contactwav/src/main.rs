use std::io;

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let level = argv
        .windows(2)
        .find(|w| w[0] == "--log-level")
        .map(|w| w[1].clone())
        .or_else(|| argv.iter().find_map(|a| a.strip_prefix("--log-level=").map(str::to_owned)))
        .unwrap_or_else(|| "warn".into());
    let _ = env_logger::Builder::new().parse_filters(&level).target(env_logger::Target::Stderr).try_init();
    let code = contactwav::cli::run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
