use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use relop::config::{Config, KEYS};
use relop::pipeline::{run_stage, STAGES};
use relop::Error;

/// Relative opinion pipeline.
///
/// Stages: synth, ingest, hashtag-net, label-tweets, train, embed, aggregate,
/// predict, sweep, metrics, plot, verify, or `all` for the full chain.
/// `config print` writes the effective configuration.
#[derive(Parser, Debug)]
#[command(name = "relop", version, after_help = key_help())]
struct Cli {
    /// Stage to run.
    stage: String,
    /// Config file of `key = value` lines.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// `--key value` overrides, applied after the config file.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
    rest: Vec<String>,
}

fn key_help() -> String {
    let mut s = String::from("Config keys:\n");
    for k in KEYS {
        s.push_str(&format!("  {:<20} {:<12} {}\n", k.name, k.default, k.help));
    }
    s
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) => 1,
        Error::Verification(_) => 3,
        _ => 2,
    }
}

fn build_config(cli: &Cli) -> relop::Result<(Config, Vec<String>)> {
    let mut path = cli.config.clone();
    let mut overrides = Vec::new();
    let mut positional = Vec::new();
    let mut it = cli.rest.iter();
    while let Some(arg) = it.next() {
        match arg.strip_prefix("--") {
            Some(kv) => {
                let (key, value) = match kv.split_once('=') {
                    Some((k, v)) => (k.to_string(), v.to_string()),
                    None => {
                        let v = it
                            .next()
                            .ok_or_else(|| Error::InvalidArgument(format!("--{kv} needs a value")))?;
                        (kv.to_string(), v.clone())
                    }
                };
                // `--config` may follow a positional word, as in `config print --config x`.
                if key == "config" {
                    path = Some(PathBuf::from(value));
                } else {
                    overrides.push((key, value));
                }
            }
            None => positional.push(arg.clone()),
        }
    }
    let path = path.ok_or_else(|| Error::InvalidArgument("--config <path> is required".into()))?;
    let mut cfg = Config::load(&path)?;
    for (k, v) in &overrides {
        cfg.set(k, v)?;
    }
    Ok((cfg, positional))
}

fn run(cli: &Cli) -> relop::Result<bool> {
    let (cfg, positional) = build_config(cli)?;
    if cli.stage == "config" {
        if positional != ["print"] {
            return Err(Error::InvalidArgument("usage: relop config print --config <path>".into()));
        }
        print!("{}", cfg.dump());
        return Ok(true);
    }
    if !positional.is_empty() {
        return Err(Error::InvalidArgument(format!("unexpected arguments: {}", positional.join(" "))));
    }
    if cli.stage != "all" && !STAGES.contains(&cli.stage.as_str()) {
        return Err(Error::InvalidArgument(format!(
            "unknown stage {:?}; expected one of {}, all",
            cli.stage,
            STAGES.join(", ")
        )));
    }
    let mut ok = true;
    for report in run_stage(&cli.stage, &cfg)? {
        for line in &report.lines {
            println!("{line}");
        }
        ok &= !report.failed;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("relop: verification failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("relop: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
