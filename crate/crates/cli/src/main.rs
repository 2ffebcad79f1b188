//! `shadowcone` command-line driver.
//!
//! Pipeline: `preprocess` a raw edge TSV, `split` it into train/valid/test,
//! `train` an embedding, then `eval`, `export` or `plot` the checkpoint.
//! Any flag can also come from a flat `key=value` file passed with
//! `--config`; flags given on the command line win.

mod args;
mod commands;
mod outputs;
mod plot;

use std::ffi::OsString;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use shadowcone::kv::KvMap;

use args::Cli;

/// Expands `--config FILE` into `--key=value` flags placed right after the
/// subcommand, so that later command-line flags override them.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut i = 0;
    while i < strs.len() {
        if strs[i] == "--config" && i + 1 < strs.len() {
            path = Some(strs[i + 1].clone());
            i += 2;
            continue;
        }
        if let Some(p) = strs[i].strip_prefix("--config=") {
            path = Some(p.to_string());
            i += 1;
            continue;
        }
        rest.push(argv[i].clone());
        i += 1;
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let kv = KvMap::parse(&text).with_context(|| format!("parsing config {path}"))?;
    let flags: Vec<OsString> = kv
        .0
        .iter()
        .map(|(k, v)| (k.replace('_', "-"), v))
        .flat_map(|(k, v)| match v.as_str() {
            "true" => vec![OsString::from(format!("--{k}"))],
            "false" => vec![],
            _ => vec![OsString::from(format!("--{k}={v}"))],
        })
        .collect();
    // argv[0], global flags..., subcommand, file flags, command-line flags
    let mut out = rest;
    let at = out
        .iter()
        .position(|a| args::SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .map_or(out.len(), |i| i + 1);
    out.splice(at..at, flags);
    Ok(out)
}

fn run() -> Result<()> {
    let argv = expand_config(std::env::args_os().collect())?;
    let cli = Cli::parse_from(argv);
    env_logger::Builder::new()
        .filter_level(match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        })
        .parse_default_env()
        .init();
    commands::dispatch(cli.command)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
