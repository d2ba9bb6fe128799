//! Flat `key=value` config files whose keys are long flag names.
//!
//! ```text
//! # experiment defaults
//! detector = page-hinkley
//! lambda = 0.6
//! incremental = true
//! ```
//!
//! Values from the file are spliced into the argument list right after the
//! subcommand, skipping keys that are also given as flags, so flags always
//! win. `key = true` becomes a bare `--key`; `key = false` is dropped.
//! Underscores in keys are read as dashes.

use std::ffi::OsString;
use std::path::Path;

use crate::CliError;

pub const SUBCOMMANDS: [&str; 5] = ["run", "generate", "gridsearch", "matrix", "inspect"];

pub fn parse_config(text: &str, origin: &Path) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "{}:{}: expected key=value, got `{line}`",
                origin.display(),
                n + 1
            )));
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(CliError::Usage(format!(
                "{}:{}: invalid key `{key}`",
                origin.display(),
                n + 1
            )));
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

/// Value of `--config` in raw arguments, if any.
pub fn find_config_flag(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn given_on_command_line(args: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_eq = format!("--{key}=");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&with_eq)
    })
}

/// Splices config-file pairs into `args` after the subcommand name.
pub fn merge(args: Vec<OsString>, pairs: &[(String, String)]) -> Vec<OsString> {
    let Some(pos) = args
        .iter()
        .skip(1)
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .map(|p| p + 1)
    else {
        return args;
    };
    let mut injected = Vec::new();
    for (key, value) in pairs {
        if given_on_command_line(&args, key) {
            continue;
        }
        match value.as_str() {
            "true" => injected.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                injected.push(OsString::from(format!("--{key}")));
                injected.push(OsString::from(value));
            }
        }
    }
    let mut out = args[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[pos + 1..]);
    out
}
