//! `key = value` config files, spliced into the argument list as long flags
//! so that anything given on the command line still wins.

use std::ffi::OsString;
use std::path::Path;

use capforge_core::{Error, Result};

/// Parse `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split_once('#').map_or(line, |(a, _)| a).trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "{} line {}: expected `key = value`",
                origin.display(),
                i + 1
            ))
        })?;
        let k = k.trim().trim_start_matches("--").replace('_', "-");
        if k.is_empty() {
            return Err(Error::Config(format!(
                "{} line {}: empty key",
                origin.display(),
                i + 1
            )));
        }
        out.push((k, v.trim().trim_matches('"').to_string()));
    }
    Ok(out)
}

/// Turn config pairs into flags. `true` becomes a bare switch, `false` is
/// dropped.
pub fn to_flags(pairs: &[(String, String)]) -> Vec<OsString> {
    pairs
        .iter()
        .filter_map(|(k, v)| match v.as_str() {
            "true" => Some(format!("--{k}")),
            "false" => None,
            _ => Some(format!("--{k}={v}")),
        })
        .map(OsString::from)
        .collect()
}

/// Index of the subcommand token, skipping global options before it.
pub fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        if a == "--config" {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

/// Insert `flags` right after the subcommand token.
pub fn splice(argv: &[OsString], flags: Vec<OsString>) -> Vec<OsString> {
    match subcommand_index(argv) {
        Some(i) => {
            let mut out = argv[..=i].to_vec();
            out.extend(flags);
            out.extend_from_slice(&argv[i + 1..]);
            out
        }
        None => argv.to_vec(),
    }
}
