//! `key=value` config files, spliced into the argument list as flags placed
//! before the user's own so that the command line wins.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::CommandFactory;

use crate::Cli;

/// Returns `args` with the flags from `--config FILE` inserted right after
/// the subcommand name. Keys may use `-` or `_`; blank lines and lines
/// starting with `#` are skipped. Keys that the chosen subcommand does not
/// take are ignored, keys that no subcommand takes are an error.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let entries = read_config(Path::new(&path))?;

    let cmd = Cli::command();
    let flags_of = |c: &clap::Command| -> HashMap<String, bool> {
        c.get_arguments()
            .filter_map(|a| a.get_long().map(|l| (l.to_string(), a.get_action().takes_values())))
            .collect()
    };
    let globals = flags_of(&cmd);
    let subcommands: Vec<(String, HashMap<String, bool>)> = cmd
        .get_subcommands()
        .map(|s| (s.get_name().to_string(), flags_of(s)))
        .collect();

    for (line, key, _) in &entries {
        if key == "config" {
            bail!("{}:{line}: a config file cannot name another config file", path.to_string_lossy());
        }
        let known = globals.contains_key(key) || subcommands.iter().any(|(_, f)| f.contains_key(key));
        if !known {
            bail!("{}:{line}: unknown key {key:?}", path.to_string_lossy());
        }
    }

    let Some((pos, flags)) = args.iter().enumerate().skip(1).find_map(|(i, a)| {
        subcommands
            .iter()
            .find(|(name, _)| a.to_str() == Some(name.as_str()))
            .map(|(_, f)| (i, f))
    }) else {
        return Ok(args);
    };

    let mut injected = Vec::new();
    for (line, key, value) in entries {
        let Some(&takes_value) = flags.get(&key).or_else(|| globals.get(&key)) else {
            log::debug!("config key {key} does not apply to this command");
            continue;
        };
        if takes_value {
            injected.push(OsString::from(format!("--{key}")));
            injected.push(OsString::from(value));
        } else {
            match value.as_str() {
                "true" => injected.push(OsString::from(format!("--{key}"))),
                "false" => {}
                _ => bail!("{}:{line}: {key} expects true or false", path.to_string_lossy()),
            }
        }
    }

    let mut out = args[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(OsString::from(v));
        }
    }
    None
}

fn read_config(path: &Path) -> Result<Vec<(usize, String, String)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value", path.display(), i + 1);
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            bail!("{}:{}: empty key", path.display(), i + 1);
        }
        entries.push((i + 1, key, value.trim().to_string()));
    }
    Ok(entries)
}
