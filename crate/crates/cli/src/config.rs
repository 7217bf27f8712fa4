//! `key=value` run configuration files.
//!
//! One pair per line, `#` starts a comment, keys are flag names without the
//! leading dashes. Values are spliced into the argument list ahead of the
//! command-line flags, so flags override the file.

use crate::error::CliError;
use clap::CommandFactory;
use std::ffi::OsString;
use std::path::Path;

/// Parses the file contents into `(key, value)` pairs.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Config(format!("line {}: empty key", n + 1)));
        }
        pairs.push((key, v.trim().to_string()));
    }
    Ok(pairs)
}

/// The value of `--config`, if present.
fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Position of the subcommand token, skipping the global options.
fn subcommand_position(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if s == "--config" || s == "--threads" {
            i += 2;
        } else if s.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

/// Returns `argv` with the config file's pairs inserted right after the
/// subcommand.
pub fn merge(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", Path::new(&path).display())))?;
    let pairs = parse(&text)?;
    let Some(pos) = subcommand_position(&argv) else {
        return Ok(argv);
    };
    let root = crate::args::Cli::command();
    let name = argv[pos].to_string_lossy().into_owned();
    let Some(sub) = root.find_subcommand(&name) else {
        // let clap report the unknown subcommand
        return Ok(argv);
    };

    let mut injected: Vec<OsString> = Vec::new();
    for (key, value) in pairs {
        if key == "config" {
            return Err(CliError::Config("a config file cannot name another config file".into()));
        }
        let arg = sub
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()));
        match arg {
            Some(arg) if arg.get_action().takes_values() => {
                injected.push(format!("--{key}").into());
                injected.push(value.into());
            }
            Some(_) => {
                let on = value
                    .parse::<bool>()
                    .map_err(|_| CliError::Config(format!("{key}: expected true or false, got {value:?}")))?;
                if on {
                    injected.push(format!("--{key}").into());
                }
            }
            None => {
                // keys of other subcommands may share one file
                let known = root
                    .get_subcommands()
                    .flat_map(|c| c.get_arguments())
                    .any(|a| a.get_long() == Some(key.as_str()));
                if !known {
                    return Err(CliError::Config(format!("unknown key {key:?}")));
                }
            }
        }
    }
    let mut out = argv[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

/// Renders a resolved configuration (a flat JSON object) as `key=value`
/// lines, the format read back by [`parse`].
pub fn to_lines(config: &serde_json::Value) -> String {
    let mut out = String::new();
    if let Some(map) = config.as_object() {
        for (k, v) in map {
            let v = match v {
                serde_json::Value::Null => continue,
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&format!("{k}={v}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let p = parse("# header\na = 0.75\n\nmax_iter=10 # trailing\n--mu=2\n").unwrap();
        assert_eq!(
            p,
            vec![("a".into(), "0.75".into()), ("max-iter".into(), "10".into()), ("mu".into(), "2".into())]
        );
        assert!(matches!(parse("just a word"), Err(CliError::Config(_))));
        assert!(matches!(parse("=3"), Err(CliError::Config(_))));
    }

    #[test]
    fn file_values_precede_flags() {
        let dir = std::env::temp_dir().join(format!("ringwave-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, "a=0.6\nmu=2\ncsv=true\nT=3\n").unwrap();
        let argv: Vec<OsString> =
            ["ringwave", "--config", path.to_str().unwrap(), "ring", "--a", "0.8"].iter().map(Into::into).collect();
        let merged = merge(argv).unwrap();
        let merged: Vec<String> = merged.iter().map(|s| s.to_string_lossy().into_owned()).collect();
        // T belongs to evolve and is skipped for ring
        assert_eq!(&merged[3..], ["ring", "--a", "0.6", "--mu", "2", "--csv", "--a", "0.8"]);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn renders_lines() {
        let v = serde_json::json!({"a": 0.75, "rule": "subtract", "c-a": null, "nr": 64});
        assert_eq!(to_lines(&v), "a=0.75\nnr=64\nrule=subtract\n");
    }
}
