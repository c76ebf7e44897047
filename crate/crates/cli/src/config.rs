//! `--config` file support: TOML values are turned into flags placed right
//! after the subcommand name, ahead of the real command-line flags, so the
//! latter override them.

use std::ffi::OsString;
use std::path::PathBuf;

use roadside::{Error, Result};
use toml::Value;

/// Remove `--config FILE` from `args` and splice in the flags it supplies.
pub(crate) fn expand(args: Vec<OsString>, cmd: &clap::Command) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config: Option<PathBuf> = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        match a.to_str() {
            Some("--") => {
                rest.push(a);
                rest.extend(it.by_ref());
                break;
            }
            Some("--config") => {
                let path = it.next().ok_or_else(|| {
                    Error::InvalidConfig("--config needs a file argument".into())
                })?;
                config = Some(path.into());
            }
            Some(s) if s.starts_with("--config=") => {
                config = Some(PathBuf::from(&s["--config=".len()..]));
            }
            _ => rest.push(a),
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };

    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        line: 0,
        message: e.to_string(),
    })?;

    // the subcommand is the first argument after the program name that is not a flag
    let Some(pos) = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 1)
    else {
        return Ok(rest);
    };
    let name = rest[pos].to_string_lossy().into_owned();
    let Some(sub) = cmd.find_subcommand(&name) else {
        return Ok(rest);
    };
    let accepted: Vec<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_owned))
        .collect();

    let mut injected = Vec::new();
    for (key, value) in &table {
        if value.is_table() {
            continue;
        }
        let flag = key.replace('_', "-");
        if accepted.contains(&flag) {
            push_flag(&mut injected, &flag, value, &path)?;
        }
    }
    if let Some(section) = table.get(&name).and_then(Value::as_table) {
        for (key, value) in section {
            push_flag(&mut injected, &key.replace('_', "-"), value, &path)?;
        }
    }

    let mut out = rest;
    out.splice(pos + 1..pos + 1, injected);
    Ok(out)
}

fn push_flag(out: &mut Vec<OsString>, flag: &str, value: &Value, path: &PathBuf) -> Result<()> {
    let bad = || Error::InvalidConfig(format!("{}: unsupported value for `{flag}`", path.display()));
    match value {
        Value::Boolean(true) => out.push(format!("--{flag}").into()),
        Value::Boolean(false) => {}
        Value::Array(items) => {
            for item in items {
                if item.is_array() || item.is_table() {
                    return Err(bad());
                }
                push_flag(out, flag, item, path)?;
            }
        }
        Value::String(s) => {
            out.push(format!("--{flag}").into());
            out.push(s.into());
        }
        Value::Integer(i) => {
            out.push(format!("--{flag}").into());
            out.push(i.to_string().into());
        }
        Value::Float(f) => {
            out.push(format!("--{flag}").into());
            out.push(f.to_string().into());
        }
        Value::Datetime(_) | Value::Table(_) => return Err(bad()),
    }
    Ok(())
}
