//! `--config` support: TOML values become flags placed right after the
//! subcommand, so flags given on the command line override them.
//!
//! Top-level keys apply to every subcommand; a table named after the
//! subcommand applies to it alone. Keys use flag names (`min_points` or
//! `min-points`). `true` sets a switch, `false` omits it, arrays are joined
//! with commas.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Context;
use toml::{Table, Value};

use crate::usage;

fn config_path(args: &[OsString]) -> anyhow::Result<Option<PathBuf>> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let v = it.next().ok_or_else(|| usage("--config needs a file"))?;
            return Ok(Some(PathBuf::from(v)));
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Ok(Some(PathBuf::from(v)));
        }
    }
    Ok(None)
}

fn scalar(key: &str, v: &Value) -> anyhow::Result<String> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Integer(i) => i.to_string(),
        Value::Float(f) => f.to_string(),
        _ => return Err(usage(format!("config key `{key}` has an unsupported value"))),
    })
}

fn push_entry(out: &mut Vec<OsString>, key: &str, v: &Value) -> anyhow::Result<()> {
    if key == "config" {
        return Ok(());
    }
    let flag = format!("--{}", key.replace('_', "-"));
    match v {
        Value::Boolean(true) => out.push(flag.into()),
        Value::Boolean(false) => {}
        Value::Array(items) => {
            let parts = items
                .iter()
                .map(|i| scalar(key, i))
                .collect::<anyhow::Result<Vec<_>>>()?;
            out.push(flag.into());
            out.push(parts.join(",").into());
        }
        other => {
            out.push(flag.into());
            out.push(scalar(key, other)?.into());
        }
    }
    Ok(())
}

pub(crate) fn inject(mut args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    if args.len() < 2 {
        return Ok(args);
    }
    let Some(path) = config_path(&args[2..])? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let table: Table = text
        .parse()
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let sub = args[1].to_string_lossy().into_owned();
    let mut tokens = Vec::new();
    for (k, v) in &table {
        if !v.is_table() {
            push_entry(&mut tokens, k, v)?;
        }
    }
    if let Some(Value::Table(t)) = table.get(&sub) {
        for (k, v) in t {
            push_entry(&mut tokens, k, v)?;
        }
    }
    args.splice(2..2, tokens);
    Ok(args)
}
