//! `--config <path>`: a JSON object whose keys mirror long flag names.
//! Its entries are inserted right after the subcommand words so that flags
//! given on the command line, which come later, take precedence.

use std::ffi::OsString;
use std::fs;

use serde_json::Value;

pub fn splice_config(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy().into_owned();
        if text == "--config" {
            path = Some(iter.next().ok_or("--config needs a path")?);
        } else if let Some(p) = text.strip_prefix("--config=") {
            path = Some(OsString::from(p));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let raw = fs::read_to_string(&path).map_err(|e| format!("cannot read config {}: {e}", path.to_string_lossy()))?;
    let json: Value = serde_json::from_str(&raw).map_err(|e| format!("config is not valid JSON: {e}"))?;
    let Value::Object(map) = json else {
        return Err("config must be a JSON object of flag names to values".into());
    };
    let mut tokens = Vec::new();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            Value::Bool(true) => tokens.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                tokens.push(flag);
                tokens.push(items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?.join(","));
            }
            other => {
                tokens.push(flag);
                tokens.push(scalar(&other)?);
            }
        }
    }
    // program name, then subcommand words up to the first flag
    let insert_at = 1 + rest.iter().skip(1).take_while(|a| !a.to_string_lossy().starts_with('-')).count();
    let tail = rest.split_off(insert_at);
    rest.extend(tokens.into_iter().map(OsString::from));
    rest.extend(tail);
    Ok(rest)
}

fn scalar(v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        other => Err(format!("unsupported config value {other}")),
    }
}
