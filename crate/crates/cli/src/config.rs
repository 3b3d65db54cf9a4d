//! `--config` files: a JSON object keyed by command name whose values map
//! flag names to values, e.g. `{"train": {"hidden": 32, "no-crf": true}}`.
//!
//! The selected command's entries are spliced into the argument list right
//! after the command name, so anything given on the command line wins.

use serde_json::{Map, Value};
use std::ffi::OsString;
use std::path::PathBuf;

use crate::args::Command;

const GLOBAL_VALUE_FLAGS: [&str; 1] = ["--taxonomy-file"];

/// Where the `--config` value and the command name sit in `argv`.
fn locate(argv: &[OsString]) -> (Option<PathBuf>, Option<usize>) {
    let mut config = None;
    let mut command = None;
    let mut i = 1;
    while i < argv.len() {
        let arg = argv[i].to_string_lossy();
        if let Some(v) = arg.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        } else if arg == "--config" {
            config = argv.get(i + 1).map(PathBuf::from);
            i += 1;
        } else if command.is_none() {
            if GLOBAL_VALUE_FLAGS.contains(&arg.as_ref()) {
                i += 1;
            } else if !arg.starts_with('-') {
                if !Command::NAMES.contains(&arg.as_ref()) {
                    break;
                }
                command = Some(i);
            }
        }
        i += 1;
    }
    (config, command)
}

fn to_flags(command: &str, entries: &Map<String, Value>) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (key, value) in entries {
        let flag = format!("--{}", key.replace('_', "-"));
        let mut push = |v: &Value| -> Result<(), String> {
            match v {
                Value::Bool(true) => out.push(flag.clone().into()),
                Value::Bool(false) | Value::Null => {}
                Value::String(s) => out.extend([flag.clone().into(), s.into()]),
                Value::Number(n) => out.extend([flag.clone().into(), n.to_string().into()]),
                _ => return Err(format!("config {command}.{key}: unsupported value {v}")),
            }
            Ok(())
        };
        match value {
            Value::Array(items) => items.iter().try_for_each(&mut push)?,
            v => push(v)?,
        }
    }
    Ok(out)
}

/// Parse a config document and return the flags for `command`.
pub fn flags_for(text: &str, command: &str) -> Result<Vec<OsString>, String> {
    let doc: Value = serde_json::from_str(text).map_err(|e| format!("config: {e}"))?;
    let Value::Object(sections) = doc else {
        return Err("config: expected a JSON object keyed by command".into());
    };
    for key in sections.keys() {
        if !Command::NAMES.contains(&key.as_str()) {
            return Err(format!(
                "config: unknown command {key:?} (expected one of {})",
                Command::NAMES.join(", ")
            ));
        }
    }
    match sections.get(command) {
        None => Ok(Vec::new()),
        Some(Value::Object(entries)) => to_flags(command, entries),
        Some(_) => Err(format!("config: section {command:?} must be an object")),
    }
}

/// `argv` with the config file's flags for the chosen command spliced in.
/// `env_config` is used when no `--config` flag is present.
pub fn expand(argv: Vec<OsString>, env_config: Option<PathBuf>) -> Result<Vec<OsString>, String> {
    let (flag_config, command_at) = locate(&argv);
    let (Some(path), Some(at)) = (flag_config.or(env_config), command_at) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("config {}: {e}", path.display()))?;
    let command = argv[at].to_string_lossy().into_owned();
    let flags = flags_for(&text, &command).map_err(|e| format!("{}: {e}", path.display()))?;
    log::debug!("config {} adds {flags:?}", path.display());
    let mut out = argv;
    out.splice(at + 1..at + 1, flags);
    Ok(out)
}
