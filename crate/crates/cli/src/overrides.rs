use std::ffi::OsString;

use eleatt::KvConfig;

use crate::common::UsageError;

const PREFIXES: [&str; 2] = ["model.", "train."];

/// Pulls `--model.<key> <value>` and `--train.<key> <value>` (or the
/// `--key=value` form) out of the argument list before clap sees it.
pub fn split_args(args: impl IntoIterator<Item = OsString>) -> anyhow::Result<(Vec<OsString>, KvConfig)> {
    let mut rest = Vec::new();
    let mut kv = KvConfig::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.to_str().and_then(|s| s.strip_prefix("--")) else {
            rest.push(arg);
            continue;
        };
        if flag.is_empty() {
            // Everything after `--` is positional.
            rest.push(arg);
            rest.extend(it.by_ref());
            break;
        }
        if !PREFIXES.iter().any(|p| flag.starts_with(p)) {
            rest.push(arg);
            continue;
        }
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let value = it
                    .next()
                    .and_then(|v| v.into_string().ok())
                    .ok_or_else(|| UsageError::new(format!("`--{flag}` needs a value")))?;
                (flag.to_string(), value)
            }
        };
        kv.try_set(&key, &value).map_err(|e| UsageError::new(e.to_string()))?;
    }
    Ok((rest, kv))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(args: &[&str]) -> (Vec<String>, KvConfig) {
        let (rest, kv) = split_args(args.iter().map(OsString::from)).unwrap();
        (rest.into_iter().map(|s| s.into_string().unwrap()).collect(), kv)
    }

    #[test]
    fn dotted_flags_are_extracted() {
        let (rest, kv) = split(&[
            "eleatt",
            "train",
            "--train.lr",
            "0.01",
            "--out",
            "r",
            "--model.layers.0.hidden=8",
        ]);
        assert_eq!(rest, ["eleatt", "train", "--out", "r"]);
        assert_eq!(kv.get("train.lr"), Some("0.01"));
        assert_eq!(kv.get("model.layers.0.hidden"), Some("8"));
    }

    #[test]
    fn missing_value_is_a_usage_error() {
        assert!(split_args(["eleatt", "train", "--train.lr"].map(OsString::from)).is_err());
    }

    #[test]
    fn double_dash_stops_extraction() {
        let (rest, kv) = split(&["eleatt", "--", "--train.lr", "1"]);
        assert_eq!(rest.len(), 4);
        assert!(kv.is_empty());
    }
}
