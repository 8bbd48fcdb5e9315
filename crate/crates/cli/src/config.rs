//! Plain-text `key = value` run files.
//!
//! Keys are the long flag names of the subcommand. Flags given on the
//! command line win over file entries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Entries in file order. Blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("line {}: expected key = value, found `{line}`", i + 1));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(format!("line {}: bad key `{k}`", i + 1));
        }
        if out.iter().any(|(seen, _): &(String, String)| seen == k) {
            return Err(format!("line {}: duplicate key `{k}`", i + 1));
        }
        out.push((k.replace('_', "-"), v.to_string()));
    }
    Ok(out)
}

pub fn to_map(entries: Vec<(String, String)>) -> BTreeMap<String, String> {
    entries.into_iter().collect()
}

/// Sorted `key = value` lines.
pub fn render(map: &BTreeMap<String, String>) -> String {
    let mut s = String::new();
    for (k, v) in map {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

/// The `--config` path among the arguments, if any.
pub fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Append file entries whose flag is absent from `args`. A value of `true`
/// becomes a bare switch and `false` is dropped. The key `command` is
/// checked against the subcommand on the command line.
pub fn merge(args: &[String], entries: &[(String, String)]) -> Result<Vec<String>, String> {
    let present: Vec<&str> = args
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split_once('=').map_or(a, |(k, _)| k))
        .collect();
    let mut out = args.to_vec();
    for (k, v) in entries {
        if k == "command" {
            if !args.iter().skip(1).any(|a| a == v) {
                return Err(format!("config is for subcommand `{v}`"));
            }
            continue;
        }
        if k == "config" || present.contains(&k.as_str()) {
            continue;
        }
        match v.as_str() {
            "true" => out.push(format!("--{k}")),
            "false" => {}
            _ => out.push(format!("--{k}={v}")),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn parses_and_reports_lines() {
        let e = parse("# run\nalpha = 1\n\na=1,2\n").unwrap();
        assert_eq!(e, vec![("alpha".into(), "1".into()), ("a".into(), "1,2".into())]);
        let err = parse("alpha = 1\nnonsense\n").unwrap_err();
        assert!(err.starts_with("line 2:"), "{err}");
        assert!(parse("a=1\na=2").unwrap_err().contains("duplicate"));
    }

    #[test]
    fn flags_win_over_file() {
        let args = s(&["lagsol", "expander", "--alpha=2", "--config", "f"]);
        let entries = parse("alpha = 1\na = 1,1\nply = true\nmesh = false\ny_max = 4").unwrap();
        let merged = merge(&args, &entries).unwrap();
        assert_eq!(
            merged,
            s(&["lagsol", "expander", "--alpha=2", "--config", "f", "--a=1,1", "--ply", "--y-max=4"])
        );
        assert_eq!(config_path(&args).as_deref(), Some("f"));
    }

    #[test]
    fn command_key_must_match() {
        let args = s(&["lagsol", "periodic"]);
        assert!(merge(&args, &[("command".into(), "expander".into())]).is_err());
        assert!(merge(&args, &[("command".into(), "periodic".into())]).is_ok());
    }
}
