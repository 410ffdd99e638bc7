//! `--config` files: `key = value` lines whose keys are long flag names.
//! Entries are spliced in right after the subcommand, so flags given on the
//! command line win.

use std::fs;

pub const SUBCOMMANDS: &[&str] = &["classify", "dimension", "measure", "enumerate", "dirichlet", "ubiquity", "counterexample"];

/// Flags that take no value.
const SWITCHES: &[&str] = &["csv", "coprime", "non-strict"];

pub fn parse(text: &str) -> Result<Vec<String>, String> {
    let mut args = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", n + 1))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "subcommand" || key == "config" {
            continue;
        }
        if SWITCHES.contains(&key) {
            match value {
                "true" => args.push(format!("--{key}")),
                "false" => {}
                _ => return Err(format!("config line {}: `{key}` takes true or false", n + 1)),
            }
        } else {
            args.push(format!("--{key}"));
            args.push(value.to_string());
        }
    }
    Ok(args)
}

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
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

/// The argument vector with config entries spliced in.
pub fn expand(argv: Vec<String>) -> Result<Vec<String>, String> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let extra = parse(&text)?;
    let at = argv
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.as_str()))
        .map_or(argv.len(), |i| i + 1);
    let mut out = argv[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_switches() {
        let args = parse("# demo\nratios = 2,3\ncsv = true\ncoprime = false\n").unwrap();
        assert_eq!(args, ["--ratios", "2,3", "--csv"]);
        assert!(parse("nonsense").is_err());
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = std::env::temp_dir().join(format!("mixdio-config-{}", std::process::id()));
        fs::write(&dir, "tau = 3/2\n").unwrap();
        let argv: Vec<String> = ["mixdio", "dimension", "--config", dir.to_str().unwrap(), "--tau", "1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let out = expand(argv).unwrap();
        assert_eq!(&out[1..4], ["dimension", "--tau", "3/2"]);
        assert_eq!(out.last().unwrap(), "1");
        fs::remove_file(dir).unwrap();
    }
}
