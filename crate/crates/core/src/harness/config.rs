use crate::error::{Error, Result};

/// Parse a `key = value` file. `#` starts a comment; blank lines are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::config("config", format!("line {}: expected `key = value`", i + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::config("config", format!("line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Worker cap from the `THREADS` environment variable; `None` when unset.
pub fn worker_threads() -> Result<Option<usize>> {
    match std::env::var("THREADS") {
        Ok(v) => parse_threads(&v).map(Some),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::config("THREADS", e.to_string())),
    }
}

fn parse_threads(v: &str) -> Result<usize> {
    match v.trim().parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(Error::config("THREADS", format!("must be a positive integer, got `{v}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let text = "# sweep\nalpha = 0.5\n\n  trials=3 # inline\nout = a=b\n";
        let kv = parse_config(text).unwrap();
        assert_eq!(
            kv,
            vec![("alpha".into(), "0.5".into()), ("trials".into(), "3".into()), ("out".into(), "a=b".into())]
        );
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_config("alpha 0.5").is_err());
        assert!(parse_config(" = 3").is_err());
    }

    #[test]
    fn thread_values() {
        assert_eq!(parse_threads("8").unwrap(), 8);
        assert!(parse_threads("0").is_err());
        assert!(parse_threads("many").is_err());
    }
}
