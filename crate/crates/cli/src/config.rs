//! Merges a `key = value` config file into the argument list. Each key is
//! a long flag name; flags given on the command line take precedence.

use std::ffi::OsString;
use std::path::PathBuf;

use cmchoice::kv;

use crate::failure::Failure;

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn given(args: &[OsString], flag: &str) -> bool {
    let eq = format!("{flag}=");
    args.iter().any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.starts_with(&eq)
    })
}

pub fn merge(args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let doc = kv::parse(&text).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?;
    let mut out = args.clone();
    for (key, value) in doc.iter() {
        if key == "config" {
            return Err(Failure::Usage("config files cannot include other config files".into()));
        }
        let flag = format!("--{}", key.replace('_', "-"));
        if given(&args, &flag) {
            continue;
        }
        match value {
            "true" => out.push(flag.into()),
            "false" => {}
            v => {
                out.push(flag.into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn flags_override_file_values() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# defaults\nn = 50\nseed = 9\ncontrols = true\naggregate = false").unwrap();
        let p = f.path().to_str().unwrap();
        let merged = merge(os(&["cmchoice", "simulate", "--config", p, "--seed=3"])).unwrap();
        let text: Vec<String> = merged.iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert!(text.windows(2).any(|w| w == ["--n", "50"]));
        assert!(text.contains(&"--controls".to_string()));
        assert!(!text.contains(&"--aggregate".to_string()));
        assert!(!text.contains(&"--seed".to_string()));
    }

    #[test]
    fn without_config_args_pass_through() {
        let args = os(&["cmchoice", "check", "--quick"]);
        assert_eq!(merge(args.clone()).unwrap(), args);
    }
}
