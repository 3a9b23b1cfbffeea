//! Stage bookkeeping: echoed configuration, stage records and lineage checks.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::run_config::RunConfig;
use crate::config::KvConfig;
use crate::error::{Error, Result};

pub const CONFIG_FILE: &str = "config.txt";
pub const STAGE_FILE: &str = "stage.txt";

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(content_hash(&bytes))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `config.txt` and `stage.txt` into `dir`.
pub fn record_stage(dir: &Path, stage: &str, cfg: &RunConfig, inputs: &[(&str, String)]) -> Result<()> {
    create_dir(dir)?;
    write_text(&dir.join(CONFIG_FILE), &cfg.effective().to_text())?;
    let mut rec = KvConfig::new();
    rec.set("stage", stage);
    rec.set("config_hash", cfg.hash());
    for (name, hash) in inputs {
        rec.set(format!("input.{name}"), hash);
    }
    write_text(&dir.join(STAGE_FILE), &rec.to_text())
}

/// The stage record of `dir`, if present.
pub fn read_stage(dir: &Path) -> Result<Option<KvConfig>> {
    let p = dir.join(STAGE_FILE);
    if !p.exists() {
        return Ok(None);
    }
    KvConfig::load(p).map(Some)
}

fn key_matches(key: &str, keys: &[&str]) -> bool {
    keys.iter().any(|k| match k.strip_suffix('.') {
        Some(_) => key.starts_with(k),
        None => key == *k,
    })
}

/// Fails when a key the upstream stage in `dir` consumed is set explicitly
/// to a different value now. Entries of `keys` ending in `.` are prefixes.
pub fn check_upstream(cfg: &RunConfig, dir: &Path, stage: &str, keys: &[&str], hint: &str) -> Result<()> {
    let p = dir.join(CONFIG_FILE);
    if !p.exists() {
        return Ok(());
    }
    let recorded = KvConfig::load(&p)?;
    for (k, v) in cfg.explicit().iter() {
        if !key_matches(k, keys) {
            continue;
        }
        let before = recorded.get_str(k).unwrap_or("<unset>");
        if before != v {
            return Err(Error::StageMismatch {
                msg: format!("{k}={v} but {stage} output in {} was produced with {k}={before}", dir.display()),
                hint: hint.to_string(),
            });
        }
    }
    Ok(())
}

pub fn lineage_mismatch(msg: String, hint: &str) -> Error {
    Error::StageMismatch {
        msg,
        hint: hint.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(pairs: &[&str]) -> RunConfig {
        let o: Vec<String> = pairs.iter().map(|s| s.to_string()).collect();
        RunConfig::build(None, None, &o).unwrap()
    }

    #[test]
    fn upstream_conflicts() {
        let dir = tempfile::tempdir().unwrap();
        record_stage(dir.path(), "gen-corpus", &cfg(&["gen.responses_per_item=40"]), &[]).unwrap();
        let rec = read_stage(dir.path()).unwrap().unwrap();
        assert_eq!(rec.get_str("stage"), Some("gen-corpus"));
        let keys = ["gen."];
        assert!(check_upstream(&cfg(&["lr=1"]), dir.path(), "gen-corpus", &keys, "h").is_ok());
        assert!(check_upstream(&cfg(&["gen.responses_per_item=40"]), dir.path(), "gen-corpus", &keys, "h").is_ok());
        let err = check_upstream(&cfg(&["gen.responses_per_item=41"]), dir.path(), "gen-corpus", &keys, "rerun").unwrap_err();
        assert!(matches!(err, Error::StageMismatch { .. }));
        assert!(err.to_string().contains("rerun"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn exact_and_prefix_keys() {
        assert!(key_matches("max_len", &["max_len"]));
        assert!(!key_matches("max_length", &["max_len"]));
        assert!(key_matches("model.ff_dim", &["model."]));
    }
}
