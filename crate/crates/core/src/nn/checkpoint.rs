use std::io::Write;
use std::path::Path;

use super::config::ModelConfig;
use super::params::ModelParams;
use crate::config::KvConfig;
use crate::error::{Error, Result};

pub const MAGIC: &str = "GSEB1";

/// Parameters plus the configuration they were built for and free-form metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub meta: KvConfig,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(config: ModelConfig, params: ModelParams) -> Self {
        Self {
            config,
            meta: KvConfig::new(),
            params,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC.as_bytes());
        out.push(b'\n');
        out.extend_from_slice(b"[config]\n");
        out.extend_from_slice(self.config.to_kv().to_text().as_bytes());
        out.extend_from_slice(b"[meta]\n");
        out.extend_from_slice(self.meta.to_text().as_bytes());
        out.extend_from_slice(b"[params]\n");
        let tensors = self.params.tensors();
        for t in &tensors {
            let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
            out.extend_from_slice(format!("{} {}\n", t.name, dims.join(" ")).as_bytes());
        }
        out.extend_from_slice(b"[data]\n");
        for t in &tensors {
            for &v in t.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut next_line = || -> Result<&str> {
            let rest = &bytes[pos..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::data("truncated checkpoint header"))?;
            let line = std::str::from_utf8(&rest[..end])
                .map_err(|_| Error::data("checkpoint header is not UTF-8"))?;
            pos += end + 1;
            Ok(line)
        };
        if next_line()? != MAGIC {
            return Err(Error::data("not a checkpoint (bad magic)"));
        }
        if next_line()? != "[config]" {
            return Err(Error::data("checkpoint missing [config] section"));
        }
        let mut section = String::new();
        let mut config_text = String::new();
        let mut meta_text = String::new();
        let mut manifest = Vec::new();
        loop {
            let line = next_line()?;
            match line {
                "[meta]" | "[params]" => section = line.to_string(),
                "[data]" => break,
                _ => match section.as_str() {
                    "" => {
                        config_text.push_str(line);
                        config_text.push('\n');
                    }
                    "[meta]" => {
                        meta_text.push_str(line);
                        meta_text.push('\n');
                    }
                    _ => {
                        let mut parts = line.split_whitespace();
                        let name = parts.next().unwrap_or_default().to_string();
                        let shape = parts
                            .map(|d| d.parse::<usize>())
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map_err(|_| Error::data(format!("bad manifest line {line:?}")))?;
                        manifest.push((name, shape));
                    }
                },
            }
        }
        let kv = KvConfig::parse(&config_text)?;
        let config = ModelConfig::from_kv(&kv, "", &ModelConfig::default())?;
        let meta = KvConfig::parse(&meta_text)?;
        let mut params = ModelParams::init(&config, 0);
        {
            let expected = params.tensors();
            if expected.len() != manifest.len() {
                return Err(Error::data("checkpoint manifest does not match its config"));
            }
            for (t, (name, shape)) in expected.iter().zip(&manifest) {
                if &t.name != name || &t.shape != shape {
                    return Err(Error::data(format!(
                        "manifest entry {name} {shape:?} does not match expected {} {:?}",
                        t.name, t.shape
                    )));
                }
            }
        }
        let data = &bytes[pos..];
        if data.len() != params.num_scalars() * 4 {
            return Err(Error::data(format!(
                "checkpoint data has {} bytes, expected {}",
                data.len(),
                params.num_scalars() * 4
            )));
        }
        let mut chunks = data.chunks_exact(4);
        for slice in params.slices_mut() {
            for v in slice.iter_mut() {
                let c = chunks.next().expect("length checked");
                *v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
            }
        }
        Ok(Self { config, meta, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Data(msg) => Error::data(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Loads and checks the encoder architecture against `expected`.
    pub fn load_for(path: impl AsRef<Path>, expected: &ModelConfig) -> Result<Self> {
        let ck = Self::load(path.as_ref())?;
        if !ck.config.same_encoder(expected) {
            return Err(Error::config(format!(
                "{} was built for a different architecture",
                path.as_ref().display()
            )));
        }
        Ok(ck)
    }
}
