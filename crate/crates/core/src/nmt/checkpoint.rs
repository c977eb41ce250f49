//! Versioned binary model container.
//!
//! All integers are little-endian.
//!
//! ```text
//! magic     8 bytes  "GRANNMT\0"
//! version   u32      1
//! config    u32 length + UTF-8 `key=value` lines
//! src vocab u32 length + UTF-8 vocabulary file
//! tgt vocab u32 length + UTF-8 vocabulary file
//! count     u32      number of tensors
//! tensor    u32 name length + UTF-8 name, u64 rows, u64 cols, rows*cols f64
//! ```
//!
//! Tensors appear in [`NmtParams::tensors`] order and must match the shapes
//! implied by the config block.

use std::path::Path;

use super::model::{NmtConfig, NmtParams};
use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

pub const MAGIC: &[u8; 8] = b"GRANNMT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: NmtParams,
    pub source_vocab: Vocabulary,
    pub target_vocab: Vocabulary,
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

fn config_block(c: &NmtConfig) -> String {
    format!(
        "source_vocab={}\ntarget_vocab={}\ndim={}\nencoder_layers={}\ndecoder_layers={}\ninit_range={:?}\n",
        c.source_vocab, c.target_vocab, c.dim, c.encoder_layers, c.decoder_layers, c.init_range
    )
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Checkpoint {
            path: self.path.to_path_buf(),
            message: format!("{} (byte {})", message.into(), self.pos),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.fail("truncated file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn text(&mut self) -> Result<&'a str> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        std::str::from_utf8(bytes).map_err(|_| self.fail("section is not UTF-8"))
    }
}

fn parse_config(text: &str, r: &Reader<'_>) -> Result<NmtConfig> {
    let mut fields = std::collections::BTreeMap::new();
    for line in text.lines() {
        let (k, v) = line.split_once('=').ok_or_else(|| r.fail(format!("bad config line {line:?}")))?;
        if fields.insert(k, v).is_some() {
            return Err(r.fail(format!("duplicate config key {k}")));
        }
    }
    let mut get = |k: &str| fields.remove(k).ok_or_else(|| r.fail(format!("missing config key {k}")));
    let int = |v: &str, k: &str| v.parse::<usize>().map_err(|_| r.fail(format!("bad value for {k}: {v:?}")));
    let config = NmtConfig {
        source_vocab: int(get("source_vocab")?, "source_vocab")?,
        target_vocab: int(get("target_vocab")?, "target_vocab")?,
        dim: int(get("dim")?, "dim")?,
        encoder_layers: int(get("encoder_layers")?, "encoder_layers")?,
        decoder_layers: int(get("decoder_layers")?, "decoder_layers")?,
        init_range: {
            let v = get("init_range")?;
            v.parse().map_err(|_| r.fail(format!("bad value for init_range: {v:?}")))?
        },
    };
    if let Some(k) = fields.keys().next() {
        return Err(r.fail(format!("unknown config key {k}")));
    }
    Ok(config)
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_bytes(&mut out, config_block(&self.params.config).as_bytes());
        put_bytes(&mut out, self.source_vocab.to_file_string().as_bytes());
        put_bytes(&mut out, self.target_vocab.to_file_string().as_bytes());
        let tensors = self.params.tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, m) in tensors {
            put_bytes(&mut out, name.as_bytes());
            out.extend_from_slice(&(m.rows as u64).to_le_bytes());
            out.extend_from_slice(&(m.cols as u64).to_le_bytes());
            for v in &m.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// `path` only labels errors.
    pub fn from_bytes(buf: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { buf, pos: 0, path };
        if r.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
            return Err(Error::Checkpoint {
                path: path.to_path_buf(),
                message: "not a granulate model file".into(),
            });
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.fail(format!("unsupported version {version}, expected {VERSION}")));
        }
        let config = parse_config(r.text()?, &r)?;
        config.validate()?;
        let source_vocab = Vocabulary::parse(r.text()?, path, 1)?;
        let target_vocab = Vocabulary::parse(r.text()?, path, 1)?;
        if source_vocab.len() != config.source_vocab || target_vocab.len() != config.target_vocab {
            return Err(r.fail(format!(
                "vocabulary sizes {}/{} disagree with config {}/{}",
                source_vocab.len(),
                target_vocab.len(),
                config.source_vocab,
                config.target_vocab
            )));
        }
        let mut params = NmtParams::zeros(config)?;
        let expected: Vec<(String, usize, usize)> =
            params.tensors().iter().map(|(n, m)| (n.clone(), m.rows, m.cols)).collect();
        let count = r.u32()? as usize;
        if count != expected.len() {
            return Err(r.fail(format!("expected {} tensors, found {count}", expected.len())));
        }
        for ((name, rows, cols), m) in expected.into_iter().zip(params.tensors_mut()) {
            let found = r.text()?;
            if found != name {
                return Err(r.fail(format!("expected tensor {name}, found {found}")));
            }
            let (fr, fc) = (r.u64()? as usize, r.u64()? as usize);
            if (fr, fc) != (rows, cols) {
                return Err(r.fail(format!("tensor {name} has shape {fr}x{fc}, expected {rows}x{cols}")));
            }
            for v in m.data.iter_mut() {
                *v = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
                if !v.is_finite() {
                    return Err(r.fail(format!("non-finite value in {name}")));
                }
            }
        }
        if r.pos != buf.len() {
            return Err(r.fail("trailing bytes"));
        }
        Ok(Self {
            params,
            source_vocab,
            target_vocab,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;
    use crate::vocab::build_vocabulary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let side: Vec<Sentence> = ["a b c", "b c", "龙 年"].iter().map(|s| Sentence::new(s).unwrap()).collect();
        let v = build_vocabulary(&side, 100).unwrap();
        let config = NmtConfig {
            dim: 3,
            ..NmtConfig::desk(v.len(), v.len())
        };
        let params = NmtParams::new(config, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        Checkpoint {
            params,
            source_vocab: v.clone(),
            target_vocab: v,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..8], MAGIC);
        let back = Checkpoint::from_bytes(&bytes, Path::new("m")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_damage() {
        let bytes = sample().to_bytes();
        let p = Path::new("m");
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1], p).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra, p).is_err());
        let mut version = bytes.clone();
        version[8] = 9;
        let err = Checkpoint::from_bytes(&version, p).unwrap_err().to_string();
        assert!(err.contains("unsupported version 9"), "{err}");
        assert!(Checkpoint::from_bytes(b"hello", p).is_err());
    }
}
