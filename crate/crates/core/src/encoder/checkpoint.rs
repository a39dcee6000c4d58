//! Checkpoint files: a UTF-8 header followed by raw little-endian `f32`
//! tensor data.
//!
//! ```text
//! ADRCKPT 1
//! task = classify
//! d_model = 128
//! ...
//! vocab_fingerprint = <hex sha-256>
//! concept = <code>\t<term>        (one line per concept, in head order)
//! tensor tok_emb 8000 128         (one line per tensor, in data order)
//! ...
//! end
//! <data>
//! ```

use std::path::Path;

use super::{EncoderConfig, ModelParams};
use crate::error::{Error, Result};
use crate::train::Task;
use crate::tsv;

pub const CHECKPOINT_MAGIC: &str = "ADRCKPT 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub task: Task,
    pub config: EncoderConfig,
    pub vocab_fingerprint: String,
    /// `(code, term)` per concept-head output.
    pub concepts: Vec<(String, String)>,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut head = format!("{CHECKPOINT_MAGIC}\ntask = {}\n", self.task);
        for (k, v) in [
            ("d_model", c.d_model.to_string()),
            ("n_layers", c.n_layers.to_string()),
            ("n_heads", c.n_heads.to_string()),
            ("ffn", c.ffn.to_string()),
            ("max_len", c.max_len.to_string()),
            ("vocab_size", c.vocab_size.to_string()),
            ("dropout", c.dropout.to_string()),
            ("n_concepts", c.n_concepts.to_string()),
            ("vocab_fingerprint", self.vocab_fingerprint.clone()),
        ] {
            head.push_str(&format!("{k} = {v}\n"));
        }
        for (code, term) in &self.concepts {
            head.push_str(&format!("concept = {}\t{}\n", tsv::escape(code), tsv::escape(term)));
        }
        let tensors = self.params.tensors();
        for t in &tensors {
            let dims: Vec<String> = t.shape.iter().map(usize::to_string).collect();
            head.push_str(&format!("tensor {} {}\n", t.name, dims.join(" ")));
        }
        head.push_str("end\n");
        let mut out = head.into_bytes();
        for t in &tensors {
            for &v in t.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::format(path, line, msg);
        let end_marker = b"\nend\n";
        let split = bytes
            .windows(end_marker.len())
            .position(|w| w == end_marker)
            .ok_or_else(|| Error::Checkpoint(format!("{}: missing header terminator", path.display())))?;
        let header = std::str::from_utf8(&bytes[..split])
            .map_err(|_| Error::Checkpoint(format!("{}: header is not UTF-8", path.display())))?;
        let data = &bytes[split + end_marker.len()..];

        let mut lines = header.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, CHECKPOINT_MAGIC)) => {}
            _ => return Err(Error::Checkpoint(format!("{}: not a checkpoint file", path.display()))),
        }
        let mut fields = std::collections::BTreeMap::new();
        let mut concepts = Vec::new();
        let mut manifest = Vec::new();
        for (no, line) in lines {
            if let Some(rest) = line.strip_prefix("tensor ") {
                let mut parts = rest.split(' ');
                let name = parts.next().unwrap_or_default().to_string();
                let shape = parts
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad(no, format!("bad tensor line `{line}`")))?;
                manifest.push((name, shape));
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| bad(no, format!("expected `key = value`, found `{line}`")))?;
            if k == "concept" {
                let (code, term) = v.split_once('\t').ok_or_else(|| bad(no, "concept needs code and term".into()))?;
                concepts.push((tsv::unescape(code), tsv::unescape(term)));
            } else if fields.insert(k.to_string(), (no, v.to_string())).is_some() {
                return Err(bad(no, format!("duplicate key `{k}`")));
            }
        }
        let mut get = |k: &str| {
            fields
                .remove(k)
                .ok_or_else(|| Error::Checkpoint(format!("{}: missing `{k}`", path.display())))
        };
        fn num<T: std::str::FromStr>(path: &Path, (no, v): (usize, String)) -> Result<T> {
            v.parse().map_err(|_| Error::format(path, no, format!("bad number `{v}`")))
        }
        let (tno, task) = get("task")?;
        let task = Task::parse(&task).ok_or_else(|| bad(tno, format!("unknown task `{task}`")))?;
        let config = EncoderConfig {
            d_model: num(path, get("d_model")?)?,
            n_layers: num(path, get("n_layers")?)?,
            n_heads: num(path, get("n_heads")?)?,
            ffn: num(path, get("ffn")?)?,
            max_len: num(path, get("max_len")?)?,
            vocab_size: num(path, get("vocab_size")?)?,
            dropout: num(path, get("dropout")?)?,
            n_concepts: num(path, get("n_concepts")?)?,
        };
        let vocab_fingerprint = get("vocab_fingerprint")?.1;
        if let Some((k, (no, _))) = fields.into_iter().next() {
            return Err(bad(no, format!("unknown key `{k}`")));
        }
        config
            .validate()
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if concepts.len() != config.n_concepts {
            return Err(Error::Checkpoint(format!(
                "{}: {} concepts listed for a head of {}",
                path.display(),
                concepts.len(),
                config.n_concepts
            )));
        }

        let mut params = ModelParams::init(&config, 0)?;
        let expected: Vec<(String, Vec<usize>)> = params.tensors().into_iter().map(|t| (t.name, t.shape)).collect();
        if manifest != expected {
            return Err(Error::Checkpoint(format!(
                "{}: tensor manifest does not match the encoder config",
                path.display()
            )));
        }
        let total = params.n_scalars();
        if data.len() != total * 4 {
            return Err(Error::Checkpoint(format!(
                "{}: expected {} bytes of tensor data, found {}",
                path.display(),
                total * 4,
                data.len()
            )));
        }
        let mut values = data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
        for t in params.tensors_mut() {
            for (slot, v) in t.data.iter_mut().zip(&mut values) {
                if !v.is_finite() {
                    return Err(Error::Checkpoint(format!("{}: non-finite value in {}", path.display(), t.name)));
                }
                *slot = v;
            }
        }
        Ok(Checkpoint {
            task,
            config,
            vocab_fingerprint,
            concepts,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(path, &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let config = EncoderConfig {
            d_model: 8,
            n_layers: 1,
            n_heads: 2,
            ffn: 16,
            max_len: 10,
            vocab_size: 270,
            dropout: 0.2,
            n_concepts: 2,
        };
        Checkpoint {
            task: Task::Normalize,
            params: ModelParams::init(&config, 11).unwrap(),
            config,
            vocab_fingerprint: "abc123".into(),
            concepts: vec![("10033371".into(), "pain".into()), ("10019211".into(), "head\tache".into())],
        }
    }

    #[test]
    fn round_trip_rounds_to_f32() {
        let c = sample();
        let bytes = c.to_bytes();
        let d = Checkpoint::from_bytes(Path::new("x"), &bytes).unwrap();
        assert_eq!(d.config, c.config);
        assert_eq!(d.concepts, c.concepts);
        assert_eq!(d.task, Task::Normalize);
        for (a, b) in c.params.tensors().iter().zip(d.params.tensors()) {
            for (x, y) in a.data.iter().zip(b.data) {
                assert_eq!(*x as f32 as f64, *y);
            }
        }
        assert_eq!(d.to_bytes(), bytes);
    }

    #[test]
    fn rejects_damage() {
        let bytes = sample().to_bytes();
        let p = Path::new("x");
        assert!(Checkpoint::from_bytes(p, &bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(p, b"nope").is_err());
        let edit = |f: &dyn Fn(&str) -> String| {
            let pos = bytes.windows(5).position(|w| w == b"\nend\n").unwrap();
            let mut out = f(std::str::from_utf8(&bytes[..pos]).unwrap()).into_bytes();
            out.extend_from_slice(&bytes[pos..]);
            out
        };
        assert!(Checkpoint::from_bytes(p, &edit(&|h| h.to_string())).is_ok());
        assert!(Checkpoint::from_bytes(p, &edit(&|h| h.replace("d_model = 8", "d_model = 4"))).is_err());
        assert!(Checkpoint::from_bytes(p, &edit(&|h| h.replacen("task = ", "color = red\ntask = ", 1))).is_err());
        assert!(Checkpoint::from_bytes(p, &edit(&|h| h.replace("task = normalize", "task = dance"))).is_err());
    }
}
