use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::NamedTensor;
use super::NnError;

pub const FORMAT_VERSION: u32 = 1;

/// JSON model container: a kind tag, the model's own config, symbol tables
/// and the named parameter tensors in construction order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: String,
    pub config: serde_json::Value,
    pub vocab: Vec<String>,
    #[serde(default)]
    pub labels: Vec<String>,
    pub params: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, NnError> {
        let file = File::open(path).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
        let ck: Checkpoint = serde_json::from_reader(BufReader::new(file))?;
        if ck.format_version != FORMAT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "{}: unsupported format version {} (expected {FORMAT_VERSION})",
                path.display(),
                ck.format_version
            )));
        }
        Ok(ck)
    }

    pub fn expect_kind(&self, kinds: &[&str]) -> Result<(), NnError> {
        if kinds.contains(&self.kind.as_str()) {
            Ok(())
        } else {
            Err(NnError::Checkpoint(format!(
                "checkpoint holds a `{}` model, expected one of {kinds:?}",
                self.kind
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Tensor;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let ck = Checkpoint {
            format_version: FORMAT_VERSION,
            kind: "word-lm".into(),
            config: serde_json::json!({"dim": 4}),
            vocab: vec!["<unk>".into(), "<eos>".into(), "prix".into()],
            labels: vec![],
            params: vec![NamedTensor {
                name: "w".into(),
                tensor: Tensor { rows: 1, cols: 3, data: vec![0.1, -1.0 / 3.0, 1e-300] },
            }],
        };
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
        assert!(ck.expect_kind(&["rnng"]).is_err());
    }

    #[test]
    fn version_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.json");
        let err = Checkpoint::load(&missing).unwrap_err();
        assert!(err.to_string().contains("nope.json"));
        let path = dir.path().join("v.json");
        std::fs::write(&path, r#"{"format_version":9,"kind":"x","config":null,"vocab":[],"params":[]}"#).unwrap();
        assert!(Checkpoint::load(&path).unwrap_err().to_string().contains("version 9"));
    }
}
