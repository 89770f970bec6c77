//! Training settings from a `key=value` config file plus flag overrides.

use std::path::{Path, PathBuf};

use jmt_core::archive::{apply_model_entry, apply_train_entry, parse_key_values};
use jmt_core::model::ModelConfig;
use jmt_core::trainer::TrainConfig;

use crate::commands::CliError;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DataPaths {
    pub train_pos: Option<PathBuf>,
    pub train_chunk: Option<PathBuf>,
    pub train_dep: Option<PathBuf>,
    pub train_pairs: Option<PathBuf>,
    pub dev_pos: Option<PathBuf>,
    pub dev_chunk: Option<PathBuf>,
    pub dev_dep: Option<PathBuf>,
    pub dev_pairs: Option<PathBuf>,
    pub word_emb: Option<PathBuf>,
    pub char_emb: Option<PathBuf>,
}

impl DataPaths {
    fn slot(&mut self, key: &str) -> Option<&mut Option<PathBuf>> {
        Some(match key {
            "data.train_pos" => &mut self.train_pos,
            "data.train_chunk" => &mut self.train_chunk,
            "data.train_dep" => &mut self.train_dep,
            "data.train_pairs" => &mut self.train_pairs,
            "data.dev_pos" => &mut self.dev_pos,
            "data.dev_chunk" => &mut self.dev_chunk,
            "data.dev_dep" => &mut self.dev_dep,
            "data.dev_pairs" => &mut self.dev_pairs,
            "data.word_emb" => &mut self.word_emb,
            "data.char_emb" => &mut self.char_emb,
            _ => return None,
        })
    }

    /// Flags win over config-file values.
    pub fn overlay(&mut self, flags: &DataPaths) {
        let pairs = [
            (&mut self.train_pos, &flags.train_pos),
            (&mut self.train_chunk, &flags.train_chunk),
            (&mut self.train_dep, &flags.train_dep),
            (&mut self.train_pairs, &flags.train_pairs),
            (&mut self.dev_pos, &flags.dev_pos),
            (&mut self.dev_chunk, &flags.dev_chunk),
            (&mut self.dev_dep, &flags.dev_dep),
            (&mut self.dev_pairs, &flags.dev_pairs),
            (&mut self.word_emb, &flags.word_emb),
            (&mut self.char_emb, &flags.char_emb),
        ];
        for (dst, src) in pairs {
            if src.is_some() {
                dst.clone_from(src);
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Settings {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataPaths,
}

impl Settings {
    /// Reads a config file. Relative data paths resolve against the file's
    /// directory; `seed` sets both the model and the training seed.
    pub fn from_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let usage = |e: jmt_core::Error| CliError::Usage(e.to_string());
        let entries = parse_key_values(&text, &path.display().to_string()).map_err(usage)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut s = Settings::default();
        for (k, v) in &entries {
            if k == "seed" {
                let seed: u64 = v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("invalid seed `{v}` in config")))?;
                s.model.seed = seed;
                s.train.seed = seed;
            } else if let Some(slot) = s.data.slot(k) {
                *slot = Some(base.join(v.trim()));
            } else if !apply_model_entry(&mut s.model, k, v).map_err(usage)?
                && !apply_train_entry(&mut s.train, k, v).map_err(usage)?
            {
                return Err(CliError::Usage(format!("unknown config key `{k}` in {}", path.display())));
            }
        }
        Ok(s)
    }
}
