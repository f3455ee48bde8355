use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::nn::RunningStats;
use crate::tensor::serialize::{read_named, write_named};
use crate::tensor::{DiffTensor, Scalar};

use super::config::ArchConfig;
use super::network::Model;
use super::ModelError;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const WEIGHTS_FILE: &str = "weights.bin";
const FORMAT: &str = "pulseforge-checkpoint-1";

/// Provenance stored next to the weights.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epoch: usize,
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut kv = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key=value, got {line:?}", i + 1))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(kv)
}

impl<T: Scalar> Model<T> {
    /// Writes `manifest.txt` and `weights.bin` into `dir`, creating it.
    pub fn save(&self, dir: &Path, meta: &CheckpointMeta) -> Result<(), ModelError> {
        fs::create_dir_all(dir)?;
        let mut manifest = String::new();
        manifest.push_str(&format!("format={FORMAT}\n"));
        manifest.push_str(&format!("dtype={:?}\n", T::DTYPE).to_lowercase());
        manifest.push_str(&format!("seed={}\nepoch={}\n", meta.seed, meta.epoch));
        for (k, v) in self.config.to_kv() {
            manifest.push_str(&format!("{k}={v}\n"));
        }
        fs::write(dir.join(MANIFEST_FILE), manifest)?;

        let mut w = BufWriter::new(File::create(dir.join(WEIGHTS_FILE))?);
        for (name, p) in self.parameters() {
            write_named(&mut w, name, p)?;
        }
        for (name, bn) in self.batch_norms() {
            let stats = bn.running_stats();
            let c = stats.mean.len();
            write_named(&mut w, &format!("{name}.running_mean"), &DiffTensor::new(stats.mean, vec![c])?)?;
            write_named(&mut w, &format!("{name}.running_var"), &DiffTensor::new(stats.var, vec![c])?)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a checkpoint, checking every tensor against the stored
    /// architecture. Tensors are converted to `T` if stored in another dtype.
    pub fn load(dir: &Path) -> Result<(Self, CheckpointMeta), ModelError> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let kv = parse_kv(&text).map_err(ModelError::Checkpoint)?;
        if kv.get("format").map(String::as_str) != Some(FORMAT) {
            return Err(ModelError::Checkpoint(format!("unsupported format {:?}", kv.get("format"))));
        }
        let num = |k: &str| -> Result<u64, ModelError> {
            kv.get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| ModelError::Checkpoint(format!("missing or invalid {k}")))
        };
        let meta = CheckpointMeta { seed: num("seed")?, epoch: num("epoch")? as usize };
        let config = ArchConfig::from_kv(&kv)?;

        let mut records: BTreeMap<String, DiffTensor<f64>> = BTreeMap::new();
        let mut r = BufReader::new(File::open(dir.join(WEIGHTS_FILE))?);
        while let Some((name, t)) = read_named::<f64, _>(&mut r)? {
            if records.insert(name.clone(), t).is_some() {
                return Err(ModelError::Checkpoint(format!("duplicate tensor {name}")));
            }
        }

        let mut model = Model::<T>::new(config, 0)?;
        let mut take = |name: &str, dims: &[usize]| -> Result<Vec<f64>, ModelError> {
            let t = records.remove(name).ok_or_else(|| ModelError::Checkpoint(format!("missing tensor {name}")))?;
            if t.dims() != dims {
                return Err(ModelError::Checkpoint(format!("{name}: shape {:?}, expected {dims:?}", t.dims())));
            }
            Ok(t.to_vec())
        };
        for (name, slot) in model.parameters_mut() {
            let data = take(name, slot.dims())?;
            *slot = DiffTensor::parameter(data.into_iter().map(T::of).collect(), slot.dims().to_vec())?;
        }
        for (name, bn) in model.batch_norms() {
            let c = bn.channels();
            let mean = take(&format!("{name}.running_mean"), &[c])?;
            let var = take(&format!("{name}.running_var"), &[c])?;
            bn.set_running_stats(RunningStats { mean, var });
        }
        if let Some(extra) = records.keys().next() {
            return Err(ModelError::Checkpoint(format!("unexpected tensor {extra}")));
        }
        Ok((model, meta))
    }
}
