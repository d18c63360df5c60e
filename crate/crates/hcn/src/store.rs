//! Models and datasets on disk.
//!
//! A model directory holds `model.json` (architecture, parameters and the
//! weight file of every layer) and one `HCNW1` file per layer. A dataset
//! directory holds `dataset.json` plus one bitmap (or tensor directory for
//! multichannel images) per image.

use std::fs;
use std::path::{Path, PathBuf};

use hcn_core::data::Dataset;
use hcn_core::learn::TrainedModel;
use hcn_core::{BinaryTensor3, BinaryTensor4};
use serde::{Deserialize, Serialize};

use crate::config::{ArchConfig, DataConfig, HyperConfig};
use crate::error::{Error, Result};
use crate::experiment::Data;
use crate::formats::{read_image, read_json, read_weights, write_json, write_tensor_dir, write_weights};
use crate::pbm::{write_pbm, PbmEncoding};

pub const MODEL_FILE: &str = "model.json";
pub const DATASET_FILE: &str = "dataset.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub arch: ArchConfig,
    pub hyper: HyperConfig,
    pub seed: u64,
    /// Weight files, bottom layer first, relative to the directory.
    pub weights: Vec<String>,
}

pub fn save_model(dir: &Path, model: &TrainedModel) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let files: Vec<String> = (0..model.weights.len()).map(|l| format!("layer{l}.hcnw")).collect();
    for (f, w) in files.iter().zip(&model.weights) {
        write_weights(&dir.join(f), w)?;
    }
    let m = ModelManifest {
        arch: ArchConfig::from_arch(&model.arch),
        hyper: HyperConfig::from_hyper(&model.hyper),
        seed: model.hyper.seed,
        weights: files,
    };
    write_json(&dir.join(MODEL_FILE), &m)
}

pub fn load_model(dir: &Path) -> Result<TrainedModel> {
    let m: ModelManifest = read_json(&dir.join(MODEL_FILE))?;
    let arch = m.arch.to_arch()?;
    let hyper = m.hyper.to_hyper(m.seed);
    hyper.validate(&arch)?;
    let weights = m.weights.iter().map(|f| read_weights(&dir.join(f))).collect::<Result<Vec<BinaryTensor4>>>()?;
    Ok(TrainedModel::new(arch, weights, hyper)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    /// Image paths relative to the dataset directory.
    pub images: Vec<String>,
    #[serde(default)]
    pub labels: Option<Vec<usize>>,
    #[serde(default)]
    pub templates: Option<Vec<usize>>,
    /// Noise-free versions of the images.
    #[serde(default)]
    pub clean: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub seed: u64,
    /// The generator that produced the data, for the record.
    #[serde(default)]
    pub source: Option<DataConfig>,
    pub train: SplitManifest,
    #[serde(default)]
    pub test: Option<SplitManifest>,
    /// Generating weight files, bottom layer first.
    #[serde(default)]
    pub planted: Option<Vec<String>>,
}

fn write_image(dir: &Path, stem: &str, x: &BinaryTensor3) -> Result<String> {
    if x.dims()[0] == 1 {
        let name = format!("{stem}.pbm");
        write_pbm(&dir.join(&name), x, PbmEncoding::Raw)?;
        Ok(name)
    } else {
        write_tensor_dir(&dir.join(stem), x)?;
        Ok(stem.to_string())
    }
}

fn save_split(dir: &Path, name: &str, d: &Dataset) -> Result<SplitManifest> {
    let sub = dir.join(name);
    fs::create_dir_all(&sub).map_err(Error::io(&sub))?;
    let prefixed = |f: String| format!("{name}/{f}");
    let images = d
        .images
        .iter()
        .enumerate()
        .map(|(i, x)| write_image(&sub, &format!("{i:05}"), x).map(prefixed))
        .collect::<Result<Vec<_>>>()?;
    let clean = match &d.clean {
        Some(c) => Some(
            c.iter()
                .enumerate()
                .map(|(i, x)| write_image(&sub, &format!("{i:05}-clean"), x).map(prefixed))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok(SplitManifest { images, labels: d.labels.clone(), templates: d.templates.clone(), clean })
}

/// Writes both splits and the generating weights under `dir`.
pub fn save_dataset(dir: &Path, data: &Data, seed: u64, source: Option<&DataConfig>) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let train = save_split(dir, "train", &data.train)?;
    let test = data.test.as_ref().map(|t| save_split(dir, "test", t)).transpose()?;
    let planted = match &data.train.planted {
        Some(ws) => {
            let files: Vec<String> = (0..ws.len()).map(|l| format!("planted{l}.hcnw")).collect();
            for (f, w) in files.iter().zip(ws) {
                write_weights(&dir.join(f), w)?;
            }
            Some(files)
        }
        None => None,
    };
    let m = DatasetManifest { seed, source: source.cloned(), train, test, planted };
    write_json(&dir.join(DATASET_FILE), &m)
}

fn load_split(dir: &Path, m: &SplitManifest, planted: &Option<Vec<BinaryTensor4>>) -> Result<Dataset> {
    let read = |files: &[String]| files.iter().map(|f| read_image(&dir.join(f))).collect::<Result<Vec<_>>>();
    let d = Dataset {
        images: read(&m.images)?,
        labels: m.labels.clone(),
        templates: m.templates.clone(),
        clean: m.clean.as_deref().map(read).transpose()?,
        planted: planted.clone(),
    };
    d.validate(None)?;
    Ok(d)
}

/// Reads a dataset directory written by [`save_dataset`]. `path` may name
/// the directory or its manifest.
pub fn load_dataset(path: &Path) -> Result<Data> {
    let (dir, manifest): (PathBuf, PathBuf) = if path.is_dir() {
        (path.to_path_buf(), path.join(DATASET_FILE))
    } else {
        (path.parent().unwrap_or(Path::new(".")).to_path_buf(), path.to_path_buf())
    };
    let m: DatasetManifest = read_json(&manifest)?;
    let planted = m
        .planted
        .as_ref()
        .map(|fs| fs.iter().map(|f| read_weights(&dir.join(f))).collect::<Result<Vec<_>>>())
        .transpose()?;
    let train = load_split(&dir, &m.train, &planted)?;
    let test = m.test.as_ref().map(|t| load_split(&dir, t, &planted)).transpose()?;
    Ok(Data { train, test })
}

/// All features of a weight tensor side by side, one row per input
/// channel, separated by one blank pixel.
pub fn feature_grid(w: &BinaryTensor4) -> Result<BinaryTensor3> {
    let [a, f, h, ww] = w.dims();
    let (gh, gw) = (a * (h + 1) + 1, f * (ww + 1) + 1);
    Ok(BinaryTensor3::from_fn(1, gh, gw, |_, r, c| {
        let (ai, dr) = (r / (h + 1), r % (h + 1));
        let (fi, dc) = (c / (ww + 1), c % (ww + 1));
        dr > 0 && dc > 0 && ai < a && fi < f && w.get(ai, fi, dr - 1, dc - 1)
    })?)
}
