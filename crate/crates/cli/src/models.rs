//! Model-set directory: a manifest plus one JSON file per output.

use std::path::Path;

use anyhow::{bail, Context, Result};
use gppopf::gpr::GpModel;
use gppopf::popf::{model_digest, OutputLayout, SampleDistribution, UncertaintySpec};
use serde::{Deserialize, Serialize};

pub const MANIFEST_SCHEMA: &str = "gppopf.model_set";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub schema: String,
    pub version: u32,
    pub build: String,
    pub experiment: String,
    /// Experiment seed; `predict` reuses it by default.
    pub seed: u64,
    pub n_test: usize,
    pub test_distribution: SampleDistribution,
    pub spec: UncertaintySpec,
    pub outputs: OutputLayout,
    /// Model files relative to the directory, in output order.
    pub files: Vec<String>,
    pub digest: String,
}

pub fn model_file_name(j: usize, name: &str) -> String {
    format!("{j:03}_{name}.json")
}

pub fn save(dir: &Path, manifest: &ModelManifest, models: &[GpModel]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (file, m) in manifest.files.iter().zip(models) {
        std::fs::write(dir.join(file), m.to_json()).with_context(|| format!("writing model {file}"))?;
    }
    let text = serde_json::to_string_pretty(manifest)? + "\n";
    std::fs::write(dir.join("manifest.json"), text).context("writing model manifest")?;
    Ok(())
}

pub fn load(dir: &Path) -> Result<(ModelManifest, Vec<GpModel>)> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let manifest: ModelManifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if manifest.schema != MANIFEST_SCHEMA {
        bail!(
            "{} is not a model-set manifest (schema {:?})",
            path.display(),
            manifest.schema
        );
    }
    if manifest.version != MANIFEST_VERSION {
        bail!(
            "model-set version {} is not supported (expected {MANIFEST_VERSION})",
            manifest.version
        );
    }
    if manifest.files.len() != manifest.outputs.len() {
        bail!(
            "manifest lists {} models for {} outputs",
            manifest.files.len(),
            manifest.outputs.len()
        );
    }
    let mut models = Vec::with_capacity(manifest.files.len());
    for file in &manifest.files {
        let p = dir.join(file);
        let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        let m = GpModel::from_json(&text).with_context(|| format!("loading {}", p.display()))?;
        if m.dim != manifest.spec.dim() {
            bail!(
                "{} expects {} inputs, the uncertainty box has {}",
                p.display(),
                m.dim,
                manifest.spec.dim()
            );
        }
        models.push(m);
    }
    let digest = model_digest(&models);
    if digest != manifest.digest {
        bail!("model files do not match the manifest digest");
    }
    Ok((manifest, models))
}
