use std::path::{Path, PathBuf};

use racecrt::evaluation::{CvOptions, ReportFormat, SyntheticSpec};
use racecrt::inference::{Fusion, InstanceName, StubFunction};
use racecrt::preprocess::PreprocessSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// JSON configuration file. Every field is optional; command-line flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: Option<PathBuf>,
    pub models: Vec<PathBuf>,
    pub instances: Option<Vec<InstanceName>>,
    pub fusion: Option<Fusion>,
    pub stub_backend: Option<bool>,
    pub stub_function: Option<StubFunction>,
    pub stub_resolution: Option<u32>,
    pub preprocess: Option<PreprocessSpec>,
    pub cv: Option<CvOptions>,
    pub synthetic: Option<SyntheticSpec>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub format: Option<ReportFormat>,
}

impl PipelineConfig {
    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?;
        let mut config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = config.manifest.as_mut() {
            resolve(p);
        }
        if let Some(p) = config.out.as_mut() {
            resolve(p);
        }
        config.models.iter_mut().for_each(resolve);
        Ok(config)
    }
}
