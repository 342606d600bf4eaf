use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::features::PipelineOptions;
use crate::ingest::CohortFilter;
use crate::models::{HyperParams, MlpParams, ModelFamily, TreeParams};
use crate::synth::GeneratorConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub stays: PathBuf,
    pub micro: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self { stays: "data/stays.csv".into(), micro: "data/micro.csv".into(), output_dir: "out".into() }
    }
}

/// Which evaluation protocols a run performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SplitModes {
    Random,
    Temporal,
    Both,
}

impl SplitModes {
    pub fn random(self) -> bool {
        matches!(self, SplitModes::Random | SplitModes::Both)
    }

    pub fn temporal(self) -> bool {
        matches!(self, SplitModes::Temporal | SplitModes::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub modes: SplitModes,
    /// (train, validation, test) stay fractions.
    pub fractions: (f64, f64, f64),
    /// Unset picks the year nearest an 80/20 stay split.
    pub cutoff_year: Option<i32>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { modes: SplitModes::Both, fractions: (0.6, 0.2, 0.2), cutoff_year: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub roster: Vec<ModelFamily>,
    pub l1_lambdas: Vec<f64>,
    pub l1_tolerance: f64,
    pub l1_max_iterations: usize,
    pub random_forest: Vec<TreeParams>,
    pub gradient_boosted: Vec<TreeParams>,
    pub mlp: Vec<MlpParams>,
    /// Also fit one L1 logistic model per organism.
    pub per_organism: bool,
    pub precision: Precision,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let forest = |depth| TreeParams { min_samples_leaf: 3, ..TreeParams::forest(200, depth) };
        let boost = |n, leaves, lr| TreeParams { learning_rate: lr, ..TreeParams::boosting(n, leaves, 20) };
        let mlp = |h: Vec<usize>, l2| MlpParams { hidden_sizes: h, l2, max_iterations: 100, ..MlpParams::default() };
        Self {
            roster: ModelFamily::ALL.to_vec(),
            l1_lambdas: vec![3e-3, 1e-3, 3e-4, 1e-4],
            l1_tolerance: 1e-7,
            l1_max_iterations: 1000,
            random_forest: vec![forest(Some(10)), forest(None)],
            gradient_boosted: vec![boost(150, 15, 0.05), boost(300, 15, 0.05)],
            mlp: vec![mlp(vec![32], 1e-3), mlp(vec![32], 1e-2)],
            per_organism: true,
            precision: Precision::F64,
        }
    }
}

impl ModelConfig {
    pub fn includes(&self, f: ModelFamily) -> bool {
        self.roster.contains(&f)
    }

    pub fn l1_grid(&self) -> Vec<HyperParams> {
        self.l1_lambdas
            .iter()
            .map(|&lambda| HyperParams::L1Logistic { lambda, tolerance: self.l1_tolerance, max_iterations: self.l1_max_iterations })
            .collect()
    }

    pub fn grid(&self, f: ModelFamily) -> Vec<HyperParams> {
        match f {
            ModelFamily::L1Logistic => self.l1_grid(),
            ModelFamily::RandomForest => self.random_forest.iter().cloned().map(HyperParams::RandomForest).collect(),
            ModelFamily::GradientBoosted => self.gradient_boosted.iter().cloned().map(HyperParams::GradientBoosted).collect(),
            ModelFamily::NeuralNetwork => self.mlp.iter().cloned().map(HyperParams::Mlp).collect(),
            ModelFamily::Antibiogram | ModelFamily::Ensemble => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub top_coefficients: usize,
    /// Minimum tests for a key to appear in the yearly series.
    pub high_frequency: usize,
    pub roc_curves: bool,
    /// Save fitted models, pipeline states and split assignments.
    pub save_models: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { top_coefficients: 20, high_frequency: crate::eval::DEFAULT_HIGH_FREQUENCY, roc_curves: true, save_models: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub filter: CohortFilter,
    pub split: SplitConfig,
    pub pipeline: PipelineOptions,
    pub models: ModelConfig,
    pub reports: ReportConfig,
    /// Consulted by `synth`; its seed is replaced by the run seed.
    pub synth: GeneratorConfig,
}


impl RunConfig {
    /// Parses TOML; relative paths resolve against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.paths.stays, &mut cfg.paths.micro, &mut cfg.paths.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().replace('\n', " ")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Identity of everything that changes results. The output directory
    /// and input locations are excluded, so relocating a run keeps its hash.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.paths = Paths { stays: PathBuf::new(), micro: PathBuf::new(), output_dir: PathBuf::new() };
        Ok(crate::artifact::config_hash(&c)?)
    }

    /// Structural checks that need no data.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let (a, b, c) = self.split.fractions;
        if a <= 0.0 || b <= 0.0 || c <= 0.0 || ((a + b + c) - 1.0).abs() > 1e-9 {
            return bad(format!("split fractions {:?} must be positive and sum to 1", self.split.fractions));
        }
        let m = &self.models;
        if m.roster.is_empty() {
            return bad("model roster is empty".into());
        }
        if m.includes(ModelFamily::Ensemble)
            && ![ModelFamily::RandomForest, ModelFamily::NeuralNetwork, ModelFamily::GradientBoosted]
                .iter()
                .all(|f| m.includes(*f))
        {
            return bad("the ensemble needs RF, NN and GBM in the roster".into());
        }
        for f in &m.roster {
            if !matches!(f, ModelFamily::Antibiogram | ModelFamily::Ensemble) && m.grid(*f).is_empty() {
                return bad(format!("{} is in the roster but its grid is empty", f.label()));
            }
        }
        if m.per_organism && m.l1_lambdas.is_empty() {
            return bad("per-organism models need at least one L1 lambda".into());
        }
        if m.l1_lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return bad("L1 lambdas must be finite and non-negative".into());
        }
        let o = &self.pipeline;
        if !(0.0 <= o.winsor_lower && o.winsor_lower < o.winsor_upper && o.winsor_upper <= 1.0) {
            return bad("winsor quantiles must satisfy 0 <= lower < upper <= 1".into());
        }
        if !(o.ttest_threshold > 0.0) || !(o.correlation_threshold > 0.0 && o.correlation_threshold <= 1.0) {
            return bad("t-test threshold must be positive and correlation threshold in (0, 1]".into());
        }
        if self.reports.high_frequency == 0 {
            return bad("reports.high_frequency must be at least 1".into());
        }
        Ok(())
    }
}
