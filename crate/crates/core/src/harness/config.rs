//! Experiment configuration files.
//!
//! A config is a TOML document describing one environment and any number
//! of policies. Relative paths are resolved against the config's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::PcaTarget;
use crate::env::{LabelSplit, Pattern};
use crate::error::{Error, Result};
use crate::pool::{PairDistance, PruneVictim};

fn default_validation_fraction() -> f64 {
    0.1
}

fn default_batch_size() -> usize {
    1
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_one() -> f64 {
    1.0
}

fn default_classes() -> usize {
    10
}

fn default_pixel_scale() -> f64 {
    1.0 / 255.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub horizon: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Seeds for grid search; defaults to the run seeds shifted by 1000 so
    /// that tuning and evaluation never share a stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_seeds: Option<Vec<u64>>,
    /// Share of the horizon, from the start, that grid search may see.
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    /// Name of the output sub-directory; defaults to the schedule pattern.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub environment: EnvironmentSpec,
    pub policies: Vec<PolicySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    Synthetic {
        arms: usize,
        dim: usize,
        noise_variance: f64,
        /// Seed for the orthonormal parameter vectors when the schedule
        /// does not list them.
        #[serde(default)]
        parameter_seed: u64,
        schedule: ScheduleSpec,
    },
    Classification {
        #[serde(default = "default_classes")]
        classes: usize,
        dataset: DatasetSpec,
        tasks: TaskSpec,
        schedule: ScheduleSpec,
        /// Scale every context to unit Euclidean norm after PCA.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        normalize: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// A schedule file; truncated when longer than the horizon.
    File { path: PathBuf },
    /// Equal-length periods visiting these parameter ids.
    Sequence { sequence: Vec<usize> },
    Generated {
        pattern: Pattern,
        parameters: usize,
        min_segment: usize,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    Idx {
        images: PathBuf,
        labels: PathBuf,
        /// Multiplies raw intensities before PCA.
        #[serde(default = "default_pixel_scale")]
        pixel_scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pca: Option<PcaTarget>,
    },
    Table {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pca: Option<PcaTarget>,
    },
    /// Gaussian class clusters, one row per step.
    Clusters {
        dim: usize,
        separation: f64,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    TwoArm { splits: Vec<SplitSpec> },
    /// `count` label permutations: the identity, then random ones.
    ArmShift {
        count: usize,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitSpec {
    Preset(String),
    Custom(LabelSplit),
}

impl SplitSpec {
    pub fn resolve(&self) -> Result<LabelSplit> {
        match self {
            SplitSpec::Preset(name) => LabelSplit::preset(name),
            SplitSpec::Custom(split) => Ok(split.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Lints,
    SwLints,
    DLints,
    Random,
    AllSeasonSw,
    AllSeasonDisc,
    /// Reserved; not implemented.
    Bob,
    /// Reserved; not implemented.
    Denband,
}

impl Algorithm {
    pub fn default_label(self) -> &'static str {
        match self {
            Algorithm::Lints => "LinTS",
            Algorithm::SwLints => "SW-LinTS",
            Algorithm::DLints => "D-LinTS",
            Algorithm::Random => "Random",
            Algorithm::AllSeasonSw => "All-Season (SW)",
            Algorithm::AllSeasonDisc => "All-Season (Disc)",
            Algorithm::Bob => "BoB",
            Algorithm::Denband => "DenBand",
        }
    }

    fn uses_window(self) -> bool {
        matches!(self, Algorithm::SwLints | Algorithm::AllSeasonSw)
    }

    fn uses_discount(self) -> bool {
        matches!(self, Algorithm::DLints | Algorithm::AllSeasonDisc)
    }

    fn uses_pool(self) -> bool {
        matches!(self, Algorithm::AllSeasonSw | Algorithm::AllSeasonDisc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub algorithm: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default = "default_one")]
    pub regularizer: f64,
    #[serde(default = "default_one")]
    pub noise_variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
    /// Sets the discount to `1 − 10^−kappa`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bases: Option<usize>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub distance: PairDistance,
    #[serde(default, skip_serializing_if = "is_default")]
    pub victim: PruneVictim,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub window: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kappa: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub max_bases: Vec<usize>,
}

/// `1 − 10^−κ`.
fn is_default<T: Default + PartialEq>(value: &T) -> bool {
    *value == T::default()
}

pub fn discount_from_kappa(kappa: f64) -> f64 {
    1.0 - 10f64.powf(-kappa)
}

impl PolicySpec {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            label: None,
            regularizer: 1.0,
            noise_variance: 1.0,
            window: None,
            discount: None,
            kappa: None,
            max_bases: None,
            distance: PairDistance::default(),
            victim: PruneVictim::default(),
            grid: None,
        }
    }

    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.algorithm.default_label().to_string())
    }

    /// File-name form of the label: lowercase alphanumerics and dashes.
    pub fn slug(&self) -> String {
        slugify(&self.label())
    }

    /// The discount factor, from `discount` or `kappa`.
    pub fn gamma(&self) -> Option<f64> {
        self.discount.or(self.kappa.map(discount_from_kappa))
    }

    /// Checks that the hyperparameters needed by the algorithm are present.
    /// Grid axes stand in for the matching single value.
    pub fn validate(&self) -> Result<()> {
        let label = self.label();
        let bad = |msg: &str| Err(Error::Config(format!("policy '{label}': {msg}")));
        if matches!(self.algorithm, Algorithm::Bob | Algorithm::Denband) {
            return Err(Error::Unsupported(format!(
                "{} is a reserved algorithm slot without an implementation",
                self.algorithm.default_label()
            )));
        }
        if !(self.regularizer > 0.0 && self.regularizer.is_finite()) {
            return bad("regularizer must be positive");
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return bad("noise_variance must be positive");
        }
        if self.discount.is_some() && self.kappa.is_some() {
            return bad("set either discount or kappa, not both");
        }
        let grid = self.grid.clone().unwrap_or_default();
        let a = self.algorithm;
        if a.uses_window() && self.window.is_none() && grid.window.is_empty() {
            return bad("window is required");
        }
        if a.uses_discount() && self.gamma().is_none() && grid.kappa.is_empty() {
            return bad("discount or kappa is required");
        }
        if a.uses_pool() && self.max_bases.is_none() && grid.max_bases.is_empty() {
            return bad("max_bases is required");
        }
        if !a.uses_window() && (self.window.is_some() || !grid.window.is_empty()) {
            return bad("window does not apply to this algorithm");
        }
        if !a.uses_discount() && (self.gamma().is_some() || !grid.kappa.is_empty()) {
            return bad("discount does not apply to this algorithm");
        }
        if !a.uses_pool() && (self.max_bases.is_some() || !grid.max_bases.is_empty()) {
            return bad("max_bases does not apply to this algorithm");
        }
        if self.window == Some(0) || grid.window.contains(&0) {
            return bad("window must be positive");
        }
        if self.max_bases == Some(0) || grid.max_bases.contains(&0) {
            return bad("max_bases must be positive");
        }
        if let Some(g) = self.gamma() {
            if !(g > 0.0 && g <= 1.0) {
                return bad("discount must lie in (0, 1]");
            }
        }
        if grid.kappa.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return bad("kappa values must be positive");
        }
        if self.grid.is_some() && self.regularizer != 1.0 {
            return bad("grid search runs with regularizer = 1");
        }
        Ok(())
    }

    /// Every combination of the grid axes, in lexicographic order of
    /// (window, kappa, max_bases) ascending. Without a grid, just this policy.
    pub fn grid_points(&self) -> Vec<PolicySpec> {
        let Some(grid) = &self.grid else {
            return vec![self.clone()];
        };
        let windows: Vec<Option<usize>> = if grid.window.is_empty() {
            vec![self.window]
        } else {
            grid.window.iter().copied().map(Some).collect()
        };
        let kappas: Vec<Option<f64>> = if grid.kappa.is_empty() {
            vec![None]
        } else {
            grid.kappa.iter().copied().map(Some).collect()
        };
        let bases: Vec<Option<usize>> = if grid.max_bases.is_empty() {
            vec![self.max_bases]
        } else {
            grid.max_bases.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        for &w in &windows {
            for &k in &kappas {
                for &n in &bases {
                    let mut p = self.clone();
                    p.grid = None;
                    p.window = w;
                    if k.is_some() {
                        p.kappa = k;
                        p.discount = None;
                    }
                    p.max_bases = n;
                    out.push(p);
                }
            }
        }
        out
    }

    /// Short description of the tunable hyperparameters.
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(w) = self.window {
            parts.push(format!("window={w}"));
        }
        if let Some(k) = self.kappa {
            parts.push(format!("kappa={k}"));
        } else if let Some(g) = self.discount {
            parts.push(format!("discount={g}"));
        }
        if let Some(n) = self.max_bases {
            parts.push(format!("max_bases={n}"));
        }
        if parts.is_empty() {
            "-".into()
        } else {
            parts.join(" ")
        }
    }
}

pub fn slugify(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    out
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let location = e
                .span()
                .map(|s| format!("byte {}", s.start))
                .unwrap_or_else(|| "config".into());
            Error::format(location, e.message().to_string())
        })
    }

    /// Reads, resolves relative paths against the file's directory and
    /// validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        let mut config = Self::parse(&text).map_err(|e| match e {
            Error::Format { location, message } => Error::Format {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(out) = &mut self.output {
            fix(out);
        }
        let (schedule, dataset) = match &mut self.environment {
            EnvironmentSpec::Synthetic { schedule, .. } => (schedule, None),
            EnvironmentSpec::Classification {
                schedule, dataset, ..
            } => (schedule, Some(dataset)),
        };
        if let ScheduleSpec::File { path } = schedule {
            fix(path);
        }
        match dataset {
            Some(DatasetSpec::Idx { images, labels, .. }) => {
                fix(images);
                fix(labels);
            }
            Some(DatasetSpec::Table { path, .. }) => fix(path),
            _ => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 1.0) {
            return bad(format!(
                "validation_fraction {} outside (0, 1]",
                self.validation_fraction
            ));
        }
        if matches!(&self.grid_seeds, Some(s) if s.is_empty()) {
            return bad("grid_seeds must not be empty".into());
        }
        if self.policies.is_empty() {
            return bad("at least one policy is required".into());
        }
        let mut labels = BTreeSet::new();
        for p in &self.policies {
            p.validate()?;
            if !labels.insert(p.slug()) {
                return bad(format!("duplicate policy label '{}'", p.label()));
            }
        }
        let mut files = Vec::new();
        match &self.environment {
            EnvironmentSpec::Synthetic {
                arms,
                dim,
                noise_variance,
                schedule,
                ..
            } => {
                if *arms == 0 || *dim == 0 {
                    return bad("synthetic arms and dim must be positive".into());
                }
                if !(*noise_variance >= 0.0 && noise_variance.is_finite()) {
                    return bad("synthetic noise_variance must be non-negative".into());
                }
                if let ScheduleSpec::File { path } = schedule {
                    files.push(path);
                }
            }
            EnvironmentSpec::Classification {
                classes,
                dataset,
                tasks,
                schedule,
                ..
            } => {
                if *classes < 2 {
                    return bad("classification needs at least two classes".into());
                }
                if let ScheduleSpec::File { path } = schedule {
                    files.push(path);
                }
                match dataset {
                    DatasetSpec::Idx { images, labels, .. } => {
                        files.push(images);
                        files.push(labels);
                    }
                    DatasetSpec::Table { path, .. } => files.push(path),
                    DatasetSpec::Clusters { dim, .. } if *dim == 0 => {
                        return bad("cluster dim must be positive".into())
                    }
                    DatasetSpec::Clusters { .. } => {}
                }
                match tasks {
                    TaskSpec::TwoArm { splits } if splits.is_empty() => {
                        return bad("two-arm mode needs at least one split".into())
                    }
                    TaskSpec::TwoArm { splits } => {
                        for s in splits {
                            s.resolve()?;
                        }
                    }
                    TaskSpec::ArmShift { count, .. } if *count == 0 => {
                        return bad("arm-shift mode needs at least one permutation".into())
                    }
                    TaskSpec::ArmShift { .. } => {}
                }
            }
        }
        for f in files {
            if !f.is_file() {
                return bad(format!("file {} does not exist", f.display()));
            }
        }
        Ok(())
    }

    pub fn grid_seeds(&self) -> Vec<u64> {
        self.grid_seeds
            .clone()
            .unwrap_or_else(|| self.seeds.iter().map(|s| s + 1000).collect())
    }

    /// Output sub-directory name for this experiment's logs.
    pub fn pattern_name(&self) -> String {
        if let Some(p) = &self.pattern {
            return p.clone();
        }
        let schedule = match &self.environment {
            EnvironmentSpec::Synthetic { schedule, .. } => schedule,
            EnvironmentSpec::Classification { schedule, .. } => schedule,
        };
        match schedule {
            ScheduleSpec::Generated { pattern, .. } => pattern.name().to_string(),
            _ => slugify(&self.name),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYNTHETIC: &str = r#"
name = "seasonal"
horizon = 1000
batch_size = 10

[environment]
kind = "synthetic"
arms = 5
dim = 5
noise_variance = 0.1

[environment.schedule]
source = "sequence"
sequence = [0, 1, 0]

[[policies]]
algorithm = "lints"

[[policies]]
algorithm = "all-season-sw"
window = 10
max_bases = 5

[[policies]]
algorithm = "d-lints"
grid = { kappa = [1, 3, 5, 10] }
"#;

    #[test]
    fn parses_defaults() {
        let c = ExperimentConfig::parse(SYNTHETIC).unwrap();
        c.validate().unwrap();
        assert_eq!(c.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(c.grid_seeds(), vec![1000, 1001, 1002, 1003, 1004]);
        assert_eq!(c.policies[0].regularizer, 1.0);
        assert_eq!(c.policies[1].slug(), "all-season-sw");
        assert_eq!(c.pattern_name(), "seasonal");
        let back = ExperimentConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn kappa_grid_expands_to_discounts() {
        let c = ExperimentConfig::parse(SYNTHETIC).unwrap();
        let points = c.policies[2].grid_points();
        let gammas: Vec<f64> = points.iter().map(|p| p.gamma().unwrap()).collect();
        assert_eq!(gammas.len(), 4);
        assert!((gammas[0] - 0.9).abs() < 1e-15);
        assert!((gammas[1] - 0.999).abs() < 1e-15);
        assert!((gammas[2] - 0.99999).abs() < 1e-15);
        assert!((gammas[3] - (1.0 - 1e-10)).abs() < 1e-15);
    }

    #[test]
    fn all_season_grid_has_fifteen_points() {
        let mut p = PolicySpec::new(Algorithm::AllSeasonSw);
        p.grid = Some(GridSpec {
            window: vec![50, 100, 500, 1000, 5000],
            kappa: vec![],
            max_bases: vec![3, 4, 5],
        });
        p.validate().unwrap();
        assert_eq!(p.grid_points().len(), 15);
    }

    #[test]
    fn missing_hyperparameters_are_config_errors() {
        let mut p = PolicySpec::new(Algorithm::SwLints);
        assert!(p.validate().is_err());
        p.window = Some(100);
        p.validate().unwrap();
        p.max_bases = Some(3);
        assert!(p.validate().is_err());
        let mut p = PolicySpec::new(Algorithm::DLints);
        p.kappa = Some(3.0);
        p.discount = Some(0.9);
        assert!(p.validate().is_err());
        let mut p = PolicySpec::new(Algorithm::Lints);
        p.regularizer = 2.0;
        p.grid = Some(GridSpec::default());
        assert!(p.validate().is_err());
        assert!(matches!(
            PolicySpec::new(Algorithm::Bob).validate(),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn config_level_checks() {
        let mut c = ExperimentConfig::parse(SYNTHETIC).unwrap();
        c.batch_size = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::parse(SYNTHETIC).unwrap();
        c.seeds.clear();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::parse(SYNTHETIC).unwrap();
        c.policies.push(PolicySpec::new(Algorithm::Lints));
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::parse(SYNTHETIC).unwrap();
        c.environment = EnvironmentSpec::Classification {
            classes: 10,
            dataset: DatasetSpec::Table {
                path: "/nonexistent/features.csv".into(),
                pca: None,
            },
            tasks: TaskSpec::ArmShift { count: 2, seed: 0 },
            schedule: ScheduleSpec::Sequence { sequence: vec![0, 1] },
            normalize: false,
        };
        assert!(c.validate().unwrap_err().to_string().contains("does not exist"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = SYNTHETIC.replace("batch_size = 10", "batch_size = 10\nbatchsize = 3");
        assert!(matches!(ExperimentConfig::parse(&text), Err(Error::Format { .. })));
    }

    #[test]
    fn splits_accept_presets_and_tables() {
        let text = r#"
mode = "two-arm"
splits = ["parity", { name = "custom", first_arm = [1, 2] }]
"#;
        let t: TaskSpec = toml::from_str(text).unwrap();
        let TaskSpec::TwoArm { splits } = t else { panic!() };
        assert_eq!(splits[0].resolve().unwrap().name, "parity");
        assert_eq!(splits[1].resolve().unwrap().first_arm.len(), 2);
    }

    #[test]
    fn slugs() {
        assert_eq!(slugify("All-Season (Disc)"), "all-season-disc");
        assert_eq!(slugify("SW-LinTS"), "sw-lints");
    }
}
