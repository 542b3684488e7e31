use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CliError;
use crate::augment::ProviderConfig;
use crate::consistency::{MissingPolicy, ScoredScope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Subcommand {
    Ingest,
    Augment,
    Split,
    Metrics,
    Evaluate,
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Svg,
}

/// Every setting a run can take, all optional. This is both the config-file
/// schema and the shape of the CLI overrides; the effective config is echoed
/// in the same shape.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<Subcommand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<Vec<PathBuf>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Ingest preset name or mapping file path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_format: Option<ReportFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Path to a provider config file; resolved into `provider` on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_config: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<ProviderConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_variants: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<ScoredScope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_policy: Option<MissingPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lenient: Option<bool>,
}

impl PartialConfig {
    /// Field-wise `self`, falling back to `other`.
    fn or(self, other: PartialConfig) -> PartialConfig {
        PartialConfig {
            subcommand: self.subcommand.or(other.subcommand),
            input: self.input.or(other.input),
            output: self.output.or(other.output),
            dataset: self.dataset.or(other.dataset),
            predictions: self.predictions.or(other.predictions),
            evaluation: self.evaluation.or(other.evaluation),
            cache: self.cache.or(other.cache),
            out_dir: self.out_dir.or(other.out_dir),
            csv: self.csv.or(other.csv),
            format: self.format.or(other.format),
            report_format: self.report_format.or(other.report_format),
            name: self.name.or(other.name),
            provider_config: self.provider_config.or(other.provider_config),
            provider: self.provider.or(other.provider),
            n_variants: self.n_variants.or(other.n_variants),
            seed: self.seed.or(other.seed),
            ratios: self.ratios.or(other.ratios),
            scope: self.scope.or(other.scope),
            missing_policy: self.missing_policy.or(other.missing_policy),
            strict: self.strict.or(other.strict),
            lenient: self.lenient.or(other.lenient),
        }
    }
}

/// Effective settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub input: Vec<PathBuf>,
    pub output: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub evaluation: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub format: Option<String>,
    pub report_format: Option<ReportFormat>,
    pub name: Option<String>,
    pub provider: Option<ProviderConfig>,
    pub n_variants: usize,
    pub seed: u64,
    pub ratios: [f64; 3],
    pub scope: ScoredScope,
    pub missing_policy: MissingPolicy,
    pub strict: bool,
    pub lenient: bool,
}

impl RunConfig {
    pub const DEFAULT_N_VARIANTS: usize = 10;
    pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

    /// The effective config in config-file form.
    pub fn to_partial(&self) -> PartialConfig {
        PartialConfig {
            subcommand: Some(self.subcommand),
            input: (!self.input.is_empty()).then(|| self.input.clone()),
            output: self.output.clone(),
            dataset: self.dataset.clone(),
            predictions: self.predictions.clone(),
            evaluation: self.evaluation.clone(),
            cache: self.cache.clone(),
            out_dir: self.out_dir.clone(),
            csv: self.csv.clone(),
            format: self.format.clone(),
            report_format: self.report_format,
            name: self.name.clone(),
            provider_config: None,
            provider: self.provider.clone(),
            n_variants: Some(self.n_variants),
            seed: Some(self.seed),
            ratios: Some(self.ratios),
            scope: Some(self.scope),
            missing_policy: Some(self.missing_policy),
            strict: Some(self.strict),
            lenient: Some(self.lenient),
        }
    }
}

/// Read a config file. Accepts a plain config object, or a metadata block
/// written next to an earlier output (its `config` member is used).
pub fn read_config_file(path: &Path) -> Result<PartialConfig, CliError> {
    let bad = |m: String| CliError::BadConfig(format!("{}: {m}", path.display()));
    let bytes = fs::read(path).map_err(|e| bad(e.to_string()))?;
    let mut value: Value = serde_json::from_slice(&bytes).map_err(|e| bad(e.to_string()))?;
    if let Some(obj) = value.as_object_mut() {
        if obj.contains_key("tool") && obj.contains_key("config") {
            value = obj.remove("config").unwrap_or(Value::Null);
        }
    }
    serde_json::from_value(value).map_err(|e| bad(e.to_string()))
}

/// Merge with precedence CLI overrides > config file > defaults.
pub fn load_config(
    path: Option<&Path>,
    overrides: PartialConfig,
    subcommand: Subcommand,
) -> Result<RunConfig, CliError> {
    let file = match path {
        Some(p) => read_config_file(p)?,
        None => PartialConfig::default(),
    };
    let mut merged = overrides.or(file);
    if let Some(p) = merged.provider_config.take() {
        let bytes = fs::read(&p)
            .map_err(|e| CliError::BadConfig(format!("{}: {e}", p.display())))?;
        let provider: ProviderConfig = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::BadConfig(format!("{}: {e}", p.display())))?;
        merged.provider = Some(provider);
    }

    let n_variants = merged.n_variants.unwrap_or(RunConfig::DEFAULT_N_VARIANTS);
    if n_variants == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    Ok(RunConfig {
        // the subcommand named on the command line always wins
        subcommand,
        input: merged.input.unwrap_or_default(),
        output: merged.output,
        dataset: merged.dataset,
        predictions: merged.predictions,
        evaluation: merged.evaluation,
        cache: merged.cache,
        out_dir: merged.out_dir,
        csv: merged.csv,
        format: merged.format,
        report_format: merged.report_format,
        name: merged.name,
        provider: merged.provider,
        n_variants,
        seed: merged.seed.unwrap_or(0),
        ratios: merged.ratios.unwrap_or(RunConfig::DEFAULT_RATIOS),
        scope: merged.scope.unwrap_or_default(),
        missing_policy: merged.missing_policy.unwrap_or_default(),
        strict: merged.strict.unwrap_or(false),
        lenient: merged.lenient.unwrap_or(false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = load_config(None, PartialConfig::default(), Subcommand::Augment).unwrap();
        assert_eq!(c.n_variants, 10);
        assert_eq!(c.ratios, [0.8, 0.1, 0.1]);
        assert_eq!(c.scope, ScoredScope::VariantsOnly);
        assert_eq!(c.missing_policy, MissingPolicy::Strict);
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"n_variants": 5, "seed": 9}"#).unwrap();
        let flags = PartialConfig { n_variants: Some(7), ..Default::default() };
        let c = load_config(Some(&path), flags, Subcommand::Augment).unwrap();
        assert_eq!(c.n_variants, 7);
        assert_eq!(c.seed, 9);
        let c = load_config(Some(&path), PartialConfig::default(), Subcommand::Augment).unwrap();
        assert_eq!(c.n_variants, 5);
    }

    #[test]
    fn echoed_config_reloads_identically() {
        let dir = tempfile::tempdir().unwrap();
        let flags = PartialConfig {
            input: Some(vec!["a.jsonl".into()]),
            output: Some("b.jsonl".into()),
            provider: Some(ProviderConfig::mock()),
            n_variants: Some(3),
            ratios: Some([0.5, 0.25, 0.25]),
            scope: Some(ScoredScope::AnchorAndVariants),
            ..Default::default()
        };
        let c = load_config(None, flags, Subcommand::Augment).unwrap();
        let meta = serde_json::json!({"tool": "vqaug", "version": "0", "config": c.to_partial()});
        let path = dir.path().join("meta.json");
        fs::write(&path, serde_json::to_vec(&meta).unwrap()).unwrap();
        let again = load_config(Some(&path), PartialConfig::default(), Subcommand::Augment).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn bad_files_and_zero_variants() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"n_variant": 5}"#).unwrap();
        assert!(matches!(load_config(Some(&path), PartialConfig::default(), Subcommand::Split), Err(CliError::BadConfig(_))));
        assert!(matches!(
            load_config(Some(&dir.path().join("missing.json")), PartialConfig::default(), Subcommand::Split),
            Err(CliError::BadConfig(_))
        ));
        let zero = PartialConfig { n_variants: Some(0), ..Default::default() };
        assert!(matches!(load_config(None, zero, Subcommand::Augment), Err(CliError::Usage(_))));
    }
}
