use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use super::config::{load_config, PartialConfig, ReportFormat, RunConfig, Subcommand};
use super::CliError;
use crate::augment::{augment_dataset, write_records, AugmentError, AugmentOptions, ProviderError, ResponseCache};
use crate::consistency::{evaluate, histogram_report, parse_predictions, EvalOptions, MissingPolicy, ReportDocument, ScoredScope};
use crate::ingest::{parse_canonical, parse_sources, write_canonical, FieldMapping};
use crate::model::Dataset;
use crate::split::{split_dataset, SplitRatios};
use crate::{Exact, ExactEvaluationReport, ExactMetricsReport};

#[derive(Debug, Parser)]
#[command(name = "vqaug", version, about = "Paraphrase augmentation and consistency evaluation for VQA datasets")]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Subcommand)]
enum Command {
    /// Convert a source release into canonical JSONL.
    Ingest(IngestArgs),
    /// Generate question variants with an LLM provider.
    Augment(AugmentArgs),
    /// Image-level train/validation/test split.
    Split(SplitArgs),
    /// Dataset richness metrics.
    Metrics(MetricsArgs),
    /// Score predictions for accuracy and answer consistency.
    Evaluate(EvaluateArgs),
    /// Consistency-level histogram from an evaluation report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Preset name (slake, vqarad, pathvqa) or a mapping file.
    #[arg(long)]
    format: Option<String>,
    /// Source file; repeat to merge several.
    #[arg(long)]
    input: Vec<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Fail on records missing a mapped field instead of dropping them.
    #[arg(long)]
    strict: bool,
    /// Dataset name (defaults to the mapping's name).
    #[arg(long)]
    name: Option<String>,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    provider_config: Option<PathBuf>,
    /// Variants per original question.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_name = "DIR")]
    cache: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Train, validation and test fractions, e.g. 0.8,0.1,0.1.
    #[arg(long, value_parser = parse_ratios)]
    ratios: Option<[f64; 3]>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Also write the JSON report here.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write a one-row CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// JSONL of {"qid", "prediction"} objects.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, value_parser = parse_snake::<ScoredScope>, value_name = "variants_only|anchor_and_variants")]
    scope: Option<ScoredScope>,
    #[arg(long, value_parser = parse_snake::<MissingPolicy>, value_name = "strict|count_incorrect")]
    missing: Option<MissingPolicy>,
    /// Count predictions for unknown qids instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Write the full evaluation report here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long, value_name = "JSON")]
    evaluation: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<ReportFormat>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_ratios(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected three comma-separated fractions, got {}", v.len()))
}

fn parse_snake<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl Command {
    fn subcommand(&self) -> Subcommand {
        match self {
            Command::Ingest(_) => Subcommand::Ingest,
            Command::Augment(_) => Subcommand::Augment,
            Command::Split(_) => Subcommand::Split,
            Command::Metrics(_) => Subcommand::Metrics,
            Command::Evaluate(_) => Subcommand::Evaluate,
            Command::Report(_) => Subcommand::Report,
        }
    }

    fn overrides(self) -> PartialConfig {
        let one = |p: Option<PathBuf>| p.map(|p| vec![p]);
        match self {
            Command::Ingest(a) => PartialConfig {
                format: a.format,
                input: (!a.input.is_empty()).then_some(a.input),
                output: a.output,
                strict: flag(a.strict),
                name: a.name,
                ..Default::default()
            },
            Command::Augment(a) => PartialConfig {
                input: one(a.input),
                output: a.output,
                provider_config: a.provider_config,
                n_variants: a.n,
                cache: a.cache,
                seed: a.seed,
                ..Default::default()
            },
            Command::Split(a) => PartialConfig {
                input: one(a.input),
                ratios: a.ratios,
                seed: a.seed,
                out_dir: a.out_dir,
                ..Default::default()
            },
            Command::Metrics(a) => PartialConfig {
                input: one(a.input),
                output: a.output,
                csv: a.csv,
                ..Default::default()
            },
            Command::Evaluate(a) => PartialConfig {
                dataset: a.dataset,
                predictions: a.predictions,
                scope: a.scope,
                missing_policy: a.missing,
                lenient: flag(a.lenient),
                output: a.output,
                ..Default::default()
            },
            Command::Report(a) => PartialConfig {
                evaluation: a.evaluation,
                report_format: a.format,
                output: a.output,
                ..Default::default()
            },
        }
    }
}

pub(super) enum Outcome {
    Summary(Value),
    /// Help or version text.
    Text(String),
}

pub(super) fn parse_and_execute<I, T>(argv: I, env: &HashMap<String, String>) -> Result<Outcome, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(Outcome::Text(e.to_string())),
                _ => Err(CliError::Usage(e.render().to_string().trim().to_string())),
            };
        }
    };
    let subcommand = cli.command.subcommand();
    let config = load_config(cli.config.as_deref(), cli.command.overrides(), subcommand)?;
    execute(&config, env).map(Outcome::Summary)
}

/// The metadata block echoed into every output: tool identity plus the
/// effective config. Feeding it back through `--config` reproduces the run.
pub fn metadata_block(config: &RunConfig) -> Value {
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": config.to_partial(),
    })
}

/// Write through a temporary file in the destination directory, then rename
/// over the target. Creates the parent directory when needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::data("io", format!("{}: {e}", path.display()));
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&parent).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("json serializes");
    out.push(b'\n');
    out
}

fn require<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::Usage(format!("missing required --{flag}")))
}

fn single_input(config: &RunConfig) -> Result<&Path, CliError> {
    match config.input.as_slice() {
        [p] => Ok(p),
        [] => Err(CliError::Usage("missing required --input".into())),
        _ => Err(CliError::Usage("this subcommand takes exactly one --input".into())),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::data("io", format!("{}: {e}", path.display())))
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let bytes = read(path)?;
    parse_canonical(&bytes, &dataset_name(path))
        .map_err(|e| CliError::data("schema", format!("{}: {e}", path.display())))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// Run one subcommand with an already merged config. Every required value is
/// checked before anything is written.
pub fn execute(config: &RunConfig, env: &HashMap<String, String>) -> Result<Value, CliError> {
    match config.subcommand {
        Subcommand::Ingest => ingest(config),
        Subcommand::Augment => augment(config, env),
        Subcommand::Split => split(config),
        Subcommand::Metrics => metrics(config),
        Subcommand::Evaluate => evaluate_cmd(config),
        Subcommand::Report => report(config),
    }
}

fn ingest(config: &RunConfig) -> Result<Value, CliError> {
    let format = require(&config.format, "format")?;
    let output = require(&config.output, "output")?;
    if config.input.is_empty() {
        return Err(CliError::Usage("missing required --input".into()));
    }
    let mapping = match FieldMapping::preset(format) {
        Some(m) => m,
        None => {
            let path = Path::new(format);
            if !path.is_file() {
                let presets: Vec<_> = FieldMapping::preset_names().collect();
                return Err(CliError::Usage(format!(
                    "--format `{format}` is neither a preset ({}) nor a mapping file",
                    presets.join(", ")
                )));
            }
            let bytes = fs::read(path).map_err(|e| CliError::BadConfig(format!("{format}: {e}")))?;
            FieldMapping::from_json(&bytes).map_err(|e| CliError::BadConfig(format!("{format}: {e}")))?
        }
    };
    let sources = config.input.iter().map(|p| read(p)).collect::<Result<Vec<_>, _>>()?;
    let name = config.name.clone().unwrap_or_else(|| mapping.name.clone());
    let (dataset, report) = parse_sources(sources.iter().map(Vec::as_slice), &mapping, &name, config.strict)
        .map_err(|e| CliError::data("ingest", e))?;

    let meta = sidecar(output, ".meta.json");
    write_atomic(output, &write_canonical(&dataset))?;
    write_atomic(&meta, &pretty(&metadata_block(config)))?;
    Ok(json!({
        "command": "ingest",
        "output": path_str(output),
        "metadata": path_str(&meta),
        "dataset": name,
        "items": dataset.len(),
        "images": dataset.image_ids().len(),
        "report": report,
    }))
}

fn augment_error(e: AugmentError) -> CliError {
    match e {
        AugmentError::ZeroVariants => CliError::Usage(e.to_string()),
        AugmentError::Provider(p) => provider_error(p),
        AugmentError::CacheCorrupt { .. } | AugmentError::CacheIo(_) => CliError::data("cache", e),
        other => CliError::data("augment", other),
    }
}

fn provider_error(e: ProviderError) -> CliError {
    match e {
        ProviderError::BadConfig(m) => CliError::BadConfig(m),
        other => CliError::Provider(other.to_string()),
    }
}

fn augment(config: &RunConfig, env: &HashMap<String, String>) -> Result<Value, CliError> {
    let input = single_input(config)?;
    let output = require(&config.output, "output")?;
    let provider_config = config
        .provider
        .as_ref()
        .ok_or_else(|| CliError::Usage("missing required --provider-config".into()))?;
    provider_config.validate().map_err(provider_error)?;
    let dataset = load_dataset(input)?;
    let provider = provider_config.connect(env, config.seed).map_err(provider_error)?;
    let cache = config
        .cache
        .as_ref()
        .map(ResponseCache::open)
        .transpose()
        .map_err(augment_error)?;
    let options = AugmentOptions { n: config.n_variants, max_parallel: provider_config.max_parallel };
    let outcome = augment_dataset(&dataset, provider.as_ref(), options, cache.as_ref()).map_err(augment_error)?;

    let failed = outcome.failed_anchors();
    if !dataset.is_empty() && failed.len() == dataset.len() {
        let first = outcome.records.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(CliError::Provider(format!("every request failed; first error: {first}")));
    }

    let audit = sidecar(output, ".generations.jsonl");
    let meta = sidecar(output, ".meta.json");
    write_atomic(output, &write_canonical(&outcome.dataset))?;
    write_atomic(&audit, &write_records(&outcome.records))?;
    write_atomic(&meta, &pretty(&metadata_block(config)))?;
    Ok(json!({
        "command": "augment",
        "output": path_str(output),
        "generations": path_str(&audit),
        "metadata": path_str(&meta),
        "anchors": dataset.len(),
        "generated": outcome.generated(),
        "items": outcome.dataset.len(),
        "requests": outcome.records.len(),
        "cached_responses": outcome.records.iter().filter(|r| r.cached).count(),
        "failed_anchors": failed,
    }))
}

fn split(config: &RunConfig) -> Result<Value, CliError> {
    let input = single_input(config)?;
    let out_dir = require(&config.out_dir, "out-dir")?;
    let [a, b, c] = config.ratios;
    let ratios = SplitRatios::new(a, b, c).map_err(|e| CliError::Usage(e.to_string()))?;
    let dataset = load_dataset(input)?;
    let splits = split_dataset(&dataset, ratios, config.seed);

    let mut outputs = serde_json::Map::new();
    for (part, ds) in splits.parts() {
        let path = out_dir.join(format!("{part}.jsonl"));
        write_atomic(&path, &write_canonical(ds))?;
        outputs.insert(
            part.to_string(),
            json!({"path": path_str(&path), "items": ds.len(), "images": ds.image_ids().len()}),
        );
    }
    let meta = out_dir.join("split.meta.json");
    write_atomic(&meta, &pretty(&metadata_block(config)))?;
    Ok(json!({
        "command": "split",
        "seed": config.seed,
        "ratios": config.ratios,
        "outputs": outputs,
        "metadata": path_str(&meta),
    }))
}

fn metrics(config: &RunConfig) -> Result<Value, CliError> {
    let input = single_input(config)?;
    let dataset = load_dataset(input)?;
    let report = ExactMetricsReport::compute(&dataset).map_err(|e| CliError::data("metrics", e))?;
    let mut doc = report.to_json();
    if let Some(out) = &config.output {
        let mut with_meta = doc.clone();
        with_meta["metadata"] = metadata_block(config);
        write_atomic(out, &pretty(&with_meta))?;
    }
    if let Some(csv) = &config.csv {
        write_atomic(csv, &report.to_csv())?;
        write_atomic(&sidecar(csv, ".meta.json"), &pretty(&metadata_block(config)))?;
    }
    let obj = doc.as_object_mut().expect("metrics report is an object");
    let mut summary = serde_json::Map::new();
    summary.insert("command".into(), json!("metrics"));
    summary.append(obj);
    Ok(Value::Object(summary))
}

fn evaluate_cmd(config: &RunConfig) -> Result<Value, CliError> {
    let dataset_path = require(&config.dataset, "dataset")?;
    let predictions_path = require(&config.predictions, "predictions")?;
    let dataset = load_dataset(dataset_path)?;
    let predictions = parse_predictions(&read(predictions_path)?).map_err(|e| CliError::data("schema", e))?;
    let options = EvalOptions {
        scope: config.scope,
        missing_policy: config.missing_policy,
        lenient_unknown: config.lenient,
    };
    let report: ExactEvaluationReport =
        evaluate::<Exact>(&dataset, &predictions, options).map_err(|e| CliError::data("evaluation", e))?;
    let mut doc = report.to_document();
    if let Some(out) = &config.output {
        doc.metadata = Some(metadata_block(config));
        write_atomic(out, &pretty(&serde_json::to_value(&doc).expect("report serializes")))?;
    }
    let mut summary = json!({
        "command": "evaluate",
        "tar_sc": doc.tar_sc,
        "overall_accuracy": doc.overall_accuracy,
        "exact": doc.exact,
        "scored_scope": doc.scored_scope,
        "missing_policy": doc.missing_policy,
        "n_groups": doc.n_groups,
        "n_scored_groups": doc.n_scored_groups,
        "n_scored_items": doc.n_scored_items,
        "n_correct": doc.n_correct,
        "n_missing": doc.n_missing,
        "n_unknown": doc.n_unknown,
        "histogram": doc.histogram,
    });
    if let Some(out) = &config.output {
        summary["output"] = json!(path_str(out));
    }
    Ok(summary)
}

fn report(config: &RunConfig) -> Result<Value, CliError> {
    let evaluation = require(&config.evaluation, "evaluation")?;
    let format = *require(&config.report_format, "format")?;
    let output = require(&config.output, "output")?;
    let doc: ReportDocument = serde_json::from_slice(&read(evaluation)?)
        .map_err(|e| CliError::data("schema", format!("{}: {e}", evaluation.display())))?;
    let report = ExactEvaluationReport::from_document(&doc).map_err(|e| CliError::data("schema", e))?;
    let hist = histogram_report(&report);
    let bytes = match format {
        ReportFormat::Csv => hist.to_csv(),
        ReportFormat::Svg => hist.to_svg().into_bytes(),
    };
    let meta = sidecar(output, ".meta.json");
    write_atomic(output, &bytes)?;
    write_atomic(&meta, &pretty(&metadata_block(config)))?;
    Ok(json!({
        "command": "report",
        "format": format,
        "output": path_str(output),
        "metadata": path_str(&meta),
        "levels": hist.rows.len(),
        "anchors": hist.total(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios_flag() {
        assert_eq!(parse_ratios("0.8,0.1,0.1").unwrap(), [0.8, 0.1, 0.1]);
        assert!(parse_ratios("0.8,0.2").is_err());
        assert!(parse_ratios("a,b,c").is_err());
    }

    #[test]
    fn snake_flags() {
        assert_eq!(parse_snake::<ScoredScope>("anchor_and_variants").unwrap(), ScoredScope::AnchorAndVariants);
        assert_eq!(parse_snake::<MissingPolicy>("count_incorrect").unwrap(), MissingPolicy::CountIncorrect);
        assert!(parse_snake::<MissingPolicy>("lax").is_err());
    }

    #[test]
    fn atomic_write_creates_parent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b/out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
