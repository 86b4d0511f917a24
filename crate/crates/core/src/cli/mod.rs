//! The `tdl` command-line driver.
//!
//! Each subcommand resolves an [`ExperimentConfig`] (defaults, then
//! `--config`, then flag overrides), writes the resolved snapshot and a run
//! manifest with input hashes into the output directory, and prints a short
//! summary to stdout. Diagnostics go to stderr; the exit code follows
//! [`Error::exit_code`].

mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{DatasetSection, ExperimentConfig, FeaturesSection, PreprocessSection, SweepSection};

use crate::dataset::{
    extract_and_cache, hex, preprocess, scan_dataset, synthetic_store, CacheStatus, FeatureStore, Layout,
    STORE_MAGIC,
};
use crate::error::{Error, Result};
use crate::eval::{format_rank_table, run_benchmark, sweep_csv, write_benchmark_files, Benchmark};
use crate::features::DescriptorPreset;
use crate::metric::{
    export_metric_csv, feature_matrix, read_metric, write_atomic_bytes, write_metric, FeatureVector,
    LabeledSample, METRIC_MAGIC,
};
use crate::optimizer::{decompose_projection, embed, train};

pub const CONFIG_SNAPSHOT: &str = "config.json";
pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "tdl", version, about = "Top-push distance learning for video re-identification")]
pub struct Cli {
    /// Experiment config (JSON); omitted sections take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan a dataset tree and write (or reuse) its feature store.
    Extract {
        #[arg(long)]
        root: Option<PathBuf>,
        /// prid2011-style, ilids-style or flat.
        #[arg(long)]
        layout: Option<String>,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Learn a metric on every sample of a store.
    Train {
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Run all configured methods over shared random splits.
    Benchmark {
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Benchmark TDL once per alpha.
    SweepAlpha {
        /// Comma-separated list, overriding `sweep.alphas`.
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Write a synthetic feature store.
    Synth {
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Convert a TDLF store or TDLM metric file to CSV.
    ExportCsv {
        input: PathBuf,
        /// Project store features through this metric before export.
        #[arg(long)]
        metric: Option<PathBuf>,
        /// Output dimensionality of the projection (default: full).
        #[arg(long, requires = "metric")]
        dims: Option<usize>,
        /// Destination; defaults to `<output>/<input stem>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Extract { .. } => "extract",
            Command::Train { .. } => "train",
            Command::Benchmark { .. } => "benchmark",
            Command::SweepAlpha { .. } => "sweep-alpha",
            Command::Synth { .. } => "synth",
            Command::ExportCsv { .. } => "export-csv",
        }
    }
}

#[derive(Debug, Serialize)]
struct FileRecord {
    path: PathBuf,
    bytes: u64,
    sha256: String,
}

fn file_record(path: &Path) -> Result<FileRecord> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileRecord {
        path: path.to_path_buf(),
        bytes: data.len() as u64,
        sha256: hex(&Sha256::digest(&data)),
    })
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    version: &'a str,
    config_sha256: String,
    inputs: Vec<FileRecord>,
    outputs: Vec<FileRecord>,
}

struct Run {
    cfg: ExperimentConfig,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    stdout: String,
}

impl Run {
    fn out(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn read_store(&mut self, path: PathBuf) -> Result<FeatureStore> {
        let store = FeatureStore::read(&path)?;
        self.inputs.push(path);
        Ok(store)
    }
}

/// Resolves the config for `cli`: defaults, then the file, then flags.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.output {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.apply_seed(seed);
    }
    match &cli.command {
        Command::Extract { root, layout, store } => {
            if let Some(r) = root {
                cfg.dataset.root = Some(r.clone());
            }
            if let Some(l) = layout {
                cfg.dataset.layout = l.parse::<Layout>()?;
            }
            cfg.store = store.clone().or(cfg.store);
        }
        Command::SweepAlpha { alphas, store } => {
            if !alphas.is_empty() {
                cfg.sweep.alphas = alphas.clone();
            }
            cfg.store = store.clone().or(cfg.store);
        }
        Command::Train { store } | Command::Benchmark { store } | Command::Synth { store } => {
            cfg.store = store.clone().or(cfg.store);
        }
        Command::ExportCsv { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Executes `cli` and returns what it would print to stdout.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = resolve_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| execute(&cli.command, cfg))
}

fn execute(command: &Command, cfg: ExperimentConfig) -> Result<String> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let snapshot = cfg.to_json();
    write_atomic_bytes(&cfg.output_dir.join(CONFIG_SNAPSHOT), snapshot.as_bytes())?;
    let mut run = Run {
        cfg,
        inputs: Vec::new(),
        outputs: Vec::new(),
        stdout: String::new(),
    };
    match command {
        Command::Extract { .. } => cmd_extract(&mut run)?,
        Command::Train { .. } => cmd_train(&mut run)?,
        Command::Benchmark { .. } => cmd_benchmark(&mut run)?,
        Command::SweepAlpha { .. } => cmd_sweep_alpha(&mut run)?,
        Command::Synth { .. } => cmd_synth(&mut run)?,
        Command::ExportCsv { input, metric, dims, out } => {
            cmd_export_csv(&mut run, input, metric.as_deref(), *dims, out.clone())?
        }
    }
    let manifest = RunManifest {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: hex(&Sha256::digest(snapshot.as_bytes())),
        inputs: run.inputs.iter().map(|p| file_record(p)).collect::<Result<_>>()?,
        outputs: run.outputs.iter().map(|p| file_record(p)).collect::<Result<_>>()?,
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_atomic_bytes(&run.out(RUN_MANIFEST), &json)?;
    Ok(run.stdout)
}

fn cmd_extract(run: &mut Run) -> Result<()> {
    let cfg = &run.cfg;
    let root = cfg
        .dataset
        .root
        .clone()
        .ok_or_else(|| Error::Config("dataset.root is not set (use --root or the config)".into()))?;
    let preset = DescriptorPreset::by_name(&cfg.features.preset)?;
    let manifest = scan_dataset(&root, cfg.dataset.layout, cfg.dataset.min_frames)?;
    let store_path = cfg.store_path();
    let (store, status) = extract_and_cache(&manifest, &preset, &store_path)?;
    let what = match status {
        CacheStatus::Hit => "cache hit",
        CacheStatus::Written => "wrote",
    };
    run.stdout = format!(
        "{what}: {} ({} samples, {} persons, dim {}, preset {} {})\n",
        store_path.display(),
        store.len(),
        manifest.person_ids().len(),
        store.dim(),
        preset.name,
        hex(&store.header.preset_hash[..8]),
    );
    run.outputs.push(store_path);
    Ok(())
}

fn cmd_train(run: &mut Run) -> Result<()> {
    let store = run.read_store(run.cfg.store_path())?;
    let samples = preprocess(store.samples(), &run.cfg.preprocess.options)?;
    let report = train(&samples, &run.cfg.train)?;
    let metric_path = run.out("metric.tdlm");
    write_metric(&metric_path, &report.final_metric)?;
    let report_path = run.out("train_report.json");
    let json = serde_json::to_vec_pretty(&report).expect("report serializes");
    write_atomic_bytes(&report_path, &json)?;
    run.stdout = format!(
        "final loss {:.6e} after {} iterations ({} accepted, {} rejected, stop: {:?})\nmetric: {}\n",
        report.final_objective.total,
        report.iters_run,
        report.accepted,
        report.rejected,
        report.stop_reason,
        metric_path.display(),
    );
    run.outputs.extend([metric_path, report_path]);
    Ok(())
}

fn cmd_benchmark(run: &mut Run) -> Result<()> {
    let store = run.read_store(run.cfg.store_path())?;
    let cfg = &run.cfg;
    let reports = run_benchmark(
        store.samples(),
        &cfg.methods,
        &cfg.protocol,
        &cfg.train,
        &cfg.preprocess.options,
    )?;
    write_benchmark_files(&cfg.output_dir, &reports)?;
    run.stdout = format_rank_table(&reports);
    for f in ["report.json", "cmc.csv", "table.csv"] {
        let p = run.out(f);
        run.outputs.push(p);
    }
    Ok(())
}

fn cmd_sweep_alpha(run: &mut Run) -> Result<()> {
    let store = run.read_store(run.cfg.store_path())?;
    let cfg = &run.cfg;
    let bench = Benchmark::new(store.samples(), &cfg.protocol, &cfg.preprocess.options)?;
    let rows = bench.sweep_alpha(&cfg.sweep.alphas, &cfg.train)?;
    let csv = sweep_csv(&rows);
    let path = run.out("sweep.csv");
    write_atomic_bytes(&path, csv.as_bytes())?;
    run.stdout = csv;
    run.outputs.push(path);
    Ok(())
}

fn cmd_synth(run: &mut Run) -> Result<()> {
    let store = synthetic_store(&run.cfg.synth)?;
    let path = run.cfg.store_path();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    store.write(&path)?;
    run.stdout = format!("wrote: {} ({} samples, dim {})\n", path.display(), store.len(), store.dim());
    run.outputs.push(path);
    Ok(())
}

fn cmd_export_csv(
    run: &mut Run,
    input: &Path,
    metric: Option<&Path>,
    dims: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    let bytes = fs::read(input).map_err(|e| Error::io(input, e))?;
    let out = out.unwrap_or_else(|| {
        let stem = input.file_stem().unwrap_or_default().to_string_lossy();
        run.out(&format!("{stem}.csv"))
    });
    run.inputs.push(input.to_path_buf());
    if bytes.starts_with(METRIC_MAGIC) {
        if metric.is_some() {
            return Err(Error::Config("--metric applies to feature stores only".into()));
        }
        export_metric_csv(&out, &read_metric(input)?)?;
    } else if bytes.starts_with(STORE_MAGIC) {
        let store = FeatureStore::decode(&bytes, input)?;
        match metric {
            None => store.export_csv(&out)?,
            Some(mpath) => {
                let m = read_metric(mpath)?;
                run.inputs.push(mpath.to_path_buf());
                let l = decompose_projection(&m, dims.unwrap_or(m.dim()))?;
                let x = feature_matrix(store.samples().iter().map(|s| &s.feature))?;
                let y = embed(&l, &x)?;
                let records = store
                    .samples()
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let v = FeatureVector::new(y.row(i).iter().copied().collect())?;
                        LabeledSample::new(v, s.person_id.clone(), s.camera_id.clone())
                    })
                    .collect::<Result<Vec<_>>>()?;
                let h = &store.header;
                FeatureStore::new(h.preset_name.clone(), h.preset_hash, h.source_hash, records)?.export_csv(&out)?;
            }
        }
    } else {
        return Err(Error::format(input, "neither a TDLF store nor a TDLM metric"));
    }
    run.stdout = format!("wrote: {}\n", out.display());
    run.outputs.push(out);
    Ok(())
}

/// Parses `args`, runs, prints, and returns the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(stdout) => {
            print!("{stdout}");
            0
        }
        Err(e) => {
            eprintln!("tdl {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    main_from(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("tdl").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn defaults_recorded_in_snapshot() {
        let cfg = ExperimentConfig::from_json(r#"{"train": {"max_iters": 5}}"#).unwrap();
        assert_eq!(cfg.train.alpha, 0.1);
        assert_eq!(cfg.train.rho, 1.0);
        assert_eq!(cfg.train.lambda0, 1e-3);
        assert_eq!(cfg.train.max_iters, 5);
        assert_eq!(cfg.protocol.num_trials, 10);
        let v: serde_json::Value = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(v["train"]["alpha"], 0.1);
        assert_eq!(v["train"]["rho"], 1.0);
        assert_eq!(v["train"]["lambda0"], 1e-3);
    }

    #[test]
    fn unknown_keys_rejected() {
        for bad in [
            r#"{"trian": {}}"#,
            r#"{"train": {"aplha": 0.2}}"#,
            r#"{"protocol": {"trials": 3}}"#,
            r#"{"dataset": {"layout": "nope"}}"#,
            r#"{"methods": ["knn"]}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn flags_override_config() {
        let cli = parse(&["--seed", "7", "--output", "/tmp/x", "sweep-alpha", "--alphas", "0,0.5"]);
        let cfg = resolve_config(&cli).unwrap();
        assert_eq!(cfg.protocol.seed, 7);
        assert_eq!(cfg.train.rng_seed, 7);
        assert_eq!(cfg.synth.rng_seed, 7);
        assert_eq!(cfg.sweep.alphas, vec![0.0, 0.5]);
        assert_eq!(cfg.store_path(), Path::new("/tmp/x/features.tdlf"));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let cli = parse(&["sweep-alpha", "--alphas", "1.5"]);
        assert_eq!(resolve_config(&cli).unwrap_err().exit_code(), 2);
        let cli = parse(&["extract", "--layout", "bogus"]);
        assert_eq!(resolve_config(&cli).unwrap_err().exit_code(), 2);
    }
}
