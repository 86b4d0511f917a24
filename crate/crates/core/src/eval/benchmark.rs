//! Multi-trial single-shot benchmark over shared random splits.
//!
//! Every method in one run sees the same [`TrialSplit`]s. Per trial the
//! preprocessing is fitted on the training identities, TDL is trained on
//! them, and the test identities are matched across the two cameras.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cmc::{auc_cmc, cmc_with, CmcCurve};
use super::rank::Ranker;
use super::split::{make_splits, TrialSplit, DEFAULT_TRIALS};
use crate::dataset::{PreprocessOption, Preprocessor};
use crate::error::{protocol, Error, Result};
use crate::metric::{write_atomic_bytes, LabeledSample};
use crate::optimizer::{train, StopReason, TrainConfig};

/// Ranks reported in rank tables.
pub const REPORT_RANKS: [usize; 4] = [1, 5, 10, 20];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tdl,
    Euclidean,
    L1norm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Tdl => "tdl",
            Method::Euclidean => "euclidean",
            Method::L1norm => "l1norm",
        }
    }
}

/// Which camera provides the probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Camera A probes, camera B gallery.
    AToB,
    BToA,
    /// Both of the above, reported separately.
    Both,
}

impl Direction {
    fn expand(self) -> Vec<Direction> {
        match self {
            Direction::Both => vec![Direction::AToB, Direction::BToA],
            d => vec![d],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub num_trials: usize,
    pub seed: u64,
    pub direction: Direction,
    /// Camera A id; defaults to the first of the two camera ids in sort order.
    pub camera_a: Option<String>,
    pub camera_b: Option<String>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            num_trials: DEFAULT_TRIALS,
            seed: 0,
            direction: Direction::AToB,
            camera_a: None,
            camera_b: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub iters_run: usize,
    pub accepted: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub metric_trace: f64,
    pub metric_max_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub cmc: CmcCurve,
    pub auc: f64,
    pub train: Option<TrainSummary>,
    pub train_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankRate {
    pub rank: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub method: Method,
    pub direction: Direction,
    /// `method`, suffixed with `@b_to_a` for the reversed direction.
    pub label: String,
    pub probe_camera: String,
    pub gallery_camera: String,
    pub gallery_size: usize,
    pub trials: Vec<TrialResult>,
    /// Elementwise mean of the per-trial curves.
    pub mean_cmc: CmcCurve,
    pub rank_table: Vec<RankRate>,
    pub auc: f64,
    pub config: serde_json::Value,
    pub elapsed_secs: f64,
}

impl BenchmarkReport {
    pub fn rank_rate(&self, k: usize) -> f64 {
        self.mean_cmc.at_rank(k)
    }
}

/// Distinct camera ids, which must be exactly two unless named explicitly.
fn resolve_cameras(samples: &[LabeledSample], protocol: &ProtocolConfig) -> Result<(String, String)> {
    let cams: BTreeSet<&str> = samples.iter().map(|s| s.camera_id.as_str()).collect();
    match (&protocol.camera_a, &protocol.camera_b) {
        (Some(a), Some(b)) => Ok((a.clone(), b.clone())),
        (None, None) if cams.len() == 2 => {
            let mut it = cams.into_iter();
            Ok((it.next().unwrap().to_string(), it.next().unwrap().to_string()))
        }
        (None, None) => Err(protocol!(
            "expected exactly two cameras, found {:?}; set protocol.camera_a/camera_b",
            cams
        )),
        _ => Err(Error::Config("set both protocol.camera_a and protocol.camera_b, or neither".into())),
    }
}

struct TrialData {
    train: Vec<LabeledSample>,
    cam_a: Vec<LabeledSample>,
    cam_b: Vec<LabeledSample>,
}

/// Shared splits and data for a set of method runs.
pub struct Benchmark<'a> {
    samples: &'a [LabeledSample],
    splits: Vec<TrialSplit>,
    camera_a: String,
    camera_b: String,
    direction: Direction,
    preprocess: Vec<PreprocessOption>,
    protocol: ProtocolConfig,
}

impl<'a> Benchmark<'a> {
    pub fn new(
        samples: &'a [LabeledSample],
        protocol: &ProtocolConfig,
        preprocess: &[PreprocessOption],
    ) -> Result<Self> {
        let (camera_a, camera_b) = resolve_cameras(samples, protocol)?;
        if camera_a == camera_b {
            return Err(Error::Config("probe and gallery cameras must differ".into()));
        }
        let ids: BTreeSet<&str> = samples.iter().map(|s| s.person_id.as_str()).collect();
        let ids: Vec<&str> = ids.into_iter().collect();
        let splits = make_splits(&ids, protocol.num_trials, protocol.seed)?;
        Ok(Benchmark {
            samples,
            splits,
            camera_a,
            camera_b,
            direction: protocol.direction,
            preprocess: preprocess.to_vec(),
            protocol: protocol.clone(),
        })
    }

    pub fn splits(&self) -> &[TrialSplit] {
        &self.splits
    }

    fn camera_samples(&self, ids: &[String], camera: &str, trial: usize) -> Result<Vec<LabeledSample>> {
        ids.iter()
            .map(|id| {
                self.samples
                    .iter()
                    .find(|s| &s.person_id == id && s.camera_id == camera)
                    .cloned()
                    .ok_or_else(|| {
                        protocol!("trial {trial}: test identity {id:?} has no video from camera {camera:?}")
                    })
            })
            .collect()
    }

    fn trial_data(&self, split: &TrialSplit) -> Result<TrialData> {
        let train_ids: BTreeSet<&str> = split.train_ids.iter().map(String::as_str).collect();
        let train: Vec<LabeledSample> = self
            .samples
            .iter()
            .filter(|s| train_ids.contains(s.person_id.as_str()))
            .cloned()
            .collect();
        let cam_a = self.camera_samples(&split.test_ids, &self.camera_a, split.trial)?;
        let cam_b = self.camera_samples(&split.test_ids, &self.camera_b, split.trial)?;
        let pre = Preprocessor::fit(&self.preprocess, &train)?;
        if pre.is_identity() {
            return Ok(TrialData { train, cam_a, cam_b });
        }
        Ok(TrialData {
            train: pre.apply(&train)?,
            cam_a: pre.apply(&cam_a)?,
            cam_b: pre.apply(&cam_b)?,
        })
    }

    fn ranker(&self, method: Method, data: &TrialData, cfg: &TrainConfig, trial: usize) -> Result<(Ranker, Option<TrainSummary>)> {
        match method {
            Method::Euclidean => Ok((Ranker::Euclidean, None)),
            Method::L1norm => Ok((Ranker::L1, None)),
            Method::Tdl => {
                let cfg = TrainConfig {
                    rng_seed: cfg.rng_seed.wrapping_add(trial as u64),
                    ..cfg.clone()
                };
                let report = train(&data.train, &cfg)?;
                let summary = TrainSummary {
                    iters_run: report.iters_run,
                    accepted: report.accepted,
                    converged: report.converged,
                    stop_reason: report.stop_reason,
                    initial_loss: report.loss_trace[0],
                    final_loss: *report.loss_trace.last().unwrap(),
                    metric_trace: report.final_metric.trace(),
                    metric_max_eigenvalue: report.max_eigenvalue,
                };
                Ok((Ranker::Metric(report.final_metric), Some(summary)))
            }
        }
    }

    /// Trial results per requested direction.
    fn run_trial(&self, method: Method, cfg: &TrainConfig, split: &TrialSplit) -> Result<Vec<TrialResult>> {
        let data = self.trial_data(split)?;
        let start = Instant::now();
        let (ranker, summary) = self.ranker(method, &data, cfg, split.trial)?;
        let train_secs = start.elapsed().as_secs_f64();
        self.direction
            .expand()
            .into_iter()
            .map(|dir| {
                let (probes, gallery) = match dir {
                    Direction::BToA => (&data.cam_b, &data.cam_a),
                    _ => (&data.cam_a, &data.cam_b),
                };
                let cmc = cmc_with(&ranker, probes, gallery)?;
                Ok(TrialResult {
                    trial: split.trial,
                    auc: auc_cmc(&cmc)?,
                    cmc,
                    train: summary.clone(),
                    train_secs,
                })
            })
            .collect()
    }

    /// Runs `method` over every split; one report per direction.
    pub fn run(&self, method: Method, cfg: &TrainConfig) -> Result<Vec<BenchmarkReport>> {
        if method == Method::Tdl {
            cfg.validate()?;
        }
        let start = Instant::now();
        let per_trial = self
            .splits
            .par_iter()
            .map(|split| {
                self.run_trial(method, cfg, split)
                    .map_err(|e| e.context(format!("{} trial {}", method.name(), split.trial)))
            })
            .collect::<Result<Vec<_>>>()?;
        let elapsed = start.elapsed().as_secs_f64();
        let config = serde_json::json!({
            "method": method,
            "protocol": self.protocol,
            "preprocess": self.preprocess,
            "train": (method == Method::Tdl).then_some(cfg),
        });
        self.direction
            .expand()
            .into_iter()
            .enumerate()
            .map(|(di, dir)| {
                let trials: Vec<TrialResult> = per_trial.iter().map(|t| t[di].clone()).collect();
                let (probe_camera, gallery_camera) = match dir {
                    Direction::BToA => (self.camera_b.clone(), self.camera_a.clone()),
                    _ => (self.camera_a.clone(), self.camera_b.clone()),
                };
                assemble(method, dir, probe_camera, gallery_camera, trials, config.clone(), elapsed)
            })
            .collect()
    }

    /// Trains and evaluates TDL once per `alpha` on the shared splits, in the
    /// first configured direction.
    pub fn sweep_alpha(&self, alphas: &[f64], cfg: &TrainConfig) -> Result<Vec<SweepRow>> {
        alphas
            .iter()
            .map(|&alpha| {
                let cfg = TrainConfig { alpha, ..cfg.clone() };
                let report = self.run(Method::Tdl, &cfg)?.swap_remove(0);
                let collapsed = report.trials.iter().all(|t| {
                    t.train.as_ref().is_some_and(|s| s.metric_max_eigenvalue < DEGENERATE_EIGENVALUE)
                });
                Ok(SweepRow {
                    alpha,
                    mean_auc: report.auc,
                    mean_rank1: report.rank_rate(1),
                    degenerate: alpha == 0.0 || collapsed,
                })
            })
            .collect()
    }
}

/// Largest eigenvalue below which a learned metric counts as collapsed.
pub const DEGENERATE_EIGENVALUE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub mean_auc: f64,
    pub mean_rank1: f64,
    /// `alpha = 0` (the zero matrix is optimal) or every trial's metric collapsed.
    pub degenerate: bool,
}

fn assemble(
    method: Method,
    direction: Direction,
    probe_camera: String,
    gallery_camera: String,
    trials: Vec<TrialResult>,
    config: serde_json::Value,
    elapsed_secs: f64,
) -> Result<BenchmarkReport> {
    let g = trials[0].cmc.len();
    if trials.iter().any(|t| t.cmc.len() != g) {
        return Err(protocol!("gallery size differs between trials"));
    }
    let n = trials.len() as f64;
    let rates = (0..g)
        .map(|k| trials.iter().map(|t| t.cmc.rates[k]).sum::<f64>() / n)
        .collect();
    let mean_cmc = CmcCurve { rates };
    let rank_table = REPORT_RANKS
        .iter()
        .map(|&rank| RankRate {
            rank,
            rate: mean_cmc.at_rank(rank),
        })
        .collect();
    let auc = auc_cmc(&mean_cmc)?;
    let label = match direction {
        Direction::BToA => format!("{}@b_to_a", method.name()),
        _ => method.name().to_string(),
    };
    Ok(BenchmarkReport {
        method,
        direction,
        label,
        probe_camera,
        gallery_camera,
        gallery_size: g,
        trials,
        mean_cmc,
        rank_table,
        auc,
        config,
        elapsed_secs,
    })
}

/// Runs each method over shared splits of `samples`.
pub fn run_benchmark(
    samples: &[LabeledSample],
    methods: &[Method],
    protocol: &ProtocolConfig,
    train_cfg: &TrainConfig,
    preprocess: &[PreprocessOption],
) -> Result<Vec<BenchmarkReport>> {
    let bench = Benchmark::new(samples, protocol, preprocess)?;
    let mut out = Vec::new();
    for &m in methods {
        out.extend(bench.run(m, train_cfg)?);
    }
    Ok(out)
}

/// `method,rank,mean_rate,trial_0,...` for every rank of every report.
pub fn cmc_csv(reports: &[BenchmarkReport]) -> String {
    let trials = reports.iter().map(|r| r.trials.len()).max().unwrap_or(0);
    let mut out = String::from("method,rank,mean_rate");
    for t in 0..trials {
        let _ = write!(out, ",trial_{t}");
    }
    out.push('\n');
    for r in reports {
        for (k, mean) in r.mean_cmc.rates.iter().enumerate() {
            let _ = write!(out, "{},{},{:.6}", r.label, k + 1, mean);
            for t in &r.trials {
                let _ = write!(out, ",{:.6}", t.cmc.rates[k]);
            }
            out.push('\n');
        }
    }
    out
}

/// `method,rank1,rank5,rank10,rank20,auc`; ranks in percent, AUC in `[0, 1]`.
pub fn table_csv(reports: &[BenchmarkReport]) -> String {
    let mut out = String::from("method,rank1,rank5,rank10,rank20,auc\n");
    for r in reports {
        let _ = write!(out, "{}", r.label);
        for rr in &r.rank_table {
            let _ = write!(out, ",{:.4}", 100.0 * rr.rate);
        }
        let _ = writeln!(out, ",{:.6}", r.auc);
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("alpha,mean_auc,mean_rank1,degenerate\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.6},{:.6},{}", r.alpha, r.mean_auc, r.mean_rank1, r.degenerate);
    }
    out
}

/// Human-readable rank table.
pub fn format_rank_table(reports: &[BenchmarkReport]) -> String {
    let width = reports.iter().map(|r| r.label.len()).max().unwrap_or(6).max(6);
    let mut out = format!(
        "{:<width$}  {:>7} {:>7} {:>7} {:>7} {:>7}\n",
        "method", "rank1", "rank5", "rank10", "rank20", "auc"
    );
    for r in reports {
        let _ = write!(out, "{:<width$} ", r.label);
        for rr in &r.rank_table {
            let _ = write!(out, " {:>7.2}", 100.0 * rr.rate);
        }
        let _ = writeln!(out, " {:>7.4}", r.auc);
    }
    out
}

/// Writes `report.json`, `cmc.csv` and `table.csv` into `dir`.
pub fn write_benchmark_files(dir: &Path, reports: &[BenchmarkReport]) -> Result<()> {
    let json = serde_json::to_vec_pretty(reports).map_err(|e| Error::Numerical(e.to_string()))?;
    write_atomic_bytes(&dir.join("report.json"), &json)?;
    write_atomic_bytes(&dir.join("cmc.csv"), cmc_csv(reports).as_bytes())?;
    write_atomic_bytes(&dir.join("table.csv"), table_csv(reports).as_bytes())
}
