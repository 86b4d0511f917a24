//! Single-shot re-identification protocol: half splits, ranking, CMC curves,
//! AUC and multi-trial benchmarks.

mod benchmark;
mod cmc;
mod rank;
mod split;

pub use benchmark::{
    cmc_csv, format_rank_table, run_benchmark, sweep_csv, table_csv, write_benchmark_files, Benchmark,
    BenchmarkReport, Direction, Method, ProtocolConfig, RankRate, SweepRow, TrainSummary, TrialResult,
    DEGENERATE_EIGENVALUE, REPORT_RANKS,
};
pub use cmc::{auc_cmc, cmc, cmc_from_distances, cmc_with, match_indices, match_rank, CmcCurve};
pub use rank::{l1_rank_gallery, order_by_distance, rank_gallery, Ranker};
pub use split::{make_splits, TrialSplit, DEFAULT_TRIALS};
