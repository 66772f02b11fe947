//! CSV row layouts. Column names are the field names.

use serde::Serialize;

use shardsim::analysis::bins::McEstimate;
use shardsim::framework::{Comparison, RunSummary, ShardEvent};
use shardsim::sync::SyncVariant;
use shardsim::FailureBound;

#[derive(Debug, Serialize)]
pub struct EventRow<'a> {
    pub round: u64,
    pub shard: u32,
    pub sub_block_size: usize,
    pub member_count: usize,
    pub byzantine_count: usize,
    pub discarded_messages: usize,
    pub local_state_size: usize,
    pub global_state_size: usize,
    pub monitor_status: &'a str,
}

impl<'a> From<&'a ShardEvent> for EventRow<'a> {
    fn from(e: &'a ShardEvent) -> Self {
        EventRow {
            round: e.round,
            shard: e.shard,
            sub_block_size: e.sub_block_size,
            member_count: e.member_count,
            byzantine_count: e.byzantine_count,
            discarded_messages: e.discarded_messages,
            local_state_size: e.local_state_size,
            global_state_size: e.global_state_size,
            monitor_status: &e.monitor_status,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SummaryRow {
    pub seed: u64,
    pub n: usize,
    pub m: u32,
    pub sync: SyncVariant,
    pub rounds_requested: u64,
    pub rounds_completed: u64,
    pub halted: bool,
    pub breach_round: Option<u64>,
    pub breach_count: usize,
    pub approved_txs: u64,
    pub throughput: f64,
    pub global_state_size: usize,
    /// Per-shard sizes joined with `;`.
    pub local_state_sizes: String,
    pub local_state_fraction: f64,
    pub candidates_checked: u64,
    pub disagreements: u64,
    pub honest_discarded: u64,
    pub compromised_shard_rounds: u64,
    pub first_breach: String,
}

impl From<&RunSummary> for SummaryRow {
    fn from(s: &RunSummary) -> Self {
        SummaryRow {
            seed: s.seed,
            n: s.n,
            m: s.m,
            sync: s.sync,
            rounds_requested: s.rounds_requested,
            rounds_completed: s.rounds_completed,
            halted: s.halted,
            breach_round: s.breach_round,
            breach_count: s.breaches.len(),
            approved_txs: s.approved_txs,
            throughput: s.throughput,
            global_state_size: s.global_state_size,
            local_state_sizes: s.local_state_sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
            local_state_fraction: s.local_state_fraction,
            candidates_checked: s.candidates_checked,
            disagreements: s.disagreements,
            honest_discarded: s.honest_discarded,
            compromised_shard_rounds: s.compromised_shard_rounds,
            first_breach: s.breaches.first().cloned().unwrap_or_default(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ComparisonRow {
    pub seed: u64,
    pub m: u32,
    pub rounds_compared: u64,
    pub approved_txs: u64,
    pub equal: bool,
    pub divergent_round: Option<u64>,
    pub sharded_only: Option<usize>,
    pub oracle_only: Option<usize>,
}

impl From<&Comparison> for ComparisonRow {
    fn from(c: &Comparison) -> Self {
        let d = c.first_divergence.as_ref();
        ComparisonRow {
            seed: c.seed,
            m: c.m,
            rounds_compared: c.rounds_compared,
            approved_txs: c.approved_txs,
            equal: c.equal(),
            divergent_round: d.map(|d| d.round),
            sharded_only: d.map(|d| d.sharded_only),
            oracle_only: d.map(|d| d.oracle_only),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BinsRow {
    pub n: u64,
    pub m: u32,
    pub red_fraction: f64,
    pub red_balls: u64,
    pub trials: u64,
    pub failures: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound: f64,
    pub log10_bound: f64,
    pub mean_red_fraction: f64,
    pub mean_red_fraction_se: f64,
    pub seed: u64,
}

impl BinsRow {
    pub fn new(e: &McEstimate, red_fraction: f64) -> Self {
        BinsRow {
            n: e.n,
            m: e.m,
            red_fraction,
            red_balls: e.red_balls,
            trials: e.trials,
            failures: e.failures,
            rate: e.rate,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            bound: e.bound.per_round,
            log10_bound: e.bound.ln_per_round / std::f64::consts::LN_10,
            mean_red_fraction: e.mean_red_fraction,
            mean_red_fraction_se: e.mean_red_fraction_se,
            seed: e.seed,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BoundRow {
    pub n: u64,
    pub m: u64,
    pub nodes_per_shard: f64,
    pub per_round: f64,
    pub log10_per_round: f64,
    pub honest_tail: f64,
    pub byzantine_tail: f64,
    pub million_year: f64,
    pub log10_million_year: f64,
}

impl From<&FailureBound> for BoundRow {
    fn from(b: &FailureBound) -> Self {
        BoundRow {
            n: b.n,
            m: b.m,
            nodes_per_shard: b.n as f64 / b.m as f64,
            per_round: b.per_round,
            log10_per_round: b.ln_per_round / std::f64::consts::LN_10,
            honest_tail: b.honest_tail,
            byzantine_tail: b.byzantine_tail,
            million_year: b.million_year,
            log10_million_year: b.ln_million_year / std::f64::consts::LN_10,
        }
    }
}
