//! Parameter sweeps written as CSV.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

use super::config::{Axis, SimConfig, Variant};
use super::runner::{run_monte_carlo, AggregateResult, Scenario};

/// Column order of the sweep CSV.
pub const CSV_HEADER: &str = "axis,scheme,allocator,digital,K,N_BS,N_UE,N_RF,snr_dl_db,mean_sum_rate,se_sum_rate,mean_per_user_rate,mean_served,init_tests,add_tests,feedback_bits,conflict_rate";

/// One CSV line: a variant at one axis value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub scheme: String,
    pub allocator: String,
    pub digital: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N_BS")]
    pub n_bs: usize,
    #[serde(rename = "N_UE")]
    pub n_ue: usize,
    #[serde(rename = "N_RF")]
    pub n_rf: usize,
    pub snr_dl_db: f64,
    pub mean_sum_rate: f64,
    pub se_sum_rate: f64,
    pub mean_per_user_rate: f64,
    pub mean_served: f64,
    pub init_tests: f64,
    pub add_tests: f64,
    pub feedback_bits: f64,
    pub conflict_rate: f64,
}

impl SweepRow {
    fn new(axis: Axis, scenario: &Scenario, agg: &AggregateResult) -> Self {
        let s = &scenario.system;
        let v = &scenario.variant;
        Self {
            axis: axis.name().to_string(),
            scheme: v.scheme_label(),
            allocator: v.allocator.to_string(),
            digital: v.digital.to_string(),
            k: s.k_users,
            n_bs: s.n_bs,
            n_ue: s.n_ue,
            n_rf: s.n_rf,
            snr_dl_db: s.snr_dl_db,
            mean_sum_rate: agg.mean_sum_rate,
            se_sum_rate: agg.se_sum_rate,
            mean_per_user_rate: agg.mean_per_user_rate,
            mean_served: agg.mean_served,
            init_tests: agg.mean_initial_tests,
            add_tests: agg.mean_additional_tests,
            feedback_bits: agg.mean_feedback_bits,
            conflict_rate: agg.conflict_rate,
        }
    }
}

/// Runs every variant of `cfg` at every value of `axis`. All points share
/// the root seed, so variants at one value see the same channels.
pub fn sweep(cfg: &SimConfig, axis: Axis, values: &[f64]) -> Result<Vec<SweepRow>> {
    sweep_variants(cfg, &cfg.variants, axis, values)
}

pub fn sweep_variants(cfg: &SimConfig, variants: &[Variant], axis: Axis, values: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(values.len() * variants.len());
    for &value in values {
        let system = axis.apply(&cfg.system, value)?;
        for &variant in variants {
            let scenario = Scenario::new(
                system.clone(),
                cfg.channel.clone(),
                cfg.training,
                cfg.gamma,
                variant,
                cfg.seed,
            )?;
            let agg = run_monte_carlo(&scenario, cfg.trials, cfg.threads)?;
            rows.push(SweepRow::new(axis, &scenario, &agg));
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
