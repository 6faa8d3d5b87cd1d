//! Training overhead tables and the beam-conflict probability experiment.

use rayon::prelude::*;
use serde::Serialize;

use crate::allocation::{conflict_probability, estimate_conflict_probability};
use crate::channel::{gen_channel, ChannelSpec};
use crate::error::{Error, Result};
use crate::metrics::snr_to_power;
use crate::rng::{stream_rng, Stage};
use crate::training::{index_bits, is_training, sp_expected_additional, sp_training, Codebooks, NoiseModel, SP_LINE_FIELD_BITS};

use super::config::{SystemConfig, TrainingConfig};
use super::runner::{mean_and_se, with_threads};

/// One scheme's overhead: initial slots, additional tests per user and
/// feedback bits. `additional` is the closed-form expectation; the measured
/// columns hold the Monte-Carlo mean and its standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverheadRow {
    pub scheme: String,
    pub initial: usize,
    pub additional: f64,
    pub overall: f64,
    pub bits: usize,
    pub measured_additional: Option<f64>,
    pub measured_se: Option<f64>,
}

fn check_geometry(n_bs: usize, n_ue: usize, n_rf: usize) -> Result<()> {
    if n_rf == 0 || !n_bs.is_multiple_of(n_rf) || !(n_bs * n_ue).is_multiple_of(2 * n_rf) {
        return Err(Error::Config(format!(
            "overhead table needs N_RF | N_BS and 2 N_RF | N_BS N_UE (got {n_bs}, {n_ue}, {n_rf})"
        )));
    }
    Ok(())
}

/// SP slot budget for a ratio of the exhaustive slot count.
pub fn sp_budget(n_bs: usize, n_ue: usize, n_rf: usize, ratio: f64) -> usize {
    ((ratio * (n_bs * n_ue) as f64 / n_rf as f64).round() as usize).max(1)
}

/// Closed-form rows for OP, IS and SP at each ratio.
pub fn formula_rows(n_bs: usize, n_ue: usize, n_rf: usize, t: usize, sp_ratios: &[f64]) -> Result<Vec<OverheadRow>> {
    check_geometry(n_bs, n_ue, n_rf)?;
    let full = n_bs * n_ue / n_rf;
    let row = |scheme: String, initial: usize, additional: f64, bits: usize| OverheadRow {
        scheme,
        initial,
        additional,
        overall: initial as f64 + additional,
        bits,
        measured_additional: None,
        measured_se: None,
    };
    let mut rows = vec![
        row("OP".into(), full, 0.0, 0),
        row("IS".into(), full / 2, (6 * t) as f64, t * index_bits(n_ue)),
    ];
    for &r in sp_ratios {
        let d = sp_budget(n_bs, n_ue, n_rf, r);
        rows.push(row(
            format!("SP({r})"),
            d,
            sp_expected_additional(n_bs, n_ue, n_rf, t, d),
            t * (index_bits(n_ue) + SP_LINE_FIELD_BITS),
        ));
    }
    Ok(rows)
}

/// Which partial scheme to measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartialScheme {
    Is,
    Sp { d_max: usize },
}

/// Mean and standard error of the per-user additional test count of one
/// partial scheme over `runs` single-user trainings on random channels.
pub fn measure_additional(
    system: &SystemConfig,
    channel: &ChannelSpec,
    training: &TrainingConfig,
    scheme: PartialScheme,
    runs: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<(f64, f64)> {
    let books = Codebooks::<f64>::for_arrays(system.n_ue, system.n_bs)?;
    let (p_ul, _) = snr_to_power(system.snr_ul_db, system.snr_dl_db, 1)?;
    let noise = NoiseModel {
        sigma_ul_sq: 1.0,
        tau: 1,
        p_ul,
    };
    let n_rf = system.training_rf();
    let counts = with_threads(threads, || {
        (0..runs as u64)
            .into_par_iter()
            .map(|run| {
                let mut ch_rng = stream_rng(seed, run, 0, Stage::Channel);
                let h = gen_channel(channel, system.n_ue, system.n_bs, &mut ch_rng)?;
                let mut noise_rng = stream_rng(seed, run, 0, Stage::TrainingNoise);
                let out = match scheme {
                    PartialScheme::Is => is_training(&[h.matrix()], &books, &noise, n_rf, training.t_crosses, &mut noise_rng)?,
                    PartialScheme::Sp { d_max } => {
                        let mut sched = stream_rng(seed, run, 0, Stage::SpSchedule);
                        sp_training(
                            &[h.matrix()],
                            &books,
                            &noise,
                            n_rf,
                            training.t_crosses,
                            d_max,
                            training.sp_init,
                            &mut sched,
                            &mut noise_rng,
                        )?
                    }
                };
                Ok(out.measurements[0].additional_tests() as f64)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(mean_and_se(&counts))
}

/// Formula rows with measured IS/SP additional counts filled in when
/// `runs > 0`.
pub fn overhead_table(
    system: &SystemConfig,
    channel: &ChannelSpec,
    training: &TrainingConfig,
    sp_ratios: &[f64],
    runs: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<OverheadRow>> {
    let n_rf = system.training_rf();
    let mut rows = formula_rows(system.n_bs, system.n_ue, n_rf, training.t_crosses, sp_ratios)?;
    if runs == 0 {
        return Ok(rows);
    }
    rows[0].measured_additional = Some(0.0);
    rows[0].measured_se = Some(0.0);
    let schemes = std::iter::once(PartialScheme::Is).chain(
        sp_ratios
            .iter()
            .map(|&r| PartialScheme::Sp { d_max: sp_budget(system.n_bs, system.n_ue, n_rf, r) }),
    );
    for (row, scheme) in rows.iter_mut().skip(1).zip(schemes) {
        let (m, se) = measure_additional(system, channel, training, scheme, runs, seed, threads)?;
        row.measured_additional = Some(m);
        row.measured_se = Some(se);
    }
    Ok(rows)
}

/// Closed form against a Monte-Carlo uniform-draw estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConflictRow {
    pub n_bs: usize,
    pub k: usize,
    pub closed_form: f64,
    pub simulated: f64,
    pub std_error: f64,
    /// `(simulated - closed_form) / std_error`.
    pub z_score: f64,
}

pub fn conflict_table(n_bs: usize, ks: &[usize], trials: usize, seed: u64) -> Result<Vec<ConflictRow>> {
    ks.iter()
        .map(|&k| {
            let mut rng = stream_rng(seed, 0, k as u64, Stage::ConflictDraw);
            let est = estimate_conflict_probability(n_bs, k, trials, &mut rng)?;
            let closed_form = conflict_probability(n_bs, k);
            let z_score = if est.std_error > 0.0 {
                (est.rate - closed_form) / est.std_error
            } else {
                0.0
            };
            Ok(ConflictRow {
                n_bs,
                k,
                closed_form,
                simulated: est.rate,
                std_error: est.std_error,
                z_score,
            })
        })
        .collect()
}
