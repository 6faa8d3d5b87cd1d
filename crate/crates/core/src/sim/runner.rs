//! One end-to-end trial and the Monte-Carlo loop around it.

use rayon::prelude::*;
use serde::Serialize;

use crate::allocation::{allocate_naive, allocate_qc, Allocation, QosThresholds};
use crate::channel::{gen_channel, ChannelRealization, ChannelSpec};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::metrics::{snr_to_power, sum_rate, RateReport};
use crate::precoding::{
    assemble_analog, estimate_effective_channel, mmse_precoder, normalize_columns, normalize_columns_lenient,
    required_entries, zf_precoder, zf_pseudo_inverse, PrecoderSet,
};
use crate::rng::{stream_rng, Stage};
use crate::training::{
    is_training, op_training, sp_training, top_up, Codebooks, NoiseModel, OverheadReport, TrainingOutcome,
};

use super::config::{Allocator, Digital, GammaRule, Scheme, SimConfig, SystemConfig, TrainingConfig, Variant};

/// Everything a trial needs besides its index.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub system: SystemConfig,
    pub channel: ChannelSpec,
    pub training: TrainingConfig,
    pub gamma: GammaRule,
    pub variant: Variant,
    pub seed: u64,
    books: Codebooks<f64>,
}

impl Scenario {
    pub fn new(
        system: SystemConfig,
        channel: ChannelSpec,
        training: TrainingConfig,
        gamma: GammaRule,
        variant: Variant,
        seed: u64,
    ) -> Result<Self> {
        system.validate()?;
        channel.validate()?;
        variant.validate()?;
        let books = Codebooks::for_arrays(system.n_ue, system.n_bs)?;
        Ok(Self {
            system,
            channel,
            training,
            gamma,
            variant,
            seed,
            books,
        })
    }

    pub fn from_config(cfg: &SimConfig, variant: Variant) -> Result<Self> {
        Self::new(
            cfg.system.clone(),
            cfg.channel.clone(),
            cfg.training,
            cfg.gamma,
            variant,
            cfg.seed,
        )
    }

    pub fn books(&self) -> &Codebooks<f64> {
        &self.books
    }

    /// SP initial slot budget, `round(ratio N_BS N_UE / N_RF)`.
    pub fn d_max(&self) -> Option<usize> {
        let r = self.variant.d_max_ratio?;
        let full = (self.system.n_bs * self.system.n_ue) as f64 / self.system.training_rf() as f64;
        Some(((r * full).round() as usize).max(1))
    }

    /// Channels of trial `trial`; identical for every variant sharing the
    /// root seed.
    pub fn channels(&self, trial: u64) -> Result<Vec<ChannelRealization<f64>>> {
        (0..self.system.k_users)
            .map(|k| {
                let mut rng = stream_rng(self.seed, trial, k as u64, Stage::Channel);
                gen_channel(&self.channel, self.system.n_ue, self.system.n_bs, &mut rng)
            })
            .collect()
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub sum_rate: f64,
    pub per_user_rate: f64,
    pub served: usize,
    pub overhead: OverheadReport,
    /// The allocation gave two users the same BS codeword.
    pub conflict: bool,
    /// ZF needed the pseudo-inverse fallback.
    pub fallback: bool,
}

/// Intermediate products of a trial, exposed for inspection and tests.
#[derive(Debug, Clone)]
pub struct TrialDetail {
    pub channels: Vec<ChannelRealization<f64>>,
    pub training: TrainingOutcome<f64>,
    pub allocation: Allocation,
    pub precoders: PrecoderSet<f64>,
    pub rates: RateReport<f64>,
    pub record: TrialRecord,
}

pub fn run_trial(scenario: &Scenario, trial: u64) -> Result<TrialRecord> {
    Ok(run_trial_detailed(scenario, trial)?.record)
}

pub fn run_trial_detailed(scenario: &Scenario, trial: u64) -> Result<TrialDetail> {
    let channels = scenario.channels(trial)?;
    run_trial_on(scenario, trial, channels)
}

/// Runs the pipeline on given channels, drawing noise from `trial`'s streams.
pub fn run_trial_on(scenario: &Scenario, trial: u64, channels: Vec<ChannelRealization<f64>>) -> Result<TrialDetail> {
    let sys = &scenario.system;
    let books = &scenario.books;
    let k = sys.k_users;
    if channels.len() != k {
        return Err(Error::Shape(format!("{} channels for {k} users", channels.len())));
    }
    let (p_ul, p_dl) = snr_to_power(sys.snr_ul_db, sys.snr_dl_db, k)?;
    let noise = NoiseModel {
        sigma_ul_sq: 1.0,
        tau: sys.tau(),
        p_ul,
    };
    let h: Vec<&ComplexMatrix<f64>> = channels.iter().map(ChannelRealization::matrix).collect();
    let mut noise_rng = stream_rng(scenario.seed, trial, 0, Stage::TrainingNoise);
    let n_rf = sys.training_rf();
    let t = scenario.training.t_crosses;
    let mut training = match scenario.variant.scheme {
        Scheme::Op => op_training(&h, books, &noise, n_rf, &mut noise_rng)?,
        Scheme::Is => is_training(&h, books, &noise, n_rf, t, &mut noise_rng)?,
        Scheme::Sp => {
            let d_max = scenario.d_max().ok_or_else(|| Error::Config("SP without d_max_ratio".into()))?;
            let mut schedule = stream_rng(scenario.seed, trial, 0, Stage::SpSchedule);
            sp_training(
                &h,
                books,
                &noise,
                n_rf,
                t,
                d_max,
                scenario.training.sp_init,
                &mut schedule,
                &mut noise_rng,
            )?
        }
    };

    let allocation = match scenario.variant.allocator {
        Allocator::Naive => allocate_naive(&training.measurements)?,
        Allocator::Qc => {
            let gamma = scenario.gamma.threshold(k, sys.snr_dl_db);
            allocate_qc(&training.measurements, &QosThresholds::uniform(k, gamma)?)?
        }
    };
    let conflict = !allocation.is_conflict_free();

    // cross-user entries the estimate needs but partial training skipped
    if scenario.variant.scheme != Scheme::Op {
        let needed = required_entries(&allocation);
        for user in allocation.served() {
            let cells: Vec<(usize, usize)> = needed
                .iter()
                .filter(|(u, _, _)| *u == user)
                .map(|&(_, r, c)| (r, c))
                .collect();
            let mut rng = stream_rng(scenario.seed, trial, user as u64, Stage::TopUpNoise);
            top_up(&mut training.measurements[user], h[user], books, &noise, &cells, &mut rng)?;
        }
        training.overhead.additional_tests = training
            .measurements
            .iter()
            .map(|m| m.additional_tests())
            .max()
            .unwrap_or(0);
    }

    let mut precoders = assemble_analog(&allocation, books)?;
    let served = precoders.served_count();
    let mut fallback = false;
    if served > 0 {
        let est = estimate_effective_channel(&training.measurements, &allocation)?;
        let raw = match scenario.variant.digital {
            Digital::Zf => match zf_precoder(&est.h_tilde) {
                Ok(f) => f,
                Err(Error::RankDeficient { .. }) => {
                    fallback = true;
                    zf_pseudo_inverse(&est.h_tilde)?
                }
                Err(e) => return Err(e),
            },
            Digital::Mmse => mmse_precoder(&est.h_tilde, p_dl, served, 1.0)?,
        };
        precoders.f_bb = if fallback {
            normalize_columns_lenient(&precoders.f_rf, &raw)?
        } else {
            normalize_columns(&precoders.f_rf, &raw)?
        };
    }
    let rates = sum_rate(&h, &precoders, p_dl, 1.0)?;
    let record = TrialRecord {
        sum_rate: rates.sum_rate,
        per_user_rate: rates.per_user_average,
        served: rates.served_count,
        overhead: training.overhead,
        conflict,
        fallback,
    };
    Ok(TrialDetail {
        channels,
        training,
        allocation,
        precoders,
        rates,
        record,
    })
}

/// Monte-Carlo averages with standard errors of the mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateResult {
    pub trials_run: usize,
    pub mean_sum_rate: f64,
    pub se_sum_rate: f64,
    pub mean_per_user_rate: f64,
    pub se_per_user_rate: f64,
    pub mean_served: f64,
    pub mean_initial_tests: f64,
    pub mean_additional_tests: f64,
    pub mean_feedback_bits: f64,
    pub conflict_rate: f64,
    pub fallback_rate: f64,
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl AggregateResult {
    /// Reduces records in the given order.
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let n = records.len();
        let col = |f: &dyn Fn(&TrialRecord) -> f64| -> Vec<f64> { records.iter().map(f).collect() };
        let mean = |f: &dyn Fn(&TrialRecord) -> f64| mean_and_se(&col(f)).0;
        let (mean_sum_rate, se_sum_rate) = mean_and_se(&col(&|r| r.sum_rate));
        let (mean_per_user_rate, se_per_user_rate) = mean_and_se(&col(&|r| r.per_user_rate));
        Self {
            trials_run: n,
            mean_sum_rate,
            se_sum_rate,
            mean_per_user_rate,
            se_per_user_rate,
            mean_served: mean(&|r| r.served as f64),
            mean_initial_tests: mean(&|r| r.overhead.initial_tests as f64),
            mean_additional_tests: mean(&|r| r.overhead.additional_tests as f64),
            mean_feedback_bits: mean(&|r| r.overhead.feedback_bits as f64),
            conflict_rate: mean(&|r| f64::from(u8::from(r.conflict))),
            fallback_rate: mean(&|r| f64::from(u8::from(r.fallback))),
        }
    }
}

/// Runs `trials` trials in parallel. Records are reduced in trial order, so
/// the result does not depend on the thread count.
pub fn run_monte_carlo(scenario: &Scenario, trials: usize, threads: Option<usize>) -> Result<AggregateResult> {
    if trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    let records = run_records(scenario, trials, threads)?;
    Ok(AggregateResult::from_records(&records))
}

pub fn run_records(scenario: &Scenario, trials: usize, threads: Option<usize>) -> Result<Vec<TrialRecord>> {
    with_threads(threads, || {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| run_trial(scenario, t))
            .collect::<Result<Vec<_>>>()
    })
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(f),
    }
}
