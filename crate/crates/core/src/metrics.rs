//! Achievable downlink rates evaluated on the true channels.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::precoding::PrecoderSet;
use crate::scalar::Real;

/// Per-user and aggregate rates in bit/s/Hz.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport<T> {
    pub per_user_rate: Vec<T>,
    pub sum_rate: T,
    pub served_count: usize,
    /// `sum_rate / K` over all configured users.
    pub per_user_average: T,
}

/// `w_k^H H_k F_RF f_s` for every stream `s`, or `None` if `user` is not
/// served.
pub fn link_gains<T: Real>(
    user: usize,
    channels: &[&ComplexMatrix<T>],
    precoders: &PrecoderSet<T>,
) -> Result<Option<Vec<Complex<T>>>> {
    let Some(w) = precoders.combiners.get(user).and_then(Option::as_ref) else {
        return Ok(None);
    };
    let h = channels
        .get(user)
        .ok_or_else(|| Error::Shape(format!("no channel for user {user}")))?;
    if h.rows() != w.len() || h.cols() != precoders.f_rf.rows() {
        return Err(Error::Shape(format!(
            "channel {}x{} against combiner {} and precoder {} rows",
            h.rows(),
            h.cols(),
            w.len(),
            precoders.f_rf.rows()
        )));
    }
    // row vector w^H H, then through F_RF and F_BB
    let wh: Vec<Complex<T>> = (0..h.cols())
        .map(|j| (0..h.rows()).map(|m| w[m].conj() * h[(m, j)]).sum())
        .collect();
    let row = ComplexMatrix::from_vec(1, wh.len(), wh)?;
    let eff = row.matmul(&precoders.f_rf)?.matmul(&precoders.f_bb)?;
    Ok(Some(eff.row(0).to_vec()))
}

/// `log2(1 + SINR_k)` with total power `p_dl` split evenly over the served
/// streams. Unserved users get zero.
pub fn user_rate<T: Real>(
    user: usize,
    channels: &[&ComplexMatrix<T>],
    precoders: &PrecoderSet<T>,
    p_dl: T,
    sigma_dl_sq: T,
) -> Result<T> {
    let Some(gains) = link_gains(user, channels, precoders)? else {
        return Ok(T::zero());
    };
    let s = precoders
        .stream_of(user)
        .ok_or_else(|| Error::Logic(format!("user {user} has a combiner but no stream")))?;
    let per_stream = p_dl / T::of_usize(precoders.served_count());
    let signal = per_stream * gains[s].norm_sqr();
    let interference: T = gains
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != s)
        .map(|(_, g)| g.norm_sqr())
        .sum::<T>()
        * per_stream;
    let denom = interference + sigma_dl_sq;
    if signal.is_zero() {
        return Ok(T::zero());
    }
    Ok((T::one() + signal / denom).log2())
}

pub fn sum_rate<T: Real>(
    channels: &[&ComplexMatrix<T>],
    precoders: &PrecoderSet<T>,
    p_dl: T,
    sigma_dl_sq: T,
) -> Result<RateReport<T>> {
    let per_user_rate = (0..channels.len())
        .map(|k| user_rate(k, channels, precoders, p_dl, sigma_dl_sq))
        .collect::<Result<Vec<_>>>()?;
    let sum: T = per_user_rate.iter().copied().sum();
    let k = channels.len().max(1);
    Ok(RateReport {
        sum_rate: sum,
        served_count: precoders.served_count(),
        per_user_average: sum / T::of_usize(k),
        per_user_rate,
    })
}

/// Linear transmit powers for unit noise variance: `P_ul = 10^(SNR_ul/10)`,
/// `P_dl = K 10^(SNR_dl/10)`.
pub fn snr_to_power(snr_ul_db: f64, snr_dl_db: f64, k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::Domain("user count must be positive".into()));
    }
    Ok((10f64.powf(snr_ul_db / 10.0), k as f64 * 10f64.powf(snr_dl_db / 10.0)))
}
