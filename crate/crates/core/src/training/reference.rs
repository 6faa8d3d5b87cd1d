//! Literal pilot-domain model of one OP training slot, for validating the
//! synthesized measurements on small sizes.
//!
//! Users send `sqrt(tau P_ul) phi_k` through `H_k^ul = (H_k^dl)^T`; the BS
//! combines with `N_RF` codewords and despreads with each user's pilot.

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;

use crate::channel::{complex_gaussian, SteeringVector};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::scalar::Real;

use super::NoiseModel;

/// `k_users` mutually orthonormal pilot rows of length `tau` (scaled DFT rows).
pub fn dft_pilots<T: Real>(k_users: usize, tau: usize) -> Result<Vec<Vec<Complex<T>>>> {
    if tau < k_users {
        return Err(Error::Config(format!(
            "pilot length {tau} shorter than user count {k_users}"
        )));
    }
    let amp = T::one() / T::of_usize(tau).sqrt();
    Ok((0..k_users)
        .map(|k| {
            (0..tau)
                .map(|t| {
                    let angle = T::of(2.0) * T::PI() * T::of_usize(k * t) / T::of_usize(tau);
                    Complex::from_polar(amp, angle)
                })
                .collect()
        })
        .collect())
}

/// Simulates one slot with UE codeword `w` and BS combiners `bs_codewords`.
/// Returns `r_k` (length `N_RF`) for every user.
pub fn despread_slot<T: Real, R: Rng + ?Sized>(
    channels: &[&ComplexMatrix<T>],
    ue_codeword: &SteeringVector<T>,
    bs_codewords: &[&SteeringVector<T>],
    noise: &NoiseModel<T>,
    rng: &mut R,
) -> Result<Vec<Vec<Complex<T>>>> {
    let k_users = channels.len();
    noise.validate(k_users)?;
    let tau = noise.tau;
    let pilots = dft_pilots::<T>(k_users, tau)?;
    let n_bs = bs_codewords
        .first()
        .map(|f| f.n_antennas())
        .ok_or_else(|| Error::Shape("no BS codewords".into()))?;
    let n_rf = bs_codewords.len();
    let cols: Vec<&[Complex<T>]> = bs_codewords.iter().map(|f| f.entries()).collect();
    let f_rf = ComplexMatrix::from_columns(n_bs, &cols)?;
    let f_h = f_rf.adjoint();
    let gain = (T::of_usize(tau) * noise.p_ul).sqrt();

    // Y = sum_k sqrt(tau P) F^H H_ul w phi_k + F^H N
    let mut y = ComplexMatrix::zeros(n_rf, tau);
    for (h, phi) in channels.iter().zip(&pilots) {
        let h_ul = h.transpose();
        let hw = h_ul.mat_vec(ue_codeword.entries())?;
        let comb = f_h.mat_vec(&hw)?;
        for m in 0..n_rf {
            for t in 0..tau {
                y[(m, t)] += comb[m] * phi[t] * gain;
            }
        }
    }
    if noise.sigma_ul_sq > T::zero() {
        let n_ul = ComplexMatrix::from_fn(n_bs, tau, |_, _| complex_gaussian(rng, noise.sigma_ul_sq));
        y = y.add(&f_h.matmul(&n_ul)?)?;
    }

    // r_k = phi_k^* Y^T / sqrt(tau P)
    Ok(pilots
        .iter()
        .map(|phi| {
            (0..n_rf)
                .map(|m| {
                    let s = (0..tau).fold(Complex::zero(), |acc, t| acc + phi[t].conj() * y[(m, t)]);
                    s / gain
                })
                .collect()
        })
        .collect())
}
