//! Hybrid precoder construction: analog beams from the allocation, the
//! effective channel estimated from training data, and ZF/MMSE digital
//! precoders with per-stream power normalization.

use num_complex::Complex;
use num_traits::Zero;

use crate::allocation::Allocation;
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::scalar::Real;
use crate::training::{Codebooks, MeasurementMatrix};

/// Largest 1-norm condition number accepted when inverting `H H^H`.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative eigenvalue cutoff of the pseudo-inverse fallback.
pub const PINV_RCOND: f64 = 1e-12;

/// Analog precoder, digital precoder and user combiners of one downlink
/// transmission. Column `s` of `f_rf` and `f_bb` belongs to user `served[s]`.
#[derive(Debug, Clone)]
pub struct PrecoderSet<T> {
    pub f_rf: ComplexMatrix<T>,
    pub f_bb: ComplexMatrix<T>,
    pub combiners: Vec<Option<Vec<Complex<T>>>>,
    pub served: Vec<usize>,
}

impl<T: Real> PrecoderSet<T> {
    pub fn served_count(&self) -> usize {
        self.served.len()
    }

    /// Stream index of `user`, if served.
    pub fn stream_of(&self, user: usize) -> Option<usize> {
        self.served.iter().position(|&k| k == user)
    }

    /// Digital precoder column of stream `s` mapped through the analog
    /// precoder, `F_RF f_s`.
    pub fn transmit_vector(&self, s: usize) -> Result<Vec<Complex<T>>> {
        self.f_rf.mat_vec(&self.f_bb.column(s))
    }
}

/// Analog beams for an allocation: BS column `conj(f_c(q_k))`, UE combiner
/// `conj(w_c(p_k))`. The digital precoder is left as the identity.
pub fn assemble_analog<T: Real>(alloc: &Allocation, books: &Codebooks<T>) -> Result<PrecoderSet<T>> {
    let served = alloc.served();
    let mut combiners = vec![None; alloc.n_users()];
    let mut columns = Vec::with_capacity(served.len());
    for &k in &served {
        let pair = alloc.get(k).expect("served users have a pair");
        if pair.bs >= books.n_bs() || pair.ue >= books.n_ue() {
            return Err(Error::Domain(format!(
                "user {k} assigned ({}, {}) outside the {}x{} codebooks",
                pair.ue,
                pair.bs,
                books.n_ue(),
                books.n_bs()
            )));
        }
        columns.push(books.bs.codeword(pair.bs).conj());
        combiners[k] = Some(books.ue.codeword(pair.ue).conj());
    }
    let refs: Vec<&[Complex<T>]> = columns.iter().map(Vec::as_slice).collect();
    Ok(PrecoderSet {
        f_rf: ComplexMatrix::from_columns(books.n_bs(), &refs)?,
        f_bb: ComplexMatrix::identity(served.len()),
        combiners,
        served,
    })
}

/// Training-based estimate of the effective channel among served users.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannelEstimate<T> {
    pub h_tilde: ComplexMatrix<T>,
    pub served: Vec<usize>,
}

/// Entries `(user, ue row, bs column)` the estimate reads; the same cells the
/// partial training schemes must make sure were tested.
pub fn required_entries(alloc: &Allocation) -> Vec<(usize, usize, usize)> {
    let served = alloc.served();
    let mut out = Vec::with_capacity(served.len() * served.len());
    for &i in &served {
        let p = alloc.get(i).expect("served").ue;
        for &j in &served {
            out.push((i, p, alloc.get(j).expect("served").bs));
        }
    }
    out
}

/// Entry `(i, j)` is user `i`'s measurement at its own UE codeword and user
/// `j`'s BS codeword.
pub fn estimate_effective_channel<T: Real>(
    r: &[MeasurementMatrix<T>],
    alloc: &Allocation,
) -> Result<EffectiveChannelEstimate<T>> {
    if r.len() != alloc.n_users() {
        return Err(Error::Shape(format!(
            "{} measurement matrices for {} users",
            r.len(),
            alloc.n_users()
        )));
    }
    let served = alloc.served();
    let n = served.len();
    let mut h = ComplexMatrix::zeros(n, n);
    for (a, &i) in served.iter().enumerate() {
        let p = alloc.get(i).expect("served").ue;
        for (b, &j) in served.iter().enumerate() {
            let q = alloc.get(j).expect("served").bs;
            h[(a, b)] = r[i].get(p, q).ok_or(Error::EstimationGap { user: i, row: p, col: q })?;
        }
    }
    Ok(EffectiveChannelEstimate { h_tilde: h, served })
}

/// `H^H (H H^H)^-1`, refusing ill-conditioned `H H^H`.
pub fn zf_precoder<T: Real>(h: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    let gram = h.matmul(&h.adjoint())?;
    let inv = gram.inverse_checked(T::of(MAX_CONDITION))?;
    h.adjoint().matmul(&inv)
}

/// Minimum-norm least-squares right inverse, used when `H H^H` is singular.
pub fn zf_pseudo_inverse<T: Real>(h: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    h.pseudo_inverse(T::of(PINV_RCOND))
}

/// `H^H ((P/K) H H^H + sigma^2 I)^-1`.
pub fn mmse_precoder<T: Real>(h: &ComplexMatrix<T>, p_dl: T, k: usize, sigma_dl_sq: T) -> Result<ComplexMatrix<T>> {
    if k == 0 {
        return Err(Error::Domain("MMSE precoder needs at least one stream".into()));
    }
    let gram = h.matmul(&h.adjoint())?;
    let load = Complex::new(p_dl / T::of_usize(k), T::zero());
    let reg = gram
        .scale(load)
        .add(&ComplexMatrix::identity(h.rows()).scale(Complex::new(sigma_dl_sq, T::zero())))?;
    let inv = if sigma_dl_sq > T::zero() {
        reg.inverse()?
    } else {
        reg.inverse_checked(T::of(MAX_CONDITION))?
    };
    h.adjoint().matmul(&inv)
}

/// Scales column `s` of `f_bb_raw` so that `|F_RF f_s| = 1`.
pub fn normalize_columns<T: Real>(f_rf: &ComplexMatrix<T>, f_bb_raw: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    normalize_impl(f_rf, f_bb_raw, false)
}

/// As [`normalize_columns`] but leaves degenerate columns at zero, which
/// silences that stream.
pub fn normalize_columns_lenient<T: Real>(
    f_rf: &ComplexMatrix<T>,
    f_bb_raw: &ComplexMatrix<T>,
) -> Result<ComplexMatrix<T>> {
    normalize_impl(f_rf, f_bb_raw, true)
}

fn normalize_impl<T: Real>(f_rf: &ComplexMatrix<T>, f_bb_raw: &ComplexMatrix<T>, lenient: bool) -> Result<ComplexMatrix<T>> {
    let tx = f_rf.matmul(f_bb_raw)?;
    let mut out = f_bb_raw.clone();
    let scale = f_bb_raw.frobenius_norm();
    for s in 0..f_bb_raw.cols() {
        let norm = tx.column(s).iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if !(norm > scale * T::EPS) || !norm.is_finite() {
            if lenient {
                out.set_column(s, &vec![Complex::zero(); f_bb_raw.rows()]);
                continue;
            }
            return Err(Error::DegeneratePrecoder(s));
        }
        let col: Vec<Complex<T>> = f_bb_raw.column(s).iter().map(|z| z / norm).collect();
        out.set_column(s, &col);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::BeamPair;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    #[test]
    fn zf_examples() {
        let i2 = ComplexMatrix::<f64>::identity(2);
        assert!(zf_precoder(&i2).unwrap().max_abs_diff(&i2) < 1e-15);
        let d = ComplexMatrix::from_real_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let expect = ComplexMatrix::from_real_rows(&[vec![0.5, 0.0], vec![0.0, 0.25]]).unwrap();
        assert!(zf_precoder(&d).unwrap().max_abs_diff(&expect) < 1e-15);
        let low = ComplexMatrix::from_real_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert!(matches!(zf_precoder(&low), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn pseudo_inverse_of_conflict() {
        // identical columns: two users on the same BS beam
        let h = ComplexMatrix::from_real_rows(&[vec![3.0, 3.0], vec![1.0, 1.0]]).unwrap();
        let f = zf_pseudo_inverse(&h).unwrap();
        assert!(f.is_finite());
        // H F is the projector onto the range of H
        let p = h.matmul(&f).unwrap();
        assert!(p.matmul(&p).unwrap().max_abs_diff(&p) < 1e-10);
        assert!(p.matmul(&h).unwrap().max_abs_diff(&h) < 1e-10);
    }

    #[test]
    fn mmse_examples() {
        let i2 = ComplexMatrix::<f64>::identity(2);
        let f = mmse_precoder(&i2, 2.0, 2, 1.0).unwrap();
        assert!(f.max_abs_diff(&i2.scale(c(0.5))) < 1e-15);
        let low = ComplexMatrix::from_real_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert!(mmse_precoder(&low, 10.0, 2, 1.0).unwrap().is_finite());
    }

    #[test]
    fn normalization() {
        let i2 = ComplexMatrix::<f64>::identity(2);
        let raw = ComplexMatrix::from_real_rows(&[vec![3.0, 1.0], vec![4.0, 0.0]]).unwrap();
        let f = normalize_columns(&i2, &raw).unwrap();
        assert!((f[(0, 0)] - c(0.6)).norm() < 1e-15);
        assert!((f[(1, 0)] - c(0.8)).norm() < 1e-15);
        assert!(normalize_columns(&i2, &f).unwrap().max_abs_diff(&f) < 1e-15);

        let zero_col = ComplexMatrix::from_real_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(normalize_columns(&i2, &zero_col), Err(Error::DegeneratePrecoder(1))));
        let f = normalize_columns_lenient(&i2, &zero_col).unwrap();
        assert_eq!(f[(0, 1)], c(0.0));
    }

    #[test]
    fn analog_assembly() {
        let books = Codebooks::<f64>::for_arrays(4, 8).unwrap();
        let alloc = Allocation::from_pairs(vec![
            Some(BeamPair { ue: 1, bs: 5 }),
            None,
            Some(BeamPair { ue: 3, bs: 2 }),
        ]);
        let p = assemble_analog(&alloc, &books).unwrap();
        assert_eq!(p.served, vec![0, 2]);
        assert_eq!(p.f_rf.shape(), (8, 2));
        assert_eq!(p.f_rf.column(0), books.bs.codeword(5).conj());
        assert_eq!(p.f_rf.column(1), books.bs.codeword(2).conj());
        assert_eq!(p.combiners[0].as_deref(), Some(&books.ue.codeword(1).conj()[..]));
        assert!(p.combiners[1].is_none());
        for z in p.f_rf.as_slice() {
            assert!((z.norm() - 1.0 / 8f64.sqrt()).abs() < 1e-12);
        }

        let p = assemble_analog(&Allocation::unserved(3), &books).unwrap();
        assert_eq!(p.f_rf.shape(), (8, 0));

        let bad = Allocation::from_pairs(vec![Some(BeamPair { ue: 0, bs: 8 })]);
        assert!(assemble_analog(&bad, &books).is_err());
    }

    #[test]
    fn estimate_reads_cross_entries() {
        let r = vec![
            MeasurementMatrix::from_values(
                0,
                ComplexMatrix::from_real_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap(),
            ),
            MeasurementMatrix::from_values(
                1,
                ComplexMatrix::from_real_rows(&[vec![7.0, 8.0, 9.0], vec![10.0, 11.0, 12.0]]).unwrap(),
            ),
        ];
        let alloc = Allocation::from_pairs(vec![Some(BeamPair { ue: 1, bs: 2 }), Some(BeamPair { ue: 0, bs: 0 })]);
        let h = estimate_effective_channel(&r, &alloc).unwrap().h_tilde;
        let expect = ComplexMatrix::from_real_rows(&[vec![6.0, 4.0], vec![9.0, 7.0]]).unwrap();
        assert_eq!(h, expect);

        let single = Allocation::from_pairs(vec![None, Some(BeamPair { ue: 1, bs: 1 })]);
        let h = estimate_effective_channel(&r, &single).unwrap().h_tilde;
        assert_eq!(h.shape(), (1, 1));
        assert_eq!(h[(0, 0)], c(11.0));

        let gap = MeasurementMatrix::with_mask(
            0,
            ComplexMatrix::from_real_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap(),
            vec![true, true, true, false, true, true],
        )
        .unwrap();
        let r2 = vec![gap, r[1].clone()];
        assert!(matches!(
            estimate_effective_channel(&r2, &alloc),
            Err(Error::EstimationGap { user: 0, row: 1, col: 0 })
        ));
        assert_eq!(required_entries(&alloc).len(), 4);
    }
}
