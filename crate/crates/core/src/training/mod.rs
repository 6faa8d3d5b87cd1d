//! Uplink beam training: exhaustive orthogonal-pilot (OP) training and the
//! two partial schemes, interlaced scanning (IS) and selection probability
//! (SP), together with their overhead accounting.
//!
//! All users transmit orthogonal pilots, so one training slot yields the same
//! `(UE codeword, N_RF BS codewords)` entries of every user's measurement
//! matrix at once. Measurements are synthesized from the virtual channel plus
//! complex Gaussian noise of variance `sigma_ul^2 / (tau P_ul)`, the exact
//! post-despreading statistic; [`reference`] materializes the pilot
//! despreading literally for validation.

mod cross;
pub mod reference;
mod sp;

pub use cross::{cross_region, select_col_pair, select_row_pair, CrossRegion};
pub use sp::{SpInit, SpState};

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;
use serde::Serialize;

use crate::channel::{complex_gaussian, Codebook, SteeringVector, VirtualTransform};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::scalar::Real;

/// Uplink noise parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel<T> {
    pub sigma_ul_sq: T,
    pub tau: usize,
    pub p_ul: T,
}

impl<T: Real> NoiseModel<T> {
    pub fn noiseless(tau: usize) -> Self {
        Self {
            sigma_ul_sq: T::zero(),
            tau,
            p_ul: T::one(),
        }
    }

    /// Noise variance of one despread measurement.
    pub fn measurement_variance(&self) -> T {
        self.sigma_ul_sq / (T::of_usize(self.tau) * self.p_ul)
    }

    pub fn validate(&self, n_users: usize) -> Result<()> {
        if self.tau < n_users.max(1) {
            return Err(Error::Config(format!(
                "pilot length {} cannot hold {n_users} orthogonal pilots",
                self.tau
            )));
        }
        if !(self.p_ul > T::zero()) || self.sigma_ul_sq < T::zero() {
            return Err(Error::Config(
                "uplink power must be positive and noise variance nonnegative".into(),
            ));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex<T> {
        let var = self.measurement_variance();
        if var.is_zero() {
            Complex::zero()
        } else {
            complex_gaussian(rng, var)
        }
    }
}

/// The pair of codebooks used for training, with the virtual-channel
/// transform precomputed.
#[derive(Debug, Clone)]
pub struct Codebooks<T> {
    pub ue: Codebook<T>,
    pub bs: Codebook<T>,
    transform: VirtualTransform<T>,
}

impl<T: Real> Codebooks<T> {
    pub fn new(ue: Codebook<T>, bs: Codebook<T>) -> Self {
        let transform = VirtualTransform::new(&ue, &bs);
        Self { ue, bs, transform }
    }

    pub fn for_arrays(n_ue: usize, n_bs: usize) -> Result<Self> {
        Ok(Self::new(
            crate::channel::make_codebook(n_ue)?,
            crate::channel::make_codebook(n_bs)?,
        ))
    }

    pub fn n_ue(&self) -> usize {
        self.ue.len()
    }

    pub fn n_bs(&self) -> usize {
        self.bs.len()
    }

    pub fn virtual_channel(&self, h: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        self.transform.apply(h)
    }
}

/// One user's `N_UE x N_BS` matrix of training observations.
#[derive(Debug, Clone)]
pub struct MeasurementMatrix<T> {
    user: usize,
    values: ComplexMatrix<T>,
    tested: Vec<bool>,
    initial_tests: usize,
    additional_tests: usize,
}

impl<T: Real> MeasurementMatrix<T> {
    pub fn new(user: usize, n_ue: usize, n_bs: usize) -> Self {
        Self {
            user,
            values: ComplexMatrix::zeros(n_ue, n_bs),
            tested: vec![false; n_ue * n_bs],
            initial_tests: 0,
            additional_tests: 0,
        }
    }

    /// Fully tested matrix holding `values`.
    pub fn from_values(user: usize, values: ComplexMatrix<T>) -> Self {
        let n = values.rows() * values.cols();
        Self {
            user,
            values,
            tested: vec![true; n],
            initial_tests: n,
            additional_tests: 0,
        }
    }

    /// Matrix with an explicit tested mask (row-major). Untested values are
    /// forced to zero.
    pub fn with_mask(user: usize, mut values: ComplexMatrix<T>, tested: Vec<bool>) -> Result<Self> {
        if tested.len() != values.rows() * values.cols() {
            return Err(Error::Shape("mask length does not match matrix".into()));
        }
        let cols = values.cols();
        for (idx, &t) in tested.iter().enumerate() {
            if !t {
                values[(idx / cols, idx % cols)] = Complex::zero();
            }
        }
        let count = tested.iter().filter(|&&t| t).count();
        Ok(Self {
            user,
            values,
            tested,
            initial_tests: count,
            additional_tests: 0,
        })
    }

    pub fn user(&self) -> usize {
        self.user
    }

    pub fn n_ue(&self) -> usize {
        self.values.rows()
    }

    pub fn n_bs(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &ComplexMatrix<T> {
        &self.values
    }

    pub fn is_tested(&self, row: usize, col: usize) -> bool {
        self.tested[row * self.values.cols() + col]
    }

    pub fn tested_mask(&self) -> &[bool] {
        &self.tested
    }

    pub fn tested_count(&self) -> usize {
        self.tested.iter().filter(|&&t| t).count()
    }

    /// Entries measured during the initial phase.
    pub fn initial_tests(&self) -> usize {
        self.initial_tests
    }

    /// Entries measured after the initial phase (cross refinement and top-up).
    pub fn additional_tests(&self) -> usize {
        self.additional_tests
    }

    pub fn get(&self, row: usize, col: usize) -> Option<Complex<T>> {
        self.is_tested(row, col).then(|| self.values[(row, col)])
    }

    fn record(&mut self, row: usize, col: usize, value: Complex<T>, initial: bool) -> Result<()> {
        let idx = row * self.values.cols() + col;
        if self.tested[idx] {
            return Err(Error::Logic(format!(
                "entry ({row}, {col}) of user {} measured twice",
                self.user
            )));
        }
        self.tested[idx] = true;
        self.values[(row, col)] = value;
        if initial {
            self.initial_tests += 1;
        } else {
            self.additional_tests += 1;
        }
        Ok(())
    }
}

/// Training overhead in the units of the overhead tables: initial training
/// slots, additionally tested codeword pairs, and feedback bits per user.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OverheadReport {
    pub initial_tests: usize,
    pub additional_tests: usize,
    pub feedback_bits: usize,
}

impl OverheadReport {
    pub fn overall(&self) -> usize {
        self.initial_tests + self.additional_tests
    }
}

/// Measurement matrices of every user plus the overhead of the run.
///
/// `overhead.additional_tests` is the largest per-user count; the per-user
/// counts are on the individual matrices.
#[derive(Debug, Clone)]
pub struct TrainingOutcome<T> {
    pub measurements: Vec<MeasurementMatrix<T>>,
    pub overhead: OverheadReport,
}

/// One noisy observation `w^T H f^* + eta`.
pub fn measure_pair<T: Real, R: Rng + ?Sized>(
    h: &ComplexMatrix<T>,
    ue_codeword: &SteeringVector<T>,
    bs_codeword: &SteeringVector<T>,
    noise: &NoiseModel<T>,
    rng: &mut R,
) -> Result<Complex<T>> {
    if h.rows() != ue_codeword.n_antennas() || h.cols() != bs_codeword.n_antennas() {
        return Err(Error::Shape(format!(
            "channel {}x{} against codewords of length {} and {}",
            h.rows(),
            h.cols(),
            ue_codeword.n_antennas(),
            bs_codeword.n_antennas()
        )));
    }
    let f_conj = bs_codeword.conj();
    let hf = h.mat_vec(&f_conj)?;
    let signal: Complex<T> = ue_codeword
        .entries()
        .iter()
        .zip(&hf)
        .map(|(w, x)| w * x)
        .sum();
    Ok(signal + noise.sample(rng))
}

/// Which schedule produced the initial measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Initial,
    Additional,
}

struct Session<'a, T> {
    virtual_channels: Vec<ComplexMatrix<T>>,
    noise: &'a NoiseModel<T>,
    measurements: Vec<MeasurementMatrix<T>>,
}

impl<'a, T: Real> Session<'a, T> {
    fn new(
        channels: &[&ComplexMatrix<T>],
        books: &Codebooks<T>,
        noise: &'a NoiseModel<T>,
    ) -> Result<Self> {
        noise.validate(channels.len())?;
        let virtual_channels = channels
            .iter()
            .map(|h| books.virtual_channel(h))
            .collect::<Result<Vec<_>>>()?;
        let measurements = (0..channels.len())
            .map(|k| MeasurementMatrix::new(k, books.n_ue(), books.n_bs()))
            .collect();
        Ok(Self {
            virtual_channels,
            noise,
            measurements,
        })
    }

    fn measure<R: Rng + ?Sized>(
        &mut self,
        user: usize,
        row: usize,
        col: usize,
        phase: Phase,
        rng: &mut R,
    ) -> Result<()> {
        let value = self.virtual_channels[user][(row, col)] + self.noise.sample(rng);
        self.measurements[user].record(row, col, value, phase == Phase::Initial)
    }

    /// Measures `(row, col)` for every user, as one slot does.
    fn measure_all<R: Rng + ?Sized>(&mut self, row: usize, col: usize, rng: &mut R) -> Result<()> {
        for k in 0..self.measurements.len() {
            self.measure(k, row, col, Phase::Initial, rng)?;
        }
        Ok(())
    }

    /// Cross refinement shared by IS and SP: `t_crosses` rounds, each user
    /// locating its strongest row/column pair in a working copy, clearing the
    /// cross there and measuring every untested cross cell.
    fn refine<R: Rng + ?Sized>(&mut self, t_crosses: usize, rng: &mut R) -> Result<()> {
        let (n_ue, n_bs) = (
            self.virtual_channels[0].rows(),
            self.virtual_channels[0].cols(),
        );
        let mut working: Vec<ComplexMatrix<T>> = self
            .measurements
            .iter()
            .map(|m| m.values().clone())
            .collect();
        for _round in 0..t_crosses {
            for k in 0..self.measurements.len() {
                let (p, q) = match (select_row_pair(&working[k]), select_col_pair(&working[k])) {
                    (Ok(p), Ok(q)) => (p, q),
                    (Err(Error::NotFound(_)), _) | (_, Err(Error::NotFound(_))) => continue,
                    (Err(e), _) | (_, Err(e)) => return Err(e),
                };
                let cross = cross_region(p, q, n_ue, n_bs)?;
                for &(i, j) in cross.cells() {
                    working[k][(i, j)] = Complex::zero();
                }
                for &(i, j) in cross.cells() {
                    if !self.measurements[k].is_tested(i, j) {
                        self.measure(k, i, j, Phase::Additional, rng)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(self, initial_slots: usize, feedback_bits: usize) -> TrainingOutcome<T> {
        let additional = self
            .measurements
            .iter()
            .map(MeasurementMatrix::additional_tests)
            .max()
            .unwrap_or(0);
        TrainingOutcome {
            measurements: self.measurements,
            overhead: OverheadReport {
                initial_tests: initial_slots,
                additional_tests: additional,
                feedback_bits,
            },
        }
    }
}

fn check_divisible(n_bs: usize, n_ue: usize, n_rf: usize) -> Result<()> {
    if n_rf == 0 {
        return Err(Error::Config("at least one RF chain is required".into()));
    }
    if !n_bs.is_multiple_of(n_rf) {
        return Err(Error::Config(format!(
            "N_BS = {n_bs} is not divisible by N_RF = {n_rf}"
        )));
    }
    if n_ue == 0 {
        return Err(Error::Config("N_UE must be positive".into()));
    }
    Ok(())
}

fn check_partial(n_bs: usize, n_ue: usize, n_rf: usize) -> Result<()> {
    check_divisible(n_bs, n_ue, n_rf)?;
    if n_ue < 2 || n_bs < 2 {
        return Err(Error::Config(
            "partial training needs at least two UE and two BS codewords".into(),
        ));
    }
    if !(n_bs * n_ue).is_multiple_of(2 * n_rf) {
        return Err(Error::Config(format!(
            "N_BS N_UE / (2 N_RF) = {n_bs}*{n_ue}/{} is not integral",
            2 * n_rf
        )));
    }
    Ok(())
}

/// `ceil(log2(n))`, the width of a row index.
pub fn index_bits(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Sum of the count-field widths of the compressed SP feedback format. The
/// four cross lines hold 2, 4, 4 and 2 cells and the fields are 1, 2, 2 and
/// 1 bits wide.
pub const SP_LINE_FIELD_BITS: usize = 6;

/// Exhaustive OP training: every entry of every user's matrix in
/// `N_BS N_UE / N_RF` slots.
pub fn op_training<T: Real, R: Rng + ?Sized>(
    channels: &[&ComplexMatrix<T>],
    books: &Codebooks<T>,
    noise: &NoiseModel<T>,
    n_rf: usize,
    rng: &mut R,
) -> Result<TrainingOutcome<T>> {
    let (n_ue, n_bs) = (books.n_ue(), books.n_bs());
    check_divisible(n_bs, n_ue, n_rf)?;
    let mut session = Session::new(channels, books, noise)?;
    for i in 0..n_ue {
        for j in 0..n_bs {
            session.measure_all(i, j, rng)?;
        }
    }
    Ok(session.finish(n_bs * n_ue / n_rf, 0))
}

/// `(i + j)` odd in 1-based indexing, equivalently in 0-based indexing.
pub fn is_checkerboard(row: usize, col: usize) -> bool {
    (row + col) % 2 == 1
}

/// IS training: checkerboard initial test then `t_crosses` cross refinements.
pub fn is_training<T: Real, R: Rng + ?Sized>(
    channels: &[&ComplexMatrix<T>],
    books: &Codebooks<T>,
    noise: &NoiseModel<T>,
    n_rf: usize,
    t_crosses: usize,
    rng: &mut R,
) -> Result<TrainingOutcome<T>> {
    let (n_ue, n_bs) = (books.n_ue(), books.n_bs());
    check_partial(n_bs, n_ue, n_rf)?;
    let mut session = Session::new(channels, books, noise)?;
    for i in 0..n_ue {
        for j in 0..n_bs {
            if is_checkerboard(i, j) {
                session.measure_all(i, j, rng)?;
            }
        }
    }
    session.refine(t_crosses, rng)?;
    let bits = t_crosses * index_bits(n_ue);
    Ok(session.finish(n_bs * n_ue / (2 * n_rf), bits))
}

/// SP training: `d_max` probabilistic slots then `t_crosses` refinements.
///
/// `schedule_rng` drives the codeword draws (the shared pseudo-random
/// schedule both link ends can generate offline); `noise_rng` drives the
/// measurement noise.
#[allow(clippy::too_many_arguments)]
pub fn sp_training<T: Real, R1: Rng + ?Sized, R2: Rng + ?Sized>(
    channels: &[&ComplexMatrix<T>],
    books: &Codebooks<T>,
    noise: &NoiseModel<T>,
    n_rf: usize,
    t_crosses: usize,
    d_max: usize,
    init: SpInit,
    schedule_rng: &mut R1,
    noise_rng: &mut R2,
) -> Result<TrainingOutcome<T>> {
    let (n_ue, n_bs) = (books.n_ue(), books.n_bs());
    check_partial(n_bs, n_ue, n_rf)?;
    let mut state = SpState::new(init, n_ue, n_bs);
    let budget = state.max_slots(n_rf);
    if d_max == 0 || d_max > budget {
        return Err(Error::Config(format!(
            "d_max = {d_max} outside 1..={budget} for this initialization"
        )));
    }
    let mut session = Session::new(channels, books, noise)?;
    for _ in 0..d_max {
        let Some((row, cols)) = state.draw(n_rf, schedule_rng)? else {
            break;
        };
        for &col in &cols {
            session.measure_all(row, col, noise_rng)?;
        }
        state.update(row, &cols)?;
    }
    session.refine(t_crosses, noise_rng)?;
    let bits = t_crosses * (index_bits(n_ue) + SP_LINE_FIELD_BITS);
    Ok(session.finish(d_max, bits))
}

/// Measures any entries in `cells` that user `user` has not yet tested,
/// counting them as additional tests. Returns how many were measured.
pub fn top_up<T: Real, R: Rng + ?Sized>(
    measurement: &mut MeasurementMatrix<T>,
    h: &ComplexMatrix<T>,
    books: &Codebooks<T>,
    noise: &NoiseModel<T>,
    cells: &[(usize, usize)],
    rng: &mut R,
) -> Result<usize> {
    let mut added = 0;
    for &(i, j) in cells {
        if measurement.is_tested(i, j) {
            continue;
        }
        let v = measure_pair(h, books.ue.codeword(i), books.bs.codeword(j), noise, rng)?;
        measurement.record(i, j, v, false)?;
        added += 1;
    }
    Ok(added)
}

/// Expected SP additional tests per user, `12 T (1 - d_max N_RF / (N_BS N_UE))`.
pub fn sp_expected_additional(n_bs: usize, n_ue: usize, n_rf: usize, t_crosses: usize, d_max: usize) -> f64 {
    12.0 * t_crosses as f64 * (1.0 - (d_max * n_rf) as f64 / (n_bs * n_ue) as f64)
}
