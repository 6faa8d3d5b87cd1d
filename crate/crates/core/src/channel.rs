//! Geometric mmWave channels, beam-steering codebooks and the codebook-domain
//! (virtual) view of a channel.
//!
//! Directions are carried as sines of the physical angle, so a direction is
//! any real in `[-1, 1]`. Codeword and antenna indices are 0-based.

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::scalar::Real;

/// Unit-norm, constant-modulus array response `u(N, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector<T> {
    direction: T,
    entries: Vec<Complex<T>>,
}

impl<T: Real> SteeringVector<T> {
    pub fn n_antennas(&self) -> usize {
        self.entries.len()
    }

    pub fn direction(&self) -> T {
        self.direction
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    pub fn conj(&self) -> Vec<Complex<T>> {
        self.entries.iter().map(Complex::conj).collect()
    }
}

/// `u(N, a)_i = exp(j pi i a) / sqrt(N)` for `i = 0..N`.
pub fn steering_vector<T: Real>(n_antennas: usize, direction: T) -> Result<SteeringVector<T>> {
    if n_antennas == 0 {
        return Err(Error::Domain("array needs at least one antenna".into()));
    }
    if !(direction >= -T::one() && direction <= T::one()) {
        return Err(Error::Domain(format!(
            "direction sine {direction} outside [-1, 1]"
        )));
    }
    let amp = T::one() / T::of_usize(n_antennas).sqrt();
    let entries = (0..n_antennas)
        .map(|i| Complex::from_polar(amp, T::PI() * T::of_usize(i) * direction))
        .collect();
    Ok(SteeringVector { direction, entries })
}

/// Beam-steering codebook of `N` equally spaced codewords.
#[derive(Debug, Clone)]
pub struct Codebook<T> {
    codewords: Vec<SteeringVector<T>>,
}

impl<T: Real> Codebook<T> {
    pub fn n_antennas(&self) -> usize {
        self.codewords[0].n_antennas()
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Codeword `index` (0-based).
    pub fn codeword(&self, index: usize) -> &SteeringVector<T> {
        &self.codewords[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &SteeringVector<T>> {
        self.codewords.iter()
    }

    /// `N x N` matrix whose columns are the codewords.
    pub fn matrix(&self) -> ComplexMatrix<T> {
        let n = self.n_antennas();
        ComplexMatrix::from_fn(n, self.len(), |i, j| self.codewords[j].entries[i])
    }
}

/// Direction of the 0-based codeword `index` in an `n`-codeword book:
/// `-1 + (2(index + 1) - 1) / n`.
pub fn codeword_direction<T: Real>(n: usize, index: usize) -> T {
    -T::one() + T::of_usize(2 * index + 1) / T::of_usize(n)
}

pub fn make_codebook<T: Real>(n_antennas: usize) -> Result<Codebook<T>> {
    if n_antennas == 0 {
        return Err(Error::Domain("codebook needs at least one antenna".into()));
    }
    let codewords = (0..n_antennas)
        .map(|i| steering_vector(n_antennas, codeword_direction::<T>(n_antennas, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Codebook { codewords })
}

/// Path-count rule and gain variances of the random channel generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSpec {
    pub min_paths: usize,
    pub max_paths: usize,
    /// Variance of the first (dominant) path gain.
    pub dominant_variance: f64,
    /// Variance of every other path gain.
    pub secondary_variance: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            min_paths: 3,
            max_paths: 5,
            dominant_variance: 1.0,
            secondary_variance: 0.1,
        }
    }
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.min_paths == 0 || self.min_paths > self.max_paths {
            return Err(Error::Config(format!(
                "path count range {}..={} is empty",
                self.min_paths, self.max_paths
            )));
        }
        if !(self.dominant_variance > 0.0 && self.secondary_variance > 0.0) {
            return Err(Error::Config("path gain variances must be positive".into()));
        }
        Ok(())
    }
}

/// Per-path parameters of one user's channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams<T> {
    pub gains: Vec<Complex<T>>,
    pub aod_sines: Vec<T>,
    pub aoa_sines: Vec<T>,
}

impl<T: Real> ChannelParams<T> {
    pub fn n_paths(&self) -> usize {
        self.gains.len()
    }

    pub fn single_path(gain: Complex<T>, aod_sine: T, aoa_sine: T) -> Self {
        Self {
            gains: vec![gain],
            aod_sines: vec![aod_sine],
            aoa_sines: vec![aoa_sine],
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.gains.len();
        if n == 0 || self.aod_sines.len() != n || self.aoa_sines.len() != n {
            return Err(Error::Shape("path parameter vectors disagree in length".into()));
        }
        let in_range = |x: &T| *x >= -T::one() && *x <= T::one();
        if !self.aod_sines.iter().all(in_range) || !self.aoa_sines.iter().all(in_range) {
            return Err(Error::Domain("direction sines must lie in [-1, 1]".into()));
        }
        Ok(())
    }
}

/// `N_UE x N_BS` downlink channel together with the paths it was built from.
#[derive(Debug, Clone)]
pub struct ChannelRealization<T> {
    params: ChannelParams<T>,
    matrix: ComplexMatrix<T>,
}

impl<T: Real> ChannelRealization<T> {
    /// `H = sqrt(N_BS N_UE / L) sum_l beta_l a_UE(theta_l) a_BS(phi_l)^H`.
    pub fn from_params(params: ChannelParams<T>, n_ue: usize, n_bs: usize) -> Result<Self> {
        params.validate()?;
        let l = params.n_paths();
        let scale = (T::of_usize(n_bs * n_ue) / T::of_usize(l)).sqrt();
        let mut matrix = ComplexMatrix::zeros(n_ue, n_bs);
        for p in 0..l {
            let a_ue = steering_vector(n_ue, params.aoa_sines[p])?;
            let a_bs = steering_vector(n_bs, params.aod_sines[p])?;
            let g = params.gains[p] * scale;
            for (i, u) in a_ue.entries().iter().enumerate() {
                let gu = g * u;
                for (j, b) in a_bs.entries().iter().enumerate() {
                    matrix[(i, j)] += gu * b.conj();
                }
            }
        }
        Ok(Self { params, matrix })
    }

    pub fn params(&self) -> &ChannelParams<T> {
        &self.params
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn n_ue(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_bs(&self) -> usize {
        self.matrix.cols()
    }
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R, variance: T) -> Complex<T> {
    let sd = (variance / T::of(2.0)).sqrt();
    Complex::new(T::standard_normal(rng) * sd, T::standard_normal(rng) * sd)
}

/// Draws a random geometric channel: `L` uniform on the configured range,
/// dominant gain `CN(0, dominant_variance)`, the rest `CN(0, secondary_variance)`,
/// direction sines i.i.d. uniform on `[-1, 1]`.
pub fn gen_channel<T: Real, R: Rng + ?Sized>(
    spec: &ChannelSpec,
    n_ue: usize,
    n_bs: usize,
    rng: &mut R,
) -> Result<ChannelRealization<T>> {
    spec.validate()?;
    if n_ue == 0 || n_bs == 0 {
        return Err(Error::Config("antenna counts must be positive".into()));
    }
    let l = rng.random_range(spec.min_paths..=spec.max_paths);
    let mut params = ChannelParams {
        gains: Vec::with_capacity(l),
        aod_sines: Vec::with_capacity(l),
        aoa_sines: Vec::with_capacity(l),
    };
    for p in 0..l {
        let var = if p == 0 {
            spec.dominant_variance
        } else {
            spec.secondary_variance
        };
        params.gains.push(complex_gaussian(rng, T::of(var)));
        params.aod_sines.push(T::uniform(rng, -T::one(), T::one()));
        params.aoa_sines.push(T::uniform(rng, -T::one(), T::one()));
    }
    ChannelRealization::from_params(params, n_ue, n_bs)
}

/// Precomputed codebook-domain transform `H -> W^T H F^*`.
#[derive(Debug, Clone)]
pub struct VirtualTransform<T> {
    ue_rows: ComplexMatrix<T>,
    bs_cols: ComplexMatrix<T>,
}

impl<T: Real> VirtualTransform<T> {
    pub fn new(ue_book: &Codebook<T>, bs_book: &Codebook<T>) -> Self {
        Self {
            ue_rows: ue_book.matrix().transpose(),
            bs_cols: bs_book.matrix().conj(),
        }
    }

    pub fn apply(&self, h: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        if h.rows() != self.ue_rows.cols() || h.cols() != self.bs_cols.rows() {
            return Err(Error::Shape(format!(
                "channel is {}x{}, codebooks expect {}x{}",
                h.rows(),
                h.cols(),
                self.ue_rows.cols(),
                self.bs_cols.rows()
            )));
        }
        self.ue_rows.matmul(h)?.matmul(&self.bs_cols)
    }
}

/// Virtual channel: entry `(i, j)` is `w_c(i)^T H f_c(j)^*`.
pub fn virtual_channel<T: Real>(
    h: &ComplexMatrix<T>,
    ue_book: &Codebook<T>,
    bs_book: &Codebook<T>,
) -> Result<ComplexMatrix<T>> {
    VirtualTransform::new(ue_book, bs_book).apply(h)
}

/// `|a_BS(phi)^H f_c(n)^*|` in closed (Dirichlet-kernel) form, `n` 0-based.
///
/// The correlation peaks at `phi = -d_n`, the mirror image of the codeword's
/// own direction `d_n`; the codebook grid is symmetric, so this is the
/// direction of codeword `N - 1 - n`.
pub fn leakage_correlation<T: Real>(n_bs: usize, phi: T, n: usize) -> Result<T> {
    if n_bs == 0 || n >= n_bs {
        return Err(Error::Domain(format!(
            "codeword {n} out of range for {n_bs} antennas"
        )));
    }
    if !(phi >= -T::one() && phi <= T::one()) {
        return Err(Error::Domain(format!("direction sine {phi} outside [-1, 1]")));
    }
    let x = phi + codeword_direction::<T>(n_bs, n);
    let half = T::of(0.5);
    let den = (T::PI() * x * half).sin();
    if den.abs() < T::of(1e-12) {
        return Ok(T::one());
    }
    let num = (T::PI() * T::of_usize(n_bs) * x * half).sin();
    Ok(((num / den).abs() / T::of_usize(n_bs)).min(T::one()))
}

/// Direct inner product `|u(N, phi)^H f^*|` for any vector `f`.
pub fn correlation_direct<T: Real>(phi: T, f: &SteeringVector<T>) -> Result<T> {
    let a = steering_vector(f.n_antennas(), phi)?;
    let s: Complex<T> = a
        .entries()
        .iter()
        .zip(f.entries())
        .fold(Complex::zero(), |acc, (x, y)| acc + x.conj() * y.conj());
    Ok(s.norm())
}
