//! Row/column pair search and the 12-cell cross around their intersection.

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::scalar::Real;

/// Plus-shaped neighbourhood of the 2x2 block at rows `p, p+1` and columns
/// `q, q+1` (0-based), clamped to the matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossRegion {
    anchor: (usize, usize),
    cells: Vec<(usize, usize)>,
}

impl CrossRegion {
    pub fn anchor(&self) -> (usize, usize) {
        self.anchor
    }

    /// Cells in row-major order.
    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: (usize, usize)) -> bool {
        self.cells.contains(&cell)
    }
}

/// Cross cells `{p, p+1} x {q-1..=q+2}` plus `{p-1, p+2} x {q, q+1}`, with
/// out-of-range cells dropped.
pub fn cross_region(p: usize, q: usize, n_ue: usize, n_bs: usize) -> Result<CrossRegion> {
    if p + 1 >= n_ue || q + 1 >= n_bs {
        return Err(Error::Domain(format!(
            "pair anchor ({p}, {q}) outside a {n_ue}x{n_bs} matrix"
        )));
    }
    let (p, q) = (p as isize, q as isize);
    let mut cells = Vec::with_capacity(12);
    for di in -1isize..=2 {
        let i = p + di;
        let outer = di == -1 || di == 2;
        for dj in -1isize..=2 {
            if outer && (dj == -1 || dj == 2) {
                continue;
            }
            let j = q + dj;
            if i >= 0 && j >= 0 && (i as usize) < n_ue && (j as usize) < n_bs {
                cells.push((i as usize, j as usize));
            }
        }
    }
    Ok(CrossRegion {
        anchor: (p as usize, q as usize),
        cells,
    })
}

fn best_pair<T: Real>(norms: &[T], counts: &[usize], what: &str) -> Result<usize> {
    let mut best: Option<(usize, T)> = None;
    for p in 0..norms.len().saturating_sub(1) {
        let denom = counts[p] + counts[p + 1];
        if denom == 0 {
            continue;
        }
        let score = (norms[p] + norms[p + 1]) / T::of_usize(denom);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((p, score));
        }
    }
    best.map(|(p, _)| p)
        .ok_or_else(|| Error::NotFound(format!("no {what} pair with nonzero entries")))
}

/// Index `p` of the adjacent row pair `(p, p+1)` with the largest average
/// power, `(|r_p|_2 + |r_{p+1}|_2) / (|r_p|_0 + |r_{p+1}|_0)`. Ties go to the
/// smallest `p`; pairs without nonzero entries are skipped.
pub fn select_row_pair<T: Real>(m: &ComplexMatrix<T>) -> Result<usize> {
    let mut norms = Vec::with_capacity(m.rows());
    let mut counts = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let row = m.row(i);
        norms.push(row.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt());
        counts.push(row.iter().filter(|z| z.norm_sqr() > T::zero()).count());
    }
    best_pair(&norms, &counts, "row")
}

/// Column analogue of [`select_row_pair`].
pub fn select_col_pair<T: Real>(m: &ComplexMatrix<T>) -> Result<usize> {
    let mut norms = vec![T::zero(); m.cols()];
    let mut counts = vec![0usize; m.cols()];
    for i in 0..m.rows() {
        for (j, z) in m.row(i).iter().enumerate() {
            let p = z.norm_sqr();
            norms[j] += p;
            if p > T::zero() {
                counts[j] += 1;
            }
        }
    }
    for n in &mut norms {
        *n = n.sqrt();
    }
    best_pair(&norms, &counts, "column")
}
