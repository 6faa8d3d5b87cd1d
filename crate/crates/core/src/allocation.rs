//! Multiuser beam allocation: the naive per-user argmax, QoS-constrained
//! sequential allocation, an exhaustive oracle for small instances, and the
//! beam-conflict probability.

use std::cmp::Ordering;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::training::MeasurementMatrix;

/// Per-user gain thresholds `gamma_k` on `|w^H H f|`.
#[derive(Debug, Clone, PartialEq)]
pub struct QosThresholds<T> {
    gamma: Vec<T>,
}

impl<T: Real> QosThresholds<T> {
    pub fn new(gamma: Vec<T>) -> Result<Self> {
        if let Some(g) = gamma.iter().find(|g| !(**g >= T::zero()) || !g.is_finite()) {
            return Err(Error::Domain(format!("threshold {g} must be finite and nonnegative")));
        }
        Ok(Self { gamma })
    }

    pub fn uniform(k: usize, gamma: T) -> Result<Self> {
        Self::new(vec![gamma; k])
    }

    pub fn gamma(&self, user: usize) -> T {
        self.gamma[user]
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }
}

/// A `(UE codeword, BS codeword)` pair, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BeamPair {
    pub ue: usize,
    pub bs: usize,
}

/// One candidate beam of a user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<T> {
    pub gain: T,
    pub bs: usize,
    pub ue: usize,
}

/// A user's candidate beams: for each BS codeword the best tested UE
/// codeword, sorted by descending gain (ties by BS index) and filtered by the
/// user's threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateList<T> {
    entries: Vec<Candidate<T>>,
}

impl<T: Real> CandidateList<T> {
    pub fn entries(&self) -> &[Candidate<T>] {
        &self.entries
    }

    pub fn gains(&self) -> Vec<T> {
        self.entries.iter().map(|c| c.gain).collect()
    }

    pub fn bs_indices(&self) -> Vec<usize> {
        self.entries.iter().map(|c| c.bs).collect()
    }

    pub fn ue_indices(&self) -> Vec<usize> {
        self.entries.iter().map(|c| c.ue).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first(&self) -> Option<&Candidate<T>> {
        self.entries.first()
    }

    fn remove_bs(&mut self, bs: usize) {
        self.entries.retain(|c| c.bs != bs);
    }
}

/// Column-wise best tested entries of `r`, strongest first, keeping those
/// with gain `>= gamma`.
pub fn build_candidates<T: Real>(r: &MeasurementMatrix<T>, gamma: T) -> CandidateList<T> {
    let mut entries = Vec::with_capacity(r.n_bs());
    for col in 0..r.n_bs() {
        let mut best: Option<Candidate<T>> = None;
        for row in 0..r.n_ue() {
            if let Some(v) = r.get(row, col) {
                let gain = v.norm();
                if best.is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate { gain, bs: col, ue: row });
                }
            }
        }
        if let Some(c) = best.filter(|c| c.gain >= gamma) {
            entries.push(c);
        }
    }
    entries.sort_by(|a, b| b.gain.partial_cmp(&a.gain).unwrap_or(Ordering::Equal).then(a.bs.cmp(&b.bs)));
    CandidateList { entries }
}

/// Beam pair assigned to each user, `None` for unserved users.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Allocation {
    pairs: Vec<Option<BeamPair>>,
}

impl Allocation {
    pub fn unserved(k: usize) -> Self {
        Self { pairs: vec![None; k] }
    }

    pub fn from_pairs(pairs: Vec<Option<BeamPair>>) -> Self {
        Self { pairs }
    }

    pub fn pairs(&self) -> &[Option<BeamPair>] {
        &self.pairs
    }

    pub fn get(&self, user: usize) -> Option<BeamPair> {
        self.pairs[user]
    }

    pub fn n_users(&self) -> usize {
        self.pairs.len()
    }

    /// Served users in ascending index order.
    pub fn served(&self) -> Vec<usize> {
        (0..self.pairs.len()).filter(|&k| self.pairs[k].is_some()).collect()
    }

    pub fn served_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.is_some()).count()
    }

    /// No two served users share a BS codeword.
    pub fn is_conflict_free(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.pairs.iter().flatten().all(|p| seen.insert(p.bs))
    }

    /// Pairs of users sharing a BS codeword.
    pub fn conflicting_users(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.pairs.len() {
            for j in i + 1..self.pairs.len() {
                if let (Some(a), Some(b)) = (self.pairs[i], self.pairs[j]) {
                    if a.bs == b.bs {
                        out.push((i, j));
                    }
                }
            }
        }
        out
    }

    /// Served users whose measured gain reaches their threshold.
    pub fn qos_satisfied<T: Real>(&self, r: &[MeasurementMatrix<T>], thresholds: &QosThresholds<T>) -> usize {
        self.pairs
            .iter()
            .enumerate()
            .filter(|(k, p)| {
                p.is_some_and(|p| {
                    r[*k].get(p.ue, p.bs).is_some_and(|v| v.norm() >= thresholds.gamma(*k))
                })
            })
            .count()
    }
}

/// Position of the largest-magnitude tested entry, ties to the smallest
/// `(row, col)`.
pub fn best_beam_naive<T: Real>(r: &MeasurementMatrix<T>) -> Result<BeamPair> {
    let mut best: Option<(T, BeamPair)> = None;
    for row in 0..r.n_ue() {
        for col in 0..r.n_bs() {
            if let Some(v) = r.get(row, col) {
                let g = v.norm();
                if best.is_none_or(|(b, _)| g > b) {
                    best = Some((g, BeamPair { ue: row, bs: col }));
                }
            }
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| Error::NotFound(format!("user {} has no tested entry", r.user())))
}

/// Every user takes its naive argmax. The result may contain conflicts.
pub fn allocate_naive<T: Real>(r: &[MeasurementMatrix<T>]) -> Result<Allocation> {
    let pairs = r
        .iter()
        .map(|m| best_beam_naive(m).map(Some))
        .collect::<Result<Vec<_>>>()?;
    Ok(Allocation { pairs })
}

/// QoS-constrained sequential allocation.
///
/// Each round the strongest remaining head candidate wins its beam, unless
/// it has alternatives and that beam is also the only candidate of other
/// users, in which case the strongest of those single-candidate users takes
/// it. The assigned beam then leaves every list. Users whose lists run empty
/// stay unserved. Gain ties go to the smaller user index.
pub fn allocate_qc<T: Real>(r: &[MeasurementMatrix<T>], thresholds: &QosThresholds<T>) -> Result<Allocation> {
    if r.len() != thresholds.len() {
        return Err(Error::Shape(format!(
            "{} measurement matrices but {} thresholds",
            r.len(),
            thresholds.len()
        )));
    }
    let mut lists: Vec<CandidateList<T>> = r
        .iter()
        .enumerate()
        .map(|(k, m)| build_candidates(m, thresholds.gamma(k)))
        .collect();
    let mut active: Vec<bool> = vec![true; r.len()];
    let mut alloc = Allocation::unserved(r.len());

    loop {
        for k in 0..lists.len() {
            if lists[k].is_empty() {
                active[k] = false;
            }
        }
        let Some(k_max) = argmax_head(&lists, (0..lists.len()).filter(|&k| active[k])) else {
            break;
        };
        let head_bs = lists[k_max].entries[0].bs;
        let k_a = if lists[k_max].len() == 1 {
            k_max
        } else {
            let lambda = (0..lists.len())
                .filter(|&k| active[k] && k != k_max && lists[k].len() == 1 && lists[k].entries[0].bs == head_bs);
            argmax_head(&lists, lambda).unwrap_or(k_max)
        };
        let won = lists[k_a].entries[0];
        alloc.pairs[k_a] = Some(BeamPair { ue: won.ue, bs: won.bs });
        lists[k_a].entries.clear();
        active[k_a] = false;
        for list in lists.iter_mut() {
            list.remove_bs(won.bs);
        }
    }
    Ok(alloc)
}

fn argmax_head<T: Real>(lists: &[CandidateList<T>], users: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<(T, usize)> = None;
    for k in users {
        if let Some(c) = lists[k].first() {
            if best.is_none_or(|(g, _)| c.gain > g) {
                best = Some((c.gain, k));
            }
        }
    }
    best.map(|(_, k)| k)
}

pub const ORACLE_MAX_USERS: usize = 6;
pub const ORACLE_MAX_BS: usize = 12;

/// Exhaustive search over conflict-free assignments. Each user is either
/// unserved or holds a BS codeword with its best tested UE codeword, subject
/// to the threshold. Maximizes the number of served users, then the
/// descending-sorted gain vector lexicographically.
pub fn allocate_oracle<T: Real>(r: &[MeasurementMatrix<T>], thresholds: &QosThresholds<T>) -> Result<Allocation> {
    let k = r.len();
    let n_bs = r.first().map_or(0, MeasurementMatrix::n_bs);
    if k > ORACLE_MAX_USERS || n_bs > ORACLE_MAX_BS {
        return Err(Error::OracleRefused(format!(
            "K = {k}, N_BS = {n_bs} exceeds {ORACLE_MAX_USERS} users or {ORACLE_MAX_BS} codewords"
        )));
    }
    if thresholds.len() != k {
        return Err(Error::Shape("threshold count does not match user count".into()));
    }
    let options: Vec<Vec<Candidate<T>>> = (0..k)
        .map(|u| {
            let mut c = build_candidates(&r[u], thresholds.gamma(u)).entries;
            c.sort_by_key(|c| c.bs);
            c
        })
        .collect();

    struct Search<'a, T> {
        options: &'a [Vec<Candidate<T>>],
        used: Vec<bool>,
        current: Vec<Option<Candidate<T>>>,
        best: Option<(Vec<T>, Vec<Option<Candidate<T>>>)>,
    }

    impl<T: Real> Search<'_, T> {
        fn score(&self) -> Vec<T> {
            let mut g: Vec<T> = self.current.iter().flatten().map(|c| c.gain).collect();
            g.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
            g
        }

        fn better(a: &[T], b: &[T]) -> bool {
            if a.len() != b.len() {
                return a.len() > b.len();
            }
            for (x, y) in a.iter().zip(b) {
                if x != y {
                    return x > y;
                }
            }
            false
        }

        fn visit(&mut self, user: usize) {
            if user == self.options.len() {
                let s = self.score();
                if self.best.as_ref().is_none_or(|(b, _)| Self::better(&s, b)) {
                    self.best = Some((s, self.current.clone()));
                }
                return;
            }
            for idx in 0..self.options[user].len() {
                let c = self.options[user][idx];
                if !self.used[c.bs] {
                    self.used[c.bs] = true;
                    self.current[user] = Some(c);
                    self.visit(user + 1);
                    self.used[c.bs] = false;
                }
            }
            self.current[user] = None;
            self.visit(user + 1);
        }
    }

    let mut search = Search {
        options: &options,
        used: vec![false; n_bs],
        current: vec![None; k],
        best: None,
    };
    search.visit(0);
    let (_, best) = search.best.expect("the all-unserved assignment always exists");
    Ok(Allocation {
        pairs: best
            .into_iter()
            .map(|c| c.map(|c| BeamPair { ue: c.ue, bs: c.bs }))
            .collect(),
    })
}

/// Probability that `k` users drawing BS codewords uniformly from `n_bs`
/// all draw distinct ones. Zero when `k > n_bs`.
pub fn conflict_free_probability(n_bs: usize, k: usize) -> f64 {
    if k > n_bs {
        return 0.0;
    }
    let n = n_bs as f64;
    (0..k).map(|i| (n_bs - i) as f64 / n).product()
}

/// `1 - conflict_free_probability`.
pub fn conflict_probability(n_bs: usize, k: usize) -> f64 {
    1.0 - conflict_free_probability(n_bs, k)
}

/// Monte-Carlo estimate of the conflict probability together with its
/// binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConflictEstimate {
    pub trials: usize,
    pub conflicts: usize,
    pub rate: f64,
    pub std_error: f64,
}

pub fn estimate_conflict_probability<R: Rng + ?Sized>(n_bs: usize, k: usize, trials: usize, rng: &mut R) -> Result<ConflictEstimate> {
    if n_bs == 0 || trials == 0 {
        return Err(Error::Config("need at least one codeword and one trial".into()));
    }
    let mut seen = vec![usize::MAX; n_bs];
    let mut conflicts = 0;
    for t in 0..trials {
        let hit = (0..k).any(|_| {
            let b = rng.random_range(0..n_bs);
            std::mem::replace(&mut seen[b], t) == t
        });
        if hit {
            conflicts += 1;
        }
    }
    let rate = conflicts as f64 / trials as f64;
    Ok(ConflictEstimate {
        trials,
        conflicts,
        rate,
        std_error: (rate * (1.0 - rate) / trials as f64).sqrt(),
    })
}
