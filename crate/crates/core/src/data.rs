//! Observations, cell counts and conditional probability vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest response-variable space (m^l * n^m components) accepted anywhere.
pub const RESPONSE_CEILING: u64 = 1_000_000;

/// Tolerance on the per-stratum sums of a [`CondProbVector`].
pub const STRATUM_SUM_TOL: f64 = 1e-9;

/// Level counts of Z, X and Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawLevels")]
pub struct Levels {
    pub l: usize,
    pub m: usize,
    pub n: usize,
}

#[derive(Deserialize)]
struct RawLevels {
    l: usize,
    m: usize,
    n: usize,
}

impl TryFrom<RawLevels> for Levels {
    type Error = Error;
    fn try_from(r: RawLevels) -> Result<Self> {
        Levels::new(r.l, r.m, r.n)
    }
}

/// Checked `base^exp`, saturating into `None` past `u128`.
pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<u128> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base as u128)?;
    }
    Some(acc)
}

impl Levels {
    /// Levels with every count at least 2 and a response space under the ceiling.
    pub fn new(l: usize, m: usize, n: usize) -> Result<Self> {
        if l < 2 || m < 2 || n < 2 {
            return Err(Error::InvalidLevels(format!(
                "every level count must be at least 2, got ({l}, {m}, {n})"
            )));
        }
        let levels = Levels { l, m, n };
        levels.response_space()?;
        Ok(levels)
    }

    pub const fn binary() -> Self {
        Levels { l: 2, m: 2, n: 2 }
    }

    pub fn is_binary(&self) -> bool {
        *self == Self::binary()
    }

    /// Number of observable (z, x, y) cells.
    pub fn cells(&self) -> usize {
        self.l * self.m * self.n
    }

    /// Flat index of cell (z, x, y).
    #[inline]
    pub fn cell(&self, z: usize, x: usize, y: usize) -> usize {
        (z * self.m + x) * self.n + y
    }

    /// Inverse of [`Levels::cell`].
    pub fn cell_coords(&self, idx: usize) -> (usize, usize, usize) {
        let y = idx % self.n;
        let x = (idx / self.n) % self.m;
        (idx / (self.n * self.m), x, y)
    }

    /// m^l * n^m, the count of deterministic (r_x, r_y) pairs of a valid model.
    pub fn response_space(&self) -> Result<u64> {
        let size = checked_pow(self.m, self.l)
            .zip(checked_pow(self.n, self.m))
            .and_then(|(a, b)| a.checked_mul(b))
            .unwrap_or(u128::MAX);
        if size > RESPONSE_CEILING as u128 {
            return Err(Error::CeilingExceeded {
                size,
                ceiling: RESPONSE_CEILING,
            });
        }
        Ok(size as u64)
    }
}

/// What to do with rows holding missing or out-of-range values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    #[default]
    Strict,
    Lenient,
}

/// Validated (z, x, y) observations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Dataset {
    rows: Vec<[usize; 3]>,
    levels: Levels,
    dropped: usize,
}

impl Dataset {
    pub fn rows(&self) -> &[[usize; 3]] {
        &self.rows
    }
    pub fn levels(&self) -> Levels {
        self.levels
    }
    /// Rows discarded under [`MissingPolicy::Lenient`].
    pub fn dropped(&self) -> usize {
        self.dropped
    }
    pub fn len(&self) -> usize {
        self.rows.len()
    }
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Checks raw triples against `levels`. `None` marks a missing value.
pub fn validate_dataset(rows: &[[Option<i64>; 3]], levels: Levels, policy: MissingPolicy) -> Result<Dataset> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let bounds = [levels.l, levels.m, levels.n];
    let mut kept = Vec::with_capacity(rows.len());
    let mut dropped = 0;
    for (i, raw) in rows.iter().enumerate() {
        let mut row = [0usize; 3];
        let ok = raw.iter().zip(bounds).zip(row.iter_mut()).all(|((v, b), out)| {
            match v.and_then(|v| usize::try_from(v).ok()).filter(|&v| v < b) {
                Some(v) => {
                    *out = v;
                    true
                }
                None => false,
            }
        });
        if ok {
            kept.push(row);
        } else if policy == MissingPolicy::Strict {
            return Err(Error::OutOfRangeLevel(i));
        } else {
            dropped += 1;
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset {
        rows: kept,
        levels,
        dropped,
    })
}

impl Dataset {
    /// Builds a dataset from rows already known to be in range.
    pub fn from_rows(rows: Vec<[usize; 3]>, levels: Levels) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(i) = rows
            .iter()
            .position(|r| r[0] >= levels.l || r[1] >= levels.m || r[2] >= levels.n)
        {
            return Err(Error::OutOfRangeLevel(i));
        }
        Ok(Dataset {
            rows,
            levels,
            dropped: 0,
        })
    }
}

/// Counts Q_j for every (z, x, y) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    levels: Levels,
    counts: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    /// Table from explicit counts in [`Levels::cell`] order.
    pub fn from_counts(levels: Levels, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != levels.cells() {
            return Err(Error::LayoutMismatch(format!(
                "expected {} cells, got {}",
                levels.cells(),
                counts.len()
            )));
        }
        let total = counts.iter().sum();
        Ok(ContingencyTable { levels, counts, total })
    }

    pub fn levels(&self) -> Levels {
        self.levels
    }
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
    pub fn total(&self) -> u64 {
        self.total
    }
    pub fn get(&self, z: usize, x: usize, y: usize) -> u64 {
        self.counts[self.levels.cell(z, x, y)]
    }

    /// N_z, the number of rows in each z stratum.
    pub fn stratum_totals(&self) -> Vec<u64> {
        let per = self.levels.m * self.levels.n;
        self.counts.chunks(per).map(|c| c.iter().sum()).collect()
    }
}

pub fn build_contingency(d: &Dataset) -> ContingencyTable {
    let levels = d.levels;
    let mut counts = vec![0u64; levels.cells()];
    for &[z, x, y] in &d.rows {
        counts[levels.cell(z, x, y)] += 1;
    }
    ContingencyTable {
        levels,
        total: d.rows.len() as u64,
        counts,
    }
}

/// f = P(X, Y | Z) laid out in [`Levels::cell`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondProbVector {
    levels: Levels,
    entries: Vec<f64>,
    /// Stratum sizes the entries were estimated from; empty for population vectors.
    weights: Vec<u64>,
}

impl CondProbVector {
    /// Validates a population vector: nonnegative, each stratum summing to 1.
    pub fn from_entries(levels: Levels, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != levels.cells() {
            return Err(Error::LayoutMismatch(format!(
                "expected {} entries, got {}",
                levels.cells(),
                entries.len()
            )));
        }
        if let Some(&bad) = entries.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidProbability {
                what: "conditional probability".into(),
                value: bad,
            });
        }
        for (z, s) in entries.chunks(levels.m * levels.n).enumerate() {
            let total: f64 = s.iter().sum();
            if (total - 1.0).abs() > STRATUM_SUM_TOL {
                return Err(Error::InvalidProbability {
                    what: format!("stratum z={z} total"),
                    value: total,
                });
            }
        }
        Ok(CondProbVector {
            levels,
            entries,
            weights: Vec::new(),
        })
    }

    /// Conditions a joint P(Z, X, Y) on Z.
    pub fn from_joint(levels: Levels, joint: &[f64]) -> Result<Self> {
        if joint.len() != levels.cells() {
            return Err(Error::LayoutMismatch(format!(
                "expected {} joint cells, got {}",
                levels.cells(),
                joint.len()
            )));
        }
        let per = levels.m * levels.n;
        let mut entries = Vec::with_capacity(joint.len());
        for (z, s) in joint.chunks(per).enumerate() {
            let total: f64 = s.iter().sum();
            if total <= 0.0 {
                return Err(Error::EmptyStratum(z));
            }
            entries.extend(s.iter().map(|v| v / total));
        }
        Self::from_entries(levels, entries)
    }

    pub fn levels(&self) -> Levels {
        self.levels
    }
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
    pub fn weights(&self) -> &[u64] {
        &self.weights
    }
    #[inline]
    pub fn get(&self, z: usize, x: usize, y: usize) -> f64 {
        self.entries[self.levels.cell(z, x, y)]
    }

    /// Copy with the Z levels in reverse order.
    pub fn with_z_reversed(&self) -> Self {
        let per = self.levels.m * self.levels.n;
        let entries = self.entries.chunks(per).rev().flatten().copied().collect();
        let weights = self.weights.iter().rev().copied().collect();
        CondProbVector {
            levels: self.levels,
            entries,
            weights,
        }
    }
}

pub fn cond_prob_vector(t: &ContingencyTable) -> Result<CondProbVector> {
    let levels = t.levels;
    let totals = t.stratum_totals();
    if let Some(z) = totals.iter().position(|&n| n == 0) {
        return Err(Error::EmptyStratum(z));
    }
    let per = levels.m * levels.n;
    let entries = t
        .counts
        .iter()
        .enumerate()
        .map(|(i, &q)| q as f64 / totals[i / per] as f64)
        .collect();
    Ok(CondProbVector {
        levels,
        entries,
        weights: totals,
    })
}
