use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numeric::ln_rising;

/// A function of θ to be averaged under a Dirichlet(α) prior.
pub trait SimplexIntegrand: Sync {
    /// Dirichlet parameters, one per coordinate.
    fn alpha(&self) -> &[f64];
    /// Natural log of the integrand at θ.
    fn log_value(&self, theta: &[f64]) -> f64;
    fn dim(&self) -> usize {
        self.alpha().len()
    }
}

/// `Π_j (Σ_{i ∈ G_j} θ_i)^{Q_j}` under a Dirichlet(α) prior.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperDirichlet {
    alpha: Vec<f64>,
    groups: Vec<Vec<usize>>,
    counts: Vec<u64>,
}

impl HyperDirichlet {
    pub fn new(alpha: Vec<f64>, groups: Vec<Vec<usize>>, counts: Vec<u64>) -> Result<Self> {
        if groups.len() != counts.len() {
            return Err(Error::LayoutMismatch(format!(
                "{} groups but {} counts",
                groups.len(),
                counts.len()
            )));
        }
        if alpha.is_empty() || alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter("Dirichlet parameters must be positive".into()));
        }
        if groups.iter().flatten().any(|&i| i >= alpha.len()) {
            return Err(Error::LayoutMismatch("group member out of range".into()));
        }
        Ok(HyperDirichlet { alpha, groups, counts })
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Merges coordinates that belong to exactly the same observed groups.
    ///
    /// The Dirichlet aggregation property makes the merged integral equal to
    /// the original while shrinking its dimension. Groups with zero count are
    /// dropped first since they contribute a factor of one.
    pub fn aggregate(&self) -> HyperDirichlet {
        let live: Vec<usize> = (0..self.groups.len()).filter(|&j| self.counts[j] > 0).collect();
        let mut membership: Vec<Vec<usize>> = vec![Vec::new(); self.alpha.len()];
        for (slot, &j) in live.iter().enumerate() {
            for &i in &self.groups[j] {
                membership[i].push(slot);
            }
        }
        let mut atoms: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut alpha = Vec::new();
        for (i, sig) in membership.iter_mut().enumerate() {
            sig.sort_unstable();
            sig.dedup();
            let next = atoms.len();
            let atom = *atoms.entry(sig.clone()).or_insert(next);
            if atom == alpha.len() {
                alpha.push(0.0);
            }
            alpha[atom] += self.alpha[i];
        }
        let mut groups = vec![Vec::new(); live.len()];
        for (sig, &atom) in &atoms {
            for &slot in sig {
                groups[slot].push(atom);
            }
        }
        groups.iter_mut().for_each(|g| g.sort_unstable());
        HyperDirichlet {
            alpha,
            groups,
            counts: live.iter().map(|&j| self.counts[j]).collect(),
        }
    }

    /// Exact log integral when every coordinate feeds at most one group.
    pub fn closed_form(&self) -> Option<f64> {
        let mut seen = vec![false; self.alpha.len()];
        for &i in self.groups.iter().flatten() {
            if std::mem::replace(&mut seen[i], true) {
                return None;
            }
        }
        let a_total: f64 = self.alpha.iter().sum();
        let n = self.total_count() as f64;
        let mut out = -ln_rising(a_total, n);
        for (g, &q) in self.groups.iter().zip(&self.counts) {
            let a: f64 = g.iter().map(|&i| self.alpha[i]).sum();
            if q > 0 {
                if a == 0.0 {
                    return Some(f64::NEG_INFINITY);
                }
                out += ln_rising(a, q as f64);
            }
        }
        Some(out)
    }
}

impl SimplexIntegrand for HyperDirichlet {
    fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    #[inline]
    fn log_value(&self, theta: &[f64]) -> f64 {
        let mut out = 0.0;
        for (g, &q) in self.groups.iter().zip(&self.counts) {
            if q > 0 {
                let s: f64 = g.iter().map(|&i| theta[i]).sum();
                out += q as f64 * s.ln();
            }
        }
        out
    }
}

/// An integrand that is the same everywhere.
#[derive(Debug, Clone)]
pub struct ConstantIntegrand {
    pub alpha: Vec<f64>,
    pub log_c: f64,
}

impl SimplexIntegrand for ConstantIntegrand {
    fn alpha(&self) -> &[f64] {
        &self.alpha
    }
    fn log_value(&self, _theta: &[f64]) -> f64 {
        self.log_c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn disjoint_groups_give_dirichlet_multinomial() {
        // Four coordinates, two per group: Dirichlet(2, 2) over the groups.
        let hd = HyperDirichlet::new(vec![1.0; 4], vec![vec![0, 1], vec![2, 3]], vec![1, 0]).unwrap();
        assert_relative_eq!(hd.closed_form().unwrap(), 0.5f64.ln(), epsilon = 1e-14);
        let hd = HyperDirichlet::new(vec![1.0; 4], vec![vec![0, 1], vec![2, 3]], vec![2, 1]).unwrap();
        // E[p^2 (1-p)] for p ~ Beta(2, 2) = 2*3*2 / (4*5*6) = 0.1
        assert_relative_eq!(hd.closed_form().unwrap(), 0.1f64.ln(), epsilon = 1e-13);
    }

    #[test]
    fn overlapping_groups_have_no_closed_form() {
        let hd = HyperDirichlet::new(vec![1.0; 3], vec![vec![0, 1], vec![1, 2]], vec![1, 1]).unwrap();
        assert!(hd.closed_form().is_none());
    }

    #[test]
    fn aggregation_merges_identical_memberships() {
        let hd = HyperDirichlet::new(vec![1.0; 6], vec![vec![0, 1, 2], vec![2, 3], vec![4]], vec![3, 2, 0]).unwrap();
        let agg = hd.aggregate();
        // Atoms: {0,1} in g0, {2} in g0 and g1, {3} in g1, {4,5} in none.
        assert_eq!(agg.alpha(), &[2.0, 1.0, 1.0, 2.0]);
        assert_eq!(agg.groups().len(), 2);
        assert_eq!(agg.counts(), &[3, 2]);
        let theta = [0.1, 0.2, 0.3, 0.15, 0.05, 0.2];
        let merged = [0.3, 0.3, 0.15, 0.25];
        assert_relative_eq!(hd.log_value(&theta), agg.log_value(&merged), epsilon = 1e-14);
    }

    #[test]
    fn constructor_validates() {
        assert!(HyperDirichlet::new(vec![1.0], vec![vec![1]], vec![1]).is_err());
        assert!(HyperDirichlet::new(vec![0.0], vec![vec![0]], vec![1]).is_err());
        assert!(HyperDirichlet::new(vec![1.0], vec![vec![0]], vec![]).is_err());
    }
}
