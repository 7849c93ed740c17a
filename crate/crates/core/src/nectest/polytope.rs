use serde::Serialize;

use super::simplex::phase1;
use super::{TestOutcome, Violation};
use crate::data::{CondProbVector, Levels};
use crate::error::{Error, Result};
use crate::respvar::enumerate_functions;

/// Points whose convex hull is the set of f generated by valid IV models.
///
/// Each vertex is stored sparsely as its `l` unit cells, one per z stratum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VertexSet {
    levels: Levels,
    vertices: Vec<Vec<usize>>,
}

impl VertexSet {
    pub fn levels(&self) -> Levels {
        self.levels
    }
    pub fn len(&self) -> usize {
        self.vertices.len()
    }
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
    /// Unit cells of vertex `k`, indexed by z.
    pub fn support(&self, k: usize) -> &[usize] {
        &self.vertices[k]
    }
    /// Dense l·m·n vector of vertex `k`.
    pub fn dense(&self, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.levels.cells()];
        self.vertices[k].iter().for_each(|&c| v[c] = 1.0);
        v
    }
    /// Drops repeated vertices, keeping first occurrences.
    pub fn dedup(mut self) -> Self {
        let mut seen = std::collections::HashSet::new();
        self.vertices.retain(|v| seen.insert(v.clone()));
        self
    }
}

/// One vertex per deterministic (r_x, r_y) pair, in the canonical r_x-major order.
pub fn enumerate_valid_iv_vertices(levels: Levels) -> Result<VertexSet> {
    levels.response_space()?;
    let g = enumerate_functions(levels.l, levels.m);
    let h = enumerate_functions(levels.m, levels.n);
    let mut vertices = Vec::with_capacity(g.len() * h.len());
    for gx in &g {
        for fy in &h {
            vertices.push(
                (0..levels.l)
                    .map(|z| {
                        let x = gx[z];
                        levels.cell(z, x, fy[x])
                    })
                    .collect(),
            );
        }
    }
    Ok(VertexSet { levels, vertices })
}

/// Solves `Σ λ_k v_k = f, Σ λ_k = 1, λ >= 0` by phase-1 simplex.
///
/// Passes when the recovered λ reproduces f to within `eps` in the max norm.
pub fn polytope_membership(f: &CondProbVector, v: &VertexSet, eps: f64) -> Result<TestOutcome> {
    let levels = f.levels();
    if levels != v.levels {
        return Err(Error::LayoutMismatch("vector and vertex levels differ".into()));
    }
    let cells = levels.cells();
    let (rows, cols) = (cells + 1, v.len());
    let mut a = vec![0.0; rows * cols];
    for k in 0..cols {
        for &c in v.support(k) {
            a[c * cols + k] = 1.0;
        }
        a[cells * cols + k] = 1.0;
    }
    let mut b = f.entries().to_vec();
    b.push(1.0);

    let sol = phase1(&a, &b, rows, cols, 1e-13);
    let mut fitted = vec![0.0; cells];
    for (k, &lam) in sol.x.iter().enumerate() {
        if lam != 0.0 {
            v.support(k).iter().for_each(|&c| fitted[c] += lam);
        }
    }
    let sum_gap = (sol.x.iter().sum::<f64>() - 1.0).abs();
    let residual = fitted
        .iter()
        .zip(f.entries())
        .map(|(a, b)| (a - b).abs())
        .fold(sum_gap, f64::max);

    if !sol.converged || !residual.is_finite() {
        return Err(Error::Inconclusive { residual });
    }
    let violated = if residual <= eps {
        Vec::new()
    } else {
        vec![Violation {
            id: "polytope".into(),
            lhs: residual,
            rhs: eps,
        }]
    };
    Ok(TestOutcome {
        passed: violated.is_empty(),
        violated,
        eps,
        z_inverted: false,
        residual: Some(residual),
    })
}
