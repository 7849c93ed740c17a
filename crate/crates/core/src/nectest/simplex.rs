//! Phase-1 simplex for `A x = b, x >= 0` feasibility.

/// Result of a phase-1 solve.
#[derive(Debug, Clone)]
pub struct Phase1 {
    /// Primal solution over the structural columns.
    pub x: Vec<f64>,
    /// Optimal sum of artificial variables.
    pub infeasibility: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit.
    pub converged: bool,
}

/// Minimizes the sum of artificials for `A x = b` with `b >= 0`, using
/// Bland's rule. `a` is row-major with `rows * cols` entries.
pub fn phase1(a: &[f64], b: &[f64], rows: usize, cols: usize, pivot_tol: f64) -> Phase1 {
    debug_assert_eq!(a.len(), rows * cols);
    let width = cols + rows + 1;
    let rhs = width - 1;
    let mut t = vec![0.0; rows * width];
    for i in 0..rows {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..cols {
            t[i * width + j] = sign * a[i * cols + j];
        }
        t[i * width + cols + i] = 1.0;
        t[i * width + rhs] = sign * b[i];
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();
    // Reduced costs of the phase-1 objective, artificials priced at 1.
    let mut cost = vec![0.0; width];
    for i in 0..rows {
        for j in 0..width {
            if j < cols || j == rhs {
                cost[j] -= t[i * width + j];
            }
        }
    }

    let max_iter = 50 * (rows + cols);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let Some(enter) = (0..cols + rows).find(|&j| cost[j] < -pivot_tol) else {
            converged = true;
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let piv = t[i * width + enter];
            if piv > pivot_tol {
                let ratio = t[i * width + rhs] / piv;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, r)) => {
                        let tie = (ratio - r).abs() <= pivot_tol * (1.0 + r.abs());
                        if ratio < r && !tie || tie && basis[i] < basis[k] {
                            Some((i, ratio))
                        } else {
                            Some((k, r))
                        }
                    }
                };
            }
        }
        // The phase-1 objective is bounded below, so an entering column always has a pivot.
        let Some((r, _)) = leave else {
            converged = true;
            break;
        };
        pivot(&mut t, &mut cost, width, rows, r, enter);
        basis[r] = enter;
        iterations += 1;
    }

    let mut x = vec![0.0; cols];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < cols {
            x[bv] = t[i * width + rhs].max(0.0);
        }
    }
    Phase1 {
        x,
        infeasibility: -cost[rhs],
        iterations,
        converged,
    }
}

fn pivot(t: &mut [f64], cost: &mut [f64], width: usize, rows: usize, r: usize, c: usize) {
    let p = t[r * width + c];
    for j in 0..width {
        t[r * width + j] /= p;
    }
    let (before, rest) = t.split_at_mut(r * width);
    let (prow, after) = rest.split_at_mut(width);
    let eliminate = |row: &mut [f64]| {
        let f = row[c];
        if f != 0.0 {
            row.iter_mut().zip(prow.iter()).for_each(|(v, p)| *v -= f * p);
            row[c] = 0.0;
        }
    };
    before.chunks_mut(width).for_each(eliminate);
    after.chunks_mut(width).for_each(eliminate);
    eliminate(cost);
    debug_assert!(r < rows);
}
