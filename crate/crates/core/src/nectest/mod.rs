//! Necessary tests for instrument validity.
//!
//! Population tests take a [`CondProbVector`]; [`exact_test`] works on
//! finite-sample counts.

mod exact;
mod polytope;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::data::CondProbVector;
use crate::error::{Error, Result};

pub use exact::{
    exact_test, fisher_one_sided, Correction, Direction, ExactMode, ExactTestEntry, ExactTestReport, FisherP,
};
pub use polytope::{enumerate_valid_iv_vertices, polytope_membership, VertexSet};
pub use simplex::{phase1, Phase1};

/// Default tolerance for tests on estimated vectors.
pub const DEFAULT_EPS: f64 = 1e-8;
/// Tolerance for tests on exact population probabilities.
pub const POPULATION_EPS: f64 = 1e-12;

/// One failed inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub passed: bool,
    pub violated: Vec<Violation>,
    pub eps: f64,
    /// Whether Z's level order was reversed before testing.
    pub z_inverted: bool,
    /// Max-norm fit residual, for the polytope test.
    pub residual: Option<f64>,
}

impl TestOutcome {
    fn from_checks(checks: impl IntoIterator<Item = Violation>, eps: f64, z_inverted: bool) -> Self {
        let violated: Vec<Violation> = checks.into_iter().filter(|v| v.lhs > v.rhs + eps).collect();
        TestOutcome {
            passed: violated.is_empty(),
            violated,
            eps,
            z_inverted,
            residual: None,
        }
    }
}

/// The four binary instrumental inequalities
/// `P(Y=1-y, X=x | Z=0) + P(Y=y, X=x | Z=1) <= 1`.
pub fn pearl_inequalities(f: &CondProbVector) -> Result<Vec<Violation>> {
    if !f.levels().is_binary() {
        return Err(Error::NotBinary);
    }
    let mut out = Vec::with_capacity(4);
    for x in 0..2 {
        for y in 0..2 {
            out.push(Violation {
                id: format!("pearl[x={x},y={y}]"),
                lhs: f.get(0, x, 1 - y) + f.get(1, x, y),
                rhs: 1.0,
            });
        }
    }
    Ok(out)
}

pub fn pearl_binary_test(f: &CondProbVector, eps: f64) -> Result<TestOutcome> {
    Ok(TestOutcome::from_checks(pearl_inequalities(f)?, eps, false))
}

/// How Z's levels are ordered in the monotonicity test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZOrder {
    AsGiven,
    /// Reverse Z when treatment uptake falls with Z.
    #[default]
    Auto,
}

/// Σ_x P(X >= x | z_last) - P(X >= x | z_first) over x >= 1.
fn uptake_trend(f: &CondProbVector) -> f64 {
    let lv = f.levels();
    let upper = |z: usize, x0: usize| -> f64 {
        (x0..lv.m)
            .flat_map(|x| (0..lv.n).map(move |y| (x, y)))
            .map(|(x, y)| f.get(z, x, y))
            .sum()
    };
    (1..lv.m).map(|x| upper(lv.l - 1, x) - upper(0, x)).sum()
}

/// Inequalities implied by a monotone treatment response, as `lhs <= rhs`.
///
/// For adjacent levels z_k < z_{k+1} and every y:
/// `P(Y=y, X>=x | z_k) <= P(Y=y, X>=x | z_{k+1})` for x >= 1, and
/// `P(Y=y, X<=x | z_{k+1}) <= P(Y=y, X<=x | z_k)` for x <= m-2.
pub fn monotonicity_inequalities(f: &CondProbVector) -> Vec<Violation> {
    let lv = f.levels();
    let ge = |z: usize, x0: usize, y: usize| (x0..lv.m).map(|x| f.get(z, x, y)).sum::<f64>();
    let le = |z: usize, x0: usize, y: usize| (0..=x0).map(|x| f.get(z, x, y)).sum::<f64>();
    let mut out = Vec::new();
    for k in 0..lv.l - 1 {
        for y in 0..lv.n {
            for x in 1..lv.m {
                out.push(Violation {
                    id: format!("mono_ge[z={k},x={x},y={y}]"),
                    lhs: ge(k, x, y),
                    rhs: ge(k + 1, x, y),
                });
            }
            for x in 0..lv.m - 1 {
                out.push(Violation {
                    id: format!("mono_le[z={k},x={x},y={y}]"),
                    lhs: le(k + 1, x, y),
                    rhs: le(k, x, y),
                });
            }
        }
    }
    out
}

pub fn monotonicity_test(f: &CondProbVector, eps: f64, order: ZOrder) -> Result<TestOutcome> {
    let invert = order == ZOrder::Auto && uptake_trend(f) < 0.0;
    let f = if invert { f.with_z_reversed() } else { f.clone() };
    Ok(TestOutcome::from_checks(monotonicity_inequalities(&f), eps, invert))
}
