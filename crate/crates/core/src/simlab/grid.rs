use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{build_contingency, CondProbVector, Levels};
use crate::error::{Error, Result};
use crate::mlik::{validity_ratio, EvidenceConfig};
use crate::nectest::{exact_test, monotonicity_test, pearl_binary_test, Correction, ExactMode, ZOrder, POPULATION_EPS};
use crate::numeric::{mix_seed, stream_rng};
use crate::respvar::{sample_from_joint, ViolationClass};

pub const ZX_LEVELS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const XY_LEVELS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const U_LEVELS: [f64; 4] = [0.0, 0.1, 0.3, 0.5];
pub const UZ_LEVELS: [f64; 4] = [0.0, 0.1, 0.3, 0.5];
pub const ZY_LEVELS: [f64; 4] = [0.0, 0.1, 0.3, 0.5];

/// Baseline rates of Z, X and Y before any cause is switched on.
const BASE_Z: f64 = 0.5;
const BASE_X: f64 = 0.05;
const BASE_Y: f64 = 0.1;
const P_U: f64 = 0.5;

/// Effect sizes of one grid model. `u` is U's effect on both X and Y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub zx: f64,
    pub xy: f64,
    pub u: f64,
    pub uz: f64,
    pub zy: f64,
}

impl GridPoint {
    pub fn valid_instrument(&self) -> bool {
        self.uz == 0.0 && self.zy == 0.0
    }
}

/// How parent effects combine into a Bernoulli rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    /// `1 − (1 − base) Π (1 − effect·parent)`; always a probability.
    #[default]
    NoisyOr,
    /// `base + Σ effect·parent`; may leave [0, 1].
    Additive,
}

impl Link {
    fn rate(self, what: &'static str, base: f64, terms: &[(f64, usize)]) -> Result<f64> {
        let p = match self {
            Link::NoisyOr => 1.0 - (1.0 - base) * terms.iter().map(|&(e, v)| 1.0 - e * v as f64).product::<f64>(),
            Link::Additive => base + terms.iter().map(|&(e, v)| e * v as f64).sum::<f64>(),
        };
        if (0.0..=1.0).contains(&p) {
            Ok(p)
        } else {
            Err(Error::InvalidProbability {
                what: what.into(),
                value: p,
            })
        }
    }
}

fn check_effect(name: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidProbability {
            what: name.into(),
            value: v,
        })
    }
}

/// Exact P(Z, X, Y) of a grid model, summing over the binary confounder U.
pub fn grid_cell_probabilities(p: &GridPoint, link: Link) -> Result<Vec<f64>> {
    for (n, v) in [("zx", p.zx), ("xy", p.xy), ("u", p.u), ("uz", p.uz), ("zy", p.zy)] {
        check_effect(n, v)?;
    }
    let lv = Levels::binary();
    let mut out = vec![0.0; lv.cells()];
    for u in 0..2 {
        let pu = if u == 1 { P_U } else { 1.0 - P_U };
        let pz = link.rate("P(Z=1)", BASE_Z, &[(p.uz, u)])?;
        for z in 0..2 {
            let px = link.rate("P(X=1)", BASE_X, &[(p.zx, z), (p.u, u)])?;
            for x in 0..2 {
                let py = link.rate("P(Y=1)", BASE_Y, &[(p.xy, x), (p.u, u), (p.zy, z)])?;
                for y in 0..2 {
                    let b = |q: f64, v: usize| if v == 1 { q } else { 1.0 - q };
                    out[lv.cell(z, x, y)] += pu * b(pz, z) * b(px, x) * b(py, y);
                }
            }
        }
    }
    Ok(out)
}

/// All 1600 parameter tuples.
pub fn full_grid() -> Vec<GridPoint> {
    let mut out = Vec::with_capacity(1600);
    for &zx in &ZX_LEVELS {
        for &xy in &XY_LEVELS {
            for &u in &U_LEVELS {
                for &uz in &UZ_LEVELS {
                    for &zy in &ZY_LEVELS {
                        out.push(GridPoint { zx, xy, u, uz, zy });
                    }
                }
            }
        }
    }
    out
}

/// Every valid-instrument tuple plus the weak-instrument, strong direct
/// effect tuples with confounding levels {0, 0.3} and xy in {0.1, 0.5}.
pub fn acceptance_subgrid() -> Vec<GridPoint> {
    full_grid()
        .into_iter()
        .filter(|p| {
            p.valid_instrument()
                || (p.zx <= 0.3
                    && p.uz == 0.0
                    && p.zy >= 0.3
                    && (p.u == 0.0 || p.u == 0.3)
                    && (p.xy == 0.1 || p.xy == 0.5))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub points: Vec<GridPoint>,
    pub size: usize,
    pub link: Link,
    pub violations: Vec<ViolationClass>,
    pub gamma: f64,
    /// Level of the finite-sample exact test recorded alongside.
    pub alpha: f64,
    pub evidence: EvidenceConfig,
}

impl GridConfig {
    pub fn new(points: Vec<GridPoint>, size: usize) -> Self {
        GridConfig {
            points,
            size,
            link: Link::NoisyOr,
            violations: vec![ViolationClass::Excl, ViolationClass::Air, ViolationClass::Both],
            gamma: 10.0,
            alpha: 0.05,
            evidence: EvidenceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub point: GridPoint,
    pub valid_instrument: bool,
    pub log_validity_ratio: Option<f64>,
    pub log_ratios: BTreeMap<ViolationClass, f64>,
    pub population_test_passed: bool,
    pub exact_test_passed: bool,
    pub seed: u64,
    pub size: usize,
}

/// Samples one dataset per grid point and computes its Validity-Ratio.
/// Point `i` samples from stream `i` of `seed`; its estimator seed is derived
/// from the same pair.
pub fn run_grid_experiment(cfg: &GridConfig, seed: u64) -> Result<Vec<GridResult>> {
    let lv = Levels::binary();
    cfg.points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let joint = grid_cell_probabilities(p, cfg.link)?;
            let f = CondProbVector::from_joint(lv, &joint)?;
            let population_test_passed = pearl_binary_test(&f, POPULATION_EPS)?.passed
                && monotonicity_test(&f, POPULATION_EPS, ZOrder::AsGiven)?.passed;
            let mut rng = stream_rng(seed, i as u64);
            let table = build_contingency(&sample_from_joint(&joint, lv, cfg.size, &mut rng)?);
            let exact = exact_test(
                &table,
                cfg.alpha,
                ExactMode::Pearl,
                Correction::default_for(ExactMode::Pearl),
            )?;
            let ev = EvidenceConfig {
                seed: mix_seed(seed, i as u64),
                ..cfg.evidence
            };
            let report = validity_ratio(&table, &cfg.violations, 1.0, cfg.gamma, &ev)?;
            Ok(GridResult {
                point: *p,
                valid_instrument: p.valid_instrument(),
                log_validity_ratio: report.log_validity_ratio,
                log_ratios: report.log_ratios,
                population_test_passed,
                exact_test_passed: exact.passed,
                seed,
                size: cfg.size,
            })
        })
        .collect()
}
