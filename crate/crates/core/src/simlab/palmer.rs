use serde::{Deserialize, Serialize};

use crate::data::{build_contingency, ContingencyTable, Levels};
use crate::error::Result;
use crate::mlik::{validity_ratio, EvidenceConfig, ValidityReport};
use crate::nectest::{exact_test, Correction, ExactMode, ExactTestReport};
use crate::numeric::{mix_seed, stream_rng};
use crate::respvar::{build_spec, sample_dataset, ResponseSpec, ThetaVector, ViolationClass};

/// Sample size of the published Palmer datasets.
pub const PALMER_SIZE: usize = 2000;

/// Direct effect of Z on Y in D0, D1 and D2.
const DIRECT_EFFECT: [f64; 3] = [0.0, 0.2, 0.05];

fn p_x(z: usize, u: usize) -> f64 {
    0.05 + 0.1 * z as f64 + 0.1 * u as f64
}

fn p_y(which: usize, x: usize, z: usize, u: usize) -> f64 {
    0.1 + DIRECT_EFFECT[which] * z as f64 + 0.05 * x as f64 + 0.1 * u as f64
}

fn bern(p: f64, v: usize) -> f64 {
    if v == 1 {
        p
    } else {
        1.0 - p
    }
}

/// One of the three Palmer models in response-variable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalmerModel {
    pub name: String,
    pub spec: ResponseSpec,
    pub theta: ThetaVector,
}

/// Joint P(Z, X, Y) of model `which` (0, 1 or 2) by summing over U.
pub fn palmer_cell_probabilities(which: usize) -> Vec<f64> {
    let lv = Levels::binary();
    let mut out = vec![0.0; lv.cells()];
    for u in 0..2 {
        for z in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    out[lv.cell(z, x, y)] += 0.25 * bern(p_x(z, u), x) * bern(p_y(which, x, z, u), y);
                }
            }
        }
    }
    out
}

/// Potential outcomes are drawn independently across inputs given U, so the
/// response-type probabilities are products of Bernoulli rates mixed over U.
fn encode(which: usize, class: ViolationClass) -> Result<PalmerModel> {
    let spec = build_spec(class, Levels::binary())?;
    let inputs: Vec<(usize, usize)> = if class.y_depends_on_z() {
        (0..2).flat_map(|x| (0..2).map(move |z| (x, z))).collect()
    } else {
        (0..2).map(|x| (x, 0)).collect()
    };
    let mut xy = vec![0.0; spec.n_xy()];
    for u in 0..2 {
        for rx in 0..spec.n_rx() {
            let prx: f64 = (0..2).map(|z| bern(p_x(z, u), spec.x_of(rx, z))).product();
            for ry in 0..spec.n_ry() {
                let pry: f64 = inputs
                    .iter()
                    .map(|&(x, z)| bern(p_y(which, x, z, u), spec.y_of(ry, x, z)))
                    .product();
                xy[rx * spec.n_ry() + ry] += 0.5 * prx * pry;
            }
        }
    }
    Ok(PalmerModel {
        name: format!("D{which}"),
        spec,
        theta: ThetaVector::Factorized { rz: vec![0.5, 0.5], xy },
    })
}

/// D0 (valid instrument), D1 and D2 (direct Z→Y effect of 0.2 and 0.05).
pub fn palmer_models() -> Result<[PalmerModel; 3]> {
    Ok([
        encode(0, ViolationClass::Valid)?,
        encode(1, ViolationClass::Excl)?,
        encode(2, ViolationClass::Excl)?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalmerResult {
    pub name: String,
    pub seed: u64,
    pub size: usize,
    pub table: ContingencyTable,
    pub exact_test: ExactTestReport,
    pub report: ValidityReport,
}

/// Samples each Palmer dataset and scores it against every invalid class.
pub fn run_palmer(size: usize, seed: u64, alpha: f64, gamma: f64, cfg: &EvidenceConfig) -> Result<Vec<PalmerResult>> {
    let violations = [ViolationClass::Excl, ViolationClass::Air, ViolationClass::Both];
    palmer_models()?
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            let mut rng = stream_rng(seed, i as u64);
            let table = build_contingency(&sample_dataset(&m.theta, &m.spec, size, &mut rng)?);
            let exact_test = exact_test(
                &table,
                alpha,
                ExactMode::Pearl,
                Correction::default_for(ExactMode::Pearl),
            )?;
            let cfg = EvidenceConfig {
                seed: mix_seed(seed, i as u64),
                ..*cfg
            };
            let report = validity_ratio(&table, &violations, 1.0, gamma, &cfg)?;
            Ok(PalmerResult {
                name: m.name,
                seed,
                size,
                table,
                exact_test,
                report,
            })
        })
        .collect()
}
