//! Simulation studies: necessary-test power, Wald bias, the Palmer models
//! and the parametric binary grid.

mod grid;
mod output;
mod palmer;
mod power;

use serde::{Deserialize, Serialize};

use crate::data::CondProbVector;
use crate::error::{Error, Result};
use crate::respvar::{forward_distribution, ResponseSpec, ThetaVector};

pub use grid::{
    acceptance_subgrid, full_grid, grid_cell_probabilities, run_grid_experiment, GridConfig, GridPoint, GridResult,
    Link,
};
pub use output::{write_grid_csv, write_manifest, write_palmer_csv, write_power_csv, Manifest};
pub use palmer::{palmer_cell_probabilities, palmer_models, run_palmer, PalmerModel, PalmerResult, PALMER_SIZE};
pub use power::{run_power_experiment, ModelRecord, PowerBin, PowerConfig, PowerCurve};

/// Denominators below this make the Wald ratio undefined.
pub const WALD_DENOMINATOR_TOL: f64 = 1e-12;

/// A Wald estimate, clipped to [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Wald {
    Value(f64),
    Undefined,
}

impl Wald {
    pub fn value(self) -> Option<f64> {
        match self {
            Wald::Value(v) => Some(v),
            Wald::Undefined => None,
        }
    }
}

fn p_y1_given_z(f: &CondProbVector, z: usize) -> f64 {
    f.get(z, 0, 1) + f.get(z, 1, 1)
}

/// P(X=1|Z=1) − P(X=1|Z=0).
pub fn instrument_strength(f: &CondProbVector) -> Result<f64> {
    if !f.levels().is_binary() {
        return Err(Error::NotBinary);
    }
    let px = |z| f.get(z, 1, 0) + f.get(z, 1, 1);
    Ok(px(1) - px(0))
}

/// Reduced-form contrast over first-stage contrast, clipped to [-1, 1].
pub fn wald_estimate(f: &CondProbVector) -> Result<Wald> {
    let den = instrument_strength(f)?;
    if den.abs() < WALD_DENOMINATOR_TOL {
        return Ok(Wald::Undefined);
    }
    let num = p_y1_given_z(f, 1) - p_y1_given_z(f, 0);
    Ok(Wald::Value((num / den).clamp(-1.0, 1.0)))
}

/// E[Y | do(X=1)] − E[Y | do(X=0)], with Z held at its own distribution.
pub fn true_effect(theta: &ThetaVector, spec: &ResponseSpec) -> Result<f64> {
    if !spec.levels().is_binary() {
        return Err(Error::NotBinary);
    }
    theta.check(spec)?;
    let mut ace = 0.0;
    for rz in 0..spec.levels().l {
        for rx in 0..spec.n_rx() {
            for ry in 0..spec.n_ry() {
                let d = spec.y_of(ry, 1, rz) as f64 - spec.y_of(ry, 0, rz) as f64;
                if d != 0.0 {
                    ace += theta.prob(spec, rz, rx, ry) * d;
                }
            }
        }
    }
    Ok(ace)
}

fn forward_cond(theta: &ThetaVector, spec: &ResponseSpec) -> Result<CondProbVector> {
    let joint = forward_distribution(theta, spec)?;
    CondProbVector::from_joint(spec.levels(), &joint)
}

/// Wald estimate of the model's observed distribution minus its true effect.
pub fn true_bias(theta: &ThetaVector, spec: &ResponseSpec) -> Result<Wald> {
    let f = forward_cond(theta, spec)?;
    Ok(match wald_estimate(&f)? {
        Wald::Value(w) => Wald::Value(w - true_effect(theta, spec)?),
        Wald::Undefined => Wald::Undefined,
    })
}
