use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a numeric column becomes a discrete one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinarizeRule {
    Mean,
    /// The lower median.
    Median,
    /// Column must already be 0/1.
    #[default]
    None,
    /// Keep nonnegative integer codes as levels.
    Discrete,
}

impl std::str::FromStr for BinarizeRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(BinarizeRule::Mean),
            "median" => Ok(BinarizeRule::Median),
            "none" => Ok(BinarizeRule::None),
            "discrete" => Ok(BinarizeRule::Discrete),
            _ => Err(Error::InvalidParameter(format!("unknown binarization rule {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Binarized {
    pub values: Vec<usize>,
    /// Values at or above the cutoff map to 1.
    pub cutoff: Option<f64>,
}

/// Values at or above `cutoff` become 1.
pub fn threshold(values: &[f64], cutoff: f64) -> Vec<usize> {
    values.iter().map(|&v| (v >= cutoff) as usize).collect()
}

pub fn binarize(name: &str, values: &[f64], rule: BinarizeRule) -> Result<Binarized> {
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let cut = |cutoff: f64| {
        let out = threshold(values, cutoff);
        if out.iter().all(|&v| v == out[0]) {
            Err(Error::DegenerateColumn(name.into()))
        } else {
            Ok(Binarized {
                values: out,
                cutoff: Some(cutoff),
            })
        }
    };
    match rule {
        BinarizeRule::Mean => cut(values.iter().sum::<f64>() / values.len() as f64),
        BinarizeRule::Median => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            cut(sorted[(sorted.len() - 1) / 2])
        }
        BinarizeRule::None => {
            if values.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::NotBinaryColumn(name.into()));
            }
            Ok(Binarized {
                values: values.iter().map(|&v| v as usize).collect(),
                cutoff: None,
            })
        }
        BinarizeRule::Discrete => {
            if values
                .iter()
                .any(|&v| v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64)
            {
                return Err(Error::InvalidParameter(format!(
                    "column {name:?} must hold nonnegative integer codes"
                )));
            }
            Ok(Binarized {
                values: values.iter().map(|&v| v as usize).collect(),
                cutoff: None,
            })
        }
    }
}

/// OLS residuals of a target on an intercept plus covariates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialOut {
    pub residuals: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// Covariate indices kept after pruning collinear columns.
    pub kept: Vec<usize>,
    pub pruned: Vec<usize>,
}

/// Relative pivot size below which a covariate counts as collinear.
const COLLINEAR_TOL: f64 = 1e-10;

/// Cholesky of the Gram matrix that skips columns whose pivot collapses
/// relative to their own squared norm. Returns kept indices and the factor
/// restricted to them.
fn pruned_cholesky(gram: &[f64], d: usize) -> (Vec<usize>, Vec<f64>) {
    let mut kept: Vec<usize> = Vec::new();
    let mut l: Vec<Vec<f64>> = Vec::new();
    for j in 0..d {
        let mut row = Vec::with_capacity(kept.len() + 1);
        for (a, &k) in kept.iter().enumerate() {
            let mut s = gram[j * d + k];
            for b in 0..a {
                s -= row[b] * l[a][b];
            }
            row.push(s / l[a][a]);
        }
        let diag = gram[j * d + j] - row.iter().map(|v| v * v).sum::<f64>();
        if diag > COLLINEAR_TOL * gram[j * d + j].max(f64::MIN_POSITIVE) && diag.is_finite() {
            row.push(diag.sqrt());
            kept.push(j);
            l.push(row);
        }
    }
    let k = kept.len();
    let mut flat = vec![0.0; k * k];
    for (i, r) in l.iter().enumerate() {
        flat[i * k..i * k + r.len()].copy_from_slice(r);
    }
    (kept, flat)
}

/// Residualizes `target` on `[1 | covariates]` through the normal equations.
pub fn partial_out(target: &[f64], covariates: &[Vec<f64>]) -> Result<PartialOut> {
    let n = target.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if covariates.iter().any(|c| c.len() != n) {
        return Err(Error::LayoutMismatch("covariate length differs from target".into()));
    }
    let d = covariates.len() + 1;
    let col = |j: usize, i: usize| if j == 0 { 1.0 } else { covariates[j - 1][i] };
    let mut gram = vec![0.0; d * d];
    let mut xty = vec![0.0; d];
    for (i, &t) in target.iter().enumerate() {
        for a in 0..d {
            let va = col(a, i);
            xty[a] += va * t;
            for b in 0..=a {
                gram[a * d + b] += va * col(b, i);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[b * d + a] = gram[a * d + b];
        }
    }
    let (kept, l) = pruned_cholesky(&gram, d);
    if kept.first() != Some(&0) {
        return Err(Error::RankDeficient);
    }
    let k = kept.len();
    let mut w: Vec<f64> = kept.iter().map(|&j| xty[j]).collect();
    for i in 0..k {
        for j in 0..i {
            w[i] -= l[i * k + j] * w[j];
        }
        w[i] /= l[i * k + i];
    }
    for i in (0..k).rev() {
        for j in i + 1..k {
            w[i] -= l[j * k + i] * w[j];
        }
        w[i] /= l[i * k + i];
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient);
    }
    let residuals = (0..n)
        .map(|i| target[i] - kept.iter().zip(&w).map(|(&j, b)| b * col(j, i)).sum::<f64>())
        .collect();
    let mut coefficients = vec![0.0; d];
    for (&j, b) in kept.iter().zip(&w) {
        coefficients[j] = *b;
    }
    Ok(PartialOut {
        residuals,
        coefficients,
        kept: kept.iter().skip(1).map(|j| j - 1).collect(),
        pruned: (1..d).filter(|j| !kept.contains(j)).map(|j| j - 1).collect(),
    })
}
