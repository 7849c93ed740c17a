use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CondProbVector, Levels};
use crate::error::{Error, Result};
use crate::nectest::{monotonicity_test, pearl_binary_test, ZOrder, POPULATION_EPS};
use crate::numeric::stream_rng;
use crate::respvar::{
    build_spec, forward_distribution, sample_model, SampleOptions, SamplingConstraint, ViolationClass,
};

use super::{instrument_strength, true_bias, wald_estimate, Wald};

/// One power study: a model class, a sampling constraint and the test applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub class: ViolationClass,
    pub constraint: SamplingConstraint,
    pub models: usize,
    pub options: SampleOptions,
    /// Add the monotonicity inequalities to the instrumental inequalities.
    pub monotonicity: bool,
    pub bins: usize,
}

impl PowerConfig {
    pub fn new(class: ViolationClass, constraint: SamplingConstraint, models: usize) -> Self {
        PowerConfig {
            class,
            constraint,
            models,
            options: SampleOptions {
                monotone_rx: true,
                hierarchical: true,
                ..SampleOptions::default()
            },
            monotonicity: true,
            bins: 10,
        }
    }
}

/// A sampled model's exact population quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub index: usize,
    pub strength: f64,
    pub passed: bool,
    pub wald: Wald,
    pub bias: Wald,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBin {
    pub lo: f64,
    pub hi: f64,
    pub models: usize,
    pub passed: usize,
    pub pass_fraction: Option<f64>,
    pub mean_abs_bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub config: PowerConfig,
    pub seed: u64,
    pub bins: Vec<PowerBin>,
    /// Models whose strength falls outside [0, 1].
    pub out_of_range: usize,
    pub records: Vec<ModelRecord>,
}

impl PowerCurve {
    /// Pooled pass fraction over models with strength in `[lo, hi)`.
    pub fn pass_fraction_between(&self, lo: f64, hi: f64) -> Option<f64> {
        let inside: Vec<&ModelRecord> = self
            .records
            .iter()
            .filter(|r| r.strength >= lo && r.strength < hi)
            .collect();
        if inside.is_empty() {
            return None;
        }
        Some(inside.iter().filter(|r| r.passed).count() as f64 / inside.len() as f64)
    }
}

fn bin_of(strength: f64, bins: usize) -> Option<usize> {
    if !(0.0..=1.0).contains(&strength) {
        return None;
    }
    Some(((strength * bins as f64) as usize).min(bins - 1))
}

/// Samples models, applies the population test to each exact distribution
/// and bins the outcomes by instrument strength. Model `i` draws from its
/// own stream of `seed`.
pub fn run_power_experiment(cfg: &PowerConfig, seed: u64) -> Result<PowerCurve> {
    if cfg.bins == 0 {
        return Err(Error::InvalidParameter("need at least one strength bin".into()));
    }
    let spec = build_spec(cfg.class, Levels::binary())?;
    let records: Vec<ModelRecord> = (0..cfg.models)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let theta = sample_model(&spec, cfg.constraint, &cfg.options, &mut rng)?;
            let f = CondProbVector::from_joint(spec.levels(), &forward_distribution(&theta, &spec)?)?;
            let mut passed = pearl_binary_test(&f, POPULATION_EPS)?.passed;
            if cfg.monotonicity {
                passed &= monotonicity_test(&f, POPULATION_EPS, ZOrder::AsGiven)?.passed;
            }
            Ok(ModelRecord {
                index: i,
                strength: instrument_strength(&f)?,
                passed,
                wald: wald_estimate(&f)?,
                bias: true_bias(&theta, &spec)?,
            })
        })
        .collect::<Result<_>>()?;

    let mut bins: Vec<PowerBin> = (0..cfg.bins)
        .map(|b| PowerBin {
            lo: b as f64 / cfg.bins as f64,
            hi: (b + 1) as f64 / cfg.bins as f64,
            models: 0,
            passed: 0,
            pass_fraction: None,
            mean_abs_bias: None,
        })
        .collect();
    let mut bias_sum = vec![(0.0, 0usize); cfg.bins];
    let mut out_of_range = 0;
    for r in &records {
        let Some(b) = bin_of(r.strength, cfg.bins) else {
            out_of_range += 1;
            continue;
        };
        bins[b].models += 1;
        bins[b].passed += r.passed as usize;
        if let Wald::Value(v) = r.bias {
            bias_sum[b].0 += v.abs();
            bias_sum[b].1 += 1;
        }
    }
    for (bin, (s, n)) in bins.iter_mut().zip(bias_sum) {
        if bin.models > 0 {
            bin.pass_fraction = Some(bin.passed as f64 / bin.models as f64);
        }
        if n > 0 {
            bin.mean_abs_bias = Some(s / n as f64);
        }
    }
    Ok(PowerCurve {
        config: *cfg,
        seed,
        bins,
        out_of_range,
        records,
    })
}
