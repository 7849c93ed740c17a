//! Real-data flow: ingest, preprocess, run the two-step validation and
//! serialize the result.

mod ingest;
mod preprocess;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{build_contingency, cond_prob_vector, validate_dataset, Dataset, Levels, MissingPolicy};
use crate::error::{Error, Result};
use crate::mlik::{validity_ratio, Decision, EvidenceConfig, ValidityReport};
use crate::nectest::{
    enumerate_valid_iv_vertices, exact_test, polytope_membership, Correction, ExactMode, ExactTestReport, TestOutcome,
    DEFAULT_EPS,
};
use crate::respvar::ViolationClass;

pub use ingest::{ingest_csv, ingest_reader, CsvOptions, RawTable, DEFAULT_NA};
pub use preprocess::{binarize, partial_out, threshold, BinarizeRule, Binarized, PartialOut};

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub z: String,
    pub x: String,
    pub y: String,
    #[serde(default)]
    pub covariates: Vec<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            z: "z".into(),
            x: "x".into(),
            y: "y".into(),
            covariates: Vec::new(),
        }
    }
}

impl ColumnMap {
    fn all(&self) -> Vec<String> {
        let mut v = vec![self.z.clone(), self.x.clone(), self.y.clone()];
        v.extend(self.covariates.iter().cloned());
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub columns: ColumnMap,
    /// Rules for z, x and y. Ignored when covariates are partialled out.
    pub binarize: [BinarizeRule; 3],
    pub alpha: f64,
    pub gamma: f64,
    /// Invalid classes to compare against; empty skips the Validity-Ratio.
    pub violations: Vec<ViolationClass>,
    pub prior_ratio: f64,
    /// Also run the monotonicity exact test.
    pub monotonicity: bool,
    pub evidence: EvidenceConfig,
    pub csv: CsvOptions,
}

impl PipelineConfig {
    pub fn new(gamma: f64) -> Self {
        PipelineConfig {
            columns: ColumnMap::default(),
            binarize: [BinarizeRule::None; 3],
            alpha: 0.05,
            gamma,
            violations: vec![ViolationClass::Excl, ViolationClass::Air, ViolationClass::Both],
            prior_ratio: 1.0,
            monotonicity: false,
            evidence: EvidenceConfig::default(),
            csv: CsvOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma {} must exceed 1", self.gamma)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if !(self.prior_ratio > 0.0 && self.prior_ratio.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prior ratio {} must be positive",
                self.prior_ratio
            )));
        }
        if self.violations.contains(&ViolationClass::Valid) {
            return Err(Error::InvalidParameter(
                "violations may only name excl, air and both".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnPrep {
    pub column: String,
    pub rule: BinarizeRule,
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialOutPrep {
    pub covariates: Vec<String>,
    pub kept: Vec<String>,
    pub pruned: Vec<String>,
}

/// What preprocessing did to the raw columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preprocessing {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub columns: Vec<ColumnPrep>,
    pub partial_out: Option<PartialOutPrep>,
    /// How values equal to a cutoff are assigned.
    pub cutoff_convention: String,
}

/// Turns raw columns into a discrete dataset. With covariates, z, x and y
/// are each residualized on them and then split at zero.
pub fn prepare(raw: &RawTable, cfg: &PipelineConfig) -> Result<(Dataset, Preprocessing)> {
    let names = [&cfg.columns.z, &cfg.columns.x, &cfg.columns.y];
    let mut cols: Vec<Vec<usize>> = Vec::with_capacity(3);
    let mut preps = Vec::with_capacity(3);
    let mut partial = None;
    if cfg.columns.covariates.is_empty() {
        for (name, rule) in names.iter().zip(cfg.binarize) {
            let b = binarize(name, raw.column(name)?, rule)?;
            preps.push(ColumnPrep {
                column: (*name).clone(),
                rule,
                cutoff: b.cutoff,
            });
            cols.push(b.values);
        }
    } else {
        let covs: Vec<Vec<f64>> = cfg
            .columns
            .covariates
            .iter()
            .map(|c| raw.column(c).map(<[f64]>::to_vec))
            .collect::<Result<_>>()?;
        let mut kept = Vec::new();
        let mut pruned = Vec::new();
        for name in names {
            let p = partial_out(raw.column(name)?, &covs)?;
            kept = p.kept.iter().map(|&i| cfg.columns.covariates[i].clone()).collect();
            pruned = p.pruned.iter().map(|&i| cfg.columns.covariates[i].clone()).collect();
            let values = threshold(&p.residuals, 0.0);
            if values.iter().all(|&v| v == values[0]) {
                return Err(Error::DegenerateColumn(name.clone()));
            }
            preps.push(ColumnPrep {
                column: name.clone(),
                rule: BinarizeRule::Mean,
                cutoff: Some(0.0),
            });
            cols.push(values);
        }
        partial = Some(PartialOutPrep {
            covariates: cfg.columns.covariates.clone(),
            kept,
            pruned,
        });
    }
    let size = |v: &[usize]| v.iter().copied().max().unwrap_or(0).max(1) + 1;
    let levels = Levels::new(size(&cols[0]), size(&cols[1]), size(&cols[2]))?;
    let rows: Vec<[Option<i64>; 3]> = (0..raw.rows())
        .map(|i| [0, 1, 2].map(|k| Some(cols[k][i] as i64)))
        .collect();
    let ds = validate_dataset(&rows, levels, MissingPolicy::Strict)?;
    Ok((
        ds,
        Preprocessing {
            rows_read: raw.rows() + raw.dropped,
            rows_dropped: raw.dropped,
            columns: preps,
            partial_out: partial,
            cutoff_convention: "value >= cutoff maps to 1".into(),
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NpsVerdict {
    #[serde(rename = "REJECT-IV")]
    RejectIv,
    #[serde(rename = "ACCEPT-IV")]
    AcceptIv,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

/// Step one: the exact test for binary data, LP membership of the
/// empirical conditionals otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessaryTest {
    pub passed: bool,
    pub pearl: Option<ExactTestReport>,
    pub monotonicity: Option<ExactTestReport>,
    pub polytope: Option<TestOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub crate_version: String,
    pub seed: u64,
    pub levels: Levels,
    pub rows_used: usize,
    pub rows_dropped: usize,
    pub preprocessing: Option<Preprocessing>,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NpsDecision {
    pub schema_version: u32,
    pub necessary_test: NecessaryTest,
    /// Absent when the necessary test fails or no violations were requested.
    pub evidences: Option<ValidityReport>,
    pub log_validity_ratio: Option<f64>,
    pub decision: NpsVerdict,
    pub provenance: Provenance,
}

impl NpsDecision {
    pub fn estimator_failed(&self) -> bool {
        self.evidences.as_ref().is_some_and(ValidityReport::estimator_failed)
    }
}

pub fn necessary_test(ds: &Dataset, cfg: &PipelineConfig) -> Result<NecessaryTest> {
    let t = build_contingency(ds);
    if t.levels().is_binary() {
        let pearl = exact_test(
            &t,
            cfg.alpha,
            ExactMode::Pearl,
            Correction::default_for(ExactMode::Pearl),
        )?;
        let mono = if cfg.monotonicity {
            Some(exact_test(
                &t,
                cfg.alpha,
                ExactMode::Monotonicity,
                Correction::default_for(ExactMode::Monotonicity),
            )?)
        } else {
            None
        };
        Ok(NecessaryTest {
            passed: pearl.passed && mono.as_ref().is_none_or(|m| m.passed),
            pearl: Some(pearl),
            monotonicity: mono,
            polytope: None,
        })
    } else {
        let v = enumerate_valid_iv_vertices(t.levels())?;
        let outcome = polytope_membership(&cond_prob_vector(&t)?, &v, DEFAULT_EPS)?;
        Ok(NecessaryTest {
            passed: outcome.passed,
            pearl: None,
            monotonicity: None,
            polytope: Some(outcome),
        })
    }
}

/// Necessary test, then Validity-Ratio, then the γ rule.
pub fn run_nps(ds: &Dataset, cfg: &PipelineConfig) -> Result<NpsDecision> {
    cfg.validate()?;
    let nt = necessary_test(ds, cfg)?;
    let provenance = Provenance {
        crate_version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.evidence.seed,
        levels: ds.levels(),
        rows_used: ds.len(),
        rows_dropped: ds.dropped(),
        preprocessing: None,
        config: cfg.clone(),
    };
    if !nt.passed || cfg.violations.is_empty() {
        let decision = if nt.passed {
            NpsVerdict::Inconclusive
        } else {
            NpsVerdict::RejectIv
        };
        return Ok(NpsDecision {
            schema_version: SCHEMA_VERSION,
            necessary_test: nt,
            evidences: None,
            log_validity_ratio: None,
            decision,
            provenance,
        });
    }
    let report = validity_ratio(
        &build_contingency(ds),
        &cfg.violations,
        cfg.prior_ratio,
        cfg.gamma,
        &cfg.evidence,
    )?;
    let decision = match report.decision {
        Decision::Accept => NpsVerdict::AcceptIv,
        Decision::Reject => NpsVerdict::RejectIv,
        Decision::Inconclusive => NpsVerdict::Inconclusive,
    };
    Ok(NpsDecision {
        schema_version: SCHEMA_VERSION,
        necessary_test: nt,
        log_validity_ratio: report.log_validity_ratio,
        evidences: Some(report),
        decision,
        provenance,
    })
}

/// Ingest, preprocess and validate a CSV file.
pub fn run_csv(path: &Path, cfg: &PipelineConfig) -> Result<NpsDecision> {
    cfg.validate()?;
    let raw = ingest_csv(path, &cfg.columns.all(), &cfg.csv)?;
    let (ds, prep) = prepare(&raw, cfg)?;
    let mut out = run_nps(&ds, cfg)?;
    out.provenance.rows_dropped = prep.rows_dropped;
    out.provenance.preprocessing = Some(prep);
    Ok(out)
}

/// Reads the mapped columns and preprocesses them.
pub fn load_dataset(path: &Path, cfg: &PipelineConfig) -> Result<(Dataset, Preprocessing)> {
    let raw = ingest_csv(path, &cfg.columns.all(), &cfg.csv)?;
    prepare(&raw, cfg)
}

/// Pretty JSON with a trailing newline.
pub fn emit_report<T: Serialize, W: Write>(value: &T, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// The decision as a single CSV row.
pub fn emit_decision_csv<W: Write>(d: &NpsDecision, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "necessary_test_passed",
        "log_validity_ratio",
        "strongest_invalid",
        "decision",
        "seed",
    ])?;
    let verdict = serde_json::to_value(d.decision)?;
    out.write_record([
        d.necessary_test.passed.to_string(),
        d.log_validity_ratio.map(|v| v.to_string()).unwrap_or_default(),
        d.evidences
            .as_ref()
            .and_then(|e| e.strongest_invalid)
            .map(|c| c.name().to_string())
            .unwrap_or_default(),
        verdict.as_str().unwrap_or_default().to_string(),
        d.provenance.seed.to_string(),
    ])?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_dataset(counts: [usize; 8]) -> Dataset {
        let lv = Levels::binary();
        let rows = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &k)| {
                let (z, x, y) = lv.cell_coords(c);
                std::iter::repeat_n([z, x, y], k)
            })
            .collect();
        Dataset::from_rows(rows, lv).unwrap()
    }

    #[test]
    fn failing_necessary_test_rejects_without_evidence() {
        // Z=1 stratum is all (X=0, Y=1) while Z=0 is all (X=0, Y=0).
        let ds = binary_dataset([40, 0, 0, 0, 0, 40, 0, 0]);
        let d = run_nps(&ds, &PipelineConfig::new(10.0)).unwrap();
        assert_eq!(d.decision, NpsVerdict::RejectIv);
        assert!(d.evidences.is_none());
        assert!(!d.necessary_test.passed);
    }

    #[test]
    fn config_validation() {
        let ds = binary_dataset([5; 8]);
        assert!(run_nps(&ds, &PipelineConfig::new(1.0)).is_err());
        let mut cfg = PipelineConfig::new(10.0);
        cfg.alpha = 1.5;
        assert!(run_nps(&ds, &cfg).is_err());
    }

    #[test]
    fn prepare_binarizes_and_records_cutoffs() {
        let raw = RawTable {
            names: vec!["z".into(), "x".into(), "y".into()],
            columns: vec![
                vec![0.0, 1.0, 1.0, 0.0],
                vec![1.0, 2.0, 3.0, 4.0],
                vec![0.0, 1.0, 0.0, 1.0],
            ],
            dropped: 1,
        };
        let mut cfg = PipelineConfig::new(10.0);
        cfg.binarize = [BinarizeRule::None, BinarizeRule::Mean, BinarizeRule::None];
        let (ds, prep) = prepare(&raw, &cfg).unwrap();
        assert_eq!(ds.rows()[0], [0, 0, 0]);
        assert_eq!(ds.rows()[3], [0, 1, 1]);
        assert_eq!(prep.columns[1].cutoff, Some(2.5));
        assert_eq!(prep.rows_read, 5);
    }

    #[test]
    fn discrete_levels_use_polytope_test() {
        let raw = RawTable {
            names: vec!["z".into(), "x".into(), "y".into()],
            columns: vec![
                vec![0.0, 1.0, 2.0, 0.0, 1.0, 2.0],
                vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0],
                vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0],
            ],
            dropped: 0,
        };
        let mut cfg = PipelineConfig::new(10.0);
        cfg.binarize = [BinarizeRule::Discrete, BinarizeRule::None, BinarizeRule::None];
        cfg.violations.clear();
        let (ds, _) = prepare(&raw, &cfg).unwrap();
        assert_eq!(ds.levels(), Levels::new(3, 2, 2).unwrap());
        let d = run_nps(&ds, &cfg).unwrap();
        assert!(d.necessary_test.polytope.is_some());
    }

    #[test]
    fn report_has_documented_keys() {
        let ds = binary_dataset([40, 0, 0, 0, 0, 40, 0, 0]);
        let d = run_nps(&ds, &PipelineConfig::new(10.0)).unwrap();
        let mut buf = Vec::new();
        emit_report(&d, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        for k in [
            "schema_version",
            "necessary_test",
            "evidences",
            "log_validity_ratio",
            "decision",
            "provenance",
        ] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
        assert_eq!(v["decision"], "REJECT-IV");
    }
}
