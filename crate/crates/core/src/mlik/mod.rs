//! Marginal likelihoods of model classes and the validity ratio.
//!
//! Every evidence is the prior average of the likelihood under a uniform
//! prior on each θ factor, so no normalizing constants appear.

mod estimators;
mod hyperdirichlet;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ContingencyTable;
use crate::error::{Error, Result};
use crate::numeric::{ln_rising, mix_seed};
use crate::respvar::{build_spec, forward_distribution, ResponseSpec, ThetaVector, ViolationClass};

pub use estimators::{ais_hyperdirichlet, beta_ladder, prior_mc, AisConfig};
pub use hyperdirichlet::{ConstantIntegrand, HyperDirichlet, SimplexIntegrand};

static EVIDENCE_COMPUTATIONS: AtomicU64 = AtomicU64::new(0);

/// Evidence computations started in this process, for instrumentation.
pub fn evidence_computations() -> u64 {
    EVIDENCE_COMPUTATIONS.load(Ordering::Relaxed)
}

fn count_evidence() {
    EVIDENCE_COMPUTATIONS.fetch_add(1, Ordering::Relaxed);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    PriorMc,
    Ais,
}

/// A natural-log marginal likelihood with its Monte Carlo error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEvidence {
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
    pub samples: u64,
    pub seed: Option<u64>,
}

impl LogEvidence {
    pub fn closed_form(value: f64) -> Self {
        LogEvidence {
            value,
            stderr: 0.0,
            method: Method::ClosedForm,
            samples: 0,
            seed: None,
        }
    }

    fn plus(mut self, constant: f64) -> Self {
        self.value += constant;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Ais,
    PriorMc,
}

/// How non-closed-form evidences are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceConfig {
    pub estimator: Estimator,
    pub ais: AisConfig,
    pub prior_mc_samples: u64,
    pub seed: u64,
    /// Also integrate the full exclusion-violating class, not only its submodels.
    pub excl_full: bool,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        EvidenceConfig {
            estimator: Estimator::Ais,
            ais: AisConfig::default(),
            prior_mc_samples: 1_000_000,
            seed: 0,
            excl_full: false,
        }
    }
}

const TAG_VALID: u64 = 1;
const TAG_EXCL_FULL: u64 = 2;
const TAG_EXCL_SUB: u64 = 1000;

fn estimate(hd: &HyperDirichlet, cfg: &EvidenceConfig, tag: u64) -> Result<LogEvidence> {
    let hd = hd.aggregate();
    if let Some(v) = hd.closed_form() {
        return Ok(LogEvidence::closed_form(v));
    }
    let seed = mix_seed(cfg.seed, tag);
    match cfg.estimator {
        Estimator::Ais => ais_hyperdirichlet(&hd, &cfg.ais, hd.total_count(), seed),
        Estimator::PriorMc => Ok(prior_mc(&hd, cfg.prior_mc_samples, seed)),
    }
}

/// Σ_j Q_j ln P(cell j | θ); −∞ when an observed cell is impossible.
pub fn log_likelihood(theta: &ThetaVector, t: &ContingencyTable, spec: &ResponseSpec) -> Result<f64> {
    if spec.levels() != t.levels() {
        return Err(Error::LayoutMismatch("table and spec levels differ".into()));
    }
    let p = forward_distribution(theta, spec)?;
    let mut out = 0.0;
    for (&q, &pj) in t.counts().iter().zip(&p) {
        if q > 0 {
            if pj <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            out += q as f64 * pj.ln();
        }
    }
    Ok(out)
}

/// Closed-form evidence of the uniform P(r_z) factor.
pub fn z_factor(t: &ContingencyTable) -> f64 {
    let l = t.levels().l as f64;
    let n = t.total() as f64;
    t.stratum_totals()
        .iter()
        .map(|&nz| ln_rising(1.0, nz as f64))
        .sum::<f64>()
        - ln_rising(l, n)
}

/// Integrand over a joint (r_z, r_x, r_y) simplex.
pub fn joint_integrand(t: &ContingencyTable, spec: &ResponseSpec) -> Result<HyperDirichlet> {
    let lv = t.levels();
    let mut groups = vec![Vec::new(); lv.cells()];
    let mut k = 0;
    for z in 0..lv.l {
        for rx in 0..spec.n_rx() {
            for ry in 0..spec.n_ry() {
                groups[spec.cell_of(z, rx, ry)].push(k);
                k += 1;
            }
        }
    }
    HyperDirichlet::new(vec![1.0; k], groups, t.counts().to_vec())
}

/// Integrand over the (r_x, r_y) simplex restricted to the listed r_y functions.
pub fn xy_integrand(t: &ContingencyTable, spec: &ResponseSpec, ry_set: &[usize]) -> Result<HyperDirichlet> {
    let lv = t.levels();
    let mut groups = vec![Vec::new(); lv.cells()];
    let mut k = 0;
    for rx in 0..spec.n_rx() {
        for &ry in ry_set {
            for z in 0..lv.l {
                groups[spec.cell_of(z, rx, ry)].push(k);
            }
            k += 1;
        }
    }
    HyperDirichlet::new(vec![1.0; k], groups, t.counts().to_vec())
}

fn spec_for(class: ViolationClass, t: &ContingencyTable) -> Result<ResponseSpec> {
    build_spec(class, t.levels())
}

/// Evidence with as-if-random violated: uniform prior on the joint simplex.
pub fn ml_air(t: &ContingencyTable) -> Result<LogEvidence> {
    count_evidence();
    let hd = joint_integrand(t, &spec_for(ViolationClass::Air, t)?)?.aggregate();
    Ok(LogEvidence::closed_form(
        hd.closed_form().expect("joint cells partition θ"),
    ))
}

/// Evidence with both assumptions violated.
pub fn ml_both(t: &ContingencyTable) -> Result<LogEvidence> {
    count_evidence();
    let hd = joint_integrand(t, &spec_for(ViolationClass::Both, t)?)?.aggregate();
    Ok(LogEvidence::closed_form(
        hd.closed_form().expect("joint cells partition θ"),
    ))
}

/// Evidence of the valid-IV class.
pub fn ml_valid(t: &ContingencyTable, cfg: &EvidenceConfig) -> Result<LogEvidence> {
    count_evidence();
    let spec = spec_for(ViolationClass::Valid, t)?;
    let all: Vec<usize> = (0..spec.n_ry()).collect();
    let hd = xy_integrand(t, &spec, &all)?;
    Ok(estimate(&hd, cfg, TAG_VALID)?.plus(z_factor(t)))
}

/// Exclusion-violated evidences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclEvidence {
    /// Best single-violation submodel.
    pub submodel_max: LogEvidence,
    /// r_y index of the violating function in the best submodel.
    pub best_submodel: usize,
    /// Every submodel's evidence, keyed by violating r_y index.
    pub submodels: BTreeMap<usize, f64>,
    /// The unrestricted class, when requested.
    pub full: Option<LogEvidence>,
}

impl ExclEvidence {
    /// The larger of the submodel maximum and the full class.
    pub fn best(&self) -> LogEvidence {
        match self.full {
            Some(f) if f.value > self.submodel_max.value => f,
            _ => self.submodel_max,
        }
    }
}

/// Exclusion-violated evidence, maximized over submodels that add one
/// exclusion-violating r_y function to the exclusion-respecting ones.
pub fn ml_excl_detail(t: &ContingencyTable, cfg: &EvidenceConfig) -> Result<ExclEvidence> {
    count_evidence();
    let spec = spec_for(ViolationClass::Excl, t)?;
    let respecting = spec.exclusion_respecting_ry();
    let violating: Vec<usize> = (0..spec.n_ry()).filter(|r| !respecting.contains(r)).collect();
    let zf = z_factor(t);
    let subs: Vec<(usize, LogEvidence)> = violating
        .par_iter()
        .map(|&v| {
            let mut set = respecting.clone();
            set.push(v);
            let hd = xy_integrand(t, &spec, &set)?;
            Ok((v, estimate(&hd, cfg, TAG_EXCL_SUB + v as u64)?.plus(zf)))
        })
        .collect::<Result<_>>()?;
    let (best_submodel, submodel_max) = subs
        .iter()
        .copied()
        .fold(None, |best: Option<(usize, LogEvidence)>, (v, e)| match best {
            Some((_, b)) if b.value >= e.value => best,
            _ => Some((v, e)),
        })
        .expect("at least one violating function");
    let full = if cfg.excl_full {
        let all: Vec<usize> = (0..spec.n_ry()).collect();
        let hd = xy_integrand(t, &spec, &all)?;
        Some(estimate(&hd, cfg, TAG_EXCL_FULL)?.plus(zf))
    } else {
        None
    };
    Ok(ExclEvidence {
        submodel_max,
        best_submodel,
        submodels: subs.into_iter().map(|(v, e)| (v, e.value)).collect(),
        full,
    })
}

pub fn ml_excl(t: &ContingencyTable, cfg: &EvidenceConfig) -> Result<LogEvidence> {
    Ok(ml_excl_detail(t, cfg)?.best())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Accept,
    Reject,
    Inconclusive,
}

/// `ln(evidence_num / evidence_den) + ln(prior_ratio)`.
pub fn log_ratio(log_num: f64, log_den: f64, prior_ratio: f64) -> f64 {
    log_num - log_den + prior_ratio.ln()
}

/// ACCEPT above γ, REJECT below 1/γ.
pub fn decide(log_vr: f64, gamma: f64) -> Decision {
    if log_vr > gamma.ln() {
        Decision::Accept
    } else if log_vr < -gamma.ln() {
        Decision::Reject
    } else {
        Decision::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub valid: Option<LogEvidence>,
    pub excl: Option<ExclEvidence>,
    pub air: Option<LogEvidence>,
    pub both: Option<LogEvidence>,
    /// Class with the largest invalid evidence.
    pub strongest_invalid: Option<ViolationClass>,
    /// Log ratio against each requested invalid class.
    pub log_ratios: BTreeMap<ViolationClass, f64>,
    pub prior_ratio: f64,
    pub log_validity_ratio: Option<f64>,
    pub gamma: f64,
    pub decision: Decision,
    /// Estimator failures; a nonempty list forces an inconclusive decision.
    pub diagnostics: Vec<String>,
}

impl ValidityReport {
    pub fn estimator_failed(&self) -> bool {
        !self.diagnostics.is_empty()
    }
}

/// Keeps estimator failures as diagnostics and propagates everything else.
fn soft<T>(r: Result<T>, what: &str, diagnostics: &mut Vec<String>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_estimator_failure() => {
            diagnostics.push(format!("{what}: {e}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Compares the valid class against the strongest requested invalid class.
pub fn validity_ratio(
    t: &ContingencyTable,
    violations: &[ViolationClass],
    prior_ratio: f64,
    gamma: f64,
    cfg: &EvidenceConfig,
) -> Result<ValidityReport> {
    if violations.is_empty() || violations.contains(&ViolationClass::Valid) {
        return Err(Error::InvalidParameter(
            "violations must be a nonempty subset of excl, air, both".into(),
        ));
    }
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma {gamma} must exceed 1")));
    }
    if !(prior_ratio > 0.0 && prior_ratio.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "prior ratio {prior_ratio} must be positive"
        )));
    }
    let mut diagnostics = Vec::new();
    let want = |c| violations.contains(&c);
    let valid = soft(ml_valid(t, cfg), "valid", &mut diagnostics)?;
    let excl = if want(ViolationClass::Excl) {
        soft(ml_excl_detail(t, cfg), "excl", &mut diagnostics)?
    } else {
        None
    };
    let air = if want(ViolationClass::Air) {
        Some(ml_air(t)?)
    } else {
        None
    };
    let both = if want(ViolationClass::Both) {
        Some(ml_both(t)?)
    } else {
        None
    };

    let mut invalid: Vec<(ViolationClass, f64)> = Vec::new();
    if let Some(e) = &excl {
        invalid.push((ViolationClass::Excl, e.best().value));
    }
    for (c, e) in [(ViolationClass::Air, air), (ViolationClass::Both, both)] {
        if let Some(e) = e {
            invalid.push((c, e.value));
        }
    }
    let mut log_ratios = BTreeMap::new();
    let mut log_validity_ratio = None;
    let mut strongest_invalid = None;
    if let Some(v) = valid {
        for &(c, e) in &invalid {
            log_ratios.insert(c, log_ratio(v.value, e, prior_ratio));
        }
        if diagnostics.is_empty() {
            let (c, e) = invalid
                .iter()
                .copied()
                .fold((ViolationClass::Valid, f64::NEG_INFINITY), |a, b| {
                    if b.1 > a.1 {
                        b
                    } else {
                        a
                    }
                });
            strongest_invalid = Some(c);
            log_validity_ratio = Some(log_ratio(v.value, e, prior_ratio));
        }
    }
    let decision = match log_validity_ratio {
        Some(r) => decide(r, gamma),
        None => Decision::Inconclusive,
    };
    Ok(ValidityReport {
        valid,
        excl,
        air,
        both,
        strongest_invalid,
        log_ratios,
        prior_ratio,
        log_validity_ratio,
        gamma,
        decision,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Levels;
    use crate::numeric::ln_gamma;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn table(c: [u64; 8]) -> ContingencyTable {
        ContingencyTable::from_counts(Levels::binary(), c.to_vec()).unwrap()
    }

    fn mc_cfg(samples: u64) -> EvidenceConfig {
        EvidenceConfig {
            estimator: Estimator::PriorMc,
            prior_mc_samples: samples,
            ..Default::default()
        }
    }

    /// Dirichlet-multinomial sequence probability with equal group weights.
    fn dm(counts: &[u64], a: f64) -> f64 {
        let k = counts.len() as f64;
        let n: u64 = counts.iter().sum();
        ln_gamma(k * a) - ln_gamma(k * a + n as f64)
            + counts
                .iter()
                .map(|&q| ln_gamma(a + q as f64) - ln_gamma(a))
                .sum::<f64>()
    }

    #[test]
    fn empty_table_has_zero_evidence() {
        let t = table([0; 8]);
        assert_eq!(ml_air(&t).unwrap().value, 0.0);
        assert_eq!(ml_both(&t).unwrap().value, 0.0);
        assert_eq!(ml_valid(&t, &Default::default()).unwrap().value, 0.0);
        assert_eq!(ml_excl(&t, &Default::default()).unwrap().value, 0.0);
    }

    #[test]
    fn single_observation_is_one_eighth() {
        for cell in 0..8 {
            let mut c = [0; 8];
            c[cell] = 1;
            let t = table(c);
            let eighth = (1.0f64 / 8.0).ln();
            assert_relative_eq!(ml_air(&t).unwrap().value, eighth, epsilon = 1e-12);
            assert_relative_eq!(ml_both(&t).unwrap().value, eighth, epsilon = 1e-12);
            let v = ml_valid(&t, &Default::default()).unwrap();
            assert_relative_eq!(v.value, eighth, epsilon = 1e-12);
            assert_eq!(v.method, Method::ClosedForm);
        }
    }

    #[test]
    fn closed_forms_match_group_sizes() {
        let c = [3, 0, 5, 1, 2, 7, 0, 4];
        assert_relative_eq!(ml_air(&table(c)).unwrap().value, dm(&c, 4.0), epsilon = 1e-10);
        assert_relative_eq!(ml_both(&table(c)).unwrap().value, dm(&c, 16.0), epsilon = 1e-10);
    }

    #[test]
    fn general_levels_use_preimage_group_sizes() {
        let lv = Levels::new(2, 3, 2).unwrap();
        let counts: Vec<u64> = (0..12).map(|i| (i * 7 % 5) as u64).collect();
        let t = ContingencyTable::from_counts(lv, counts.clone()).unwrap();
        // AIR group size m^(l-1) n^(m-1) = 3 * 4 = 12
        assert_relative_eq!(ml_air(&t).unwrap().value, dm(&counts, 12.0), epsilon = 1e-9);
    }

    #[test]
    fn z_factor_formula() {
        let t = table([1, 2, 0, 1, 3, 0, 0, 1]);
        let want = ln_gamma(2.0) - ln_gamma(2.0 + 8.0) + ln_gamma(5.0) + ln_gamma(5.0);
        assert_relative_eq!(z_factor(&t), want, epsilon = 1e-12);
    }

    #[test]
    fn log_likelihood_examples() {
        let spec = build_spec(ViolationClass::Valid, Levels::binary()).unwrap();
        let mut xy = vec![0.0; 16];
        xy[0] = 1.0;
        let theta = ThetaVector::Factorized { rz: vec![1.0, 0.0], xy };
        let t = table([5, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(log_likelihood(&theta, &t, &spec).unwrap(), 0.0);
        let t = table([5, 1, 0, 0, 0, 0, 0, 0]);
        assert_eq!(log_likelihood(&theta, &t, &spec).unwrap(), f64::NEG_INFINITY);
        let air = build_spec(ViolationClass::Air, Levels::binary()).unwrap();
        let uniform = ThetaVector::Joint {
            p: vec![1.0 / 32.0; 32],
        };
        let t = table([1, 2, 3, 4, 5, 6, 7, 8]);
        assert_relative_eq!(
            log_likelihood(&uniform, &t, &air).unwrap(),
            -36.0 * 8f64.ln(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn air_matches_prior_mc() {
        let t = table([2, 1, 0, 3, 1, 0, 2, 1]);
        let spec = build_spec(ViolationClass::Air, Levels::binary()).unwrap();
        let hd = joint_integrand(&t, &spec).unwrap();
        let mc = prior_mc(&hd, 200_000, 4);
        let exact = ml_air(&t).unwrap().value;
        assert!(
            (mc.value - exact).abs() < 3.0 * mc.stderr,
            "{} {} {}",
            mc.value,
            exact,
            mc.stderr
        );
    }

    #[test]
    fn valid_ais_agrees_with_prior_mc() {
        let t = table([3, 1, 0, 2, 1, 0, 2, 3]);
        let cfg = EvidenceConfig {
            ais: AisConfig {
                rungs: 200,
                chains: 128,
                ..Default::default()
            },
            ..Default::default()
        };
        let a = ml_valid(&t, &cfg).unwrap();
        let m = ml_valid(&t, &mc_cfg(400_000)).unwrap();
        let se = (a.stderr.powi(2) + m.stderr.powi(2)).sqrt();
        assert!((a.value - m.value).abs() < 3.0 * se + 0.02, "{a:?} {m:?}");
    }

    #[test]
    fn excl_reports_twelve_submodels() {
        let t = table([3, 1, 0, 2, 1, 0, 2, 3]);
        let e = ml_excl_detail(&t, &mc_cfg(20_000)).unwrap();
        assert_eq!(e.submodels.len(), 12);
        assert!(e.full.is_none());
        assert!(!e.submodels.contains_key(&0) && !e.submodels.contains_key(&15));
        let cfg = EvidenceConfig {
            excl_full: true,
            ..mc_cfg(20_000)
        };
        let e = ml_excl_detail(&t, &cfg).unwrap();
        assert!(e.full.is_some());
        assert!(e.best().value >= e.submodel_max.value);
    }

    #[test]
    fn ratio_rules() {
        assert_eq!(decide(3.0, 10.0), Decision::Accept);
        assert_eq!(decide(-3.0, 10.0), Decision::Reject);
        assert_eq!(decide(1.0, 10.0), Decision::Inconclusive);
        let r = log_ratio(-10.0, -12.0, 2.0);
        assert_relative_eq!(r, -log_ratio(-12.0, -10.0, 0.5), epsilon = 1e-15);
    }

    #[test]
    fn validity_ratio_checks_inputs() {
        let t = table([1; 8]);
        let cfg = mc_cfg(1000);
        assert!(validity_ratio(&t, &[], 1.0, 10.0, &cfg).is_err());
        assert!(validity_ratio(&t, &[ViolationClass::Valid], 1.0, 10.0, &cfg).is_err());
        assert!(validity_ratio(&t, &[ViolationClass::Air], 1.0, 1.0, &cfg).is_err());
        assert!(validity_ratio(&t, &[ViolationClass::Air], 0.0, 10.0, &cfg).is_err());
    }

    #[test]
    fn validity_ratio_uses_strongest_invalid() {
        let t = table([6, 1, 0, 2, 1, 0, 2, 7]);
        let cfg = mc_cfg(50_000);
        let r = validity_ratio(&t, &[ViolationClass::Air, ViolationClass::Both], 1.0, 3.0, &cfg).unwrap();
        let air = r.air.unwrap().value;
        let both = r.both.unwrap().value;
        let v = r.valid.unwrap().value;
        assert_relative_eq!(r.log_validity_ratio.unwrap(), v - air.max(both), epsilon = 1e-12);
        assert_eq!(r.log_ratios.len(), 2);
        assert!(r.diagnostics.is_empty());
    }

    #[test]
    fn estimator_failure_is_reported_not_fatal() {
        let t = table([6, 1, 0, 2, 1, 0, 2, 7]);
        let cfg = EvidenceConfig {
            ais: AisConfig {
                rungs: 3,
                chains: 4,
                min_ess: 10.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let r = validity_ratio(&t, &[ViolationClass::Air], 1.0, 3.0, &cfg).unwrap();
        assert!(r.estimator_failed());
        assert_eq!(r.decision, Decision::Inconclusive);
        assert!(r.log_validity_ratio.is_none());
        assert!(r.air.is_some());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        /// Adding a row can only lower each evidence.
        #[test]
        fn evidence_is_monotone_in_data(c in prop::array::uniform8(0u64..5), cell in 0usize..8) {
            let t = table(c);
            let mut c2 = c;
            c2[cell] += 1;
            let t2 = table(c2);
            prop_assert!(ml_air(&t2).unwrap().value <= ml_air(&t).unwrap().value);
            prop_assert!(ml_both(&t2).unwrap().value <= ml_both(&t).unwrap().value);
            let cfg = mc_cfg(4000);
            let (a, b) = (ml_valid(&t2, &cfg).unwrap(), ml_valid(&t, &cfg).unwrap());
            prop_assert!(a.value <= b.value + 3.0 * (a.stderr + b.stderr));
        }

        #[test]
        fn evidence_depends_only_on_counts(c in prop::array::uniform8(0u64..6)) {
            use crate::data::{build_contingency, Dataset};
            let lv = Levels::binary();
            let mut rows = Vec::new();
            for (i, &q) in c.iter().enumerate() {
                let (z, x, y) = lv.cell_coords(i);
                rows.extend(std::iter::repeat_n([z, x, y], q as usize));
            }
            prop_assume!(!rows.is_empty());
            let fwd = build_contingency(&Dataset::from_rows(rows.clone(), lv).unwrap());
            rows.reverse();
            let rev = build_contingency(&Dataset::from_rows(rows, lv).unwrap());
            let cfg = mc_cfg(500);
            prop_assert_eq!(ml_valid(&fwd, &cfg).unwrap(), ml_valid(&rev, &cfg).unwrap());
        }
    }
}
