//! Response-variable models.
//!
//! A model is a distribution over deterministic response functions:
//! `r_z` picks Z, `r_x` picks a function z -> x and `r_y` a function x -> y
//! (or (x, z) -> y when the exclusion restriction is dropped).
//!
//! Function tables are enumerated lexicographically over their output tuple,
//! first output most significant. For binary levels the `r_x` order is
//! never-taker, complier, defier, always-taker. For (x, z) -> y functions the
//! inputs are ordered (x, z) lexicographically, so input `(x, z)` sits at
//! position `x * l + z`.

mod sampling;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{checked_pow, Dataset, Levels, RESPONSE_CEILING};
use crate::error::{Error, Result};

pub use sampling::{sample_model, SampleOptions, SamplingConstraint, MI_KNOB_GRID};

/// Tolerance on the sum of each θ factor.
pub const THETA_SUM_TOL: f64 = 1e-12;

/// Which IV assumptions a model class may violate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationClass {
    /// Exclusion and as-if-random both hold.
    Valid,
    /// Z may affect Y directly.
    Excl,
    /// Z may depend on the confounders.
    Air,
    /// Both assumptions may fail.
    Both,
}

impl ViolationClass {
    /// True when Y's response functions take Z as an input.
    pub fn y_depends_on_z(self) -> bool {
        matches!(self, ViolationClass::Excl | ViolationClass::Both)
    }
    /// True when θ splits as P(r_z) P(r_x, r_y).
    pub fn factorized(self) -> bool {
        matches!(self, ViolationClass::Valid | ViolationClass::Excl)
    }
    pub fn name(self) -> &'static str {
        match self {
            ViolationClass::Valid => "valid",
            ViolationClass::Excl => "excl",
            ViolationClass::Air => "air",
            ViolationClass::Both => "both",
        }
    }
}

impl std::str::FromStr for ViolationClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "valid" => Ok(ViolationClass::Valid),
            "excl" => Ok(ViolationClass::Excl),
            "air" => Ok(ViolationClass::Air),
            "both" => Ok(ViolationClass::Both),
            other => Err(Error::InvalidParameter(format!("unknown model class {other:?}"))),
        }
    }
}

/// All functions from `domain` inputs to `codomain` outputs in canonical order.
pub fn enumerate_functions(domain: usize, codomain: usize) -> Vec<Vec<usize>> {
    let count = codomain.pow(domain as u32);
    (0..count)
        .map(|mut i| {
            let mut out = vec![0; domain];
            for slot in out.iter_mut().rev() {
                *slot = i % codomain;
                i /= codomain;
            }
            out
        })
        .collect()
}

/// Enumerated response functions for one model class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SpecHeader", into = "SpecHeader")]
pub struct ResponseSpec {
    class: ViolationClass,
    levels: Levels,
    g_table: Vec<Vec<usize>>,
    y_table: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct SpecHeader {
    class: ViolationClass,
    levels: Levels,
}

impl TryFrom<SpecHeader> for ResponseSpec {
    type Error = Error;
    fn try_from(h: SpecHeader) -> Result<Self> {
        build_spec(h.class, h.levels)
    }
}

impl From<ResponseSpec> for SpecHeader {
    fn from(s: ResponseSpec) -> Self {
        SpecHeader {
            class: s.class,
            levels: s.levels,
        }
    }
}

pub fn build_spec(class: ViolationClass, levels: Levels) -> Result<ResponseSpec> {
    let y_domain = if class.y_depends_on_z() {
        levels.l * levels.m
    } else {
        levels.m
    };
    let size = checked_pow(levels.m, levels.l)
        .zip(checked_pow(levels.n, y_domain))
        .and_then(|(a, b)| a.checked_mul(b))
        .unwrap_or(u128::MAX);
    if size > RESPONSE_CEILING as u128 {
        return Err(Error::CeilingExceeded {
            size,
            ceiling: RESPONSE_CEILING,
        });
    }
    Ok(ResponseSpec {
        class,
        levels,
        g_table: enumerate_functions(levels.l, levels.m),
        y_table: enumerate_functions(y_domain, levels.n),
    })
}

impl ResponseSpec {
    pub fn class(&self) -> ViolationClass {
        self.class
    }
    pub fn levels(&self) -> Levels {
        self.levels
    }
    pub fn g_table(&self) -> &[Vec<usize>] {
        &self.g_table
    }
    pub fn y_table(&self) -> &[Vec<usize>] {
        &self.y_table
    }
    pub fn n_rx(&self) -> usize {
        self.g_table.len()
    }
    pub fn n_ry(&self) -> usize {
        self.y_table.len()
    }
    /// Size of the (r_x, r_y) block.
    pub fn n_xy(&self) -> usize {
        self.n_rx() * self.n_ry()
    }
    pub fn factorized(&self) -> bool {
        self.class.factorized()
    }

    pub fn theta_dim(&self) -> usize {
        if self.factorized() {
            self.levels.l + self.n_xy()
        } else {
            self.levels.l * self.n_xy()
        }
    }

    #[inline]
    pub fn x_of(&self, rx: usize, z: usize) -> usize {
        self.g_table[rx][z]
    }

    #[inline]
    pub fn y_of(&self, ry: usize, x: usize, z: usize) -> usize {
        if self.class.y_depends_on_z() {
            self.y_table[ry][x * self.levels.l + z]
        } else {
            self.y_table[ry][x]
        }
    }

    /// Observed cell produced by Z = z under responses (r_x, r_y).
    #[inline]
    pub fn cell_of(&self, z: usize, rx: usize, ry: usize) -> usize {
        let x = self.x_of(rx, z);
        self.levels.cell(z, x, self.y_of(ry, x, z))
    }

    /// Index of the r_y function that always outputs the top Y level.
    pub fn constant_top_ry(&self) -> usize {
        self.n_ry() - 1
    }

    /// r_x functions nondecreasing in z (no defiers).
    pub fn monotone_rx(&self) -> Vec<usize> {
        (0..self.n_rx())
            .filter(|&rx| self.g_table[rx].windows(2).all(|w| w[0] <= w[1]))
            .collect()
    }

    /// r_y functions whose output ignores z. Every r_y for VALID and AIR.
    pub fn exclusion_respecting_ry(&self) -> Vec<usize> {
        let (l, m) = (self.levels.l, self.levels.m);
        (0..self.n_ry())
            .filter(|&ry| (0..m).all(|x| (1..l).all(|z| self.y_of(ry, x, z) == self.y_of(ry, x, 0))))
            .collect()
    }
}

/// Index sets of monotone (x, z) -> y response functions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NondecreasingSets {
    /// Nondecreasing in z for every x.
    pub in_z: Vec<usize>,
    /// Nondecreasing in x for every z.
    pub in_x: Vec<usize>,
}

impl NondecreasingSets {
    pub fn in_both(&self) -> Vec<usize> {
        self.in_z.iter().copied().filter(|i| self.in_x.contains(i)).collect()
    }
}

pub fn classify_nondecreasing(spec: &ResponseSpec) -> Result<NondecreasingSets> {
    if !spec.class.y_depends_on_z() {
        return Err(Error::InvalidParameter(
            "nondecreasing classes need (x, z) -> y response functions".into(),
        ));
    }
    let (l, m) = (spec.levels.l, spec.levels.m);
    let h = |ry, x, z| spec.y_of(ry, x, z);
    let in_z = (0..spec.n_ry())
        .filter(|&ry| (0..m).all(|x| (1..l).all(|z| h(ry, x, z) >= h(ry, x, z - 1))))
        .collect();
    let in_x = (0..spec.n_ry())
        .filter(|&ry| (0..l).all(|z| (1..m).all(|x| h(ry, x, z) >= h(ry, x - 1, z))))
        .collect();
    Ok(NondecreasingSets { in_z, in_x })
}

/// Probabilities over response configurations.
///
/// `Factorized` holds P(r_z) and P(r_x, r_y) with `xy[rx * n_ry + ry]`.
/// `Joint` holds P(r_z, r_x, r_y) at `p[(rz * n_rx + rx) * n_ry + ry]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "lowercase")]
pub enum ThetaVector {
    Factorized { rz: Vec<f64>, xy: Vec<f64> },
    Joint { p: Vec<f64> },
}

fn check_factor(name: &str, v: &[f64]) -> Result<()> {
    if let Some(&bad) = v.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::InvalidProbability {
            what: format!("theta factor {name}"),
            value: bad,
        });
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > THETA_SUM_TOL.max(v.len() as f64 * f64::EPSILON * 4.0) {
        return Err(Error::InvalidProbability {
            what: format!("theta factor {name} total"),
            value: s,
        });
    }
    Ok(())
}

impl ThetaVector {
    /// Verifies the layout against `spec` and every factor against the simplex.
    pub fn check(&self, spec: &ResponseSpec) -> Result<()> {
        match (self, spec.factorized()) {
            (ThetaVector::Factorized { rz, xy }, true) => {
                if rz.len() != spec.levels.l || xy.len() != spec.n_xy() {
                    return Err(Error::LayoutMismatch(format!(
                        "factorized theta needs {} + {} entries, got {} + {}",
                        spec.levels.l,
                        spec.n_xy(),
                        rz.len(),
                        xy.len()
                    )));
                }
                check_factor("rz", rz)?;
                check_factor("xy", xy)
            }
            (ThetaVector::Joint { p }, false) => {
                if p.len() != spec.theta_dim() {
                    return Err(Error::LayoutMismatch(format!(
                        "joint theta needs {} entries, got {}",
                        spec.theta_dim(),
                        p.len()
                    )));
                }
                check_factor("joint", p)
            }
            _ => Err(Error::LayoutMismatch(format!(
                "{} models need a {} theta",
                spec.class.name(),
                if spec.factorized() { "factorized" } else { "joint" }
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ThetaVector::Factorized { rz, xy } => rz.len() + xy.len(),
            ThetaVector::Joint { p } => p.len(),
        }
    }

    /// Probability of configuration (r_z, r_x, r_y). Layout must already be checked.
    #[inline]
    pub fn prob(&self, spec: &ResponseSpec, rz: usize, rx: usize, ry: usize) -> f64 {
        let k = rx * spec.n_ry() + ry;
        match self {
            ThetaVector::Factorized { rz: pz, xy } => pz[rz] * xy[k],
            ThetaVector::Joint { p } => p[rz * spec.n_xy() + k],
        }
    }

    /// The joint layout of any θ.
    pub fn to_joint(&self, spec: &ResponseSpec) -> Vec<f64> {
        let mut out = Vec::with_capacity(spec.levels.l * spec.n_xy());
        for rz in 0..spec.levels.l {
            for rx in 0..spec.n_rx() {
                for ry in 0..spec.n_ry() {
                    out.push(self.prob(spec, rz, rx, ry));
                }
            }
        }
        out
    }
}

/// A spec and θ bundled for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawThetaDocument")]
pub struct ThetaDocument {
    pub spec: ResponseSpec,
    pub theta: ThetaVector,
}

#[derive(Deserialize)]
struct RawThetaDocument {
    spec: ResponseSpec,
    theta: ThetaVector,
}

impl TryFrom<RawThetaDocument> for ThetaDocument {
    type Error = Error;
    fn try_from(r: RawThetaDocument) -> Result<Self> {
        r.theta.check(&r.spec)?;
        Ok(ThetaDocument {
            spec: r.spec,
            theta: r.theta,
        })
    }
}

/// Exact joint P(Z, X, Y) in [`Levels::cell`] order.
pub fn forward_distribution(theta: &ThetaVector, spec: &ResponseSpec) -> Result<Vec<f64>> {
    theta.check(spec)?;
    let lv = spec.levels;
    let mut out = vec![0.0; lv.cells()];
    for z in 0..lv.l {
        for rx in 0..spec.n_rx() {
            for ry in 0..spec.n_ry() {
                out[spec.cell_of(z, rx, ry)] += theta.prob(spec, z, rx, ry);
            }
        }
    }
    Ok(out)
}

/// MI(R_Z; (R_X, R_Y)) in nats for a joint θ.
pub fn mutual_information(theta: &ThetaVector, spec: &ResponseSpec) -> Result<f64> {
    theta.check(spec)?;
    let p = match theta {
        ThetaVector::Joint { p } => p,
        ThetaVector::Factorized { .. } => {
            return Err(Error::LayoutMismatch("mutual information needs a joint theta".into()))
        }
    };
    let k = spec.n_xy();
    let pz: Vec<f64> = p.chunks(k).map(|c| c.iter().sum()).collect();
    let mut pc = vec![0.0; k];
    for c in p.chunks(k) {
        pc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
    }
    let mut mi = 0.0;
    for (z, c) in p.chunks(k).enumerate() {
        for (j, &v) in c.iter().enumerate() {
            if v > 0.0 {
                mi += v * (v / (pz[z] * pc[j])).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// Draws `size` i.i.d. rows from the model's observed distribution.
pub fn sample_dataset<R: Rng + ?Sized>(
    theta: &ThetaVector,
    spec: &ResponseSpec,
    size: usize,
    rng: &mut R,
) -> Result<Dataset> {
    let joint = forward_distribution(theta, spec)?;
    sample_from_joint(&joint, spec.levels, size, rng)
}

/// Draws `size` i.i.d. rows from a joint P(Z, X, Y).
pub fn sample_from_joint<R: Rng + ?Sized>(joint: &[f64], levels: Levels, size: usize, rng: &mut R) -> Result<Dataset> {
    if size == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut cdf: Vec<f64> = joint
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let total = *cdf.last().unwrap_or(&0.0);
    cdf.iter_mut().for_each(|c| *c /= total);
    let last_positive = joint.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let rows = (0..size)
        .map(|_| {
            let u: f64 = rng.random();
            let idx = cdf.partition_point(|&c| c <= u).min(last_positive);
            let (z, x, y) = levels.cell_coords(idx);
            [z, x, y]
        })
        .collect();
    Dataset::from_rows(rows, levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_contingency;
    use crate::numeric::stream_rng;
    use approx::assert_relative_eq;

    fn binary(class: ViolationClass) -> ResponseSpec {
        build_spec(class, Levels::binary()).unwrap()
    }

    #[test]
    fn binary_rx_order_matches_compliance_types() {
        let s = binary(ViolationClass::Valid);
        assert_eq!(s.g_table(), &[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(s.y_table(), s.g_table());
    }

    #[test]
    fn theta_dimensions() {
        assert_eq!(binary(ViolationClass::Valid).theta_dim(), 18);
        assert_eq!(binary(ViolationClass::Excl).theta_dim(), 66);
        assert_eq!(binary(ViolationClass::Air).theta_dim(), 32);
        assert_eq!(binary(ViolationClass::Both).theta_dim(), 128);
        assert_eq!(binary(ViolationClass::Excl).n_ry(), 16);
    }

    #[test]
    fn excl_function_indexing() {
        let s = binary(ViolationClass::Excl);
        // index = 8 h(0,0) + 4 h(0,1) + 2 h(1,0) + h(1,1)
        assert_eq!(s.y_of(12, 0, 0), 1);
        assert_eq!(s.y_of(12, 0, 1), 1);
        assert_eq!(s.y_of(12, 1, 0), 0);
        assert_eq!(s.y_of(1, 1, 1), 1);
        assert_eq!(s.exclusion_respecting_ry(), vec![0, 3, 12, 15]);
        assert_eq!(s.constant_top_ry(), 15);
        assert_eq!(binary(ViolationClass::Air).exclusion_respecting_ry().len(), 4);
    }

    #[test]
    fn nondecreasing_counts() {
        let sets = classify_nondecreasing(&binary(ViolationClass::Excl)).unwrap();
        assert_eq!(sets.in_z.len(), 9);
        assert_eq!(sets.in_x.len(), 9);
        assert_eq!(sets.in_both().len(), 6);
        for c in [0, 15] {
            assert!(sets.in_z.contains(&c) && sets.in_x.contains(&c));
        }
        assert!(classify_nondecreasing(&binary(ViolationClass::Valid)).is_err());
    }

    #[test]
    fn monotone_rx_excludes_defiers() {
        assert_eq!(binary(ViolationClass::Valid).monotone_rx(), vec![0, 1, 3]);
    }

    #[test]
    fn ceiling_enforced() {
        let lv = Levels::new(3, 3, 4).unwrap();
        assert!(build_spec(ViolationClass::Valid, lv).is_ok());
        assert!(matches!(
            build_spec(ViolationClass::Excl, lv),
            Err(Error::CeilingExceeded { .. })
        ));
    }

    #[test]
    fn point_mass_forward() {
        let s = binary(ViolationClass::Valid);
        let mut xy = vec![0.0; 16];
        xy[3 * 4 + 1] = 1.0;
        let t = ThetaVector::Factorized { rz: vec![1.0, 0.0], xy };
        let f = forward_distribution(&t, &s).unwrap();
        assert_eq!(f[Levels::binary().cell(0, 1, 1)], 1.0);
        assert_eq!(f.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn uniform_air_gives_uniform_cells() {
        let s = binary(ViolationClass::Air);
        let t = ThetaVector::Joint {
            p: vec![1.0 / 32.0; 32],
        };
        let f = forward_distribution(&t, &s).unwrap();
        for v in f {
            assert_relative_eq!(v, 0.125, epsilon = 1e-15);
        }
    }

    #[test]
    fn preimages_partition_configurations() {
        for (class, total) in [(ViolationClass::Air, 32), (ViolationClass::Both, 128)] {
            let s = binary(class);
            let mut sizes = [0usize; 8];
            for z in 0..2 {
                for rx in 0..s.n_rx() {
                    for ry in 0..s.n_ry() {
                        sizes[s.cell_of(z, rx, ry)] += 1;
                    }
                }
            }
            assert_eq!(sizes.iter().sum::<usize>(), total);
            assert!(sizes.iter().all(|&c| c == total / 8));
        }
    }

    #[test]
    fn layout_mismatch_detected() {
        let s = binary(ViolationClass::Air);
        let t = ThetaVector::Factorized {
            rz: vec![0.5, 0.5],
            xy: vec![1.0 / 16.0; 16],
        };
        assert!(matches!(forward_distribution(&t, &s), Err(Error::LayoutMismatch(_))));
        let t = ThetaVector::Joint {
            p: vec![1.0 / 31.0; 31],
        };
        assert!(matches!(forward_distribution(&t, &s), Err(Error::LayoutMismatch(_))));
    }

    #[test]
    fn mutual_information_examples() {
        let s = binary(ViolationClass::Air);
        let mut p = vec![0.0; 32];
        p[0] = 0.5;
        p[16 + 5] = 0.5;
        assert_relative_eq!(
            mutual_information(&ThetaVector::Joint { p }, &s).unwrap(),
            2f64.ln(),
            epsilon = 1e-14
        );
        let indep: Vec<f64> = (0..32).map(|i| if i < 16 { 0.3 } else { 0.7 } / 16.0).collect();
        assert!(mutual_information(&ThetaVector::Joint { p: indep }, &s).unwrap() < 1e-15);
        // P(r_y = const-1 | r_z = 1) = 0.9 against a uniform r_z = 0 slice.
        let mut p = vec![0.5 / 16.0; 16];
        for _rx in 0..4 {
            for ry in 0..4 {
                p.push(0.5 * if ry == 3 { 0.9 / 4.0 } else { 0.1 / 12.0 });
            }
        }
        assert!(mutual_information(&ThetaVector::Joint { p }, &s).unwrap() > 0.1);
    }

    #[test]
    fn point_mass_dataset_is_constant() {
        let s = binary(ViolationClass::Valid);
        let mut xy = vec![0.0; 16];
        xy[5] = 1.0;
        let t = ThetaVector::Factorized { rz: vec![0.0, 1.0], xy };
        let d = sample_dataset(&t, &s, 100, &mut stream_rng(3, 0)).unwrap();
        assert!(d.rows().iter().all(|r| *r == d.rows()[0]));
    }

    #[test]
    fn uniform_cells_concentrate() {
        let s = binary(ViolationClass::Air);
        let t = ThetaVector::Joint {
            p: vec![1.0 / 32.0; 32],
        };
        let n = 80_000;
        let tab = build_contingency(&sample_dataset(&t, &s, n, &mut stream_rng(11, 0)).unwrap());
        let sigma = (n as f64 * 0.125 * 0.875).sqrt();
        for &q in tab.counts() {
            assert!((q as f64 - n as f64 / 8.0).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn theta_document_round_trips() {
        let s = binary(ViolationClass::Excl);
        let doc = ThetaDocument {
            spec: s.clone(),
            theta: ThetaVector::Factorized {
                rz: vec![0.5, 0.5],
                xy: vec![1.0 / 64.0; 64],
            },
        };
        let json = serde_json::to_string(&doc).unwrap();
        assert!(json.contains("\"class\":\"excl\""));
        let back: ThetaDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back, doc);
        let bad = json.replace("\"excl\"", "\"air\"");
        assert!(serde_json::from_str::<ThetaDocument>(&bad).is_err());
    }
}
