use serde::{Deserialize, Serialize};

use crate::data::ContingencyTable;
use crate::error::{Error, Result};
use crate::numeric::{ln_choose, log_sum_exp};

/// Tail of the hypergeometric distribution of the top-left cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// P(A >= a)
    Greater,
    /// P(A <= a)
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherP {
    pub p: f64,
    /// A row or column total was zero; `p` is 1 by convention.
    pub degenerate: bool,
}

/// One-sided Fisher exact test on `[[a, b], [c, d]]`, conditioning on all margins.
pub fn fisher_one_sided(a: u64, b: u64, c: u64, d: u64, direction: Direction) -> FisherP {
    let (r1, r2, c1, c2) = (a + b, c + d, a + c, b + d);
    if r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0 {
        return FisherP {
            p: 1.0,
            degenerate: true,
        };
    }
    let n = r1 + r2;
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let norm = ln_choose(n, c1);
    let range = match direction {
        Direction::Greater => a..=hi,
        Direction::Less => lo..=a,
    };
    let terms: Vec<f64> = range.map(|k| ln_choose(r1, k) + ln_choose(r2, c1 - k) - norm).collect();
    FisherP {
        p: log_sum_exp(&terms).exp().min(1.0),
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExactMode {
    Pearl,
    Monotonicity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    /// Each test at alpha / 2.
    Halved,
    None,
}

impl Correction {
    /// Halved for the instrumental inequalities, none for monotonicity.
    pub fn default_for(mode: ExactMode) -> Self {
        match mode {
            ExactMode::Pearl => Correction::Halved,
            ExactMode::Monotonicity => Correction::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactTestEntry {
    pub id: String,
    /// `[a, b, c, d]`: rows Z=0 and Z=1, columns event and its complement.
    pub table: [u64; 4],
    pub direction: Direction,
    pub p_value: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactTestReport {
    pub mode: ExactMode,
    pub correction: Correction,
    pub alpha: f64,
    pub per_test_level: f64,
    pub entries: Vec<ExactTestEntry>,
    pub passed: bool,
    pub z_inverted: bool,
}

/// Finite-sample version of the binary Pearl or monotonicity inequalities.
///
/// Pearl inequality (x, y) compares the event (X=x, Y=y) in Z=1 against the
/// complement of (X=x, Y=1-y) in Z=0 and tests for an excess in Z=1.
/// Monotonicity inequalities compare one cell across strata. In monotonicity
/// mode Z is reversed first when treatment uptake falls with Z.
pub fn exact_test(
    t: &ContingencyTable,
    alpha: f64,
    mode: ExactMode,
    correction: Correction,
) -> Result<ExactTestReport> {
    if !t.levels().is_binary() {
        return Err(Error::NotBinary);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1)")));
    }
    let totals = t.stratum_totals();
    let uptake = |z: usize| (t.get(z, 1, 0) + t.get(z, 1, 1)) as f64 / totals[z].max(1) as f64;
    let z_inverted = mode == ExactMode::Monotonicity && uptake(1) < uptake(0);
    let (n0, n1) = if z_inverted {
        (totals[1], totals[0])
    } else {
        (totals[0], totals[1])
    };
    let get = |z: usize, x: usize, y: usize| t.get(if z_inverted { 1 - z } else { z }, x, y);

    let mut entries = Vec::with_capacity(4);
    let mut push = |id: String, a: u64, c: u64, direction: Direction| {
        let (b, d) = (n0 - a, n1 - c);
        let fp = fisher_one_sided(a, b, c, d, direction);
        entries.push(ExactTestEntry {
            id,
            table: [a, b, c, d],
            direction,
            p_value: fp.p,
            degenerate: fp.degenerate,
        });
    };
    match mode {
        ExactMode::Pearl => {
            for x in 0..2 {
                for y in 0..2 {
                    let a = n0 - get(0, x, 1 - y);
                    push(format!("pearl[x={x},y={y}]"), a, get(1, x, y), Direction::Less);
                }
            }
        }
        ExactMode::Monotonicity => {
            for y in 0..2 {
                push(
                    format!("mono_ge[z=0,x=1,y={y}]"),
                    get(0, 1, y),
                    get(1, 1, y),
                    Direction::Greater,
                );
                push(
                    format!("mono_le[z=0,x=0,y={y}]"),
                    get(0, 0, y),
                    get(1, 0, y),
                    Direction::Less,
                );
            }
        }
    }
    let per_test_level = match correction {
        Correction::Halved => alpha / 2.0,
        Correction::None => alpha,
    };
    let passed = entries.iter().all(|e| e.p_value >= per_test_level);
    Ok(ExactTestReport {
        mode,
        correction,
        alpha,
        per_test_level,
        entries,
        passed,
        z_inverted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{cond_prob_vector, Levels};
    use crate::nectest::{monotonicity_test, pearl_binary_test, ZOrder};
    use approx::assert_relative_eq;

    /// Exact hypergeometric tail as a ratio of integers.
    fn oracle(a: u64, b: u64, c: u64, d: u64, dir: Direction) -> f64 {
        fn choose(n: u64, k: u64) -> u128 {
            if k > n {
                return 0;
            }
            (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
        }
        let (r1, r2, c1) = (a + b, c + d, a + c);
        let ks: Vec<u64> = (0..=c1)
            .filter(|&k| match dir {
                Direction::Greater => k >= a,
                Direction::Less => k <= a,
            })
            .collect();
        let num: u128 = ks.iter().map(|&k| choose(r1, k) * choose(r2, c1 - k)).sum();
        num as f64 / choose(r1 + r2, c1) as f64
    }

    #[test]
    fn fisher_examples() {
        assert_relative_eq!(
            fisher_one_sided(3, 0, 0, 3, Direction::Greater).p,
            0.05,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            fisher_one_sided(1, 1, 1, 1, Direction::Greater).p,
            5.0 / 6.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            fisher_one_sided(1, 1, 1, 1, Direction::Less).p,
            5.0 / 6.0,
            epsilon = 1e-14
        );
        let deg = fisher_one_sided(0, 0, 4, 2, Direction::Less);
        assert_eq!(deg.p, 1.0);
        assert!(deg.degenerate);
    }

    #[test]
    fn fisher_matches_enumeration_small() {
        for a in 0..6 {
            for b in 0..6 {
                for c in 0..6 {
                    for d in 0..6 {
                        for dir in [Direction::Greater, Direction::Less] {
                            let got = fisher_one_sided(a, b, c, d, dir);
                            if !got.degenerate {
                                assert!((got.p - oracle(a, b, c, d, dir)).abs() < 1e-12);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn identical_strata_pass() {
        let t = ContingencyTable::from_counts(Levels::binary(), vec![5, 10, 15, 20, 5, 10, 15, 20]).unwrap();
        for mode in [ExactMode::Pearl, ExactMode::Monotonicity] {
            let r = exact_test(&t, 0.05, mode, Correction::default_for(mode)).unwrap();
            assert!(r.passed);
            assert!(r.entries.iter().all(|e| e.p_value >= 0.5));
        }
    }

    #[test]
    fn levels_follow_correction() {
        let t = ContingencyTable::from_counts(Levels::binary(), vec![1; 8]).unwrap();
        let r = exact_test(&t, 0.1, ExactMode::Pearl, Correction::Halved).unwrap();
        assert_eq!(r.per_test_level, 0.05);
        let r = exact_test(&t, 0.1, ExactMode::Monotonicity, Correction::None).unwrap();
        assert_eq!(r.per_test_level, 0.1);
    }

    #[test]
    fn requires_binary() {
        let lv = Levels::new(3, 2, 2).unwrap();
        let t = ContingencyTable::from_counts(lv, vec![1; 12]).unwrap();
        assert!(matches!(
            exact_test(&t, 0.05, ExactMode::Pearl, Correction::Halved),
            Err(Error::NotBinary)
        ));
    }

    /// Scaling exact probabilities to large N recovers the population decision.
    #[test]
    fn large_samples_converge_to_population_test() {
        let cases: [[f64; 8]; 3] = [
            [0.7, 0.1, 0.1, 0.1, 0.1, 0.6, 0.2, 0.1],
            [0.4, 0.1, 0.3, 0.2, 0.3, 0.1, 0.3, 0.3],
            [0.1, 0.2, 0.3, 0.4, 0.05, 0.1, 0.45, 0.4],
        ];
        for e in cases {
            let counts: Vec<u64> = e.iter().map(|p| (p * 1e6).round() as u64).collect();
            let t = ContingencyTable::from_counts(Levels::binary(), counts).unwrap();
            let f = cond_prob_vector(&t).unwrap();
            let pearl = exact_test(&t, 0.05, ExactMode::Pearl, Correction::Halved).unwrap();
            assert_eq!(pearl.passed, pearl_binary_test(&f, 1e-12).unwrap().passed);
            let mono = exact_test(&t, 0.05, ExactMode::Monotonicity, Correction::None).unwrap();
            assert_eq!(mono.passed, monotonicity_test(&f, 1e-12, ZOrder::Auto).unwrap().passed);
        }
    }
}
