use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{classify_nondecreasing, mutual_information, ResponseSpec, ThetaVector};
use crate::error::{Error, Result};

/// Knob values tried, in shuffled order, when meeting an MI threshold.
pub const MI_KNOB_GRID: [f64; 21] = [
    0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0,
];

/// Total-variation distance under which a joint θ counts as independent.
const INDEPENDENCE_TV: f64 = 1e-9;

/// Restrictions on randomly drawn models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingConstraint {
    None,
    /// Mass `alpha` on r_y functions nondecreasing in z.
    NondecreasingZy {
        alpha: f64,
    },
    /// Mass `alpha` on r_y functions nondecreasing in both z and x.
    NondecreasingZyXy {
        alpha: f64,
    },
    /// MI(R_Z; (R_X, R_Y)) of at least `tau` nats, reached through the knob.
    MiThreshold {
        tau: f64,
    },
    /// P(r_y = constant top | r_z = 1) = `v`.
    FixedConditional {
        v: f64,
    },
}

/// How models are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleOptions {
    /// Restrict r_x to functions nondecreasing in z.
    pub monotone_rx: bool,
    /// Draw P(r_x) and then P(r_y | r_x) instead of one joint Dirichlet.
    pub hierarchical: bool,
    /// Draws allowed before giving up on a constraint.
    pub redraw_budget: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            monotone_rx: false,
            hierarchical: false,
            redraw_budget: 1000,
        }
    }
}

/// Uniform Dirichlet draw written into `out`, scaled to `mass`.
fn dirichlet_into<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64], idx: &[usize], mass: f64) {
    if idx.is_empty() {
        return;
    }
    let draws: Vec<f64> = idx.iter().map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    for (&i, d) in idx.iter().zip(draws) {
        out[i] = mass * d / total;
    }
}

/// Mass `alpha` uniformly on the flagged items, the rest uniformly on the others.
fn block_dirichlet<R: Rng + ?Sized>(
    rng: &mut R,
    out: &mut [f64],
    items: &[usize],
    in_block: impl Fn(usize) -> bool,
    alpha: Option<f64>,
) {
    let Some(alpha) = alpha else {
        dirichlet_into(rng, out, items, 1.0);
        return;
    };
    let (inside, outside): (Vec<usize>, Vec<usize>) = items.iter().partition(|&&i| in_block(i));
    if outside.is_empty() || alpha >= 1.0 {
        dirichlet_into(rng, out, &inside, 1.0);
    } else if inside.is_empty() {
        dirichlet_into(rng, out, &outside, 1.0);
    } else {
        dirichlet_into(rng, out, &inside, alpha);
        dirichlet_into(rng, out, &outside, 1.0 - alpha);
    }
}

struct Plan {
    rx: Vec<usize>,
    /// Per-r_y block flag with the block mass.
    block: Option<(Vec<bool>, f64)>,
    /// Knob applied to the r_z = 1 slice of a joint θ.
    knob: Option<f64>,
}

fn plan(spec: &ResponseSpec, c: SamplingConstraint, opts: &SampleOptions) -> Result<Plan> {
    let rx = if opts.monotone_rx {
        spec.monotone_rx()
    } else {
        (0..spec.n_rx()).collect()
    };
    let check_alpha = |a: f64| {
        if (0.5..=1.0).contains(&a) {
            Ok(a)
        } else {
            Err(Error::InvalidParameter(format!("alpha {a} outside [0.5, 1]")))
        }
    };
    let flags = |set: Vec<usize>| {
        let mut f = vec![false; spec.n_ry()];
        set.into_iter().for_each(|i| f[i] = true);
        f
    };
    let joint_only = |what: &str| {
        if spec.factorized() {
            Err(Error::InvalidParameter(format!(
                "{what} needs a joint (air or both) model"
            )))
        } else {
            Ok(())
        }
    };
    Ok(match c {
        SamplingConstraint::None => Plan {
            rx,
            block: None,
            knob: None,
        },
        SamplingConstraint::NondecreasingZy { alpha } => {
            let a = check_alpha(alpha)?;
            let sets = classify_nondecreasing(spec)?;
            Plan {
                rx,
                block: Some((flags(sets.in_z), a)),
                knob: None,
            }
        }
        SamplingConstraint::NondecreasingZyXy { alpha } => {
            let a = check_alpha(alpha)?;
            let sets = classify_nondecreasing(spec)?;
            Plan {
                rx,
                block: Some((flags(sets.in_both()), a)),
                knob: None,
            }
        }
        SamplingConstraint::FixedConditional { v } => {
            joint_only("the fixed conditional")?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("knob {v} outside [0, 1]")));
            }
            Plan {
                rx,
                block: None,
                knob: Some(v),
            }
        }
        SamplingConstraint::MiThreshold { .. } => unreachable!("resolved by the caller"),
    })
}

fn draw_once<R: Rng + ?Sized>(spec: &ResponseSpec, p: &Plan, opts: &SampleOptions, rng: &mut R) -> ThetaVector {
    let l = spec.levels().l;
    let n_ry = spec.n_ry();
    let top = spec.constant_top_ry();
    let all_ry: Vec<usize> = (0..n_ry).collect();

    let mut rz = vec![0.0; l];
    dirichlet_into(rng, &mut rz, &(0..l).collect::<Vec<_>>(), 1.0);

    // One (r_x, r_y) block: either a conditional slice or the xy factor.
    let xy_block = |rng: &mut R, knob: Option<f64>| -> Vec<f64> {
        let mut out = vec![0.0; spec.n_xy()];
        let (flag, alpha): (Box<dyn Fn(usize) -> bool>, Option<f64>) = match (knob, &p.block) {
            (Some(v), _) => (Box::new(move |ry| ry == top), Some(v)),
            (None, Some((f, a))) => (Box::new(move |ry| f[ry]), Some(*a)),
            (None, None) => (Box::new(|_| true), None),
        };
        if opts.hierarchical {
            let mut prx = vec![0.0; spec.n_rx()];
            dirichlet_into(rng, &mut prx, &p.rx, 1.0);
            for &rx in &p.rx {
                let mut cond = vec![0.0; n_ry];
                block_dirichlet(rng, &mut cond, &all_ry, &flag, alpha);
                for ry in 0..n_ry {
                    out[rx * n_ry + ry] = prx[rx] * cond[ry];
                }
            }
        } else {
            let items: Vec<usize> =
                p.rx.iter()
                    .flat_map(|&rx| (0..n_ry).map(move |ry| rx * n_ry + ry))
                    .collect();
            block_dirichlet(rng, &mut out, &items, |i| flag(i % n_ry), alpha);
        }
        out
    };

    if spec.factorized() {
        let xy = xy_block(rng, None);
        ThetaVector::Factorized { rz, xy }
    } else {
        let mut joint = Vec::with_capacity(spec.theta_dim());
        for (z, &pz) in rz.iter().enumerate() {
            let knob = if z == 1 { p.knob } else { None };
            let slice = xy_block(rng, knob);
            joint.extend(slice.into_iter().map(|v| pz * v));
        }
        ThetaVector::Joint { p: joint }
    }
}

/// Total-variation distance between a joint θ and the product of its marginals.
fn independence_gap(spec: &ResponseSpec, p: &[f64]) -> f64 {
    let k = spec.n_xy();
    let pz: Vec<f64> = p.chunks(k).map(|c| c.iter().sum()).collect();
    let mut pc = vec![0.0; k];
    for c in p.chunks(k) {
        pc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
    }
    0.5 * p
        .chunks(k)
        .enumerate()
        .flat_map(|(z, c)| {
            let pzz = pz[z];
            c.iter().zip(&pc).map(move |(v, q)| (v - pzz * q).abs())
        })
        .sum::<f64>()
}

/// Draws a random θ for `spec` subject to `constraint`.
pub fn sample_model<R: Rng + ?Sized>(
    spec: &ResponseSpec,
    constraint: SamplingConstraint,
    opts: &SampleOptions,
    rng: &mut R,
) -> Result<ThetaVector> {
    if let SamplingConstraint::MiThreshold { tau } = constraint {
        return sample_mi_threshold(spec, tau, opts, rng);
    }
    let p = plan(spec, constraint, opts)?;
    for _ in 0..opts.redraw_budget.max(1) {
        let theta = draw_once(spec, &p, opts, rng);
        match &theta {
            ThetaVector::Joint { p } if independence_gap(spec, p) < INDEPENDENCE_TV => continue,
            _ => return Ok(theta),
        }
    }
    Err(Error::ConstraintUnsatisfiable(format!(
        "no dependent joint model in {} draws",
        opts.redraw_budget
    )))
}

fn sample_mi_threshold<R: Rng + ?Sized>(
    spec: &ResponseSpec,
    tau: f64,
    opts: &SampleOptions,
    rng: &mut R,
) -> Result<ThetaVector> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("MI threshold {tau} is negative")));
    }
    // MI(R_Z; .) can never exceed the entropy of R_Z.
    let ceiling = (spec.levels().l as f64).ln();
    if tau > ceiling {
        return Err(Error::ConstraintUnsatisfiable(format!(
            "MI threshold {tau} nats exceeds ln({}) = {ceiling:.4}",
            spec.levels().l
        )));
    }
    let mut grid = MI_KNOB_GRID;
    let mut draws = 0;
    while draws < opts.redraw_budget.max(1) {
        grid.shuffle(rng);
        for &v in &grid {
            draws += 1;
            let c = SamplingConstraint::FixedConditional { v };
            let theta = sample_model(
                spec,
                c,
                &SampleOptions {
                    redraw_budget: 16,
                    ..*opts
                },
                rng,
            )?;
            if mutual_information(&theta, spec)? >= tau {
                return Ok(theta);
            }
            if draws >= opts.redraw_budget.max(1) {
                break;
            }
        }
    }
    Err(Error::ConstraintUnsatisfiable(format!(
        "MI threshold {tau} not met in {draws} draws"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Levels;
    use crate::numeric::stream_rng;
    use crate::respvar::{build_spec, forward_distribution, ViolationClass};
    use proptest::prelude::*;

    fn spec(c: ViolationClass) -> ResponseSpec {
        build_spec(c, Levels::binary()).unwrap()
    }

    fn ry_mass(theta: &ThetaVector, s: &ResponseSpec, set: &[usize]) -> f64 {
        let j = theta.to_joint(s);
        j.iter()
            .enumerate()
            .filter(|(i, _)| set.contains(&(i % s.n_ry())))
            .map(|(_, v)| v)
            .sum()
    }

    #[test]
    fn valid_is_factorized() {
        let s = spec(ViolationClass::Valid);
        let t = sample_model(&s, SamplingConstraint::None, &Default::default(), &mut stream_rng(1, 0)).unwrap();
        assert!(matches!(t, ThetaVector::Factorized { .. }));
        t.check(&s).unwrap();
    }

    #[test]
    fn strict_nondecreasing_confines_mass() {
        let s = spec(ViolationClass::Excl);
        let sets = classify_nondecreasing(&s).unwrap();
        for hierarchical in [false, true] {
            let opts = SampleOptions {
                hierarchical,
                ..Default::default()
            };
            let c = SamplingConstraint::NondecreasingZy { alpha: 1.0 };
            let t = sample_model(&s, c, &opts, &mut stream_rng(2, 0)).unwrap();
            assert!((ry_mass(&t, &s, &sets.in_z) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_alpha_splits_mass() {
        let s = spec(ViolationClass::Both);
        let sets = classify_nondecreasing(&s).unwrap();
        let c = SamplingConstraint::NondecreasingZyXy { alpha: 0.8 };
        let t = sample_model(&s, c, &Default::default(), &mut stream_rng(3, 0)).unwrap();
        assert!((ry_mass(&t, &s, &sets.in_both()) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn alpha_range_checked() {
        let s = spec(ViolationClass::Excl);
        let c = SamplingConstraint::NondecreasingZy { alpha: 0.3 };
        assert!(sample_model(&s, c, &Default::default(), &mut stream_rng(0, 0)).is_err());
        let c = SamplingConstraint::NondecreasingZy { alpha: 1.0 };
        let air = spec(ViolationClass::Air);
        assert!(sample_model(&air, c, &Default::default(), &mut stream_rng(0, 0)).is_err());
    }

    #[test]
    fn fixed_conditional_is_exact() {
        for class in [ViolationClass::Air, ViolationClass::Both] {
            let s = spec(class);
            for hierarchical in [false, true] {
                let opts = SampleOptions {
                    hierarchical,
                    ..Default::default()
                };
                let c = SamplingConstraint::FixedConditional { v: 0.9 };
                let t = sample_model(&s, c, &opts, &mut stream_rng(4, 0)).unwrap();
                let ThetaVector::Joint { p } = &t else { panic!() };
                let slice = &p[s.n_xy()..];
                let pz1: f64 = slice.iter().sum();
                let top: f64 = slice
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % s.n_ry() == s.constant_top_ry())
                    .map(|(_, v)| v)
                    .sum();
                assert!((top / pz1 - 0.9).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn monotone_rx_has_no_defiers() {
        let s = spec(ViolationClass::Air);
        let opts = SampleOptions {
            monotone_rx: true,
            hierarchical: true,
            ..Default::default()
        };
        let t = sample_model(&s, SamplingConstraint::None, &opts, &mut stream_rng(5, 0)).unwrap();
        let j = t.to_joint(&s);
        let defier: f64 = j
            .iter()
            .enumerate()
            .filter(|(i, _)| (i / s.n_ry()) % s.n_rx() == 2)
            .map(|(_, v)| v)
            .sum();
        assert_eq!(defier, 0.0);
    }

    #[test]
    fn mi_threshold_met_or_refused() {
        let s = spec(ViolationClass::Air);
        let c = SamplingConstraint::MiThreshold { tau: 0.05 };
        let t = sample_model(&s, c, &Default::default(), &mut stream_rng(6, 0)).unwrap();
        assert!(mutual_information(&t, &s).unwrap() >= 0.05);
        // A binary R_Z carries at most ln 2 < 0.7 nats.
        let c = SamplingConstraint::MiThreshold { tau: 0.7 };
        assert!(matches!(
            sample_model(&s, c, &Default::default(), &mut stream_rng(6, 0)),
            Err(Error::ConstraintUnsatisfiable(_))
        ));
    }

    #[test]
    fn seeded_draws_reproduce() {
        let s = spec(ViolationClass::Both);
        let a = sample_model(&s, SamplingConstraint::None, &Default::default(), &mut stream_rng(9, 2));
        let b = sample_model(&s, SamplingConstraint::None, &Default::default(), &mut stream_rng(9, 2));
        assert_eq!(a.unwrap(), b.unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sampled_models_are_distributions(seed in any::<u64>(), class in 0usize..4, h in any::<bool>()) {
            let class = [ViolationClass::Valid, ViolationClass::Excl, ViolationClass::Air, ViolationClass::Both][class];
            let s = spec(class);
            let opts = SampleOptions { hierarchical: h, ..Default::default() };
            let t = sample_model(&s, SamplingConstraint::None, &opts, &mut stream_rng(seed, 0)).unwrap();
            t.check(&s).unwrap();
            let f = forward_distribution(&t, &s).unwrap();
            prop_assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
