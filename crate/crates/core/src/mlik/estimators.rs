use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hyperdirichlet::SimplexIntegrand;
use super::{LogEvidence, Method};
use crate::error::{Error, Result};
use crate::numeric::{cholesky, log_mean, stream_rng, LogMeanAcc, REDUCTION_CHUNK};

/// Table size up to which the ladder keeps its configured length.
pub const RUNG_REFERENCE_COUNT: u64 = 2000;

/// Annealed importance sampling settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AisConfig {
    /// Tempered distributions after the prior. One rung is plain prior sampling.
    pub rungs: usize,
    /// Lengthen the ladder by √(N / 2000) for tables larger than 2000.
    pub scale_rungs: bool,
    pub chains: usize,
    /// Metropolis moves per rung.
    pub moves: usize,
    /// Smallest positive inverse temperature; `None` picks min(1e-4, 0.1 / N).
    pub beta_min: Option<f64>,
    /// Acceptance rate the proposal scale is steered toward.
    pub target_accept: f64,
    /// Fewest effective chains accepted before reporting divergence.
    pub min_ess: f64,
}

impl Default for AisConfig {
    fn default() -> Self {
        AisConfig {
            rungs: 1000,
            scale_rungs: true,
            chains: 256,
            moves: 5,
            beta_min: None,
            target_accept: 0.25,
            min_ess: 1.0,
        }
    }
}

impl AisConfig {
    /// Ladder length used for a table with `total_count` observations.
    pub fn effective_rungs(&self, total_count: u64) -> usize {
        if !self.scale_rungs || self.rungs <= 1 || total_count <= RUNG_REFERENCE_COUNT {
            return self.rungs;
        }
        let growth = (total_count as f64 / RUNG_REFERENCE_COUNT as f64).sqrt();
        (self.rungs as f64 * growth).ceil() as usize
    }
}

fn gammas(alpha: &[f64]) -> Vec<Gamma<f64>> {
    alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape"))
        .collect()
}

/// Log-gamma coordinates `y_i = ln g_i`, `g_i ~ Gamma(α_i, 1)`.
fn draw_log_gammas<R: Rng>(dists: &[Gamma<f64>], rng: &mut R, y: &mut [f64]) {
    for (yi, d) in y.iter_mut().zip(dists) {
        *yi = d.sample(rng).max(f64::MIN_POSITIVE).ln();
    }
}

/// θ = softmax(y); returns Σ exp(y) as well.
#[inline]
fn softmax(y: &[f64], theta: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for (t, &v) in theta.iter_mut().zip(y) {
        *t = v.exp();
        total += *t;
    }
    theta.iter_mut().for_each(|t| *t /= total);
    total
}

/// Plain Monte Carlo average of the integrand over prior draws.
///
/// Sample `i` uses stream `i` of `seed`, so the estimate does not depend on
/// how the work is scheduled.
pub fn prior_mc<I: SimplexIntegrand + ?Sized>(integrand: &I, samples: u64, seed: u64) -> LogEvidence {
    let dists = gammas(integrand.alpha());
    let d = integrand.dim();
    let chunk = REDUCTION_CHUNK as u64;
    let n_chunks = samples.div_ceil(chunk);
    let partials: Vec<LogMeanAcc> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut y = vec![0.0; d];
            let mut theta = vec![0.0; d];
            let mut acc = LogMeanAcc::default();
            for i in c * chunk..((c + 1) * chunk).min(samples) {
                let mut rng = stream_rng(seed, i);
                draw_log_gammas(&dists, &mut rng, &mut y);
                softmax(&y, &mut theta);
                acc.push(integrand.log_value(&theta));
            }
            acc
        })
        .collect();
    let mut total = LogMeanAcc::default();
    partials.iter().for_each(|p| total.merge(p));
    LogEvidence {
        value: total.log_mean(),
        stderr: total.stderr(),
        method: Method::PriorMc,
        samples,
        seed: Some(seed),
    }
}

struct Chain {
    y: Vec<f64>,
    ll: f64,
    rng: ChaCha8Rng,
}

/// Tempered log target in log-gamma coordinates, minus the constant.
#[inline]
fn log_prior(alpha: &[f64], y: &[f64]) -> f64 {
    alpha.iter().zip(y).map(|(a, v)| a * v - v.exp()).sum()
}

/// Inverse temperatures 0 = β_0 < β_1 < … < β_R = 1, geometric from `beta_min`.
pub fn beta_ladder(rungs: usize, beta_min: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    if rungs <= 1 {
        out.push(1.0);
        return out;
    }
    let ratio = (1.0 / beta_min).ln() / (rungs - 1) as f64;
    out.extend((0..rungs).map(|k| (beta_min.ln() + ratio * k as f64).exp()));
    *out.last_mut().unwrap() = 1.0;
    out
}

/// Annealed importance sampling from the Dirichlet prior to the posterior.
///
/// Chains move by a random walk in log-gamma coordinates whose covariance
/// tracks the other half of the chain population at each rung. With `rungs == 1` the weights
/// are exactly the prior draws of [`prior_mc`] under the same seed.
pub fn ais_hyperdirichlet<I: SimplexIntegrand + ?Sized>(
    integrand: &I,
    cfg: &AisConfig,
    total_count: u64,
    seed: u64,
) -> Result<LogEvidence> {
    if cfg.chains < 2 || cfg.rungs == 0 {
        return Err(Error::InvalidParameter("AIS needs at least 2 chains and 1 rung".into()));
    }
    let alpha = integrand.alpha();
    let d = integrand.dim();
    let dists = gammas(alpha);
    let beta_min = cfg
        .beta_min
        .unwrap_or_else(|| 1e-4f64.min(0.1 / total_count.max(1) as f64));
    if !(beta_min > 0.0 && beta_min < 1.0) {
        return Err(Error::InvalidParameter(format!("beta_min {beta_min} outside (0, 1)")));
    }
    let betas = beta_ladder(cfg.effective_rungs(total_count), beta_min);

    let mut chains: Vec<Chain> = (0..cfg.chains as u64)
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let mut y = vec![0.0; d];
            let mut theta = vec![0.0; d];
            draw_log_gammas(&dists, &mut rng, &mut y);
            softmax(&y, &mut theta);
            let ll = integrand.log_value(&theta);
            Chain { y, ll, rng }
        })
        .collect();
    let mut w = vec![0.0; cfg.chains];
    let mut scales = [1.0; 2];
    let step = 2.38 / (d as f64).sqrt();
    let half = cfg.chains / 2;

    for k in 1..betas.len() {
        let db = betas[k] - betas[k - 1];
        w.iter_mut().zip(&chains).for_each(|(w, c)| *w += db * c.ll);
        if k == betas.len() - 1 || cfg.moves == 0 {
            continue;
        }
        let beta = betas[k];
        // Each half proposes with the covariance of the other half, so no
        // chain's current state enters its own proposal.
        let (a, b) = chains.split_at_mut(half);
        let rate_a = move_chains(
            integrand,
            a,
            &population_cholesky(b, d),
            scales[0] * step,
            beta,
            cfg.moves,
        );
        let rate_b = move_chains(
            integrand,
            b,
            &population_cholesky(a, d),
            scales[1] * step,
            beta,
            cfg.moves,
        );
        scales[0] *= (rate_a - cfg.target_accept).exp();
        scales[1] *= (rate_b - cfg.target_accept).exp();
    }

    let acc = log_mean(&w);
    let value = acc.log_mean();
    let ess = acc.ess();
    if !value.is_finite() || !(ess >= cfg.min_ess) {
        return Err(Error::EstimatorDiverged(format!(
            "log evidence {value}, effective sample size {ess:.2} of {}",
            cfg.chains
        )));
    }
    Ok(LogEvidence {
        value,
        stderr: acc.stderr(),
        method: Method::Ais,
        samples: cfg.chains as u64,
        seed: Some(seed),
    })
}

/// Metropolis moves at inverse temperature `beta`; returns the acceptance rate.
fn move_chains<I: SimplexIntegrand + ?Sized>(
    integrand: &I,
    chains: &mut [Chain],
    chol: &[f64],
    s: f64,
    beta: f64,
    moves: usize,
) -> f64 {
    let alpha = integrand.alpha();
    let d = alpha.len();
    let accepted: usize = chains
        .par_iter_mut()
        .map(|c| {
            let mut prop = vec![0.0; d];
            let mut eps = vec![0.0; d];
            let mut theta = vec![0.0; d];
            let mut cur = log_prior(alpha, &c.y) + tempered(beta, c.ll);
            let mut acc = 0;
            for _ in 0..moves {
                eps.iter_mut().for_each(|e| *e = c.rng.sample(StandardNormal));
                for i in 0..d {
                    let row = &chol[i * d..i * d + i + 1];
                    prop[i] = c.y[i] + s * row.iter().zip(&eps).map(|(l, e)| l * e).sum::<f64>();
                }
                softmax(&prop, &mut theta);
                let ll = integrand.log_value(&theta);
                let next = log_prior(alpha, &prop) + tempered(beta, ll);
                let u: f64 = c.rng.random();
                if next.is_finite() && u.ln() < next - cur {
                    c.y.copy_from_slice(&prop);
                    c.ll = ll;
                    cur = next;
                    acc += 1;
                }
            }
            acc
        })
        .sum();
    accepted as f64 / (chains.len() * moves) as f64
}

#[inline]
fn tempered(beta: f64, ll: f64) -> f64 {
    if beta == 0.0 {
        0.0
    } else {
        beta * ll
    }
}

/// Cholesky factor of the chains' covariance, jittered until positive definite.
fn population_cholesky(chains: &[Chain], d: usize) -> Vec<f64> {
    let identity = || {
        let mut l = vec![0.0; d * d];
        (0..d).for_each(|i| l[i * d + i] = 1.0);
        l
    };
    if chains.len() < 2 {
        return identity();
    }
    let n = chains.len() as f64;
    let mut mean = vec![0.0; d];
    for c in chains {
        mean.iter_mut().zip(&c.y).for_each(|(m, v)| *m += v / n);
    }
    let mut cov = vec![0.0; d * d];
    for c in chains {
        for i in 0..d {
            let di = c.y[i] - mean[i];
            for j in 0..=i {
                cov[i * d + j] += di * (c.y[j] - mean[j]) / (n - 1.0);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[j * d + i] = cov[i * d + j];
        }
    }
    let mut jitter = 1e-9;
    loop {
        let mut a = cov.clone();
        (0..d).for_each(|i| a[i * d + i] += jitter);
        if let Some(l) = cholesky(&a, d) {
            return l;
        }
        jitter *= 10.0;
        if jitter > 1e3 {
            // Degenerate population: fall back to an isotropic walk.
            return identity();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlik::hyperdirichlet::{ConstantIntegrand, HyperDirichlet};

    #[test]
    fn ladder_shape() {
        assert_eq!(beta_ladder(1, 1e-4), vec![0.0, 1.0]);
        let b = beta_ladder(5, 1e-4);
        assert_eq!(b.len(), 6);
        assert!((b[1] - 1e-4).abs() < 1e-18);
        assert_eq!(b[5], 1.0);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn ladder_grows_with_table_size() {
        let cfg = AisConfig::default();
        assert_eq!(cfg.effective_rungs(20), 1000);
        assert_eq!(cfg.effective_rungs(2000), 1000);
        assert_eq!(cfg.effective_rungs(50_000), 5000);
        let one = AisConfig { rungs: 1, ..cfg };
        assert_eq!(one.effective_rungs(50_000), 1);
        let fixed = AisConfig {
            scale_rungs: false,
            ..cfg
        };
        assert_eq!(fixed.effective_rungs(50_000), 1000);
    }

    #[test]
    fn constant_integrand_is_exact() {
        let c = ConstantIntegrand {
            alpha: vec![1.0; 5],
            log_c: -3.25,
        };
        let e = ais_hyperdirichlet(
            &c,
            &AisConfig {
                rungs: 20,
                chains: 16,
                ..Default::default()
            },
            1,
            7,
        )
        .unwrap();
        assert!((e.value + 3.25).abs() < 1e-12);
        assert_eq!(e.stderr, 0.0);
        let p = prior_mc(&c, 100, 7);
        assert!((p.value + 3.25).abs() < 1e-12);
    }

    #[test]
    fn one_rung_equals_prior_mc() {
        let hd = HyperDirichlet::new(vec![1.0; 6], vec![vec![0, 1], vec![1, 2, 3], vec![4]], vec![2, 3, 1]).unwrap();
        let cfg = AisConfig {
            rungs: 1,
            chains: 300,
            ..Default::default()
        };
        let a = ais_hyperdirichlet(&hd, &cfg, 6, 99).unwrap();
        let p = prior_mc(&hd, 300, 99);
        assert_eq!(a.value, p.value);
        assert_eq!(a.stderr, p.stderr);
    }

    #[test]
    fn ais_matches_closed_form() {
        // Disjoint groups: a Dirichlet-multinomial with a known answer.
        let hd = HyperDirichlet::new(
            vec![1.0; 8],
            vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]],
            vec![40, 25, 10, 5],
        )
        .unwrap();
        let exact = hd.closed_form().unwrap();
        let cfg = AisConfig {
            rungs: 200,
            chains: 128,
            ..Default::default()
        };
        let e = ais_hyperdirichlet(&hd, &cfg, 80, 3).unwrap();
        assert!(
            (e.value - exact).abs() < 3.0 * e.stderr + 0.05,
            "{} vs {exact}",
            e.value
        );
    }

    #[test]
    fn seeds_reproduce() {
        let hd = HyperDirichlet::new(vec![1.0; 3], vec![vec![0], vec![1, 2]], vec![3, 4]).unwrap();
        let cfg = AisConfig {
            rungs: 30,
            chains: 32,
            ..Default::default()
        };
        let a = ais_hyperdirichlet(&hd, &cfg, 7, 5).unwrap();
        let b = ais_hyperdirichlet(&hd, &cfg, 7, 5).unwrap();
        assert_eq!(a, b);
    }
}
