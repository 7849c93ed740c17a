//! Log-space arithmetic, random streams and small dense linear algebra.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use statrs::function::gamma::ln_gamma;

/// Samples per chunk in every streaming log-mean reduction. Fixed so that
/// reductions are bit-identical regardless of how chunks are scheduled.
pub const REDUCTION_CHUNK: usize = 4096;

/// `ln(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Running first and second moments of `exp(w)` held relative to the max `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMeanAcc {
    max: f64,
    s1: f64,
    s2: f64,
    count: u64,
}

impl Default for LogMeanAcc {
    fn default() -> Self {
        LogMeanAcc {
            max: f64::NEG_INFINITY,
            s1: 0.0,
            s2: 0.0,
            count: 0,
        }
    }
}

impl LogMeanAcc {
    fn rescale(&mut self, new_max: f64) {
        if self.max == f64::NEG_INFINITY {
            self.max = new_max;
            return;
        }
        let r = (self.max - new_max).exp();
        self.s1 *= r;
        self.s2 *= r * r;
        self.max = new_max;
    }

    pub fn push(&mut self, w: f64) {
        self.count += 1;
        if w == f64::NEG_INFINITY {
            return;
        }
        if w > self.max {
            self.rescale(w);
        }
        let e = (w - self.max).exp();
        self.s1 += e;
        self.s2 += e * e;
    }

    pub fn merge(&mut self, other: &LogMeanAcc) {
        self.count += other.count;
        if other.max == f64::NEG_INFINITY {
            return;
        }
        let mut o = *other;
        if o.max > self.max {
            self.rescale(o.max);
        } else {
            o.rescale(self.max);
        }
        self.s1 += o.s1;
        self.s2 += o.s2;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `ln(mean(exp(w)))`.
    pub fn log_mean(&self) -> f64 {
        if self.count == 0 || self.s1 == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.max + (self.s1 / self.count as f64).ln()
    }

    /// Standard error of `log_mean`, by the delta method on the linear weights.
    pub fn stderr(&self) -> f64 {
        if self.count == 0 || self.s1 == 0.0 {
            return f64::INFINITY;
        }
        let n = self.count as f64;
        let mean = self.s1 / n;
        let var = (self.s2 / n - mean * mean).max(0.0);
        (var / n).sqrt() / mean
    }

    /// Kish effective sample size of the normalized weights.
    pub fn ess(&self) -> f64 {
        if self.s2 == 0.0 {
            return 0.0;
        }
        self.s1 * self.s1 / self.s2
    }
}

/// Chunked reduction of log weights into a [`LogMeanAcc`].
pub fn log_mean(weights: &[f64]) -> LogMeanAcc {
    let mut total = LogMeanAcc::default();
    for chunk in weights.chunks(REDUCTION_CHUNK) {
        let mut acc = LogMeanAcc::default();
        chunk.iter().for_each(|&w| acc.push(w));
        total.merge(&acc);
    }
    total
}

/// SplitMix64 finalizer, used to derive independent seeds from a master seed.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent random stream `stream` of a seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Lower Cholesky factor of a symmetric positive-definite row-major matrix.
pub fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// `ln Γ(a + q) - ln Γ(a)`, exactly zero when `q == 0`.
pub fn ln_rising(a: f64, q: f64) -> f64 {
    if q == 0.0 {
        0.0
    } else {
        ln_gamma(a + q) - ln_gamma(a)
    }
}

/// Natural log of the binomial coefficient.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}
