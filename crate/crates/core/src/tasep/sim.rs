//! Continuous-time Monte Carlo for the exclusion process.
//!
//! The process is simulated exactly through its attempt representation: a
//! global exponential clock of rate N, a uniformly chosen particle per ring,
//! and a jump that is suppressed when the target site is occupied. Thinning
//! the blocked attempts reproduces the per-particle rate-1 clocks, so no
//! discretization error enters; the only error in mc_joint_cdf is binomial.

use super::{TasepError, TasepInitial, TasepQueryList};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub seed: u64,
    pub n_samples: usize,
    /// Advisory time budget; trajectories always run to the last query time.
    pub horizon: f64,
}

impl SimConfig {
    pub fn new(seed: u64, n_samples: usize, horizon: f64) -> Result<Self, TasepError> {
        if n_samples == 0 {
            return Err(TasepError::EmptySamples);
        }
        Ok(SimConfig { seed, n_samples, horizon })
    }
}

fn run_trajectory(y: &TasepInitial, times: &[f64], rng: &mut impl Rng) -> Vec<Vec<i64>> {
    let n = y.n();
    let rate = n as f64;
    let mut x: Vec<i64> = y.y().to_vec();
    let mut out = Vec::with_capacity(times.len());
    let mut next_query = 0;
    let mut t = 0.0;
    while next_query < times.len() {
        let u: f64 = rng.gen();
        let t_jump = t - (1.0 - u).ln() / rate;
        while next_query < times.len() && times[next_query] < t_jump {
            out.push(x.clone());
            next_query += 1;
        }
        if next_query >= times.len() {
            break;
        }
        t = t_jump;
        let j = rng.gen_range(0..n);
        // x[0] is the rightmost particle and is never blocked.
        if j == 0 || x[j] + 1 < x[j - 1] {
            x[j] += 1;
        }
    }
    out
}

/// Exact trajectory sampler; positions (rightmost first) at each query time.
/// Times must be nonnegative and sorted ascending.
pub fn simulate(y: &TasepInitial, times: &[f64], seed: u64) -> Vec<Vec<i64>> {
    assert!(times.windows(2).all(|w| w[0] <= w[1]), "times must be sorted");
    assert!(times.iter().all(|&t| t >= 0.0), "times must be nonnegative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_trajectory(y, times, &mut rng)
}

/// Monte Carlo estimate of P(all x_{k_l}(t_l) >= a_l) with exact binomial
/// standard error. Samples are independent with per-sample RNG streams, so
/// the estimate is deterministic in (seed, n_samples) and independent of
/// scheduling.
pub fn mc_joint_cdf(
    y: &TasepInitial,
    q: &TasepQueryList,
    cfg: &SimConfig,
) -> Result<(f64, f64), TasepError> {
    let times: Vec<f64> = q.entries().iter().map(|e| e.t).collect();
    let successes: u64 = (0..cfg.n_samples)
        .into_par_iter()
        .map(|sample| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(sample as u64);
            let snaps = run_trajectory(y, &times, &mut rng);
            let ok = q
                .entries()
                .iter()
                .zip(&snaps)
                .all(|(e, x)| x[e.k - 1] >= e.a);
            ok as u64
        })
        .sum();
    let n = cfg.n_samples as f64;
    let p = successes as f64 / n;
    let stderr = (p * (1.0 - p) / n).sqrt();
    Ok((p, stderr))
}

/// P(Poisson(t) >= k), summed from the tail upward so small values keep
/// full relative accuracy.
pub fn poisson_tail(t: f64, k: i64) -> f64 {
    if k <= 0 {
        return 1.0;
    }
    let mut term = (-t).exp();
    for j in 1..=k {
        term *= t / j as f64;
    }
    let mut acc = 0.0;
    let mut j = k;
    loop {
        acc += term;
        j += 1;
        term *= t / j as f64;
        if term <= acc * 1e-18 + 1e-300 {
            return acc + term;
        }
    }
}
