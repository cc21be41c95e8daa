//! Exact small-system solver via uniformization.
//!
//! The exclusion generator on the truncated configuration lattice is
//! uniformized at rate N: e^{Qt} = sum_k e^{-Nt}(Nt)^k/k! P^k with P the
//! attempt kernel (pick a particle uniformly, move it if the target is free,
//! else stay). The lattice is truncated by capping the rightmost particle's
//! displacement; the cap is chosen so the discarded Poisson mass is below
//! 1e-10 and disabling an attempt at the cap only ever shifts probability
//! into states we already count as "at the cap".
//!
//! Joint queries evolve the distribution piecewise: advance to t_l, zero the
//! states violating x_{k_l} >= a_l, continue. Survivor mass at the end is the
//! joint probability.

use super::{poisson_tail, TasepError, TasepInitial, TasepQueryList};

const CAP_TAIL: f64 = 1e-10;
const SERIES_TAIL: f64 = 1e-12;
const MAX_STATES: usize = 200_000;

struct StateSpace {
    n: usize,
    states: Vec<Vec<i64>>,
    /// Attempt kernel rows: (target state, 1/N) per allowed move; the
    /// self-loop weight is implicit.
    moves: Vec<Vec<(usize, f64)>>,
}

fn enumerate_states(y: &[i64], cap_top: i64, out: &mut Vec<Vec<i64>>) -> Result<(), TasepError> {
    let n = y.len();
    let mut current = vec![0i64; n];
    fn rec(
        y: &[i64],
        cap_top: i64,
        level: usize,
        current: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
    ) -> Result<(), TasepError> {
        if level == y.len() {
            out.push(current.clone());
            if out.len() > MAX_STATES {
                return Err(TasepError::StateSpace(out.len()));
            }
            return Ok(());
        }
        let hi = if level == 0 { cap_top } else { current[level - 1] - 1 };
        for x in y[level]..=hi {
            current[level] = x;
            rec(y, cap_top, level + 1, current, out)?;
        }
        Ok(())
    }
    rec(y, cap_top, 0, &mut current, out)
}

fn build_space(y: &TasepInitial, t_total: f64) -> Result<StateSpace, TasepError> {
    let n = y.n() as f64;
    let mut cap = 1i64;
    while n * poisson_tail(t_total, cap + 1) >= CAP_TAIL {
        cap += 1;
    }
    let cap_top = y.y_top() + cap;
    let mut states = Vec::new();
    enumerate_states(y.y(), cap_top, &mut states)?;
    // States are generated in lexicographic order, so binary search indexes them.
    let index_of = |x: &[i64]| states.binary_search_by(|s| s.as_slice().cmp(x)).unwrap();
    let p_move = 1.0 / y.n() as f64;
    let mut moves = Vec::with_capacity(states.len());
    let mut scratch = vec![0i64; y.n()];
    for s in &states {
        let mut row = Vec::new();
        for j in 0..y.n() {
            let blocked = if j == 0 { s[0] + 1 > cap_top } else { s[j] + 1 >= s[j - 1] };
            if !blocked {
                scratch.copy_from_slice(s);
                scratch[j] += 1;
                row.push((index_of(&scratch), p_move));
            }
        }
        moves.push(row);
    }
    Ok(StateSpace { n: y.n(), states, moves })
}

fn apply_kernel(space: &StateSpace, v: &[f64], out: &mut [f64]) {
    for (i, row) in space.moves.iter().enumerate() {
        let stay = 1.0 - row.len() as f64 / space.n as f64;
        out[i] += stay * v[i];
        for &(target, p) in row {
            out[target] += p * v[i];
        }
    }
}

fn evolve(space: &StateSpace, mu: &mut Vec<f64>, rate: f64, dt: f64) {
    let lambda = rate * dt;
    if lambda <= 0.0 {
        return;
    }
    let mut acc = vec![0.0; mu.len()];
    let mut weight = (-lambda).exp();
    let mut covered = weight;
    for (a, &m) in acc.iter_mut().zip(mu.iter()) {
        *a = weight * m;
    }
    let mut cur = mu.clone();
    let mut next = vec![0.0; mu.len()];
    let mut k = 1.0f64;
    while 1.0 - covered > SERIES_TAIL {
        next.iter_mut().for_each(|x| *x = 0.0);
        apply_kernel(space, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        weight *= lambda / k;
        covered += weight;
        k += 1.0;
        for (a, &c) in acc.iter_mut().zip(cur.iter()) {
            *a += weight * c;
        }
    }
    *mu = acc;
}

/// Exact joint probability P(all x_{k_l}(t_l) >= a_l) for small systems.
pub fn ctmc_joint_cdf(y: &TasepInitial, q: &TasepQueryList) -> Result<f64, TasepError> {
    if y.n() > 4 {
        return Err(TasepError::StateSpace(usize::MAX));
    }
    let t_total = q.entries().last().unwrap().t;
    let space = build_space(y, t_total)?;
    let start = space
        .states
        .binary_search_by(|s| s.as_slice().cmp(y.y()))
        .expect("initial state is in the lattice");
    let mut mu = vec![0.0; space.states.len()];
    mu[start] = 1.0;
    let rate = y.n() as f64;
    let mut t_prev = 0.0;
    for e in q.entries() {
        evolve(&space, &mut mu, rate, e.t - t_prev);
        t_prev = e.t;
        for (i, s) in space.states.iter().enumerate() {
            if s[e.k - 1] < e.a {
                mu[i] = 0.0;
            }
        }
    }
    Ok(mu.iter().sum())
}
