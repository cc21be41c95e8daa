//! Characteristic function of a finite initial condition.
//!
//! ch_Y(v,u) is realized as an expectation over a strictly decreasing
//! geometric random walk G_0 > G_1 > ... started from every lattice site z,
//! stopped at the first step m with G_m > y_{m+1}:
//!
//!   ch_Y(v,u) = ((u+1)/(v+1))^{y_1+1}/(v-u)
//!             + sum_{z=y_N+1}^{y_1} (2u+2)^z E_z[ 2/(2v+2)^{G_tau+1} (-v/(v+1))^tau 1_{tau<N} ],
//!
//! where the closed first term resums the z > y_1 sites (immediate stopping,
//! geometric in z, needs |u+1| < |v+1|) and sites z <= y_N contribute zero
//! because the decreasing walk can never rise above the boundary again.
//! The expectation is computed by a backward DP over (site, step) with the
//! convolution against the 2^{z'-z} kernel turned into a running prefix sum.

use super::{TasepError, TasepInitial};
use crate::contour::circle_nodes;
use crate::Complex64;

/// Hitting expectations E_z[...] for one fixed v, tabulated over the sites
/// strictly between y_N and y_1 and all step indices.
#[derive(Debug, Clone)]
pub struct HittingTable {
    v: Complex64,
    y: Vec<i64>,
    /// Row-major (site row, step column); site z maps to row z - y_N - 1.
    values: Vec<Complex64>,
}

impl HittingTable {
    pub fn v(&self) -> Complex64 {
        self.v
    }

    fn y_bot(&self) -> i64 {
        *self.y.last().unwrap()
    }

    /// Payoff when the walk stops at site z on step m.
    fn immediate(&self, z: i64, m: usize) -> Complex64 {
        let two = Complex64::new(2.0, 0.0);
        let base = two * self.v + 2.0;
        let ratio = -self.v / (self.v + 1.0);
        if ratio.norm_sqr() == 0.0 {
            // v = 0: only the step-0 stop survives.
            if m > 0 {
                return Complex64::new(0.0, 0.0);
            }
            return (2.0f64.ln() - (z as f64 + 1.0) * base.ln()).exp();
        }
        (2.0f64.ln() - (z as f64 + 1.0) * base.ln() + (m as f64) * ratio.ln()).exp()
    }

    /// Total accessor: zero at or below y_N, the stopping payoff above the
    /// step-m boundary, the tabulated recursion value in between.
    pub fn value(&self, z: i64, m: usize) -> Complex64 {
        if z <= self.y_bot() {
            return Complex64::new(0.0, 0.0);
        }
        if z > self.y[m] {
            return self.immediate(z, m);
        }
        let n = self.y.len();
        let row = (z - self.y_bot() - 1) as usize;
        self.values[row * n + m]
    }
}

pub fn build_hitting_table(y: &TasepInitial, v: Complex64) -> HittingTable {
    let n = y.n();
    let bot = y.y_bot();
    let top = y.y_top();
    let rows = (top - bot) as usize;
    let mut table = HittingTable { v, y: y.y().to_vec(), values: vec![Complex64::new(0.0, 0.0); rows * n] };
    for m in (0..n).rev() {
        // Running prefix sum t(z) = sum_{z' < z} 2^{z'-z} V(z', m+1).
        let mut t = Complex64::new(0.0, 0.0);
        for z in (bot + 1)..=top {
            let row = (z - bot - 1) as usize;
            table.values[row * n + m] =
                if z > y.y()[m] { table.immediate(z, m) } else { t };
            let next_col = if m + 1 < n {
                table.values[row * n + m + 1]
            } else {
                Complex64::new(0.0, 0.0)
            };
            t = 0.5 * (t + next_col);
        }
    }
    table
}

/// ch_Y(v,u) from a prebuilt table (the table is the per-v cost; reusing it
/// across u is what makes contour quadrature affordable).
pub fn ch_eval_with_table(table: &HittingTable, y: &TasepInitial, u: Complex64) -> Result<Complex64, TasepError> {
    let v = table.v;
    let up1 = u + 1.0;
    if up1.norm_sqr() == 0.0 {
        return Err(TasepError::UAtMinusOne);
    }
    if up1.norm() >= (v + 1.0).norm() {
        return Err(TasepError::RatioPrecondition);
    }
    let ratio_log = (up1 / (v + 1.0)).ln();
    let first = ((y.y_top() as f64 + 1.0) * ratio_log).exp() / (v - u);
    let lu = (2.0 * u + 2.0).ln();
    let mut sum = Complex64::new(0.0, 0.0);
    for z in (y.y_bot() + 1)..=y.y_top() {
        sum += ((z as f64) * lu).exp() * table.value(z, 0);
    }
    Ok(first + sum)
}

pub fn ch_eval(y: &TasepInitial, v: Complex64, u: Complex64) -> Result<Complex64, TasepError> {
    let table = build_hitting_table(y, v);
    ch_eval_with_table(&table, y, u)
}

/// Defining reproducing property: the v-integral of v^{-i}(v+1)^{y_i+i}
/// against ch_Y around 0 must return -u^{-i}(u+1)^{y_i+i}. Returns
/// LHS - RHS; its magnitude is the test statistic.
pub fn verify_residue(
    y: &TasepInitial,
    u: Complex64,
    i: usize,
    circle_order: usize,
) -> Result<Complex64, TasepError> {
    assert!(i >= 1 && i <= y.n(), "particle index out of range");
    let yi = y.y()[i - 1];
    let nodes = circle_nodes(Complex64::new(0.0, 0.0), 0.3, circle_order);
    let mut lhs = Complex64::new(0.0, 0.0);
    for node in &nodes {
        let v = node.point;
        let table = build_hitting_table(y, v);
        let ch = ch_eval_with_table(&table, y, u)?;
        lhs += node.base_weight * v.powi(-(i as i32)) * (v + 1.0).powi((yi + i as i64) as i32) * ch;
    }
    let rhs = -u.powi(-(i as i32)) * (u + 1.0).powi((yi + i as i64) as i32);
    Ok(lhs - rhs)
}

fn binomial(n: i64, k: i64) -> f64 {
    if k < 0 || k > n || n < 0 {
        return 0.0;
    }
    let mut acc = 1.0f64;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

/// The walk identity behind the reproducing property:
///   2^z E_z[ -binom(G_tau - y_i - 1, i - tau - 1) 2^{-G_tau} 1_{tau<i} ]
///     = -1_{z >= y_i + i} binom(z - y_i - 1, i - 1).
/// Returns (lhs, rhs); lhs by a dedicated real-valued DP over the same walk.
pub fn binom_identity_check(y: &TasepInitial, z: i64, i: usize) -> (f64, f64) {
    assert!(i >= 1 && i <= y.n());
    let yi = y.y()[i - 1];
    let rhs = if z >= yi + i as i64 { -binomial(z - yi - 1, i as i64 - 1) } else { 0.0 };
    let bot = y.y_bot();
    if z <= bot {
        return (0.0, rhs);
    }
    // b[(row, m)] over sites bot+1..=z and steps 0..i, b(. , i) = 0.
    let rows = (z - bot) as usize;
    let cols = i;
    let mut b = vec![0.0f64; rows * cols];
    for m in (0..i).rev() {
        let mut t = 0.0f64;
        for x in (bot + 1)..=z {
            let row = (x - bot - 1) as usize;
            b[row * cols + m] = if x > y.y()[m] {
                -binomial(x - yi - 1, i as i64 - m as i64 - 1) * 2.0f64.powi(-x as i32)
            } else {
                t
            };
            let next = if m + 1 < i { b[row * cols + m + 1] } else { 0.0 };
            t = 0.5 * (t + next);
        }
    }
    let lhs = 2.0f64.powi(z as i32) * b[((z - bot - 1) as usize) * cols];
    (lhs, rhs)
}

/// Literal path enumeration of the hitting expectation E_z[...] -- every
/// strictly decreasing trajectory is walked explicitly, with no table and no
/// prefix-sum sharing. Exponential cost; the independent cross-check.
fn path_sum(y: &TasepInitial, v: Complex64, pos: i64, step: usize, weight: Complex64) -> Complex64 {
    let n = y.n();
    if pos <= y.y_bot() {
        return Complex64::new(0.0, 0.0);
    }
    if pos > y.y()[step] {
        let base = 2.0 * v + 2.0;
        let ratio = -v / (v + 1.0);
        let mut payoff = 2.0 / base.powi(pos as i32 + 1);
        for _ in 0..step {
            payoff = payoff * ratio;
        }
        return weight * payoff;
    }
    if step + 1 >= n {
        return Complex64::new(0.0, 0.0);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for next in (y.y_bot() + 1)..pos {
        let w = weight * 2.0f64.powi((next - pos) as i32);
        acc += path_sum(y, v, next, step + 1, w);
    }
    acc
}

/// ch_Y(v,u) assembled from the exhaustive path enumeration.
pub fn ch_path_oracle(y: &TasepInitial, v: Complex64, u: Complex64) -> Complex64 {
    let first = ((u + 1.0) / (v + 1.0)).powi(y.y_top() as i32 + 1) / (v - u);
    let mut sum = Complex64::new(0.0, 0.0);
    for z in (y.y_bot() + 1)..=y.y_top() {
        sum += (2.0 * u + 2.0).powi(z as i32)
            * path_sum(y, v, z, 0, Complex64::new(1.0, 0.0));
    }
    first + sum
}
