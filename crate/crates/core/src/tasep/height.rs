//! Height-function encoding of particle configurations and the lattice
//! discretization of multi-narrow-wedge profiles.
//!
//! Heights follow the decreasing-in-time convention: H(0) = 0 at time zero
//! and H(x+1) = H(x) + 1 across an occupied site x, - 1 across an empty one.
//! A cluster of particles packed left of the origin therefore encodes as the
//! falling tent -|x|, the microscopic narrow wedge.

use super::{TasepError, TasepInitial};
use crate::kpz::MultiNarrowWedge;

/// Piecewise-linear height profile over a finite window of sites.
///
/// `slopes[j]` is the increment H(x+1) - H(x) at site x = x_min + j, one
/// entry per site of `window = (x_min, x_max)`, so values are determined on
/// x_min..=x_max+1. `anchor` is H(0); the window must reach the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeightFunction {
    anchor: i64,
    slopes: Vec<i8>,
    window: (i64, i64),
}

impl HeightFunction {
    pub fn new(anchor: i64, slopes: Vec<i8>, window: (i64, i64)) -> Result<Self, TasepError> {
        let (lo, hi) = window;
        if lo > hi || lo > 0 || hi + 1 < 0 {
            return Err(TasepError::Window(lo, hi));
        }
        if slopes.len() != (hi - lo + 1) as usize || slopes.iter().any(|s| s.abs() != 1) {
            return Err(TasepError::Slopes);
        }
        Ok(HeightFunction { anchor, slopes, window })
    }

    pub fn anchor(&self) -> i64 {
        self.anchor
    }

    pub fn slopes(&self) -> &[i8] {
        &self.slopes
    }

    pub fn window(&self) -> (i64, i64) {
        self.window
    }

    fn slope_at(&self, x: i64) -> i64 {
        self.slopes[(x - self.window.0) as usize] as i64
    }

    /// H(x) for x_min <= x <= x_max + 1; panics outside that range.
    pub fn value(&self, x: i64) -> i64 {
        let (lo, hi) = self.window;
        assert!(x >= lo && x <= hi + 1, "site outside the height window");
        let mut h = self.anchor;
        if x > 0 {
            for u in 0..x {
                h += self.slope_at(u);
            }
        } else {
            for u in x..0 {
                h -= self.slope_at(u);
            }
        }
        h
    }
}

/// Height profile of an initial configuration; the window must contain the
/// origin and every particle, so the encoding is lossless.
pub fn height_encode(y: &TasepInitial, window: (i64, i64)) -> Result<HeightFunction, TasepError> {
    let (lo, hi) = window;
    if lo > hi || y.y_top() > hi || y.y_bot() < lo {
        return Err(TasepError::Window(lo, hi));
    }
    let mut slopes = vec![-1i8; (hi - lo + 1) as usize];
    for &site in y.y() {
        slopes[(site - lo) as usize] = 1;
    }
    HeightFunction::new(0, slopes, window)
}

/// Particle configuration back from a height profile: one particle per
/// rising slope. The anchor only fixes the additive frame and drops out.
pub fn height_decode(h: &HeightFunction) -> Result<TasepInitial, TasepError> {
    let lo = h.window().0;
    let mut y: Vec<i64> = h
        .slopes()
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == 1)
        .map(|(j, _)| lo + j as i64)
        .collect();
    y.reverse();
    TasepInitial::new(y)
}

/// Packed-cluster configuration whose rescaled height profile reproduces a
/// multi-narrow-wedge: cluster i carries particle indices t_i..t_{i+1}-1
/// with its rightmost particle at site 2*floor(omega_i/eps), where
/// t_i = 1 - floor(omega_i/eps) - floor(theta_i/(2 sqrt(eps))). The leading
/// wedge must be pinned at the origin with zero height, so t_0 = 1 sits at
/// site 0. The leftmost cluster, unbounded in the limit, is cut at
/// ceil(eps^{-3/2}) particles; a particle never blocks anything to its
/// right, so the cut is exact for events on indices within that depth.
pub fn discretize_mnw(mnw: &MultiNarrowWedge, eps: f64) -> Result<TasepInitial, TasepError> {
    let depth = eps.powf(-1.5).ceil();
    if !(depth >= 1.0) || depth > 1e9 {
        return Err(TasepError::StepSize);
    }
    discretize_mnw_depth(mnw, eps, depth as usize)
}

/// Same discretization with an explicit particle count for the leftmost
/// cluster, for callers that know the largest index they will query.
pub fn discretize_mnw_depth(
    mnw: &MultiNarrowWedge,
    eps: f64,
    last_cluster: usize,
) -> Result<TasepInitial, TasepError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(TasepError::StepSize);
    }
    if mnw.wedges()[0] != (0.0, 0.0) {
        return Err(TasepError::NotNormalized);
    }
    let m = mnw.m();
    let fw: Vec<i64> = mnw.wedges().iter().map(|&(om, _)| (om / eps).floor() as i64).collect();
    let ft: Vec<i64> =
        mnw.wedges().iter().map(|&(_, th)| (0.5 * th / eps.sqrt()).floor() as i64).collect();
    let t: Vec<i64> = (0..m).map(|i| 1 - fw[i] - ft[i]).collect();
    let r: Vec<i64> = (0..m).map(|i| 2 * fw[i]).collect();
    let mut y = Vec::new();
    for i in 0..m {
        let len = if i + 1 < m { t[i + 1] - t[i] } else { last_cluster.max(1) as i64 };
        // A degenerate or colliding cluster means eps is too coarse for the
        // wedge gaps; the profile cannot be realized on the lattice.
        if len < 1 || (i + 1 < m && r[i] - (len - 1) <= r[i + 1]) {
            return Err(TasepError::BlockOverlap);
        }
        y.extend((0..len).map(|j| r[i] - j));
    }
    TasepInitial::new(y)
}
