//! Tensor-series engine shared by the discrete and continuum multipoint
//! formulas.
//!
//! Both formulas expand the same object: a sum over order vectors
//! n = (n_1,...,n_m) of 1/(n!)^2 times a 2(n_1+...+n_m)-fold contour
//! integral whose integrand is a product of per-variable weight factors, a
//! kernel determinant over the level-1 variables, and Cauchy determinants
//! coupling adjacent levels. Three structural facts make this tractable:
//!
//! * the integrand is symmetric within each (level, side) variable group and
//!   vanishes on coincident nodes, so the tensor quadrature runs over
//!   strictly increasing index tuples and the (n!)^2 symmetry factor cancels
//!   the series weight exactly;
//! * the Cauchy couplings only link adjacent levels, so the tuple sum is a
//!   chain contraction: levels with n_l = 0 split it into independent
//!   segments, and within a segment one end is streamed while the other is
//!   materialized;
//! * the z-dependence of the measure enters only through how many variables
//!   of each level sit on the out contours, so tuples are accumulated into
//!   out-count buckets and the z-dependence is restored afterwards in closed
//!   form. The expensive tensor sums are therefore computed once and reused
//!   for every z node.

use crate::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("coincident points between the two Cauchy argument lists")]
    CoincidentPoints,
    #[error("level state space too large to enumerate ({0} tuple pairs); lower the quadrature order or the series cap")]
    StateSpace(u128),
    #[error("series truncation estimate {estimate:e} exceeds the requested tolerance {tolerance:e}")]
    Truncation { estimate: f64, tolerance: f64 },
}

/// Numerical-accuracy knobs shared by the discrete and continuum series.
#[derive(Debug, Clone, Copy)]
pub struct TruncationParams {
    /// Cap on n_1 + ... + n_m.
    pub n_total_max: usize,
    /// Trapezoid nodes per circle at the lowest series orders.
    pub circle_order: usize,
    /// Gauss-Legendre nodes per ray at the lowest series orders.
    pub ray_order: usize,
    pub z_radius: f64,
    pub z_order: usize,
    /// Ray truncation radius for the continuum contours.
    pub kpz_truncation_r: f64,
    /// When set, evaluation fails if the last-shell magnitude exceeds this.
    pub truncation_tolerance: Option<f64>,
}

impl Default for TruncationParams {
    fn default() -> Self {
        TruncationParams {
            n_total_max: 4,
            circle_order: 64,
            ray_order: 48,
            z_radius: 0.5,
            z_order: 32,
            kpz_truncation_r: 8.0,
            truncation_tolerance: None,
        }
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Node count for the z-cycles. The n-node trapezoid rule on a circle of
/// radius r aliases the geometric tail of 1/(1-z) with magnitude ~ r^n, so
/// larger radii need more nodes; this enforces r^n below 1e-12.
pub(crate) fn effective_z_order(z_order: usize, z_radius: f64) -> usize {
    let needed = (27.7 / -z_radius.ln()).ceil() as usize;
    z_order.max(needed)
}

/// Determinant of the n x n Cauchy matrix 1/(w_i - w'_j) via the closed
/// product formula, accumulated as log-magnitude plus unit phase so that
/// large n or extreme spacings cannot overflow.
pub fn cauchy_det(w: &[Complex64], wp: &[Complex64]) -> Result<Complex64, SeriesError> {
    assert_eq!(w.len(), wp.len(), "Cauchy determinant needs equally long argument lists");
    let n = w.len();
    if n == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let mut log_mag = 0.0f64;
    let mut phase = Complex64::new(1.0, 0.0);
    let mut push = |f: Complex64, inverted: bool| {
        let r = f.norm();
        log_mag += if inverted { -r.ln() } else { r.ln() };
        let unit = f / r;
        phase *= if inverted { unit.conj() } else { unit };
    };
    for i in 0..n {
        for j in (i + 1)..n {
            push(w[j] - w[i], false);
            push(wp[j] - wp[i], false);
        }
    }
    for &wi in w {
        for &wpj in wp {
            let d = wi - wpj;
            if d.norm_sqr() == 0.0 {
                return Err(SeriesError::CoincidentPoints);
            }
            push(d, true);
        }
    }
    let sign = if (n * (n - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * phase * log_mag.exp())
}

/// Same determinant by direct products; the hot path inside the tensor sums,
/// valid for the small sizes and moderate spacings the contours produce.
pub(crate) fn cauchy_det_direct(w: &[Complex64], wp: &[Complex64]) -> Complex64 {
    let n = w.len();
    debug_assert_eq!(n, wp.len());
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut num = Complex64::new(1.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            num *= (w[j] - w[i]) * (wp[j] - wp[i]);
        }
    }
    let mut den = Complex64::new(1.0, 0.0);
    for &wi in w {
        for &wpj in wp {
            den *= wi - wpj;
        }
    }
    let sign = if (n * (n - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    sign * num / den
}

/// In-place determinant of a k x k matrix by Gaussian elimination with
/// partial pivoting; used for the kernel determinant blocks (k <= 6).
pub(crate) fn det_dense(a: &mut [Complex64], k: usize) -> Complex64 {
    debug_assert_eq!(a.len(), k * k);
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..k {
        let mut piv = col;
        let mut best = a[col * k + col].norm_sqr();
        for row in (col + 1)..k {
            let v = a[row * k + col].norm_sqr();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != col {
            for j in 0..k {
                a.swap(col * k + j, piv * k + j);
            }
            det = -det;
        }
        let p = a[col * k + col];
        det *= p;
        for row in (col + 1)..k {
            let f = a[row * k + col] / p;
            for j in (col + 1)..k {
                let sub = f * a[col * k + j];
                a[row * k + j] -= sub;
            }
        }
    }
    det
}

/// Quadrature nodes of one (level, side) variable group: the base contour at
/// level 1, the out and in contours concatenated (out first) at levels >= 2.
/// Weights are the contour base weights with the per-variable factor of the
/// integrand (the f-ratio) already folded in.
#[derive(Debug, Clone)]
pub struct LevelNodes {
    pub points: Vec<Complex64>,
    pub weights: Vec<Complex64>,
    /// The first n_out nodes lie on the out contour.
    pub n_out: usize,
}

/// All node data a series evaluation needs at one quadrature resolution.
/// `kernel` holds the level-1 kernel values, row-major as
/// kernel[right_index * left_len + left_index].
#[derive(Debug, Clone)]
pub struct SeriesGeometry {
    pub m: usize,
    pub left: Vec<LevelNodes>,
    pub right: Vec<LevelNodes>,
    pub kernel: Vec<Complex64>,
}

impl SeriesGeometry {
    fn kernel_at(&self, r: usize, l: usize) -> Complex64 {
        self.kernel[r * self.left[0].points.len() + l]
    }
}

/// Out-count-bucketed tensor sums of one series term, normalized over sorted
/// index tuples (i.e. the full symmetric sum divided by (n!)^2).
#[derive(Debug, Clone)]
pub struct TermBuckets {
    pub n: Vec<usize>,
    /// dims[l-2] = 2 n_l + 1 for levels l = 2..m.
    dims: Vec<usize>,
    pub sums: Vec<Complex64>,
}

const MAX_VARS: usize = 6;
const MAX_STATES: u128 = 40_000_000;
const MAX_MATERIALIZED: usize = 4_000_000;

#[derive(Clone, Copy)]
struct State {
    pl: [Complex64; MAX_VARS],
    pr: [Complex64; MAX_VARS],
    il: [u16; MAX_VARS],
    ir: [u16; MAX_VARS],
    w: Complex64,
    class: u32,
}

impl State {
    fn empty() -> Self {
        State {
            pl: [Complex64::new(0.0, 0.0); MAX_VARS],
            pr: [Complex64::new(0.0, 0.0); MAX_VARS],
            il: [0; MAX_VARS],
            ir: [0; MAX_VARS],
            w: Complex64::new(1.0, 0.0),
            class: 0,
        }
    }
}

fn next_combination(buf: &mut [usize], n: usize) -> bool {
    let k = buf.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if buf[i] < n - (k - i) {
            buf[i] += 1;
            for j in (i + 1)..k {
                buf[j] = buf[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Enumerates all sorted-tuple states of one level, in a fixed order.
fn for_each_state<F: FnMut(&State)>(left: &LevelNodes, right: &LevelNodes, k: usize, mut f: F) {
    if k == 0 {
        f(&State::empty());
        return;
    }
    let mut cl: Vec<usize> = (0..k).collect();
    loop {
        let mut cr: Vec<usize> = (0..k).collect();
        loop {
            let mut s = State::empty();
            for i in 0..k {
                s.pl[i] = left.points[cl[i]];
                s.pr[i] = right.points[cr[i]];
                s.il[i] = cl[i] as u16;
                s.ir[i] = cr[i] as u16;
                s.w *= left.weights[cl[i]] * right.weights[cr[i]];
                s.class += (cl[i] < left.n_out) as u32 + (cr[i] < right.n_out) as u32;
            }
            f(&s);
            if !next_combination(&mut cr, right.points.len()) {
                break;
            }
        }
        if !next_combination(&mut cl, left.points.len()) {
            break;
        }
    }
}

fn state_count(left: &LevelNodes, right: &LevelNodes, k: usize) -> u128 {
    binomial_u128(left.points.len(), k) * binomial_u128(right.points.len(), k)
}

/// The Cauchy factor coupling adjacent levels:
/// C(xi^(lo) | eta^(hi) ; eta^(lo) | xi^(hi)).
fn trans_factor(lo: &State, klo: usize, hi: &State, khi: usize) -> Complex64 {
    let mut w = [Complex64::new(0.0, 0.0); 2 * MAX_VARS];
    let mut wp = [Complex64::new(0.0, 0.0); 2 * MAX_VARS];
    w[..klo].copy_from_slice(&lo.pl[..klo]);
    w[klo..klo + khi].copy_from_slice(&hi.pr[..khi]);
    wp[..klo].copy_from_slice(&lo.pr[..klo]);
    wp[klo..klo + khi].copy_from_slice(&hi.pl[..khi]);
    cauchy_det_direct(&w[..klo + khi], &wp[..klo + khi])
}

/// Head factor of a segment: the kernel determinant at level 1, or the
/// Cauchy factor left over from the (empty) previous level otherwise.
fn head_factor(geom: &SeriesGeometry, level: usize, s: &State, k: usize) -> Complex64 {
    if level == 1 {
        let mut a = [Complex64::new(0.0, 0.0); MAX_VARS * MAX_VARS];
        for i in 0..k {
            for j in 0..k {
                a[i * k + j] = geom.kernel_at(s.ir[i] as usize, s.il[j] as usize);
            }
        }
        det_dense(&mut a[..k * k], k)
    } else {
        cauchy_det_direct(&s.pr[..k], &s.pl[..k])
    }
}

/// Tail factor: C(xi ; eta) of the segment's last level, which is both the
/// closing factor at level m and the reduction of the coupling to an empty
/// next level.
fn tail_factor(s: &State, k: usize) -> Complex64 {
    cauchy_det_direct(&s.pl[..k], &s.pr[..k])
}

struct SegmentTable {
    /// Class dimensions for levels max(a,2)..=b of the segment.
    dims: Vec<usize>,
    values: Vec<Complex64>,
}

fn class_slot(level: usize, seg_start: usize) -> Option<usize> {
    // Level 1 carries no measure class.
    if level < 2 {
        None
    } else {
        Some(level - seg_start.max(2))
    }
}

fn segment_sums(
    geom: &SeriesGeometry,
    n: &[usize],
    a: usize,
    b: usize,
) -> Result<SegmentTable, SeriesError> {
    let dims: Vec<usize> = (a.max(2)..=b).map(|l| 2 * n[l - 1] + 1).collect();
    let total: usize = dims.iter().product::<usize>().max(1);
    let mut values = vec![Complex64::new(0.0, 0.0); total];
    // Strides for composing a flat index from per-level classes.
    let strides: Vec<usize> = {
        let mut s = vec![1usize; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * dims[i + 1];
        }
        s
    };
    let idx1 = |level: usize, class: u32| -> usize {
        match class_slot(level, a) {
            Some(slot) => strides[slot] * class as usize,
            None => 0,
        }
    };

    for l in a..=b {
        let count = state_count(&geom.left[l - 1], &geom.right[l - 1], n[l - 1]);
        if count > MAX_STATES {
            return Err(SeriesError::StateSpace(count));
        }
    }

    if a == b {
        let k = n[a - 1];
        for_each_state(&geom.left[a - 1], &geom.right[a - 1], k, |s| {
            let v = s.w * head_factor(geom, a, s, k) * tail_factor(s, k);
            values[idx1(a, s.class)] += v;
        });
        return Ok(SegmentTable { dims, values });
    }

    if b == a + 1 {
        let ka = n[a - 1];
        let kb = n[b - 1];
        let ca = state_count(&geom.left[a - 1], &geom.right[a - 1], ka);
        let cb = state_count(&geom.left[b - 1], &geom.right[b - 1], kb);
        // Materialize the smaller end, stream the larger.
        if ca <= cb {
            if ca > MAX_MATERIALIZED as u128 {
                return Err(SeriesError::StateSpace(ca));
            }
            let mut sa = Vec::with_capacity(ca as usize);
            for_each_state(&geom.left[a - 1], &geom.right[a - 1], ka, |s| {
                let mut s = *s;
                s.w *= head_factor(geom, a, &s, ka);
                sa.push(s);
            });
            let na = 2 * ka + 1;
            for_each_state(&geom.left[b - 1], &geom.right[b - 1], kb, |sb| {
                let mut per_class = [Complex64::new(0.0, 0.0); 2 * MAX_VARS + 1];
                for s in &sa {
                    per_class[s.class as usize] += s.w * trans_factor(s, ka, sb, kb);
                }
                let vb = sb.w * tail_factor(sb, kb);
                for (cls, &acc) in per_class.iter().enumerate().take(na) {
                    values[idx1(a, cls as u32) + idx1(b, sb.class)] += acc * vb;
                }
            });
        } else {
            if cb > MAX_MATERIALIZED as u128 {
                return Err(SeriesError::StateSpace(cb));
            }
            let mut sb = Vec::with_capacity(cb as usize);
            for_each_state(&geom.left[b - 1], &geom.right[b - 1], kb, |s| {
                let mut s = *s;
                s.w *= tail_factor(&s, kb);
                sb.push(s);
            });
            let nb = 2 * kb + 1;
            for_each_state(&geom.left[a - 1], &geom.right[a - 1], ka, |sa| {
                let mut per_class = [Complex64::new(0.0, 0.0); 2 * MAX_VARS + 1];
                for s in &sb {
                    per_class[s.class as usize] += s.w * trans_factor(sa, ka, s, kb);
                }
                let va = sa.w * head_factor(geom, a, sa, ka);
                for (cls, &acc) in per_class.iter().enumerate().take(nb) {
                    values[idx1(a, sa.class) + idx1(b, cls as u32)] += acc * va;
                }
            });
        }
        return Ok(SegmentTable { dims, values });
    }

    // Chains of three or more nonzero levels: materialize every level and
    // contract backward, tracking the class vector of the already-contracted
    // suffix. Series caps keep these state sets small.
    let mut states: Vec<Vec<State>> = Vec::new();
    for l in a..=b {
        let count = state_count(&geom.left[l - 1], &geom.right[l - 1], n[l - 1]);
        if count > MAX_MATERIALIZED as u128 {
            return Err(SeriesError::StateSpace(count));
        }
        let mut v = Vec::with_capacity(count as usize);
        for_each_state(&geom.left[l - 1], &geom.right[l - 1], n[l - 1], |s| v.push(*s));
        states.push(v);
    }
    // Suffix class space of levels l+1..=b.
    let sdim = |l: usize| -> usize { (l + 1..=b).map(|j| 2 * n[j - 1] + 1).product::<usize>().max(1) };
    let last = &states[b - a];
    let kb = n[b - 1];
    let mut m_next: Vec<Complex64> = last.iter().map(|s| tail_factor(s, kb)).collect();
    for l in ((a + 1)..b).rev() {
        let cur = &states[l - a];
        let nxt = &states[l + 1 - a];
        let klo = n[l - 1];
        let khi = n[l];
        let sd_next = sdim(l + 1);
        let sd_cur = sdim(l);
        let mut m_cur = vec![Complex64::new(0.0, 0.0); cur.len() * sd_cur];
        for (ci, slo) in cur.iter().enumerate() {
            let dst = &mut m_cur[ci * sd_cur..(ci + 1) * sd_cur];
            for (ni, shi) in nxt.iter().enumerate() {
                let t = trans_factor(slo, klo, shi, khi) * shi.w;
                let base = shi.class as usize * sd_next;
                for sfx in 0..sd_next {
                    dst[base + sfx] += t * m_next[ni * sd_next + sfx];
                }
            }
        }
        m_next = m_cur;
    }
    let ka = n[a - 1];
    let sd_next = sdim(a + 1);
    let nxt = &states[1];
    let khi = n[a];
    for_each_state(&geom.left[a - 1], &geom.right[a - 1], ka, |sa| {
        let va = sa.w * head_factor(geom, a, sa, ka);
        let base_a = idx1(a, sa.class);
        for (ni, shi) in nxt.iter().enumerate() {
            let t = trans_factor(sa, ka, shi, khi) * shi.w * va;
            let base = shi.class as usize * sd_next;
            for sfx in 0..sd_next {
                values[base_a + base + sfx] += t * m_next[ni * sd_next + sfx];
            }
        }
    });
    Ok(SegmentTable { dims, values })
}

/// Computes the out-count-bucketed tensor sums of the order-n term on the
/// given geometry. Levels with n_l = 0 cut the Cauchy chain, so the result
/// is assembled as an outer product over independent segments.
pub fn tensor_sums(geom: &SeriesGeometry, n: &[usize]) -> Result<TermBuckets, SeriesError> {
    assert_eq!(n.len(), geom.m);
    assert!(n.iter().all(|&k| k <= MAX_VARS), "per-level order exceeds the engine limit");
    let m = geom.m;
    let dims: Vec<usize> = (2..=m).map(|l| 2 * n[l - 1] + 1).collect();
    let total: usize = dims.iter().product::<usize>().max(1);
    let strides: Vec<usize> = {
        let mut s = vec![1usize; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * dims[i + 1];
        }
        s
    };
    let mut sums = vec![Complex64::new(0.0, 0.0); total];
    sums[0] = Complex64::new(1.0, 0.0);
    // Maximal runs of consecutive nonzero levels.
    let mut segments: Vec<(usize, usize)> = Vec::new();
    let mut l = 1;
    while l <= m {
        if n[l - 1] > 0 {
            let start = l;
            while l < m && n[l] > 0 {
                l += 1;
            }
            segments.push((start, l));
        }
        l += 1;
    }
    for (sa, sb) in segments {
        let seg = segment_sums(geom, n, sa, sb)?;
        // Outer-merge the segment's class table into the global one.
        let seg_levels: Vec<usize> = (sa.max(2)..=sb).collect();
        let mut merged = vec![Complex64::new(0.0, 0.0); total];
        for (gidx, gval) in sums.iter().enumerate() {
            if gval.norm_sqr() == 0.0 {
                continue;
            }
            for (lidx, lval) in seg.values.iter().enumerate() {
                // Decode the segment-local index into per-level classes and
                // re-encode against the global strides.
                let mut off = 0usize;
                let mut rem = lidx;
                for (slot, &lv) in seg_levels.iter().enumerate() {
                    let d: usize = seg.dims[slot + 1..].iter().product::<usize>().max(1);
                    let cls = rem / d;
                    rem %= d;
                    off += cls * strides[lv - 2];
                }
                merged[gidx + off] += gval * lval;
            }
        }
        sums = merged;
    }
    Ok(TermBuckets { n: n.to_vec(), dims, sums })
}

/// Restores the z-dependence of one term: the series prefactor times the
/// out-count measure powers, applied to the bucketed sums. Normalization is
/// over sorted tuples, i.e. this already includes the 1/(n!)^2 weight of the
/// full symmetric tensor sum.
///
/// The value is literal in the supplied node weights: when the series is the
/// expansion of a Fredholm determinant det(I - K), the (-1)^order expansion
/// sign amounts to one orientation flip per right-side variable and belongs
/// in the right-contour weights of the geometry.
pub fn term_value(tb: &TermBuckets, z: &[Complex64]) -> Complex64 {
    let m = tb.n.len();
    debug_assert_eq!(z.len(), m - 1);
    let one = Complex64::new(1.0, 0.0);
    let mut pref = one;
    for l in 1..m {
        let zl = z[l - 1];
        pref *= (one - zl).powi(tb.n[l - 1] as i32) * (one - 1.0 / zl).powi(tb.n[l] as i32);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (idx, &sum) in tb.sums.iter().enumerate() {
        if sum.norm_sqr() == 0.0 {
            continue;
        }
        let mut factor = one;
        let mut rem = idx;
        for (slot, &d) in tb.dims.iter().enumerate() {
            let stride: usize = tb.dims[slot + 1..].iter().product::<usize>().max(1);
            let cls = rem / stride % d;
            rem %= stride;
            let zl = z[slot];
            factor *= (-zl).powi(cls as i32) * (one - zl).powi(-2 * (tb.n[slot + 1] as i32));
        }
        acc += factor * sum;
    }
    pref * acc
}

/// The full symmetric tensor value of the term, (n!)^2 times [`term_value`].
pub fn term_value_full(tb: &TermBuckets, z: &[Complex64]) -> Complex64 {
    let f: f64 = tb.n.iter().map(|&k| factorial(k)).product();
    f * f * term_value(tb, z)
}

/// Sum of term values over a collection of prepared terms at one z-vector.
pub fn series_value(terms: &[TermBuckets], z: &[Complex64]) -> Complex64 {
    terms.iter().map(|tb| term_value(tb, z)).sum()
}

/// Outcome of a z-integrated, shell-truncated series evaluation.
#[derive(Debug, Clone)]
pub struct CdfResult {
    pub probability: f64,
    /// Magnitude of the last included shell: the series truncation estimate.
    pub truncation_estimate: f64,
    pub shell_magnitudes: Vec<f64>,
    pub imag_residual: f64,
}

/// All order vectors with the given total, lexicographically ascending.
pub fn orders_with_total(m: usize, total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; m];
    fn rec(cur: &mut Vec<usize>, pos: usize, left: usize, out: &mut Vec<Vec<usize>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[pos] = v;
            rec(cur, pos + 1, left - v, out);
        }
    }
    rec(&mut cur, 0, total, &mut out);
    out
}
