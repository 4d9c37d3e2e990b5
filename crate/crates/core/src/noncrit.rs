//! Entire interpolants with nowhere-vanishing derivative.
//!
//! The representation is `F(z) = F(p) + integral from p to z of exp(G)`,
//! with `G` a polynomial.  The derivative `exp(G)` has no zeros anywhere in
//! the plane, so `F` is free of critical points by construction, and an
//! argument-principle audit can certify that without trusting the algebra
//! here.  Building `G` amounts to fitting a continuous branch of `log f'`
//! over the target set; the error budget that makes `|F - f|` small on the
//! set is the path-length bound measured by [`measure_path_bound`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::fitting::{
    fit_to_tolerance, min_derivative, sample_set, DerivFloor, FitReport, SampledTarget,
};
use crate::func::AnalyticMap;
use crate::geom::{raster_tolerance, Region};
use crate::poly::ScaledPoly;

/// Kronrod nodes of the (7, 15) pair, positive half, descending; the last
/// entry is the midpoint.  Odd indices are the embedded Gauss-7 nodes.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];

const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// Gauss-7 weights for `XGK[1], XGK[3], XGK[5]` and the midpoint.
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

const MAX_DEPTH: u32 = 30;

/// One (7, 15) pass over the segment `[a, b]`.
///
/// Returns the Kronrod estimate, the |K - G| error gauge, and the integral
/// of |f| (used for the roundoff floor below which further bisection only
/// churns the last bits).
fn gk15(f: &dyn Fn(Complex64) -> Complex64, a: Complex64, b: Complex64) -> (Complex64, f64, f64) {
    let mid = (a + b) * 0.5;
    let half = (b - a) * 0.5;
    let fc = f(mid);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut absolute = fc.norm() * WGK[7];
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let f1 = f(mid - half * x);
        let f2 = f(mid + half * x);
        kronrod += (f1 + f2) * WGK[j];
        absolute += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    let len = half.norm();
    ((kronrod * half), (kronrod - gauss).norm() * len, absolute * len)
}

/// Adaptive quadrature over a segment, best effort: bisects until every
/// piece meets its share of `tol` or hits the roundoff floor, and reports
/// the accumulated error estimate so the caller can decide whether the
/// result is usable.
pub(crate) fn integrate_segment_best(
    f: &dyn Fn(Complex64) -> Complex64,
    a: Complex64,
    b: Complex64,
    tol: f64,
) -> (Complex64, f64) {
    if a == b {
        return (Complex64::new(0.0, 0.0), 0.0);
    }
    let mut total = Complex64::new(0.0, 0.0);
    let mut err_total = 0.0;
    let mut stack: Vec<(Complex64, Complex64, f64, u32)> = vec![(a, b, tol.max(0.0), 0)];
    while let Some((lo, hi, share, depth)) = stack.pop() {
        let (value, err, absolute) = gk15(f, lo, hi);
        // 50 ulps of the magnitude integral: past this, bisection measures
        // rounding noise, not the integrand.
        let floor = 50.0 * f64::EPSILON * absolute;
        if err <= share || err <= floor || depth >= MAX_DEPTH {
            total += value;
            err_total += err;
        } else {
            let mid = (lo + hi) * 0.5;
            stack.push((lo, mid, share * 0.5, depth + 1));
            stack.push((mid, hi, share * 0.5, depth + 1));
        }
    }
    (total, err_total)
}

/// Integral of `f` along the straight segment from `a` to `b`, certified to
/// the absolute tolerance `tol`.
pub fn integrate_segment(
    f: impl Fn(Complex64) -> Complex64,
    a: Complex64,
    b: Complex64,
    tol: f64,
) -> Result<Complex64> {
    if !(tol > 0.0) {
        return Err(Error::NonPositive("quadrature tolerance", tol));
    }
    let (value, err) = integrate_segment_best(&f, a, b, tol);
    if err <= tol {
        Ok(value)
    } else {
        Err(Error::QuadratureTolerance {
            wanted: tol,
            got: err,
        })
    }
}

/// Integral of `f` along a polyline, with the tolerance split between
/// segments in proportion to their length.
pub fn integrate_path(
    f: impl Fn(Complex64) -> Complex64,
    path: &[Complex64],
    tol: f64,
) -> Result<Complex64> {
    if path.is_empty() {
        return Err(Error::Precondition("integration path has no points".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::NonPositive("quadrature tolerance", tol));
    }
    let total_len: f64 = path.windows(2).map(|p| (p[1] - p[0]).norm()).sum();
    if total_len == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut err_acc = 0.0;
    for p in path.windows(2) {
        let len = (p[1] - p[0]).norm();
        if len == 0.0 {
            continue;
        }
        let (value, err) = integrate_segment_best(&f, p[0], p[1], tol * len / total_len);
        acc += value;
        err_acc += err;
    }
    if err_acc <= tol {
        Ok(acc)
    } else {
        Err(Error::QuadratureTolerance {
            wanted: tol,
            got: err_acc,
        })
    }
}

/// An entire function whose derivative is `exp` of a polynomial, stored as
/// the base point `p`, the value there, and the exponent.
///
/// Everything downstream relies on two facts: the derivative never
/// vanishes, and evaluation is path independent because the function is
/// entire.  Both are auditable from the outside.
#[derive(Debug, Clone)]
pub struct NonCriticalEntire {
    pub base: Complex64,
    pub base_value: Complex64,
    pub exponent: ScaledPoly,
    /// Tolerance used by the infallible trait `eval`; checked callers pass
    /// their own to [`NonCriticalEntire::eval_to`].
    pub quad_tol: f64,
}

impl NonCriticalEntire {
    pub fn new(base: Complex64, base_value: Complex64, exponent: ScaledPoly) -> Self {
        NonCriticalEntire {
            base,
            base_value,
            exponent,
            quad_tol: 1e-12,
        }
    }

    pub fn derivative_at(&self, z: Complex64) -> Complex64 {
        self.exponent.eval(z).exp()
    }

    /// Value at `z`, integrating along the straight segment from the base
    /// point, certified to `tol`.
    pub fn eval_to(&self, z: Complex64, tol: f64) -> Result<Complex64> {
        let g = &self.exponent;
        let v = integrate_segment(|w| g.eval(w).exp(), self.base, z, tol)?;
        Ok(self.base_value + v)
    }

    /// Value at the endpoint of a polyline starting anywhere; the path is
    /// prepended with the base point.  With exact arithmetic the answer
    /// would not depend on the route, so comparing routes bounds the
    /// quadrature error from the outside.
    pub fn eval_along(&self, path: &[Complex64], tol: f64) -> Result<Complex64> {
        let mut full = Vec::with_capacity(path.len() + 1);
        full.push(self.base);
        full.extend_from_slice(path);
        let g = &self.exponent;
        let v = integrate_path(|w| g.eval(w).exp(), &full, tol)?;
        Ok(self.base_value + v)
    }

    pub fn to_wire(&self) -> NonCriticalWire {
        // Restate the exponent in w = (z - p) / scale so the file is
        // self-contained: no reader needs the fit's internal center.
        let shift = (self.base - self.exponent.center) / self.exponent.scale;
        let recentered = self.exponent.poly.shifted(shift);
        NonCriticalWire {
            p: [self.base.re, self.base.im],
            v0: [self.base_value.re, self.base_value.im],
            scale: self.exponent.scale,
            exponent: recentered
                .coeffs
                .iter()
                .map(|c| [c.re, c.im])
                .collect(),
        }
    }

    pub fn from_wire(wire: &NonCriticalWire) -> Result<Self> {
        if !(wire.scale > 0.0) {
            return Err(Error::NonPositive("wire scale", wire.scale));
        }
        if wire.exponent.is_empty() {
            return Err(Error::Precondition("wire exponent has no coefficients".into()));
        }
        let base = Complex64::new(wire.p[0], wire.p[1]);
        let coeffs = wire
            .exponent
            .iter()
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        let exponent = ScaledPoly::new(base, wire.scale, crate::poly::CPoly::new(coeffs))?;
        Ok(NonCriticalEntire::new(
            base,
            Complex64::new(wire.v0[0], wire.v0[1]),
            exponent,
        ))
    }
}

impl AnalyticMap for NonCriticalEntire {
    /// Best-effort segment quadrature from the base point.  Use `eval_to`
    /// when the tolerance must be certified rather than merely attempted.
    fn eval(&self, z: Complex64) -> Complex64 {
        let g = &self.exponent;
        self.base_value + integrate_segment_best(&|w| g.eval(w).exp(), self.base, z, self.quad_tol).0
    }

    fn deriv(&self, z: Complex64) -> Complex64 {
        self.derivative_at(z)
    }
}

/// Serialized form of [`NonCriticalEntire`]: base point, value there, and
/// the exponent's coefficients in `w = (z - p) / scale`, each complex number
/// as `[re, im]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonCriticalWire {
    pub p: [f64; 2],
    pub v0: [f64; 2],
    pub scale: f64,
    #[serde(rename = "P")]
    pub exponent: Vec<[f64; 2]>,
}

/// A continuous branch of `log` of the given derivative values over a
/// sample cloud, anchored at `root`.
///
/// A spanning tree of shortest edges carries the principal-log increment
/// `Ln(d_child / d_parent)` from the root outward.  That is only a branch
/// if no tree edge jumps the cut, so afterwards every sample is checked
/// against its three nearest neighbours: a mismatch of `pi` or more in the
/// imaginary part means the cloud winds around a zero of the derivative and
/// no single-valued logarithm exists on it.
pub fn log_branch(
    points: &[Complex64],
    derivs: &[Complex64],
    root: usize,
) -> Result<Vec<Complex64>> {
    let n = points.len();
    if n == 0 || derivs.len() != n {
        return Err(Error::BadSamples);
    }
    if root >= n {
        return Err(Error::Precondition("branch root out of range".into()));
    }
    let max_mag = derivs.iter().map(|d| d.norm()).fold(0.0, f64::max);
    for (p, d) in points.iter().zip(derivs) {
        if !(d.norm() > 1e-14 * max_mag) {
            return Err(Error::CriticalPointSuspected {
                at: *p,
                mag: d.norm(),
            });
        }
    }

    // Prim, O(n^2): fine for the few thousand samples a fit uses, and the
    // addition order doubles as a parent-before-child traversal order.
    let mut in_tree = vec![false; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    dist[root] = 0.0;
    for _ in 0..n {
        let mut best = usize::MAX;
        for i in 0..n {
            if !in_tree[i] && (best == usize::MAX || dist[i] < dist[best]) {
                best = i;
            }
        }
        in_tree[best] = true;
        order.push(best);
        for j in 0..n {
            if !in_tree[j] {
                let d = (points[j] - points[best]).norm();
                if d < dist[j] {
                    dist[j] = d;
                    parent[j] = best;
                }
            }
        }
    }

    let mut branch = vec![Complex64::new(0.0, 0.0); n];
    branch[root] = derivs[root].ln();
    for &v in order.iter().skip(1) {
        let u = parent[v];
        branch[v] = branch[u] + (derivs[v] / derivs[u]).ln();
    }

    for i in 0..n {
        let mut nearest: Vec<(f64, usize)> = Vec::with_capacity(4);
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = (points[j] - points[i]).norm();
            nearest.push((d, j));
            nearest.sort_by(|a, b| a.partial_cmp(b).unwrap());
            nearest.truncate(3);
        }
        for &(_, j) in &nearest {
            let diff = branch[j] - branch[i] - (derivs[j] / derivs[i]).ln();
            if diff.im.abs() >= std::f64::consts::PI {
                return Err(Error::SheetInconsistency { at: points[i] });
            }
        }
    }
    Ok(branch)
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap; invert so the nearest node pops first, ties by index
        // for a deterministic visit order.
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap()
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Upper bound on the length of an in-set path from `base` to any point of
/// the region's raster.
///
/// Dijkstra over occupied cell centers with 8-neighbour moves (spacing and
/// spacing * sqrt 2 weights), inflated by `1 + 2 * spacing` to cover the
/// difference between center-hopping and a smooth path.  Cells the search
/// cannot reach mean the raster is disconnected at this spacing, which the
/// downstream integral representation cannot tolerate.
pub fn measure_path_bound(region: &Region, base: Complex64) -> Result<f64> {
    let grid = region.rasterize()?;
    let (nx, ny, h) = (grid.nx, grid.ny, grid.spacing);
    let mut start = usize::MAX;
    let mut start_gap = f64::INFINITY;
    for j in 0..ny {
        for i in 0..nx {
            let idx = grid.idx(i, j);
            if grid.mask[idx] {
                let d = (grid.center(i, j) - base).norm();
                if d < start_gap {
                    start_gap = d;
                    start = idx;
                }
            }
        }
    }
    if start == usize::MAX {
        return Err(Error::EmptyRegion);
    }
    if start_gap > 2.0 * raster_tolerance(h) {
        return Err(Error::Precondition(
            "path-bound base point is off the target set".into(),
        ));
    }

    let diag = h * std::f64::consts::SQRT_2;
    let mut dist = vec![f64::INFINITY; nx * ny];
    dist[start] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        dist: 0.0,
        node: start,
    });
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        let (i, j) = (node % nx, node / nx);
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni < 0 || nj < 0 || ni >= nx as i64 || nj >= ny as i64 {
                    continue;
                }
                let nidx = nj as usize * nx + ni as usize;
                if !grid.mask[nidx] {
                    continue;
                }
                let w = if di != 0 && dj != 0 { diag } else { h };
                let nd = d + w;
                if nd < dist[nidx] {
                    dist[nidx] = nd;
                    heap.push(HeapEntry {
                        dist: nd,
                        node: nidx,
                    });
                }
            }
        }
    }

    let mut unreachable = 0usize;
    let mut farthest: f64 = 0.0;
    for idx in 0..nx * ny {
        if grid.mask[idx] {
            if dist[idx].is_infinite() {
                unreachable += 1;
            } else {
                farthest = farthest.max(dist[idx]);
            }
        }
    }
    if unreachable > 0 {
        return Err(Error::DisconnectedTarget(unreachable));
    }
    Ok((farthest + start_gap) * (1.0 + 2.0 * h))
}

/// Tunables for [`build_noncritical`].
#[derive(Debug, Clone)]
pub struct NonCritParams {
    /// Samples per unit area (per unit length on arcs).
    pub density: f64,
    pub boundary_bias: f64,
    pub seed: u64,
    pub max_degree: usize,
    pub quad_tol: f64,
}

impl Default for NonCritParams {
    fn default() -> Self {
        NonCritParams {
            density: 60.0,
            boundary_bias: 2.0,
            seed: 7,
            max_degree: 40,
            quad_tol: 1e-12,
        }
    }
}

/// The result of [`build_noncritical`]: the interpolant plus the measured
/// quantities a verifier needs to re-check the error chain.
#[derive(Debug, Clone)]
pub struct NonCritBuild {
    pub g: NonCriticalEntire,
    pub fit: FitReport,
    /// Path-length bound `c` for the region, from [`measure_path_bound`].
    pub path_bound: f64,
    pub deriv_floor: DerivFloor,
    /// Max over samples of `(e - 1) * c * |f'| * |G - log f'|`; at most the
    /// pointwise tolerance when `certified` holds.
    pub max_defect: f64,
    /// Max over samples of the raw exponent error `|G - log f'|`; the error
    /// chain also needs this at most 1.
    pub exponent_defect: f64,
    pub certified: bool,
}

/// Fit an entire function with nowhere-vanishing derivative to `f` on the
/// region, with pointwise tolerance `eps`.
///
/// The exponent targets a branch of `log f'`; the sample weights fold the
/// whole error chain (path bound `c`, the factor `e - 1` from integrating
/// `exp` errors, and `|f'|` itself) into one number per sample, so the fit
/// runs until the weighted residual is at most 1 and that single condition
/// certifies `|F - f| <= eps` pointwise on the samples.
pub fn build_noncritical(
    f: &dyn AnalyticMap,
    region: &Region,
    eps: &dyn Fn(Complex64) -> f64,
    params: &NonCritParams,
) -> Result<NonCritBuild> {
    let floor = min_derivative(f, region)?;
    let samples = sample_set(region, params.density, params.boundary_bias, params.seed)?;
    if samples.is_empty() {
        return Err(Error::BadSamples);
    }
    let derivs: Vec<Complex64> = samples.iter().map(|z| f.deriv(*z)).collect();

    let centroid = samples.iter().sum::<Complex64>() / samples.len() as f64;
    let mut base_idx = 0usize;
    for (i, z) in samples.iter().enumerate() {
        if (z - centroid).norm() < (samples[base_idx] - centroid).norm() {
            base_idx = i;
        }
    }
    let base = samples[base_idx];

    let c = measure_path_bound(region, base)?;
    let branch = log_branch(&samples, &derivs, base_idx)?;

    let chain = std::f64::consts::E - 1.0;
    let mut weights = Vec::with_capacity(samples.len());
    for (z, d) in samples.iter().zip(&derivs) {
        let e = eps(*z);
        if !(e > 0.0) {
            return Err(Error::NonPositive("pointwise tolerance", e));
        }
        weights.push((e / (chain * c * d.norm())).min(1.0));
    }

    let kinds = vec![crate::fitting::PointKind::Holomorphic; samples.len()];
    let target = SampledTarget::new(samples.clone(), branch.clone(), kinds, weights)?;
    let approx = fit_to_tolerance(&target, params.max_degree)?;
    let exponent = approx.to_scaled_poly();

    let mut max_defect: f64 = 0.0;
    let mut exponent_defect: f64 = 0.0;
    for ((z, d), b) in samples.iter().zip(&derivs).zip(&branch) {
        let raw = (exponent.eval(*z) - b).norm();
        exponent_defect = exponent_defect.max(raw);
        max_defect = max_defect.max(chain * c * d.norm() * raw);
    }
    let certified = approx.report.tolerance_met && exponent_defect <= 1.0;

    let mut g = NonCriticalEntire::new(base, f.eval(base), exponent);
    g.quad_tol = params.quad_tol;
    Ok(NonCritBuild {
        fit: approx.report,
        g,
        path_bound: c,
        deriv_floor: floor,
        max_defect,
        exponent_defect,
        certified,
    })
}

/// How a fitted model was nudged so its critical points clear the target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Relocation {
    /// The translation `t0`; the returned poly is `z -> h(z - t0)`.
    pub shift: [f64; 2],
    /// Bound `M * |t0|` on the sup-norm change over the searched tube.
    pub sup_change: f64,
    /// Distance from the shifted critical set to the target.
    pub clearance: f64,
    /// Sup of `|h'|` over the tube, with a raster slack term.
    pub deriv_sup: f64,
}

/// Translate `h` by a small `t0` so that every point of its critical
/// spectrum stays off `target`, changing the function by at most `budget`
/// on a `radius`-neighbourhood of the target.
///
/// Shift magnitudes run `radius / 2, radius / 4, ...` with 32 directions
/// each, smallest magnitude first once the budget admits it; `t0 = 0` is
/// accepted outright when the spectrum is already clear.  The spectrum is
/// the raw companion spectrum of `h'`, a superset of the true critical
/// points: ghosts only make the search more conservative, never unsound.
pub fn relocate_critical_points(
    h: &ScaledPoly,
    target: &Region,
    radius: f64,
    budget: f64,
) -> Result<(ScaledPoly, Relocation)> {
    if !(radius > 0.0) {
        return Err(Error::NonPositive("relocation radius", radius));
    }
    if !(budget > 0.0) {
        return Err(Error::NonPositive("relocation budget", budget));
    }
    let crit = h.critical_spectrum()?;

    // Sup of |h'| over the searched tube, padded by |h''| times the cell
    // reach so sampling at centers cannot undersell it.
    let tube = target.dilate(radius)?;
    let grid = tube.rasterize()?;
    let d1 = h.poly.derivative();
    let d2 = d1.derivative();
    let mut sup1: f64 = 0.0;
    let mut sup2: f64 = 0.0;
    for z in grid.true_centers() {
        let w = h.to_w(z);
        sup1 = sup1.max(d1.eval(w).norm() / h.scale);
        sup2 = sup2.max(d2.eval(w).norm() / (h.scale * h.scale));
    }
    let deriv_sup = sup1 + sup2 * raster_tolerance(grid.spacing);

    let clearance_floor = target.resolution / 4.0;
    let clearance_of = |t: Complex64| -> Result<f64> {
        let mut worst = f64::INFINITY;
        for ccrit in &crit {
            worst = worst.min(target.distance(ccrit + t)?);
        }
        Ok(worst)
    };

    if crit.is_empty() {
        return Ok((
            h.clone(),
            Relocation {
                shift: [0.0, 0.0],
                sup_change: 0.0,
                clearance: f64::INFINITY,
                deriv_sup,
            },
        ));
    }

    let at_rest = clearance_of(Complex64::new(0.0, 0.0))?;
    if at_rest >= clearance_floor {
        return Ok((
            h.clone(),
            Relocation {
                shift: [0.0, 0.0],
                sup_change: 0.0,
                clearance: at_rest,
                deriv_sup,
            },
        ));
    }

    let mut r = radius / 2.0;
    for _ in 0..10 {
        if deriv_sup * r <= budget {
            for k in 0..32 {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / 32.0;
                let t = Complex64::from_polar(r, theta);
                let cl = clearance_of(t)?;
                if cl >= clearance_floor {
                    return Ok((
                        h.translate_arg(t),
                        Relocation {
                            shift: [t.re, t.im],
                            sup_change: deriv_sup * r,
                            clearance: cl,
                            deriv_sup,
                        },
                    ));
                }
            }
        }
        r /= 2.0;
    }

    // Report the offender: the spectrum point currently deepest in the set.
    let mut worst = crit[0];
    let mut worst_d = f64::INFINITY;
    for ccrit in &crit {
        let d = target.distance(*ccrit)?;
        if d < worst_d {
            worst_d = d;
            worst = *ccrit;
        }
    }
    Err(Error::RelocationFailed { at: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::FnMap;
    use crate::geom::{Shape, Window};
    use crate::poly::CPoly;
    use num_complex::Complex64 as C;

    fn c(x: f64, y: f64) -> C {
        C::new(x, y)
    }

    #[test]
    fn quadrature_exact_on_low_degree() {
        let f = |z: C| 3.0 * z * z;
        let v = integrate_segment(f, c(0.0, 0.0), c(1.0, 1.0), 1e-12).unwrap();
        let want = c(1.0, 1.0).powu(3);
        assert!((v - want).norm() < 1e-13, "got {v}");
    }

    #[test]
    fn quadrature_flags_rough_integrand() {
        // Not analytic and not even continuous: |t - 0.3|^{-1} along the
        // segment has a non-integrable spike, so no depth of bisection can
        // reach the requested tolerance.
        let f = |z: C| c(1.0, 0.0) / (z.re - 0.3).abs().max(1e-300);
        let r = integrate_segment(f, c(0.0, 0.0), c(1.0, 0.0), 1e-10);
        assert!(matches!(r, Err(Error::QuadratureTolerance { .. })), "{r:?}");
    }

    #[test]
    fn path_matches_segment_for_entire_integrand() {
        let g = ScaledPoly::new(c(0.0, 0.0), 1.0, CPoly::new(vec![c(0.0, 0.0), c(1.0, 0.0)]))
            .unwrap();
        let f = NonCriticalEntire::new(c(0.0, 0.0), c(1.0, 0.0), g);
        let z = c(1.2, -0.7);
        let tol = 1e-10;
        let direct = f.eval_to(z, tol).unwrap();
        let dogleg = f.eval_along(&[c(-1.0, 2.0), c(2.0, 2.0), z], tol).unwrap();
        assert!((direct - dogleg).norm() <= 2.0 * tol, "{direct} vs {dogleg}");
        // exponent z integrates exp(z): compare with the closed form too
        assert!((direct - z.exp()).norm() < 1e-9, "{direct}");
    }

    #[test]
    fn wire_roundtrip_preserves_values() {
        let poly = CPoly::new(vec![c(0.2, 0.0), c(1.1, -0.5), c(-0.3, 0.4)]);
        let g = ScaledPoly::new(c(0.3, 0.1), 2.0, poly).unwrap();
        let f = NonCriticalEntire::new(c(0.5, -0.2), c(1.0, 1.0), g);
        let wire = f.to_wire();
        let text = serde_json::to_string(&wire).unwrap();
        let back = NonCriticalEntire::from_wire(&serde_json::from_str(&text).unwrap()).unwrap();
        for &z in &[c(0.0, 0.0), c(1.0, 0.5), c(-0.8, 0.3), c(0.5, -0.2)] {
            let a = f.derivative_at(z);
            let b = back.derivative_at(z);
            assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()), "{a} vs {b}");
        }
        let za = f.eval_to(c(1.0, 0.5), 1e-11).unwrap();
        let zb = back.eval_to(c(1.0, 0.5), 1e-11).unwrap();
        assert!((za - zb).norm() < 1e-9);
    }

    #[test]
    fn log_branch_recovers_linear_exponent() {
        // derivative e^z on a disc: the branch anchored near the middle is
        // exactly z, apart from rounding.
        let window = Window::new(-3.0, -3.0, 3.0, 3.0).unwrap();
        let region = Region::new(
            vec![Shape::Disc {
                center: c(0.0, 0.0),
                radius: 2.0,
            }],
            window,
            0.05,
        )
        .unwrap();
        let pts = sample_set(&region, 30.0, 1.5, 11).unwrap();
        let derivs: Vec<C> = pts.iter().map(|z| z.exp()).collect();
        let mut root = 0;
        for (i, z) in pts.iter().enumerate() {
            if z.norm() < pts[root].norm() {
                root = i;
            }
        }
        let branch = log_branch(&pts, &derivs, root).unwrap();
        for (z, b) in pts.iter().zip(&branch) {
            assert!((z - b).norm() < 1e-10, "branch {b} at {z}");
        }
    }

    #[test]
    fn log_branch_detects_winding() {
        // derivative z sampled on a full circle around its zero: no branch
        // exists, and the seam shows up in the neighbour audit.
        let n = 64;
        let pts: Vec<C> = (0..n)
            .map(|k| C::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect();
        let derivs = pts.clone();
        let r = log_branch(&pts, &derivs, 0);
        assert!(matches!(r, Err(Error::SheetInconsistency { .. })), "{r:?}");
    }

    #[test]
    fn path_bound_on_a_disc() {
        let window = Window::new(-2.0, -2.0, 2.0, 2.0).unwrap();
        let region = Region::new(
            vec![Shape::Disc {
                center: c(0.0, 0.0),
                radius: 1.0,
            }],
            window,
            0.05,
        )
        .unwrap();
        let cb = measure_path_bound(&region, c(0.0, 0.0)).unwrap();
        // center to rim is 1; 8-direction metric overshoots by at most
        // ~8 percent, plus the deliberate (1 + 2h) inflation
        assert!(cb >= 1.0 && cb <= 1.35, "path bound {cb}");
    }

    #[test]
    fn path_bound_rejects_split_target() {
        let window = Window::new(-4.0, -4.0, 4.0, 4.0).unwrap();
        let region = Region::new(
            vec![
                Shape::Disc {
                    center: c(-2.0, 0.0),
                    radius: 0.5,
                },
                Shape::Disc {
                    center: c(2.0, 0.0),
                    radius: 0.5,
                },
            ],
            window,
            0.05,
        )
        .unwrap();
        let r = measure_path_bound(&region, c(-2.0, 0.0));
        assert!(matches!(r, Err(Error::DisconnectedTarget(_))), "{r:?}");
    }

    #[test]
    fn build_reproduces_exp_with_linear_exponent() {
        let window = Window::new(-3.0, -3.0, 3.0, 3.0).unwrap();
        let region = Region::new(
            vec![Shape::Disc {
                center: c(0.2, 0.0),
                radius: 1.5,
            }],
            window,
            0.05,
        )
        .unwrap();
        let f = FnMap {
            f: |z: C| z.exp(),
            df: |z: C| z.exp(),
        };
        let build = build_noncritical(&f, &region, &|_| 1e-6, &NonCritParams::default()).unwrap();
        assert!(build.certified, "fit report {:?}", build.fit);
        assert_eq!(build.g.exponent.degree(), 1, "exponent should be linear");
        assert!(build.max_defect <= 1e-6, "defect {}", build.max_defect);
        for &z in &[c(0.9, 0.4), c(-0.5, -0.6), c(0.2, 0.0)] {
            let v = build.g.eval_to(z, 1e-11).unwrap();
            assert!((v - z.exp()).norm() < 1e-8, "{v} vs {} at {z}", z.exp());
        }
    }

    #[test]
    fn relocation_keeps_clear_model_unchanged() {
        // critical points of w^3 - 3w sit at +-1; the target segment along
        // the imaginary axis never comes near them
        let h = ScaledPoly::new(
            c(0.0, 0.0),
            1.0,
            CPoly::new(vec![c(0.0, 0.0), c(-3.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
        )
        .unwrap();
        let window = Window::new(-3.0, -3.0, 3.0, 3.0).unwrap();
        let target = Region::new(
            vec![Shape::Polyline {
                vertices: vec![c(0.0, -2.0), c(0.0, 2.0)],
            }],
            window,
            0.05,
        )
        .unwrap();
        let (shifted, info) = relocate_critical_points(&h, &target, 0.5, 100.0).unwrap();
        assert_eq!(info.shift, [0.0, 0.0]);
        assert_eq!(shifted.poly.coeffs, h.poly.coeffs);
        assert!(info.clearance > 0.9, "clearance {}", info.clearance);
    }

    #[test]
    fn relocation_moves_critical_points_off_target() {
        let h = ScaledPoly::new(
            c(0.0, 0.0),
            1.0,
            CPoly::new(vec![c(0.0, 0.0), c(-3.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
        )
        .unwrap();
        let window = Window::new(-3.0, -3.0, 3.0, 3.0).unwrap();
        let target = Region::new(
            vec![Shape::Polyline {
                vertices: vec![c(-2.0, 0.0), c(2.0, 0.0)],
            }],
            window,
            0.05,
        )
        .unwrap();
        let (shifted, info) = relocate_critical_points(&h, &target, 0.5, 10.0).unwrap();
        let t = c(info.shift[0], info.shift[1]);
        assert!(t.norm() > 0.0 && t.norm() <= 0.25);
        assert!(info.sup_change <= 10.0);
        assert!(info.clearance >= 0.05 / 4.0);
        // the raw spectrum mixes true critical points (+-1 shifted by t)
        // with their conjugate ghosts; both kinds must have moved off the
        // real segment by |Im t|
        let moved = shifted.critical_spectrum().unwrap();
        for m in moved {
            let orig = if m.re > 0.0 { c(1.0, 0.0) } else { c(-1.0, 0.0) };
            let to_true = (m - orig - t).norm();
            let to_ghost = (m - orig - t.conj()).norm();
            assert!(to_true.min(to_ghost) < 1e-8, "critical point {m}");
            assert!(m.im.abs() > 0.04, "still on the segment: {m}");
        }
    }

    #[test]
    fn relocation_fails_inside_fat_target() {
        // both critical points are deep inside the disc; no shift within
        // the allowed radius can reach the complement
        let h = ScaledPoly::new(
            c(0.0, 0.0),
            1.0,
            CPoly::new(vec![c(0.0, 0.0), c(-3.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
        )
        .unwrap();
        let window = Window::new(-4.0, -4.0, 4.0, 4.0).unwrap();
        let target = Region::new(
            vec![Shape::Disc {
                center: c(0.0, 0.0),
                radius: 3.0,
            }],
            window,
            0.05,
        )
        .unwrap();
        let r = relocate_critical_points(&h, &target, 0.5, 100.0);
        assert!(matches!(r, Err(Error::RelocationFailed { .. })), "{r:?}");
    }
}
