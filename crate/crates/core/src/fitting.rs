//! Weighted polynomial fitting and the quantitative margins that drive the
//! staged construction.
//!
//! Fits use successive powers of a centered, scaled variable orthogonalized
//! against the weighted sample inner product (Gram-Schmidt with one
//! re-orthogonalization pass).  The recurrence coefficients are kept so the
//! basis can be re-generated at any evaluation point; nothing ever touches
//! an unscaled Vandermonde matrix.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::func::AnalyticMap;
use crate::geom::{raster_tolerance, Region, Shape};
use crate::poly::{CPoly, ScaledPoly};

// ─────────────────────────────────────────────────────────────────────────
// Samples
// ─────────────────────────────────────────────────────────────────────────

/// Whether a sample sits on the part of the set where the target is
/// holomorphic or merely continuous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PointKind {
    Holomorphic,
    Continuous,
}

/// Aligned sample arrays with pointwise tolerances.
#[derive(Debug, Clone)]
pub struct SampledTarget {
    pub points: Vec<Complex64>,
    pub values: Vec<Complex64>,
    pub kinds: Vec<PointKind>,
    /// Pointwise tolerance; the fit aims for `|residual| < weight` at each
    /// sample.
    pub weights: Vec<f64>,
}

impl SampledTarget {
    pub fn new(
        points: Vec<Complex64>,
        values: Vec<Complex64>,
        kinds: Vec<PointKind>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let n = points.len();
        if n == 0 || values.len() != n || kinds.len() != n || weights.len() != n {
            return Err(Error::BadSamples);
        }
        for w in &weights {
            if !(*w > 0.0) {
                return Err(Error::NonPositive("sample weight", *w));
            }
        }
        Ok(SampledTarget {
            points,
            values,
            kinds,
            weights,
        })
    }

    /// Uniform-tolerance samples of an explicit function.
    pub fn from_fn(
        points: Vec<Complex64>,
        f: impl Fn(Complex64) -> Complex64,
        tol: f64,
    ) -> Result<Self> {
        let values: Vec<Complex64> = points.iter().map(|z| f(*z)).collect();
        let kinds = vec![PointKind::Holomorphic; points.len()];
        let weights = vec![tol; points.len()];
        SampledTarget::new(points, values, kinds, weights)
    }
}

/// Deterministic quasi-uniform samples of a region: sunflower or grid
/// layouts in the interior plus boundary-biased rings, with a seeded jitter
/// on area samples.
///
/// `density` is points per unit area for filled shapes and points per unit
/// length for arcs.
pub fn sample_set(region: &Region, density: f64, boundary_bias: f64, seed: u64) -> Result<Vec<Complex64>> {
    if !(density > 0.0) {
        return Err(Error::NonPositive("density", density));
    }
    if !(boundary_bias > 0.0) {
        return Err(Error::NonPositive("boundary bias", boundary_bias));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Complex64> = Vec::new();
    let lin = density.sqrt() * boundary_bias; // boundary points per unit length
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    for shape in &region.shapes {
        match shape {
            Shape::Disc { center, radius } => {
                let n = ((std::f64::consts::PI * radius * radius * density).round() as usize).max(1);
                for k in 0..n {
                    let r = radius * (((k as f64 + 0.5) / n as f64).sqrt());
                    let th = golden * k as f64;
                    out.push(center + Complex64::from_polar(r, th));
                }
                push_circle(&mut out, *center, *radius, lin);
            }
            Shape::Annulus {
                center,
                inner,
                outer,
            } => {
                let step = 1.0 / density.sqrt();
                let rings = (((outer - inner) / step).ceil() as usize).max(2);
                for ri in 0..=rings {
                    let r = inner + (outer - inner) * ri as f64 / rings as f64;
                    push_circle(&mut out, *center, r, density.sqrt());
                }
                push_circle(&mut out, *center, *inner, lin);
                push_circle(&mut out, *center, *outer, lin);
            }
            Shape::Rect { x0, y0, x1, y1 } => {
                let step = 1.0 / density.sqrt();
                let nx = (((x1 - x0) / step).ceil() as usize).max(1);
                let ny = (((y1 - y0) / step).ceil() as usize).max(1);
                for j in 0..ny {
                    for i in 0..nx {
                        let jit = jitter(&mut rng, step);
                        out.push(Complex64::new(
                            x0 + (i as f64 + 0.5) * (x1 - x0) / nx as f64,
                            y0 + (j as f64 + 0.5) * (y1 - y0) / ny as f64,
                        ) + jit);
                    }
                }
                let corners = [
                    Complex64::new(*x0, *y0),
                    Complex64::new(*x1, *y0),
                    Complex64::new(*x1, *y1),
                    Complex64::new(*x0, *y1),
                    Complex64::new(*x0, *y0),
                ];
                push_polyline(&mut out, &corners, lin);
            }
            Shape::Polygon { vertices } => {
                let (bx0, by0, bx1, by1) = shape.bbox();
                let step = 1.0 / density.sqrt();
                let nx = (((bx1 - bx0) / step).ceil() as usize).max(1);
                let ny = (((by1 - by0) / step).ceil() as usize).max(1);
                for j in 0..ny {
                    for i in 0..nx {
                        let z = Complex64::new(
                            bx0 + (i as f64 + 0.5) * (bx1 - bx0) / nx as f64,
                            by0 + (j as f64 + 0.5) * (by1 - by0) / ny as f64,
                        );
                        if shape.distance(z) == 0.0 {
                            out.push(z);
                        }
                    }
                }
                let mut closed = vertices.clone();
                closed.push(vertices[0]);
                push_polyline(&mut out, &closed, lin);
            }
            Shape::Polyline { vertices } => {
                push_polyline(&mut out, vertices, density);
            }
            Shape::Point { at } => out.push(*at),
            Shape::Dilation { .. } | Shape::Raster(_) => {
                // derived shapes: fall back to raster cells at the matching
                // stride
                let single = Region::new(vec![shape.clone()], region.window, region.resolution)?;
                let g = single.rasterize()?;
                let h = region.resolution;
                let stride = ((1.0 / (h * density.sqrt())).floor() as usize).max(1);
                for j in (0..g.ny).step_by(stride) {
                    for i in (0..g.nx).step_by(stride) {
                        if g.mask[g.idx(i, j)] {
                            out.push(g.center(i, j));
                        }
                    }
                }
                // boundary cells at full rate to keep the rim covered
                for j in 0..g.ny {
                    for i in 0..g.nx {
                        if !g.mask[g.idx(i, j)] {
                            continue;
                        }
                        let edge = i == 0
                            || j == 0
                            || i == g.nx - 1
                            || j == g.ny - 1
                            || !g.mask[g.idx(i - 1, j)]
                            || !g.mask[g.idx(i + 1, j)]
                            || !g.mask[g.idx(i, j - 1)]
                            || !g.mask[g.idx(i, j + 1)];
                        if edge && (i + j) % stride == 0 {
                            out.push(g.center(i, j));
                        }
                    }
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(out)
}

fn jitter(rng: &mut ChaCha8Rng, step: f64) -> Complex64 {
    Complex64::new(
        (rng.gen::<f64>() - 0.5) * 0.3 * step,
        (rng.gen::<f64>() - 0.5) * 0.3 * step,
    )
}

fn push_circle(out: &mut Vec<Complex64>, center: Complex64, radius: f64, per_len: f64) {
    if radius <= 0.0 {
        return;
    }
    let n = ((2.0 * std::f64::consts::PI * radius * per_len).ceil() as usize).max(8);
    for k in 0..n {
        let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        out.push(center + Complex64::from_polar(radius, th));
    }
}

fn push_polyline(out: &mut Vec<Complex64>, vs: &[Complex64], per_len: f64) {
    if vs.len() == 1 {
        out.push(vs[0]);
        return;
    }
    for w in vs.windows(2) {
        let len = (w[1] - w[0]).norm();
        let n = ((len * per_len).ceil() as usize).max(1);
        for k in 0..n {
            out.push(w[0] + (w[1] - w[0]) * (k as f64 / n as f64));
        }
    }
    out.push(*vs.last().unwrap());
}

// ─────────────────────────────────────────────────────────────────────────
// Orthogonalized polynomial fit
// ─────────────────────────────────────────────────────────────────────────

/// Residual summary of a fit.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FitReport {
    pub degree: usize,
    pub max_residual: f64,
    /// max over samples of |residual| / weight; below 1 means every
    /// pointwise tolerance is met.
    pub max_weighted_residual: f64,
    pub tolerance_met: bool,
}

/// Polynomial model in an orthogonalized basis of powers of
/// `(z - center) / scale`.
#[derive(Debug, Clone)]
pub struct PolyApprox {
    pub center: Complex64,
    pub scale: f64,
    degree: usize,
    /// `hess[k]` holds the projection coefficients used when power `k+1`
    /// was orthogonalized; its last entry is the normalization.
    hess: Vec<Vec<Complex64>>,
    /// Norm of the constant basis vector.
    h0: f64,
    /// Coefficients in the orthonormal basis, length `degree + 1`.
    basis_coeffs: Vec<Complex64>,
    pub report: FitReport,
}

struct ArnoldiFit {
    center: Complex64,
    scale: f64,
    h0: f64,
    hess: Vec<Vec<Complex64>>,
    coeffs: Vec<Complex64>,
    /// per-degree residual summaries (plain, weighted)
    residuals: Vec<(f64, f64)>,
}

fn weighted_dot(a: &[Complex64], b: &[Complex64], w: &[f64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.len() {
        acc += a[i].conj() * b[i] * w[i];
    }
    acc / a.len() as f64
}

fn run_arnoldi(target: &SampledTarget, max_degree: usize) -> Result<ArnoldiFit> {
    let m = target.points.len();
    // keep every attempted degree at least twice over-determined; a sparse
    // cloud caps the ladder instead of failing the whole fit
    let max_degree = max_degree.min(m.saturating_sub(1) / 2).max(if m > 1 { 1 } else { 0 });
    // center and scale from the sample cloud
    let mut center = Complex64::new(0.0, 0.0);
    for p in &target.points {
        center += p;
    }
    center /= m as f64;
    let scale = target
        .points
        .iter()
        .map(|p| (p - center).norm())
        .fold(0.0, f64::max)
        .max(1e-9);
    let ws: Vec<Complex64> = target.points.iter().map(|p| (p - center) / scale).collect();
    let iw: Vec<f64> = target.weights.iter().map(|e| 1.0 / (e * e)).collect();

    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(max_degree + 1);
    let ones = vec![Complex64::new(1.0, 0.0); m];
    let h0 = weighted_dot(&ones, &ones, &iw).re.sqrt();
    if !(h0 > 0.0) {
        return Err(Error::RankDeficient(0));
    }
    basis.push(ones.iter().map(|v| v / h0).collect());

    let mut hess: Vec<Vec<Complex64>> = Vec::new();
    let mut coeffs: Vec<Complex64> = Vec::new();
    let mut residual: Vec<Complex64> = target.values.clone();
    let mut residuals: Vec<(f64, f64)> = Vec::new();

    let absorb = |deg: usize,
                      residual: &mut Vec<Complex64>,
                      coeffs: &mut Vec<Complex64>,
                      q: &Vec<Complex64>|
     -> (f64, f64) {
        let c = weighted_dot(q, residual, &iw);
        coeffs.push(c);
        let mut max_r = 0.0f64;
        let mut max_w = 0.0f64;
        for i in 0..residual.len() {
            residual[i] -= c * q[i];
            let r = residual[i].norm();
            max_r = max_r.max(r);
            max_w = max_w.max(r / target.weights[i]);
        }
        let _ = deg;
        (max_r, max_w)
    };

    residuals.push(absorb(0, &mut residual, &mut coeffs, &basis[0]));

    for k in 0..max_degree {
        let qk = &basis[k];
        let mut v: Vec<Complex64> = qk.iter().zip(ws.iter()).map(|(q, w)| q * w).collect();
        let mut col: Vec<Complex64> = Vec::with_capacity(k + 2);
        for q in basis.iter() {
            let h = weighted_dot(q, &v, &iw);
            for i in 0..m {
                v[i] -= h * q[i];
            }
            col.push(h);
        }
        // one re-orthogonalization pass
        for (j, q) in basis.iter().enumerate() {
            let h2 = weighted_dot(q, &v, &iw);
            for i in 0..m {
                v[i] -= h2 * q[i];
            }
            col[j] += h2;
        }
        let hn = weighted_dot(&v, &v, &iw).re.max(0.0).sqrt();
        if hn < 1e-13 * (1.0 + col.iter().map(|c| c.norm()).fold(0.0, f64::max)) {
            // the samples stop supporting new degrees (repeated or nearly
            // coincident points); keep the degrees already built
            break;
        }
        col.push(Complex64::new(hn, 0.0));
        hess.push(col);
        basis.push(v.into_iter().map(|x| x / hn).collect());
        residuals.push(absorb(k + 1, &mut residual, &mut coeffs, &basis[k + 1]));
    }

    Ok(ArnoldiFit {
        center,
        scale,
        h0,
        hess,
        coeffs,
        residuals,
    })
}

fn finish(fit: ArnoldiFit, degree: usize) -> PolyApprox {
    let (max_r, max_w) = fit.residuals[degree];
    PolyApprox {
        center: fit.center,
        scale: fit.scale,
        degree,
        hess: fit.hess[..degree].to_vec(),
        h0: fit.h0,
        basis_coeffs: fit.coeffs[..=degree].to_vec(),
        report: FitReport {
            degree,
            max_residual: max_r,
            max_weighted_residual: max_w,
            tolerance_met: max_w <= 1.0,
        },
    }
}

/// Weighted least-squares fit.  Degrees are computed incrementally up to
/// `max_degree`, capped at half the sample count and at the rank the cloud
/// actually supports; the degree with the smallest maximal weighted
/// residual is returned, so the reported residual never increases when
/// `max_degree` grows on fixed samples.
pub fn fit_polynomial(target: &SampledTarget, max_degree: usize) -> Result<PolyApprox> {
    let fit = run_arnoldi(target, max_degree)?;
    let mut best = 0usize;
    for d in 1..fit.residuals.len() {
        if fit.residuals[d].1 < fit.residuals[best].1 {
            best = d;
        }
    }
    Ok(finish(fit, best))
}

/// Degree-escalation variant: returns the smallest degree whose weighted
/// residual is below 1, or the best effort with `tolerance_met = false`.
pub fn fit_to_tolerance(target: &SampledTarget, max_degree: usize) -> Result<PolyApprox> {
    let fit = run_arnoldi(target, max_degree)?;
    for d in 0..fit.residuals.len() {
        if fit.residuals[d].1 <= 1.0 {
            return Ok(finish(fit, d));
        }
    }
    let mut best = 0usize;
    for d in 1..fit.residuals.len() {
        if fit.residuals[d].1 < fit.residuals[best].1 {
            best = d;
        }
    }
    Ok(finish(fit, best))
}

impl PolyApprox {
    pub fn degree(&self) -> usize {
        self.degree
    }

    fn basis_at(&self, w: Complex64) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.degree + 1;
        let mut q = Vec::with_capacity(n);
        let mut dq = Vec::with_capacity(n);
        q.push(Complex64::new(1.0 / self.h0, 0.0));
        dq.push(Complex64::new(0.0, 0.0));
        for k in 0..self.degree {
            let col = &self.hess[k];
            let hn = col[k + 1].re;
            let mut v = w * q[k];
            let mut dv = q[k] + w * dq[k];
            for j in 0..=k {
                v -= col[j] * q[j];
                dv -= col[j] * dq[j];
            }
            q.push(v / hn);
            dq.push(dv / hn);
        }
        (q, dq)
    }

    /// Convert to an explicit polynomial in the fit variable
    /// `w = (z - center) / scale`.
    pub fn to_scaled_poly(&self) -> ScaledPoly {
        let n = self.degree + 1;
        let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        cols.push(vec![Complex64::new(1.0 / self.h0, 0.0)]);
        for k in 0..self.degree {
            let col = &self.hess[k];
            let hn = col[k + 1].re;
            // multiply basis polynomial k by w
            let mut v = vec![Complex64::new(0.0, 0.0); cols[k].len() + 1];
            for (i, c) in cols[k].iter().enumerate() {
                v[i + 1] = *c;
            }
            for j in 0..=k {
                for (i, c) in cols[j].iter().enumerate() {
                    v[i] -= col[j] * c;
                }
            }
            for c in v.iter_mut() {
                *c /= hn;
            }
            cols.push(v);
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
        for (k, col) in cols.iter().enumerate() {
            for (i, c) in col.iter().enumerate() {
                coeffs[i] += self.basis_coeffs[k] * c;
            }
        }
        ScaledPoly::new(self.center, self.scale, CPoly::new(coeffs)).expect("positive scale")
    }
}

impl AnalyticMap for PolyApprox {
    fn eval(&self, z: Complex64) -> Complex64 {
        let w = (z - self.center) / self.scale;
        let (q, _) = self.basis_at(w);
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, b) in self.basis_coeffs.iter().zip(q.iter()) {
            acc += c * b;
        }
        acc
    }

    fn deriv(&self, z: Complex64) -> Complex64 {
        let w = (z - self.center) / self.scale;
        let (_, dq) = self.basis_at(w);
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, b) in self.basis_coeffs.iter().zip(dq.iter()) {
            acc += c * b;
        }
        acc / self.scale
    }
}

// ─────────────────────────────────────────────────────────────────────────
// Margins
// ─────────────────────────────────────────────────────────────────────────

/// Radius usable for derivative control: `min(1, dist(K, complement of H))`.
///
/// Requires every raster cell of `K` to sit strictly inside `H`.  An empty
/// `K` yields the cap 1.
pub fn chart_radius(k: &Region, h: &Region) -> Result<f64> {
    k.same_frame(h)?;
    let grid = k.rasterize()?;
    let centers = grid.true_centers();
    if centers.is_empty() {
        return Ok(1.0);
    }
    let mut depth = f64::INFINITY;
    for z in centers {
        if h.distance(z)? > 0.0 {
            return Err(Error::Precondition(
                "K is not contained in the interior of H".into(),
            ));
        }
        let d = h.boundary_distance(z)?;
        if d <= 0.0 {
            return Err(Error::Precondition(
                "K touches the boundary of H at raster scale".into(),
            ));
        }
        depth = depth.min(d);
    }
    Ok(depth.min(1.0))
}

/// Perturbation budget `m r / 4`: staying below it keeps the derivative
/// floor above `m / 2` on the inner compact via the Cauchy estimate.
pub fn safety_margin(m: f64, r: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::NonPositive("derivative floor", m));
    }
    if !(r > 0.0) {
        return Err(Error::NonPositive("chart radius", r));
    }
    Ok(m * r / 4.0)
}

/// Measured derivative floor over a region's raster.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DerivFloor {
    pub value: f64,
    pub at: (f64, f64),
    /// Floor recomputed on a half-spacing grid.
    pub refined: f64,
    /// True when the two grid levels agree to 5 percent.
    pub converged: bool,
}

/// Minimum of `|f'|` over the raster of `region`, with one refinement pass
/// at half the spacing.  Errors out when the floor drops below the machine
/// noise threshold `1e-12 * max |f'|` (a critical point is then suspected).
pub fn min_derivative(f: &dyn AnalyticMap, region: &Region) -> Result<DerivFloor> {
    min_derivative_checked(&|z| Some(f.deriv(z)), region)
}

/// Same as [`min_derivative`] but for targets that are only piecewise
/// holomorphic; a `None` derivative at any sampled cell is a precondition
/// failure.
pub fn min_derivative_checked(
    deriv: &dyn Fn(Complex64) -> Option<Complex64>,
    region: &Region,
) -> Result<DerivFloor> {
    let scan = |res: f64| -> Result<(f64, Complex64, f64)> {
        let r = Region::new(region.shapes.clone(), region.window, res)?;
        let g = r.rasterize()?;
        let mut min = f64::INFINITY;
        let mut max = 0.0f64;
        let mut at = Complex64::new(0.0, 0.0);
        for z in g.true_centers() {
            let d = deriv(z).ok_or_else(|| {
                Error::Precondition(format!("target is not holomorphic at sampled point {z}"))
            })?;
            let n = d.norm();
            max = max.max(n);
            if n < min {
                min = n;
                at = z;
            }
        }
        if !min.is_finite() {
            return Err(Error::EmptyRegion);
        }
        Ok((min, at, max))
    };
    let (m0, at0, max0) = scan(region.resolution)?;
    let (m1, at1, max1) = scan(region.resolution / 2.0)?;
    let max = max0.max(max1);
    let (value, at) = if m1 <= m0 { (m1, at1) } else { (m0, at0) };
    if max == 0.0 || value < 1e-12 * max {
        return Err(Error::CriticalPointSuspected { at, mag: value });
    }
    Ok(DerivFloor {
        value,
        at: (at.re, at.im),
        refined: m1,
        converged: (m0 - m1).abs() <= 0.05 * m1.max(1e-300),
    })
}

// ─────────────────────────────────────────────────────────────────────────
// Telescoping budgets
// ─────────────────────────────────────────────────────────────────────────

/// Stagewise error budgets with verified tail bounds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BudgetLedger {
    pub delta_tilde: Vec<f64>,
    pub delta: Vec<f64>,
    pub eps: Vec<f64>,
    pub eps_tilde: Vec<f64>,
}

/// Halving schedule `delta_n = 2^-(n+2) * min_{j<=n} delta_tilde_j` and
/// `eps_tilde_n = min(2^-(n+1) eps_n, delta_n)`.
///
/// The powers of two make every scaling exact in binary floating point, so
/// the tail inequalities hold with a factor-two margin, not merely up to
/// rounding.
pub fn telescoping_budget(delta_tilde: &[f64], eps: &[f64]) -> Result<BudgetLedger> {
    if delta_tilde.is_empty() || delta_tilde.len() != eps.len() {
        return Err(Error::BadSamples);
    }
    for d in delta_tilde {
        if !(*d > 0.0) {
            return Err(Error::NonPositive("delta_tilde", *d));
        }
    }
    for (i, e) in eps.iter().enumerate() {
        if !(*e > 0.0) {
            return Err(Error::NonPositive("eps", *e));
        }
        if i > 0 && *e > eps[i - 1] {
            return Err(Error::NonMonotoneEpsilon(i));
        }
    }
    let n = delta_tilde.len();
    let mut delta = Vec::with_capacity(n);
    let mut running = f64::INFINITY;
    for (k, d) in delta_tilde.iter().enumerate() {
        running = running.min(*d);
        delta.push(running * 2.0f64.powi(-(k as i32) - 2));
    }
    let eps_tilde: Vec<f64> = eps
        .iter()
        .zip(delta.iter())
        .enumerate()
        .map(|(k, (e, d))| (e * 2.0f64.powi(-(k as i32) - 1)).min(*d))
        .collect();
    let ledger = BudgetLedger {
        delta_tilde: delta_tilde.to_vec(),
        delta,
        eps: eps.to_vec(),
        eps_tilde,
    };
    ledger.verify()?;
    Ok(ledger)
}

impl BudgetLedger {
    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    /// Sum of `delta_k` for `k >= n`.
    pub fn tail_delta(&self, n: usize) -> f64 {
        self.delta[n.min(self.delta.len())..].iter().sum()
    }

    /// Sum of `eps_tilde_k` for `k >= n`.
    pub fn tail_eps_tilde(&self, n: usize) -> f64 {
        self.eps_tilde[n.min(self.eps_tilde.len())..].iter().sum()
    }

    /// Check the tail inequalities this schedule promises:
    /// `sum_{k>=n} delta_k < delta_tilde_n` and
    /// `sum_{k>=n} eps_tilde_k <= eps_{n-1}`.
    pub fn verify(&self) -> Result<()> {
        for n in 0..self.len() {
            let tail = self.tail_delta(n);
            if !(tail < self.delta_tilde[n]) {
                return Err(Error::Precondition(format!(
                    "delta tail {tail} reaches delta_tilde[{n}]"
                )));
            }
        }
        for n in 1..self.len() {
            let tail = self.tail_eps_tilde(n);
            if !(tail <= self.eps[n - 1]) {
                return Err(Error::Precondition(format!(
                    "eps_tilde tail {tail} exceeds eps[{}]",
                    n - 1
                )));
            }
        }
        Ok(())
    }
}

/// Tolerance slack a grid verdict must allow for: one cell of position
/// uncertainty times a Lipschitz bound.
pub fn grid_slack(spacing: f64, lipschitz: f64) -> f64 {
    raster_tolerance(spacing) * lipschitz
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Window;
    use num_complex::Complex64 as C;

    fn c(x: f64, y: f64) -> C {
        C::new(x, y)
    }

    fn disc_samples(n: usize, radius: f64) -> Vec<C> {
        // deterministic sunflower over a disc
        let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
        (0..n)
            .map(|k| {
                C::from_polar(
                    radius * ((k as f64 + 0.5) / n as f64).sqrt(),
                    golden * k as f64,
                )
            })
            .collect()
    }

    #[test]
    fn exact_reproduction_of_low_degree() {
        let pts = disc_samples(120, 1.0);
        let t = SampledTarget::from_fn(pts, |z| z * z, 1.0).unwrap();
        let fit = fit_polynomial(&t, 2).unwrap();
        assert!(fit.report.max_residual < 1e-13, "{}", fit.report.max_residual);
        // evaluation matches z^2 at fresh points
        for k in 0..10 {
            let z = C::from_polar(0.8, 0.61 * k as f64);
            assert!((AnalyticMap::eval(&fit, z) - z * z).norm() < 1e-12);
            assert!((AnalyticMap::deriv(&fit, z) - 2.0 * z).norm() < 1e-10);
        }
    }

    #[test]
    fn exp_fit_degree_ten() {
        let pts = disc_samples(200, 1.0);
        let t = SampledTarget::from_fn(pts, |z| z.exp(), 1.0).unwrap();
        let fit = fit_polynomial(&t, 10).unwrap();
        assert!(fit.report.max_residual < 1e-6, "{}", fit.report.max_residual);
    }

    #[test]
    fn residual_monotone_in_degree() {
        let pts = disc_samples(300, 1.0);
        let t = SampledTarget::from_fn(pts, |z| (3.0 * z).cos() + z, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for d in [2usize, 4, 8, 12, 16, 20] {
            let fit = fit_polynomial(&t, d).unwrap();
            assert!(
                fit.report.max_weighted_residual <= prev + 1e-12,
                "degree {d}: {} > {prev}",
                fit.report.max_weighted_residual
            );
            prev = fit.report.max_weighted_residual;
        }
    }

    #[test]
    fn to_scaled_poly_matches_basis_eval() {
        let pts = disc_samples(150, 2.0);
        let t = SampledTarget::from_fn(pts, |z| (z * 0.5).exp() + z * z, 1.0).unwrap();
        let fit = fit_polynomial(&t, 12).unwrap();
        let sp = fit.to_scaled_poly();
        for k in 0..20 {
            let z = C::from_polar(1.7, 0.37 * k as f64);
            assert!(
                (AnalyticMap::eval(&fit, z) - sp.eval(z)).norm() < 1e-9,
                "mismatch at {z}"
            );
        }
    }

    #[test]
    fn repeated_points_cap_the_degree() {
        // two distinct locations support a line and nothing more: the fit
        // must stop at degree 1 instead of failing or inventing rank
        let pts = vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let t = SampledTarget::from_fn(pts, |z| z, 1.0).unwrap();
        let fit = fit_polynomial(&t, 3).unwrap();
        assert!(fit.report.degree <= 1, "degree {}", fit.report.degree);
        assert!(fit.report.max_residual < 1e-12, "{:?}", fit.report);
    }

    // Minimax oracle for |x| on [-1, 1] at even degree 2q: by symmetry this
    // equals the minimax error of degree q for sqrt(t) on [0, 1], found by a
    // Remez exchange there.  Using the substituted problem avoids the
    // degeneracy of symmetric references for even targets.
    fn remez_minimax_abs(degree: usize) -> f64 {
        use nalgebra::{DMatrix, DVector};
        assert_eq!(degree % 2, 0);
        let n = degree / 2;
        let m = n + 2;
        let f = |t: f64| t.sqrt();
        // Chebyshev basis mapped to [0, 1]
        let cheb = |k: usize, t: f64| {
            (k as f64 * (2.0 * t - 1.0).clamp(-1.0, 1.0).acos()).cos()
        };
        let mut ts: Vec<f64> = (0..m)
            .map(|r| (1.0 + (std::f64::consts::PI * r as f64 / (m - 1) as f64).cos()) / 2.0)
            .collect();
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let grid: Vec<f64> = (0..=20000).map(|i| i as f64 / 20000.0).collect();
        let mut sup = f64::INFINITY;
        let mut level = 0.0f64;
        for _ in 0..60 {
            let mut a = DMatrix::zeros(m, m);
            let mut b = DVector::zeros(m);
            for (r, t) in ts.iter().enumerate() {
                for k in 0..=n {
                    a[(r, k)] = cheb(k, *t);
                }
                a[(r, n + 1)] = if r % 2 == 0 { 1.0 } else { -1.0 };
                b[r] = f(*t);
            }
            let sol = a.lu().solve(&b).expect("reference system solvable");
            level = sol[n + 1].abs();
            let coef: Vec<f64> = (0..=n).map(|k| sol[k]).collect();
            let err = |t: f64| {
                let p: f64 = coef.iter().enumerate().map(|(k, c)| c * cheb(k, t)).sum();
                f(t) - p
            };
            // one extremum per maximal run of constant sign: the candidate
            // reference alternates by construction
            let mut cand: Vec<(f64, f64)> = Vec::new();
            let mut run_sign = 0i32;
            for t in &grid {
                let e = err(*t);
                let s = if e > 0.0 { 1 } else { -1 };
                if s != run_sign {
                    cand.push((*t, e));
                    run_sign = s;
                } else if e.abs() > cand.last().unwrap().1.abs() {
                    *cand.last_mut().unwrap() = (*t, e);
                }
            }
            if cand.len() < m {
                break;
            }
            // trim to m points, dropping the weaker end each time
            while cand.len() > m {
                if cand.first().unwrap().1.abs() <= cand.last().unwrap().1.abs() {
                    cand.remove(0);
                } else {
                    cand.pop();
                }
            }
            let new_sup = cand.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
            ts = cand.iter().map(|p| p.0).collect();
            if (new_sup - level).abs() <= 1e-10 * level {
                sup = new_sup;
                break;
            }
            sup = new_sup;
        }
        // at convergence the achieved sup error and the level agree
        assert!(
            (sup - level).abs() < 1e-6 * level,
            "exchange did not converge: sup {sup} level {level}"
        );
        sup
    }

    #[test]
    fn abs_fit_tracks_minimax_order() {
        // |x| on [-1,1] at degree 20: least squares lands within a small
        // factor of the true minimax level.
        let pts: Vec<C> = (0..401)
            .map(|k| c(-1.0 + 2.0 * k as f64 / 400.0, 0.0))
            .collect();
        let t = SampledTarget::from_fn(pts, |z| c(z.re.abs(), 0.0), 1.0).unwrap();
        let fit = fit_polynomial(&t, 20).unwrap();
        let ls = fit.report.max_residual;
        let minimax = remez_minimax_abs(20);
        // Bernstein asymptotics pin the oracle itself near 0.2802 / 20.
        assert!(
            (minimax - 0.0140).abs() < 0.004,
            "remez level off: {minimax}"
        );
        assert!(ls >= minimax * 0.99, "LS cannot beat minimax: {ls} < {minimax}");
        assert!(ls <= 5.0 * 0.0069_f64 * 5.0, "LS residual {ls} way off scale");
        assert!(
            ls / minimax < 5.0,
            "LS max residual {ls} not within factor 5 of minimax {minimax}"
        );
    }

    #[test]
    fn chart_radius_concentric_discs() {
        let w = Window::new(-4.0, -4.0, 4.0, 4.0).unwrap();
        let h = 0.02;
        let k = Region::new(
            vec![Shape::Disc {
                center: c(0.0, 0.0),
                radius: 1.0,
            }],
            w,
            h,
        )
        .unwrap();
        let big = Region::new(
            vec![Shape::Disc {
                center: c(0.0, 0.0),
                radius: 2.0,
            }],
            w,
            h,
        )
        .unwrap();
        let r = chart_radius(&k, &big).unwrap();
        assert!((r - 1.0).abs() <= 2.0 * raster_tolerance(h), "r = {r}");
        // cap at 1 even with more room
        let huge = Region::new(
            vec![Shape::Disc {
                center: c(0.0, 0.0),
                radius: 3.9,
            }],
            w,
            h,
        )
        .unwrap();
        assert_eq!(chart_radius(&k, &huge).unwrap(), 1.0);
    }

    #[test]
    fn chart_radius_rejects_escaping_k() {
        let w = Window::new(-4.0, -4.0, 4.0, 4.0).unwrap();
        let k = Region::new(
            vec![Shape::Disc {
                center: c(1.5, 0.0),
                radius: 1.0,
            }],
            w,
            0.05,
        )
        .unwrap();
        let h = Region::new(
            vec![Shape::Disc {
                center: c(0.0, 0.0),
                radius: 2.0,
            }],
            w,
            0.05,
        )
        .unwrap();
        assert!(chart_radius(&k, &h).is_err());
    }

    #[test]
    fn safety_margin_quarter_rule() {
        assert_eq!(safety_margin(2.0, 0.5).unwrap(), 0.25);
        assert!(safety_margin(0.0, 1.0).is_err());
    }

    #[test]
    fn min_derivative_exp_on_disc() {
        let w = Window::new(-2.0, -2.0, 2.0, 2.0).unwrap();
        let reg = Region::new(
            vec![Shape::Disc {
                center: c(0.0, 0.0),
                radius: 1.0,
            }],
            w,
            0.05,
        )
        .unwrap();
        let f = crate::func::FnMap {
            f: |z: C| z.exp(),
            df: |z: C| z.exp(),
        };
        let floor = min_derivative(&f, &reg).unwrap();
        // min of |e^z| on the disc is e^-1 at z = -1, up to grid slack
        let expect = (-1.0f64).exp();
        assert!((floor.value - expect).abs() < 0.05, "{}", floor.value);
        assert!(floor.converged);
    }

    #[test]
    fn min_derivative_flags_critical_point() {
        let w = Window::new(-2.0, -2.0, 2.0, 2.0).unwrap();
        let reg = Region::new(
            vec![Shape::Disc {
                center: c(0.0, 0.0),
                radius: 1.0,
            }],
            w,
            0.02,
        )
        .unwrap();
        // critical point placed exactly on a cell center of the 0.02 grid
        let z0 = c(0.01, 0.01);
        let f = crate::func::FnMap {
            f: move |z: C| (z - z0) * (z - z0),
            df: move |z: C| 2.0 * (z - z0),
        };
        match min_derivative(&f, &reg) {
            Err(Error::CriticalPointSuspected { mag, .. }) => assert!(mag < 1e-15),
            other => panic!("expected critical point, got {other:?}"),
        }
        // identically vanishing derivative is also flagged
        let flat = crate::func::FnMap {
            f: |_z: C| c(1.0, 0.0),
            df: |_z: C| c(0.0, 0.0),
        };
        match min_derivative(&flat, &reg) {
            Err(Error::CriticalPointSuspected { .. }) => {}
            other => panic!("expected critical point, got {other:?}"),
        }
    }

    #[test]
    fn budget_schedule_tails() {
        let dt = vec![0.4, 0.2, 0.3, 0.05];
        let eps = vec![0.1, 0.1, 0.05, 0.05];
        let l = telescoping_budget(&dt, &eps).unwrap();
        // delta_0 = 0.4 / 4, delta_1 = 0.2 / 8, delta_2 = 0.2 / 16 ...
        assert_eq!(l.delta[0], 0.1);
        assert_eq!(l.delta[1], 0.025);
        assert_eq!(l.delta[2], 0.0125);
        assert!((l.eps_tilde[0] - 0.05f64.min(0.1)).abs() < 1e-15);
        for n in 0..l.len() {
            assert!(2.0 * l.tail_delta(n) <= l.delta_tilde[n] + 1e-15);
        }
    }

    #[test]
    fn budget_rejects_nonmonotone_eps() {
        let dt = vec![0.4, 0.2];
        let eps = vec![0.05, 0.1];
        match telescoping_budget(&dt, &eps) {
            Err(Error::NonMonotoneEpsilon(1)) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sample_set_disc_counts() {
        let w = Window::new(-2.0, -2.0, 2.0, 2.0).unwrap();
        let reg = Region::new(
            vec![Shape::Disc {
                center: c(0.0, 0.0),
                radius: 1.0,
            }],
            w,
            0.05,
        )
        .unwrap();
        let pts = sample_set(&reg, 10.0, 1.0, 7).unwrap();
        let interior = pts
            .iter()
            .filter(|z| z.norm() < 1.0 - 1e-9)
            .count();
        // about pi * 10 interior points plus a boundary ring
        assert!((28..=35).contains(&interior), "interior {interior}");
        assert!(pts.len() > interior);
        // determinism
        let pts2 = sample_set(&reg, 10.0, 1.0, 7).unwrap();
        assert_eq!(pts, pts2);
    }

    #[test]
    fn sample_set_segment_spacing() {
        let w = Window::new(-2.0, -2.0, 2.0, 2.0).unwrap();
        let reg = Region::new(
            vec![Shape::Polyline {
                vertices: vec![c(-1.0, 0.0), c(1.0, 0.0)],
            }],
            w,
            0.05,
        )
        .unwrap();
        let pts = sample_set(&reg, 10.0, 1.0, 0).unwrap();
        assert_eq!(pts.len(), 21); // spacing 1/10 over length 2, inclusive
        for p in pts.windows(2) {
            assert!(((p[1] - p[0]).norm() - 0.1).abs() < 1e-12);
        }
    }
}
