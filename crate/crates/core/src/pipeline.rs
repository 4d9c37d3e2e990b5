//! The staged approximation scheme: exhaust the set by Runge compacts,
//! fit and repair a model on each stage, and glue it to the running
//! function with a bump that saturates exactly.
//!
//! Every stage splits its tolerance into measured thirds (polynomial fit,
//! critical-point relocation, zero-free interpolation) and aborts with the
//! failing substep rather than letting an unmet budget propagate.  The
//! deliverable after stage `N` is the last interpolant: an entire function
//! with nowhere-vanishing derivative that the final audit compares against
//! the original target over the set.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audit::{error_audit, AuditReport};
use crate::error::{Error, Result};
use crate::fitting::{
    chart_radius, fit_to_tolerance, min_derivative, sample_set, SampledTarget,
};
use crate::func::{AnalyticMap, Target};
use crate::geom::{raster_tolerance, RasterPatch, Region, Shape};
use crate::noncrit::{
    build_noncritical, relocate_critical_points, NonCritParams, NonCriticalEntire,
};
use crate::topology::{
    build_exhaustion, decompose_semi_admissible, label_components, min_depth, DecomposeOutcome,
    Exhaustion,
};

/// Smooth cutoff that is exactly 1 within half the reach of a compact and
/// exactly 0 beyond the full reach.
///
/// Exact saturation is the load-bearing property: wherever the cutoff is
/// 0 or 1 the glued function is bit-identical to one of its branches, so
/// analyticity there is inherited rather than argued.
#[derive(Debug, Clone)]
pub struct Bump {
    patch: RasterPatch,
    rho1: f64,
}

fn tail(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

impl Bump {
    pub fn new(patch: RasterPatch, rho1: f64) -> Result<Self> {
        if !(rho1 > 0.0) {
            return Err(Error::NonPositive("bump reach", rho1));
        }
        Ok(Bump { patch, rho1 })
    }

    /// 1 for `d(z, K) <= rho1 / 2`, 0 for `d >= rho1`, smooth between.
    pub fn chi(&self, z: Complex64) -> f64 {
        let d = self.patch.distance(z);
        let t = (self.rho1 - d) / (0.5 * self.rho1);
        let a = tail(t);
        if a == 0.0 {
            return 0.0;
        }
        let b = tail(1.0 - t);
        if b == 0.0 {
            return 1.0;
        }
        a / (a + b)
    }

    pub fn reach(&self) -> f64 {
        self.rho1
    }
}

/// The running function of the scheme: the original target at the bottom,
/// and one glue layer per completed stage.
pub enum PiecewiseFn {
    Base(Box<dyn Target>),
    Mix {
        chi: Bump,
        g: NonCriticalEntire,
        prev: Box<PiecewiseFn>,
    },
}

impl PiecewiseFn {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            PiecewiseFn::Base(f) => f.eval(z),
            PiecewiseFn::Mix { chi, g, prev } => {
                let c = chi.chi(z);
                if c == 0.0 {
                    prev.eval(z)
                } else if c == 1.0 {
                    AnalyticMap::eval(g, z)
                } else {
                    AnalyticMap::eval(g, z) * c + prev.eval(z) * (1.0 - c)
                }
            }
        }
    }

    /// Derivative where one branch owns the point outright; none inside a
    /// blend collar, where the cutoff's own gradient would be needed.
    pub fn deriv(&self, z: Complex64) -> Option<Complex64> {
        match self {
            PiecewiseFn::Base(f) => f.deriv(z),
            PiecewiseFn::Mix { chi, g, prev } => {
                let c = chi.chi(z);
                if c == 0.0 {
                    prev.deriv(z)
                } else if c == 1.0 {
                    Some(AnalyticMap::deriv(g, z))
                } else {
                    None
                }
            }
        }
    }

    /// True when every glue layer is saturated at `z`, so the value is
    /// bit-identical to a single branch.
    pub fn is_bitwise_at(&self, z: Complex64) -> bool {
        match self {
            PiecewiseFn::Base(_) => true,
            PiecewiseFn::Mix { chi, prev, .. } => {
                let c = chi.chi(z);
                if c == 0.0 {
                    prev.is_bitwise_at(z)
                } else {
                    c == 1.0
                }
            }
        }
    }
}

/// Join a disconnected raster into one walkable piece with straight
/// corridors between nearest boundary cells of its components.
///
/// Returns the widened region and the corridors added.  The corridors are
/// scaffolding for path bounds and fits; they are not part of the set the
/// final audit speaks for.
pub fn add_corridors(region: &Region) -> Result<(Region, usize)> {
    let g = region.rasterize()?;
    let (labels, count) = label_components(&g.mask, g.nx, g.ny, true);
    if count <= 1 {
        return Ok((region.clone(), 0));
    }

    // boundary cells per component: enough for closest-pair search and two
    // orders smaller than full membership lists
    let mut boundary: Vec<Vec<Complex64>> = vec![Vec::new(); count];
    let mut centroid = vec![Complex64::new(0.0, 0.0); count];
    let mut cells = vec![0usize; count];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let idx = g.idx(i, j);
            if !g.mask[idx] {
                continue;
            }
            let comp = labels[idx] as usize - 1;
            centroid[comp] += g.center(i, j);
            cells[comp] += 1;
            let mut edge = i == 0 || j == 0 || i == g.nx - 1 || j == g.ny - 1;
            if !edge {
                edge = !(g.mask[g.idx(i - 1, j)]
                    && g.mask[g.idx(i + 1, j)]
                    && g.mask[g.idx(i, j - 1)]
                    && g.mask[g.idx(i, j + 1)]);
            }
            if edge {
                boundary[comp].push(g.center(i, j));
            }
        }
    }
    for (c, n) in centroid.iter_mut().zip(&cells) {
        *c /= *n as f64;
    }

    // spanning tree over component centroids, then one corridor per edge
    let mut in_tree = vec![false; count];
    let mut dist = vec![f64::INFINITY; count];
    let mut parent = vec![usize::MAX; count];
    dist[0] = 0.0;
    let mut corridors: Vec<Shape> = Vec::new();
    for _ in 0..count {
        let mut best = usize::MAX;
        for i in 0..count {
            if !in_tree[i] && (best == usize::MAX || dist[i] < dist[best]) {
                best = i;
            }
        }
        in_tree[best] = true;
        if parent[best] != usize::MAX {
            let (a, b) = closest_pair(&boundary[parent[best]], &boundary[best]);
            corridors.push(Shape::Polyline {
                vertices: vec![a, b],
            });
        }
        for j in 0..count {
            if !in_tree[j] {
                let d = (centroid[j] - centroid[best]).norm();
                if d < dist[j] {
                    dist[j] = d;
                    parent[j] = best;
                }
            }
        }
    }

    let n = corridors.len();
    let widened = region.union(&Region::new(corridors, region.window, region.resolution)?)?;
    Ok((widened, n))
}

fn closest_pair(a: &[Complex64], b: &[Complex64]) -> (Complex64, Complex64) {
    let mut best = (a[0], b[0]);
    let mut best_d = f64::INFINITY;
    for p in a {
        for q in b {
            let d = (p - q).norm_sqr();
            if d < best_d {
                best_d = d;
                best = (*p, *q);
            }
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct PipelineParams {
    pub stages: usize,
    /// Fit samples per unit area (per unit length on arcs).
    pub density: f64,
    pub boundary_bias: f64,
    pub seed: u64,
    pub max_degree: usize,
    pub quad_tol: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            stages: 2,
            density: 40.0,
            boundary_bias: 2.0,
            seed: 17,
            max_degree: 40,
            quad_tol: 1e-12,
        }
    }
}

/// Everything a stage measured, in the order it was measured.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub eps_n: f64,
    pub delta_n: f64,
    pub eps_tilde: f64,
    pub corridors: usize,
    pub rho_fit: f64,
    pub fit_degree: usize,
    pub fit_residual: f64,
    pub relocation_shift: [f64; 2],
    pub relocation_change: f64,
    pub noncrit_defect: f64,
    pub noncrit_direct: f64,
    pub path_bound: f64,
    pub rho1: f64,
    pub deriv_floor: f64,
    pub chart_radius: f64,
    pub delta_tilde: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    pub stages: Vec<StageReport>,
    pub eps0: f64,
    /// Sum of the per-stage tolerances: the a priori bound on the total
    /// drift of the running function over the set.
    pub final_bound: f64,
    pub audit: AuditReport,
    pub audit_samples: usize,
}

pub struct PipelineResult {
    pub report: PipelineReport,
    /// The last interpolant: entire, derivative free of zeros everywhere.
    pub deliverable: NonCriticalEntire,
    /// The running function with its full glue history.
    pub chain: PiecewiseFn,
    /// Union of the glue supports; off this region the chain is
    /// bit-identical to the original target.
    pub glue_cover: Region,
    pub exhaustion: Exhaustion,
}

fn abort(stage: usize, substep: &'static str, detail: impl Into<String>) -> Error {
    Error::StageAbort {
        stage,
        substep,
        detail: detail.into(),
    }
}

fn min_eps_on(region: &Region, eps: &dyn Fn(Complex64) -> f64, fallback: f64) -> Result<f64> {
    let g = region.rasterize()?;
    let mut worst = f64::INFINITY;
    for z in g.true_centers() {
        let e = eps(z);
        if !(e > 0.0) {
            return Err(Error::NonPositive("pointwise tolerance", e));
        }
        worst = worst.min(e);
    }
    Ok(if worst.is_finite() { worst } else { fallback })
}

/// Run the staged scheme for `params.stages` stages on the set `e` with
/// pointwise tolerance `eps`, starting from the target `f0`.
pub fn run_pipeline(
    f0: Box<dyn Target>,
    e: &Region,
    eps: &dyn Fn(Complex64) -> f64,
    params: &PipelineParams,
) -> Result<PipelineResult> {
    let n_stages = params.stages;
    if n_stages == 0 {
        return Err(Error::Precondition("pipeline needs at least one stage".into()));
    }
    let model = match decompose_semi_admissible(e)? {
        DecomposeOutcome::Model(m) => m,
        DecomposeOutcome::Failed { reason, .. } => {
            return Err(Error::Precondition(format!(
                "pipeline needs a semi-admissible set: {reason}"
            )))
        }
    };
    let h_regions: Vec<Region> = model
        .h_components
        .iter()
        .map(|p| Region::from_patch(p.clone()))
        .collect::<Result<_>>()?;

    let exhaustion = build_exhaustion(e, n_stages + 2)?;
    let mut k_regions = Vec::with_capacity(n_stages + 3);
    for n in 0..=n_stages + 2 {
        k_regions.push(exhaustion.stage(n)?);
    }

    let window = e.window;
    let res = e.resolution;
    let inset = 2.0 * res;
    let within = Region::new(
        vec![Shape::Rect {
            x0: window.x0 + inset,
            y0: window.y0 + inset,
            x1: window.x1 - inset,
            y1: window.y1 - inset,
        }],
        window,
        res,
    )?;

    let eps0 = min_eps_on(e, eps, f64::INFINITY)?;
    if !eps0.is_finite() {
        return Err(Error::EmptyRegion);
    }

    let mut delta_tilde = vec![eps0];
    let mut prev_u2_margin = f64::INFINITY;
    let mut current = PiecewiseFn::Base(f0);
    let mut stage_reports = Vec::new();
    let mut final_bound = 0.0;
    let mut glue_cover = Region::empty(window, res)?;

    for n in 1..=n_stages {
        // tolerance split: the floor of all past safety margins, damped
        // geometrically so the tails stay summable
        let eps_n = min_eps_on(&e.intersect(&k_regions[n + 2])?, eps, eps0)?;
        let margin_floor = delta_tilde.iter().copied().fold(f64::INFINITY, f64::min);
        let delta_n = (0.5f64).powi(n as i32 + 2) * margin_floor;
        let eps_tilde = ((0.5f64).powi(n as i32 + 1) * eps_n).min(delta_n);
        let tol3 = eps_tilde / 3.0;

        // geometry of the stage: worked set, analytic core, fit collar
        let l_raw = e.intersect(&k_regions[n + 1])?.union(&k_regions[n - 1])?;
        let (l_plus, corridors) = add_corridors(&l_raw).map_err(|err| {
            abort(n, "corridors", err.to_string())
        })?;

        let mut c_core = k_regions[n - 1].clone();
        for hr in &h_regions {
            if crate::geom::region_distance(hr, &k_regions[n + 1]).unwrap_or(f64::INFINITY)
                <= raster_tolerance(res)
            {
                c_core = c_core.union(hr)?;
            }
        }
        if c_core.is_empty_raster()? {
            return Err(abort(n, "core", "no analytic core inside this stage"));
        }
        let depth = min_depth(&c_core, &within).map_err(|err| abort(n, "core", err.to_string()))?;
        let rho_fit = (0.5 * depth).min(prev_u2_margin / 4.0).max(res);
        let h2 = c_core.dilate(rho_fit)?;
        let fit_domain = l_plus.union(&h2)?;

        // third one: polynomial fit to the running function
        let points = sample_set(&fit_domain, params.density, params.boundary_bias, params.seed + n as u64)?;
        let values: Vec<Complex64> = points.iter().map(|z| current.eval(*z)).collect();
        let kinds = vec![crate::fitting::PointKind::Holomorphic; points.len()];
        let weights = vec![tol3; points.len()];
        let target = SampledTarget::new(points.clone(), values, kinds, weights)?;
        let approx = fit_to_tolerance(&target, params.max_degree)
            .map_err(|err| abort(n, "fit", err.to_string()))?;
        if !approx.report.tolerance_met {
            return Err(abort(
                n,
                "fit",
                format!(
                    "residual {:.3e} exceeds the stage third {:.3e} at degree {}",
                    approx.report.max_residual, tol3, approx.report.degree
                ),
            ));
        }
        let h_poly = approx.to_scaled_poly();

        // third two: move critical points off the worked set
        let (h_tilde, relocation) = relocate_critical_points(&h_poly, &l_plus, rho_fit, tol3)
            .map_err(|err| abort(n, "relocate", err.to_string()))?;

        // third three: zero-free interpolant of the repaired model
        let ncp = NonCritParams {
            density: params.density,
            boundary_bias: params.boundary_bias,
            seed: params.seed + 1000 + n as u64,
            max_degree: params.max_degree,
            quad_tol: params.quad_tol,
        };
        let build = build_noncritical(&h_tilde, &l_plus, &|_| tol3, &ncp)
            .map_err(|err| abort(n, "noncrit", err.to_string()))?;
        if !build.certified {
            return Err(abort(
                n,
                "noncrit",
                format!(
                    "chain defect {:.3e} not certified against {:.3e}",
                    build.max_defect, tol3
                ),
            ));
        }
        // spot-check the chain bound directly on a slice of the samples
        let mut direct: f64 = 0.0;
        let stride = (points.len() / 64).max(1);
        for z in points.iter().step_by(stride) {
            let got = build
                .g
                .eval_to(*z, tol3 / 10.0)
                .map_err(|err| abort(n, "noncrit", err.to_string()))?;
            direct = direct.max((got - h_tilde.eval(*z)).norm());
        }
        if direct > tol3 + tol3 / 10.0 {
            return Err(abort(
                n,
                "noncrit",
                format!("measured |g - h| {direct:.3e} exceeds the stage third {tol3:.3e}"),
            ));
        }

        // glue reach: stay clear of set components not yet absorbed, stay
        // inside the next compact, stay inside the window
        let kn = &k_regions[n];
        let mut sep = f64::INFINITY;
        for hr in &h_regions {
            let d = crate::geom::region_distance(kn, hr)?;
            if d > raster_tolerance(res) {
                sep = sep.min(d);
            }
        }
        let kn_depth = min_depth(kn, &within).map_err(|err| abort(n, "glue", err.to_string()))?;
        let next_margin = min_depth(kn, &k_regions[n + 1])
            .map_err(|err| abort(n, "glue", err.to_string()))?;
        let rho1 = (0.5 * kn_depth.min(sep)).min(next_margin);
        if rho1 < res {
            return Err(abort(
                n,
                "glue",
                format!("glue reach {rho1:.3e} fell below the resolution"),
            ));
        }
        let kn_patch = kn.rasterize()?.to_patch()?;
        let bump = Bump::new(kn_patch, rho1)?;
        let u1 = kn.dilate(rho1)?;
        glue_cover = glue_cover.union(&u1)?;

        // safety margin for the stages still to come
        let u2 = kn.dilate(0.5 * rho1)?;
        let floor = min_derivative(&build.g, &u2).map_err(|err| abort(n, "margin", err.to_string()))?;
        let r_chart = chart_radius(kn, &u2).map_err(|err| abort(n, "margin", err.to_string()))?;
        let margin = crate::fitting::safety_margin(floor.value, r_chart)
            .map_err(|err| abort(n, "margin", err.to_string()))?;

        stage_reports.push(StageReport {
            stage: n,
            eps_n,
            delta_n,
            eps_tilde,
            corridors,
            rho_fit,
            fit_degree: approx.report.degree,
            fit_residual: approx.report.max_residual,
            relocation_shift: relocation.shift,
            relocation_change: relocation.sup_change,
            noncrit_defect: build.max_defect,
            noncrit_direct: direct,
            path_bound: build.path_bound,
            rho1,
            deriv_floor: floor.value,
            chart_radius: r_chart,
            delta_tilde: margin,
        });

        delta_tilde.push(margin);
        prev_u2_margin = 0.5 * rho1;
        final_bound += eps_tilde;
        current = PiecewiseFn::Mix {
            chi: bump,
            g: build.g,
            prev: Box::new(current),
        };
    }

    let deliverable = match &current {
        PiecewiseFn::Mix { g, .. } => g.clone(),
        PiecewiseFn::Base(_) => unreachable!("loop ran at least once"),
    };

    // the deliverable against the original target, over the set inside the
    // last fully worked compact
    let audit_region = e.intersect(&k_regions[n_stages])?;
    let audit_points = sample_set(
        &audit_region,
        2.0 * params.density,
        params.boundary_bias,
        params.seed + 9999,
    )?;
    let base = base_of(&current);
    let mut errors = Vec::with_capacity(audit_points.len());
    let mut tols = Vec::with_capacity(audit_points.len());
    for z in &audit_points {
        let got = deliverable.eval_to(*z, params.quad_tol.max(1e-14))?;
        errors.push((got - base.eval(*z)).norm());
        tols.push(eps(*z));
    }
    let audit = error_audit(&errors, &tols)?;

    Ok(PipelineResult {
        report: PipelineReport {
            stages: stage_reports,
            eps0,
            final_bound,
            audit,
            audit_samples: audit_points.len(),
        },
        deliverable,
        chain: current,
        glue_cover,
        exhaustion,
    })
}

fn base_of(chain: &PiecewiseFn) -> &dyn Target {
    match chain {
        PiecewiseFn::Base(f) => f.as_ref(),
        PiecewiseFn::Mix { prev, .. } => base_of(prev),
    }
}
