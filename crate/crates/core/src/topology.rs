//! Windowed topological verdicts: holes, hulls, the boundary-escape test,
//! interior-component growth, semi-admissible decomposition and compact
//! exhaustions.
//!
//! Every verdict is relative to a window and a raster spacing and says
//! nothing about the plane outside the window.  Set cells are 8-connected,
//! complement cells 4-connected, so a curve one cell wide separates its two
//! sides.

use std::collections::BTreeSet;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geom::{raster_tolerance, Grid, RasterPatch, Region, Shape, Window};

/// Frame a verdict was computed on.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Stamp {
    pub window: Window,
    pub resolution: f64,
}

impl Stamp {
    pub fn of(region: &Region) -> Self {
        Stamp {
            window: region.window,
            resolution: region.resolution,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn passed(self) -> bool {
        matches!(self, Verdict::Pass)
    }

    /// Pass only when both pass; any fail wins over inconclusive.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Pass, Pass) => Pass,
            _ => Inconclusive,
        }
    }
}

/// Generic single-question verdict for reporting.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TopologyReport {
    pub stamp: Stamp,
    pub op: String,
    pub verdict: Verdict,
    pub detail: String,
    pub witness: Option<[f64; 2]>,
    pub count: usize,
}

// ─────────────────────────────────────────────────────────────────────────
// Component labeling
// ─────────────────────────────────────────────────────────────────────────

/// Flood-fill labeling; labels are 1-based in row-major discovery order, so
/// the numbering is deterministic.
pub fn label_components(mask: &[bool], nx: usize, ny: usize, eight: bool) -> (Vec<u32>, usize) {
    let mut labels = vec![0u32; mask.len()];
    let mut next = 0u32;
    let mut stack: Vec<usize> = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let i = idx % nx;
            let j = idx / nx;
            let i0 = i.saturating_sub(1);
            let i1 = (i + 1).min(nx - 1);
            let j0 = j.saturating_sub(1);
            let j1 = (j + 1).min(ny - 1);
            for jj in j0..=j1 {
                for ii in i0..=i1 {
                    if !eight && ii != i && jj != j {
                        continue;
                    }
                    let n = jj * nx + ii;
                    if mask[n] && labels[n] == 0 {
                        labels[n] = next;
                        stack.push(n);
                    }
                }
            }
        }
    }
    (labels, next as usize)
}

fn border_labels(labels: &[u32], nx: usize, ny: usize) -> Vec<bool> {
    let count = labels.iter().copied().max().unwrap_or(0) as usize;
    let mut border = vec![false; count + 1];
    for i in 0..nx {
        border[labels[i] as usize] = true;
        border[labels[(ny - 1) * nx + i] as usize] = true;
    }
    for j in 0..ny {
        border[labels[j * nx] as usize] = true;
        border[labels[j * nx + nx - 1] as usize] = true;
    }
    border
}

fn masks_by_label(labels: &[u32], keep: &[bool]) -> Vec<Vec<bool>> {
    let count = keep.len() - 1;
    let mut out: Vec<Vec<bool>> = vec![Vec::new(); count];
    for (l, m) in out.iter_mut().enumerate() {
        if keep[l + 1] {
            *m = labels.iter().map(|x| *x as usize == l + 1).collect();
        }
    }
    out.into_iter().filter(|m| !m.is_empty()).collect()
}

// ─────────────────────────────────────────────────────────────────────────
// Holes, hull, Runge
// ─────────────────────────────────────────────────────────────────────────

/// Merged mask of all complement components that do not reach the window
/// border.
fn holes_mask(g: &Grid) -> Vec<bool> {
    let inv: Vec<bool> = g.mask.iter().map(|b| !b).collect();
    let (labels, count) = label_components(&inv, g.nx, g.ny, false);
    let border = border_labels(&labels, g.nx, g.ny);
    let mut hole = vec![false; count + 1];
    for l in 1..=count {
        hole[l] = !border[l];
    }
    labels.iter().map(|l| *l > 0 && hole[*l as usize]).collect()
}

/// Bounded complement components of the rasterized region, one patch each,
/// in row-major discovery order.
pub fn holes(e: &Region) -> Result<Vec<RasterPatch>> {
    let g = e.rasterize()?;
    let inv: Vec<bool> = g.mask.iter().map(|b| !b).collect();
    let (labels, count) = label_components(&inv, g.nx, g.ny, false);
    let border = border_labels(&labels, g.nx, g.ny);
    let mut keep = vec![false; count + 1];
    for l in 1..=count {
        keep[l] = !border[l];
    }
    masks_by_label(&labels, &keep)
        .into_iter()
        .map(|m| RasterPatch::from_mask(g.window, g.spacing, m))
        .collect()
}

/// Merged hole cells as a grid on the region's frame.
pub fn holes_grid(e: &Region) -> Result<Grid> {
    let g = e.rasterize()?;
    let mask = holes_mask(&g);
    Ok(Grid {
        nx: g.nx,
        ny: g.ny,
        window: g.window,
        spacing: g.spacing,
        mask,
    })
}

/// The region together with its holes filled.  When there are no holes the
/// input is returned unchanged; otherwise the filled cells join the shape
/// list as one raster patch.
pub fn hull(e: &Region) -> Result<Region> {
    let g = e.rasterize()?;
    let mask = holes_mask(&g);
    if !mask.iter().any(|b| *b) {
        return Ok(e.clone());
    }
    let patch = RasterPatch::from_mask(g.window, g.spacing, mask)?;
    let mut shapes = e.shapes.clone();
    shapes.push(Shape::Raster(patch));
    Region::new(shapes, e.window, e.resolution)
}

/// No bounded complement components on this frame.
pub fn is_runge(e: &Region) -> Result<bool> {
    let g = e.rasterize()?;
    Ok(!holes_mask(&g).iter().any(|b| *b))
}

// ─────────────────────────────────────────────────────────────────────────
// Boundary escape (windowed)
// ─────────────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BehReport {
    pub stamp: Stamp,
    pub margin: f64,
    pub verdict: Verdict,
    /// Center of the first offending cell, row-major.
    pub witness: Option<[f64; 2]>,
    pub outside_components: usize,
    pub enclosed_components: usize,
    pub detail: String,
}

/// Windowed escape test for the union of a closed set and one compact.
///
/// Complement components holding a window corner count as the outside.  The
/// verdict fails when any other complement component reaches the margin band
/// along the border: such a channel leaves the window without being
/// anchored to the outside, so on this window it witnesses a piece of the
/// complement that the union may pinch off on the way to infinity.  When
/// every corner is covered the outside cannot be anchored and the test is
/// inconclusive.
pub fn check_beh_probe(e: &Region, k: &Region, margin: Option<f64>) -> Result<BehReport> {
    e.same_frame(k)?;
    let margin = margin.unwrap_or(2.0 * e.resolution);
    if !(margin > 0.0) {
        return Err(Error::NonPositive("margin", margin));
    }
    let u = e.union(k)?;
    let g = u.rasterize()?;
    let stamp = Stamp::of(e);
    let inv: Vec<bool> = g.mask.iter().map(|b| !b).collect();
    let (labels, count) = label_components(&inv, g.nx, g.ny, false);

    let corners = [
        g.idx(0, 0),
        g.idx(g.nx - 1, 0),
        g.idx(0, g.ny - 1),
        g.idx(g.nx - 1, g.ny - 1),
    ];
    let outside: BTreeSet<u32> = corners
        .iter()
        .filter(|idx| inv[**idx])
        .map(|idx| labels[*idx])
        .collect();
    if outside.is_empty() {
        return Ok(BehReport {
            stamp,
            margin,
            verdict: Verdict::Inconclusive,
            witness: None,
            outside_components: 0,
            enclosed_components: count,
            detail: "all window corners are covered; the outside cannot be anchored".into(),
        });
    }

    let h = g.spacing;
    let mut witness = None;
    'scan: for j in 0..g.ny {
        let dy = ((j as f64 + 0.5) * h).min((g.ny - 1 - j) as f64 * h + 0.5 * h);
        for i in 0..g.nx {
            let dx = ((i as f64 + 0.5) * h).min((g.nx - 1 - i) as f64 * h + 0.5 * h);
            if dx.min(dy) > margin {
                continue;
            }
            let idx = g.idx(i, j);
            if inv[idx] && !outside.contains(&labels[idx]) {
                let z = g.center(i, j);
                witness = Some([z.re, z.im]);
                break 'scan;
            }
        }
    }

    let enclosed = count - outside.len();
    Ok(match witness {
        Some(w) => BehReport {
            stamp,
            margin,
            verdict: Verdict::Fail,
            witness: Some(w),
            outside_components: outside.len(),
            enclosed_components: enclosed,
            detail: "a complement channel reaches the border without touching any corner".into(),
        },
        None => BehReport {
            stamp,
            margin,
            verdict: Verdict::Pass,
            witness: None,
            outside_components: outside.len(),
            enclosed_components: enclosed,
            detail: "every complement component near the border is anchored at a corner".into(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BehSuiteReport {
    pub stamp: Stamp,
    pub verdict: Verdict,
    pub probes: Vec<BehReport>,
}

/// Escape test over a battery of probe compacts: the per-probe verdicts
/// fold with fail dominating, then inconclusive.  An empty battery checks
/// the set on its own.
pub fn check_beh(e: &Region, probes: &[Region]) -> Result<BehSuiteReport> {
    let stamp = Stamp::of(e);
    let mut reports = Vec::new();
    if probes.is_empty() {
        let empty = Region::empty(e.window, e.resolution)?;
        reports.push(check_beh_probe(e, &empty, None)?);
    }
    for k in probes {
        reports.push(check_beh_probe(e, k, None)?);
    }
    let verdict = reports
        .iter()
        .fold(Verdict::Pass, |acc, r| acc.and(r.verdict));
    Ok(BehSuiteReport {
        stamp,
        verdict,
        probes: reports,
    })
}

// ─────────────────────────────────────────────────────────────────────────
// Semi-admissible decomposition
// ─────────────────────────────────────────────────────────────────────────

/// Split of a closed set into fat components and a thin rest, certified at
/// raster scale.
#[derive(Debug, Clone)]
pub struct ClosedSetModel {
    pub stamp: Stamp,
    /// 8-connected components of the filled shapes, each compact inside the
    /// window and the closure of its raster interior.
    pub h_components: Vec<RasterPatch>,
    /// Cells of the set not covered by filled shapes; certified to have no
    /// raster interior.
    pub s_part: RasterPatch,
}

#[derive(Debug, Clone)]
pub enum DecomposeOutcome {
    Model(ClosedSetModel),
    Failed {
        reason: String,
        witness: Option<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecomposeReport {
    pub stamp: Stamp,
    pub semi_admissible: bool,
    pub h_components: usize,
    pub s_cells: usize,
    pub reason: Option<String>,
    pub witness: Option<[f64; 2]>,
}

impl DecomposeOutcome {
    pub fn report(&self, stamp: Stamp) -> DecomposeReport {
        match self {
            DecomposeOutcome::Model(m) => DecomposeReport {
                stamp,
                semi_admissible: true,
                h_components: m.h_components.len(),
                s_cells: m.s_part.cell_count(),
                reason: None,
                witness: None,
            },
            DecomposeOutcome::Failed { reason, witness } => DecomposeReport {
                stamp,
                semi_admissible: false,
                h_components: 0,
                s_cells: 0,
                reason: Some(reason.clone()),
                witness: *witness,
            },
        }
    }
}

fn has_full_neighborhood(mask: &[bool], nx: usize, ny: usize, idx: usize) -> bool {
    let i = idx % nx;
    let j = idx / nx;
    if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
        return false;
    }
    for jj in j - 1..=j + 1 {
        for ii in i - 1..=i + 1 {
            if !mask[jj * nx + ii] {
                return false;
            }
        }
    }
    true
}

/// Try to split the set into compact fat components plus a thin rest.
///
/// Fails when a fat component reaches the window border (its compactness
/// cannot be certified here), when a fat component has no interior cell at
/// this spacing, or when the thin rest develops raster interior (thin parts
/// piling up below the resolution).
pub fn decompose_semi_admissible(e: &Region) -> Result<DecomposeOutcome> {
    let stamp = Stamp::of(e);
    let full = e.rasterize()?;
    let filled = e.filled_part()?.rasterize()?;
    let (labels, count) = label_components(&filled.mask, full.nx, full.ny, true);
    let border = border_labels(&labels, full.nx, full.ny);

    for l in 1..=count {
        if border[l] {
            let idx = labels.iter().position(|x| *x as usize == l).unwrap();
            let z = full.center(idx % full.nx, idx / full.nx);
            return Ok(DecomposeOutcome::Failed {
                reason: "a fat component reaches the window border".into(),
                witness: Some([z.re, z.im]),
            });
        }
    }
    let mut has_interior = vec![false; count + 1];
    for idx in 0..filled.mask.len() {
        if filled.mask[idx] && has_full_neighborhood(&filled.mask, full.nx, full.ny, idx) {
            has_interior[labels[idx] as usize] = true;
        }
    }
    for l in 1..=count {
        if !has_interior[l] {
            let idx = labels.iter().position(|x| *x as usize == l).unwrap();
            let z = full.center(idx % full.nx, idx / full.nx);
            return Ok(DecomposeOutcome::Failed {
                reason: "a fat component has no interior cell at this spacing".into(),
                witness: Some([z.re, z.im]),
            });
        }
    }

    let s_mask: Vec<bool> = full
        .mask
        .iter()
        .zip(filled.mask.iter())
        .map(|(f, h)| *f && !*h)
        .collect();
    for idx in 0..s_mask.len() {
        if s_mask[idx] && has_full_neighborhood(&full.mask, full.nx, full.ny, idx) {
            let z = full.center(idx % full.nx, idx / full.nx);
            return Ok(DecomposeOutcome::Failed {
                reason: "the thin part has interior at this spacing".into(),
                witness: Some([z.re, z.im]),
            });
        }
    }

    let keep = {
        let mut k = vec![true; count + 1];
        k[0] = false;
        k
    };
    let h_components = masks_by_label(&labels, &keep)
        .into_iter()
        .map(|m| RasterPatch::from_mask(full.window, full.spacing, m))
        .collect::<Result<Vec<_>>>()?;
    let s_part = RasterPatch::from_mask(full.window, full.spacing, s_mask)?;
    Ok(DecomposeOutcome::Model(ClosedSetModel {
        stamp,
        h_components,
        s_part,
    }))
}

// ─────────────────────────────────────────────────────────────────────────
// Interior components
// ─────────────────────────────────────────────────────────────────────────

/// Interior components of a set as cell masks, either straight from a
/// successful decomposition or, when that fails, by grouping the filled
/// shapes through overlapping interiors.
///
/// The grouping predicate is strict: two shapes join only when some cell
/// center lies in the interior of both, so shapes that merely touch stay
/// separate even though their rasters merge.
pub struct InteriorModel {
    pub comp_masks: Vec<Vec<bool>>,
    pub from_decomposition: bool,
}

fn union_find_root(parent: &mut Vec<usize>, mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn interiors_overlap(a: &Shape, b: &Shape, window: Window, h: f64) -> bool {
    let (ax0, ay0, ax1, ay1) = a.bbox();
    let (bx0, by0, bx1, by1) = b.bbox();
    let x0 = ax0.max(bx0).max(window.x0);
    let y0 = ay0.max(by0).max(window.y0);
    let x1 = ax1.min(bx1).min(window.x1);
    let y1 = ay1.min(by1).min(window.y1);
    if x1 <= x0 || y1 <= y0 {
        return false;
    }
    let i0 = ((x0 - window.x0) / h - 0.5).floor().max(0.0) as usize;
    let j0 = ((y0 - window.y0) / h - 0.5).floor().max(0.0) as usize;
    let i1 = ((x1 - window.x0) / h + 0.5).ceil() as usize;
    let j1 = ((y1 - window.y0) / h + 0.5).ceil() as usize;
    for j in j0..=j1 {
        let y = window.y0 + (j as f64 + 0.5) * h;
        if y > window.y1 {
            break;
        }
        for i in i0..=i1 {
            let x = window.x0 + (i as f64 + 0.5) * h;
            if x > window.x1 {
                break;
            }
            let z = Complex64::new(x, y);
            if a.distance(z) == 0.0
                && b.distance(z) == 0.0
                && a.boundary_distance(z) > 0.0
                && b.boundary_distance(z) > 0.0
            {
                return true;
            }
        }
    }
    false
}

pub fn interior_model(e: &Region) -> Result<(InteriorModel, DecomposeOutcome)> {
    let outcome = decompose_semi_admissible(e)?;
    if let DecomposeOutcome::Model(m) = &outcome {
        let comp_masks = m
            .h_components
            .iter()
            .map(|p| p.cells().to_vec())
            .collect();
        return Ok((
            InteriorModel {
                comp_masks,
                from_decomposition: true,
            },
            outcome,
        ));
    }

    let filled: Vec<(usize, &Shape)> = e
        .shapes
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_filled())
        .collect();
    let n = filled.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for a in 0..n {
        for b in a + 1..n {
            let (ra, rb) = (
                union_find_root(&mut parent, a),
                union_find_root(&mut parent, b),
            );
            if ra == rb {
                continue;
            }
            if interiors_overlap(filled[a].1, filled[b].1, e.window, e.resolution) {
                let hi = ra.max(rb);
                let lo = ra.min(rb);
                parent[hi] = lo;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = union_find_root(&mut parent, i);
        groups[r].push(filled[i].0);
    }
    let mut comp_masks = Vec::new();
    for g in groups.into_iter().filter(|g| !g.is_empty()) {
        let shapes: Vec<Shape> = g.iter().map(|i| e.shapes[*i].clone()).collect();
        let mask = Region::new(shapes, e.window, e.resolution)?.rasterize()?.mask;
        comp_masks.push(mask);
    }
    Ok((
        InteriorModel {
            comp_masks,
            from_decomposition: false,
        },
        outcome,
    ))
}

// ─────────────────────────────────────────────────────────────────────────
// Interior-component growth bound
// ─────────────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CondGReport {
    pub stamp: Stamp,
    pub verdict: Verdict,
    pub components_meeting: usize,
    pub q_cells: usize,
    pub detail: String,
}

pub struct CondGOutcome {
    pub report: CondGReport,
    /// The compact hull: the probe together with every interior component
    /// meeting it.
    pub q: RasterPatch,
}

/// Check that the interior components meeting a compact probe stay jointly
/// bounded inside the window.
pub fn check_condition_g(e: &Region, k: &Region) -> Result<CondGOutcome> {
    let (model, _) = interior_model(e)?;
    check_condition_g_with(e, k, &model)
}

pub fn check_condition_g_with(
    e: &Region,
    k: &Region,
    model: &InteriorModel,
) -> Result<CondGOutcome> {
    e.same_frame(k)?;
    let stamp = Stamp::of(e);
    let kg = k.rasterize()?;
    let mut q = kg.mask.clone();
    let mut meeting = 0usize;
    for comp in &model.comp_masks {
        let meets = comp
            .iter()
            .zip(kg.mask.iter())
            .any(|(c, km)| *c && *km);
        if meets {
            meeting += 1;
            for (qc, c) in q.iter_mut().zip(comp.iter()) {
                *qc |= *c;
            }
        }
    }
    let qgrid = Grid {
        nx: kg.nx,
        ny: kg.ny,
        window: kg.window,
        spacing: kg.spacing,
        mask: q,
    };
    let escapes = qgrid.touches_border();
    let q_cells = qgrid.true_count();
    let report = CondGReport {
        stamp,
        verdict: if escapes { Verdict::Fail } else { Verdict::Pass },
        components_meeting: meeting,
        q_cells,
        detail: if escapes {
            "the interior components meeting the probe reach the window border".into()
        } else {
            "probe plus meeting interior components stay inside the window".into()
        },
    };
    Ok(CondGOutcome {
        report,
        q: qgrid.to_patch()?,
    })
}

// ─────────────────────────────────────────────────────────────────────────
// Carleman classification
// ─────────────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CarlemanReport {
    pub stamp: Stamp,
    pub semi_admissible: bool,
    pub decompose_reason: Option<String>,
    pub complement_connected: Verdict,
    pub locally_connected: Verdict,
    pub interior_growth: Verdict,
    pub carleman: Verdict,
    pub holes: usize,
    pub probe_radii: Vec<f64>,
}

/// Default probes: three concentric discs at the window center.
pub fn default_probes(window: Window, resolution: f64) -> Result<Vec<Region>> {
    let r = window.inradius();
    [0.25, 0.5, 0.75]
        .iter()
        .map(|f| {
            Region::new(
                vec![Shape::Disc {
                    center: window.center(),
                    radius: f * r,
                }],
                window,
                resolution,
            )
        })
        .collect()
}

/// Windowed Carleman classification: the complement must be connected
/// through the window border, the escape suite must pass over the default
/// probes, and interior components meeting each probe must stay bounded.
pub fn classify_carleman(e: &Region) -> Result<CarlemanReport> {
    let stamp = Stamp::of(e);
    let (model, outcome) = interior_model(e)?;
    let (semi_admissible, decompose_reason) = match &outcome {
        DecomposeOutcome::Model(_) => (true, None),
        DecomposeOutcome::Failed { reason, .. } => (false, Some(reason.clone())),
    };

    let g = e.rasterize()?;
    let n_holes = {
        let hm = holes_mask(&g);
        label_components(&hm, g.nx, g.ny, false).1
    };
    let complement_connected = if n_holes == 0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };

    let probes = default_probes(e.window, e.resolution)?;
    let probe_radii: Vec<f64> = probes
        .iter()
        .map(|p| match &p.shapes[0] {
            Shape::Disc { radius, .. } => *radius,
            _ => unreachable!(),
        })
        .collect();

    // local connectedness of the extended complement shows up here as the
    // holes of E with each probe staying clear of the window margin
    let locally_connected = check_beh(e, &probes)?.verdict;

    let mut interior_growth = Verdict::Pass;
    for p in &probes {
        let out = check_condition_g_with(e, p, &model)?;
        interior_growth = interior_growth.and(out.report.verdict);
        if interior_growth == Verdict::Fail {
            break;
        }
    }

    let carleman = complement_connected
        .and(locally_connected)
        .and(interior_growth);
    Ok(CarlemanReport {
        stamp,
        semi_admissible,
        decompose_reason,
        complement_connected,
        locally_connected,
        interior_growth,
        carleman,
        holes: n_holes,
        probe_radii,
    })
}

// ─────────────────────────────────────────────────────────────────────────
// Exhaustion
// ─────────────────────────────────────────────────────────────────────────

/// Nested Runge compacts absorbing the set stage by stage.
#[derive(Debug, Clone)]
pub struct Exhaustion {
    pub window: Window,
    pub resolution: f64,
    pub radii: Vec<f64>,
    stages: Vec<RasterPatch>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExhaustReport {
    pub stamp: Stamp,
    pub stages: usize,
    pub radii: Vec<f64>,
    pub cells: Vec<usize>,
}

impl Exhaustion {
    /// Number of built stages.
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Stage `n` as a region; stage 0 is empty.
    pub fn stage(&self, n: usize) -> Result<Region> {
        if n == 0 {
            return Region::empty(self.window, self.resolution);
        }
        let p = self
            .stages
            .get(n - 1)
            .ok_or_else(|| Error::Precondition(format!("exhaustion has no stage {n}")))?;
        Region::from_patch(p.clone())
    }

    pub fn report(&self) -> ExhaustReport {
        ExhaustReport {
            stamp: Stamp {
                window: self.window,
                resolution: self.resolution,
            },
            stages: self.stages.len(),
            radii: self.radii.clone(),
            cells: self.stages.iter().map(|p| p.cell_count()).collect(),
        }
    }
}

fn patch_outradius(mask: &[bool], g: &Grid) -> f64 {
    let wc = g.window.center();
    let mut r = 0.0f64;
    for j in 0..g.ny {
        for i in 0..g.nx {
            if mask[g.idx(i, j)] {
                r = r.max((g.center(i, j) - wc).norm());
            }
        }
    }
    r + g.spacing
}

/// Build nested compacts `K_1 subset ... subset K_n` from growing central
/// discs: each stage is the disc, plus the holes of set-union-disc, plus
/// every component of the set the result meets.  Verified per stage:
/// set-union-stage has no holes, the stage itself has no holes, components
/// met are absorbed whole, and the previous stage sits in the interior.
pub fn build_exhaustion(e: &Region, n_max: usize) -> Result<Exhaustion> {
    if n_max == 0 {
        return Err(Error::Precondition("exhaustion needs at least one stage".into()));
    }
    let g = e.rasterize()?;
    let h = e.resolution;
    let inradius = e.window.inradius();
    let (comp_labels, comp_count) = label_components(&g.mask, g.nx, g.ny, true);
    let comp_border = border_labels(&comp_labels, g.nx, g.ny);

    let mut stages: Vec<RasterPatch> = Vec::with_capacity(n_max);
    let mut radii: Vec<f64> = Vec::with_capacity(n_max);
    let mut prev_mask: Vec<bool> = vec![false; g.mask.len()];
    let mut prev_outradius = 0.0f64;

    for n in 1..=n_max {
        let base = n as f64 * inradius / (n_max as f64 + 1.0);
        let nu = base.max(prev_outradius + 2.0 * h);
        if nu >= inradius - 2.0 * h {
            return Err(Error::ExhaustionFailed {
                stage: n,
                reason: format!("stage radius {nu:.4} does not fit the window"),
            });
        }
        let delta = Region::new(
            vec![Shape::Disc {
                center: e.window.center(),
                radius: nu,
            }],
            e.window,
            h,
        )?
        .rasterize()?;

        // fill the holes of set-union-disc
        let u: Vec<bool> = g
            .mask
            .iter()
            .zip(delta.mask.iter())
            .map(|(a, b)| *a || *b)
            .collect();
        let ug = Grid {
            nx: g.nx,
            ny: g.ny,
            window: g.window,
            spacing: h,
            mask: u,
        };
        let fill = holes_mask(&ug);
        let mut l_mask: Vec<bool> = delta
            .mask
            .iter()
            .zip(fill.iter())
            .map(|(a, b)| *a || *b)
            .collect();

        // absorb whole components of the set
        let mut absorb = vec![false; comp_count + 1];
        for idx in 0..l_mask.len() {
            if l_mask[idx] && comp_labels[idx] > 0 {
                absorb[comp_labels[idx] as usize] = true;
            }
        }
        for l in 1..=comp_count {
            if absorb[l] && comp_border[l] {
                return Err(Error::ExhaustionFailed {
                    stage: n,
                    reason: "an absorbed component reaches the window border".into(),
                });
            }
        }
        for idx in 0..l_mask.len() {
            if comp_labels[idx] > 0 && absorb[comp_labels[idx] as usize] {
                l_mask[idx] = true;
            }
        }

        let kg = Grid {
            nx: g.nx,
            ny: g.ny,
            window: g.window,
            spacing: h,
            mask: l_mask,
        };

        // verify: no holes of set-union-stage
        let union_k: Vec<bool> = g
            .mask
            .iter()
            .zip(kg.mask.iter())
            .map(|(a, b)| *a || *b)
            .collect();
        let ukg = Grid {
            nx: g.nx,
            ny: g.ny,
            window: g.window,
            spacing: h,
            mask: union_k,
        };
        if holes_mask(&ukg).iter().any(|b| *b) {
            return Err(Error::ExhaustionFailed {
                stage: n,
                reason: "set union stage still has a hole".into(),
            });
        }
        // verify: the stage itself has no holes
        if holes_mask(&kg).iter().any(|b| *b) {
            return Err(Error::ExhaustionFailed {
                stage: n,
                reason: "stage is not hole-free on its own".into(),
            });
        }
        // verify: components met are absorbed whole
        for idx in 0..kg.mask.len() {
            let l = comp_labels[idx] as usize;
            if l > 0 && kg.mask[idx] && !absorb[l] {
                return Err(Error::ExhaustionFailed {
                    stage: n,
                    reason: "stage meets a component it did not absorb".into(),
                });
            }
        }
        // verify: previous stage in the strict interior
        for idx in 0..prev_mask.len() {
            if prev_mask[idx] && !has_full_neighborhood(&kg.mask, g.nx, g.ny, idx) {
                return Err(Error::ExhaustionFailed {
                    stage: n,
                    reason: "previous stage is not in the interior".into(),
                });
            }
        }

        prev_outradius = patch_outradius(&kg.mask, &kg);
        prev_mask = kg.mask.clone();
        radii.push(nu);
        stages.push(kg.to_patch()?);
    }

    Ok(Exhaustion {
        window: e.window,
        resolution: h,
        radii,
        stages,
    })
}

// ─────────────────────────────────────────────────────────────────────────
// Separating neighborhoods
// ─────────────────────────────────────────────────────────────────────────

/// Depth of a raster-covered part inside an ambient region: the minimum
/// over the part's cells of the distance to the ambient boundary.  Errors
/// when a cell of the part leaves the ambient set.
pub fn min_depth(part: &Region, within: &Region) -> Result<f64> {
    part.same_frame(within)?;
    let g = part.rasterize()?;
    let mut best = f64::INFINITY;
    for z in g.true_centers() {
        if within.distance(z)? > raster_tolerance(part.resolution) {
            return Err(Error::Precondition(
                "part leaves the ambient set".into(),
            ));
        }
        best = best.min(within.boundary_distance(z)?);
    }
    if !best.is_finite() {
        return Err(Error::EmptyRegion);
    }
    Ok(best)
}

/// Radius of a closed neighborhood of `part` that stays inside `within` and
/// clear of `avoid`, with a factor-two margin.  Errors when the radius
/// falls below the raster spacing: the verdict would then be below the
/// resolution.
pub fn neighborhood_radius(
    part: &Region,
    avoid: Option<&Region>,
    within: &Region,
) -> Result<f64> {
    let depth = min_depth(part, within)?;
    let sep = match avoid {
        Some(a) => crate::geom::region_distance(part, a)?,
        None => f64::INFINITY,
    };
    let rho = 0.5 * depth.min(sep);
    if rho < part.resolution {
        return Err(Error::ResolutionTooCoarse(rho));
    }
    Ok(rho)
}

/// Closed neighborhood of `k` inside `u` that meets only the listed parts
/// already meeting `k`: the dilation radius is half the smaller of the
/// depth of `k` in `u` and the distance to the nearest part disjoint
/// from `k`.
pub fn neighborhood_separating(k: &Region, u: &Region, parts: &[Region]) -> Result<Region> {
    let tol = raster_tolerance(k.resolution);
    let mut nearest_disjoint = f64::INFINITY;
    for part in parts {
        let d = crate::geom::region_distance(k, part)?;
        if d > tol {
            nearest_disjoint = nearest_disjoint.min(d);
        }
    }
    let depth = min_depth(k, u)?;
    let rho = 0.5 * depth.min(nearest_disjoint);
    if rho < k.resolution {
        return Err(Error::ResolutionTooCoarse(rho));
    }
    k.dilate(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;

    fn c(x: f64, y: f64) -> C {
        C::new(x, y)
    }

    fn win(r: f64) -> Window {
        Window::new(-r, -r, r, r).unwrap()
    }

    fn disc(x: f64, y: f64, r: f64) -> Shape {
        Shape::Disc {
            center: c(x, y),
            radius: r,
        }
    }

    #[test]
    fn annulus_has_one_hole_and_hull_fills_it() {
        let e = Region::new(
            vec![Shape::Annulus {
                center: c(0.0, 0.0),
                inner: 1.0,
                outer: 2.0,
            }],
            win(4.0),
            0.05,
        )
        .unwrap();
        let hs = holes(&e).unwrap();
        assert_eq!(hs.len(), 1);
        let hole_cells = hs[0].cell_count() as f64;
        let expect = std::f64::consts::PI / (0.05 * 0.05);
        assert!((hole_cells - expect).abs() < 0.15 * expect, "{hole_cells}");
        assert!(!is_runge(&e).unwrap());

        let filled = hull(&e).unwrap();
        assert!(is_runge(&filled).unwrap());
        let count = filled.rasterize().unwrap().true_count() as f64;
        let full = std::f64::consts::PI * 4.0 / (0.05 * 0.05);
        assert!((count - full).abs() < 0.1 * full, "{count}");
    }

    #[test]
    fn disc_is_runge_and_hull_is_identity() {
        let e = Region::new(vec![disc(0.0, 0.0, 1.0)], win(2.0), 0.05).unwrap();
        assert!(is_runge(&e).unwrap());
        let h = hull(&e).unwrap();
        assert_eq!(h.shapes.len(), 1);
    }

    #[test]
    fn labeling_separates_discs_and_respects_connectivity() {
        let e = Region::new(
            vec![disc(-1.0, 0.0, 0.4), disc(1.0, 0.0, 0.4)],
            win(2.0),
            0.05,
        )
        .unwrap();
        let g = e.rasterize().unwrap();
        let (_, n8) = label_components(&g.mask, g.nx, g.ny, true);
        assert_eq!(n8, 2);
        // a one-cell diagonal line is 8-connected but 4-disconnected
        let mut mask = vec![false; 16];
        mask[0] = true;
        mask[5] = true;
        mask[10] = true;
        assert_eq!(label_components(&mask, 4, 4, true).1, 1);
        assert_eq!(label_components(&mask, 4, 4, false).1, 3);
    }

    #[test]
    fn beh_passes_on_segment_with_disc() {
        let e = Region::new(
            vec![Shape::Polyline {
                vertices: vec![c(-1.0, 0.0), c(1.0, 0.0)],
            }],
            win(2.0),
            0.05,
        )
        .unwrap();
        let k = Region::new(vec![disc(0.0, 0.0, 0.5)], win(2.0), 0.05).unwrap();
        let r = check_beh_probe(&e, &k, None).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.outside_components >= 1);
    }

    #[test]
    fn beh_fails_on_channel_sealed_at_border() {
        // two prongs touching the top border with a bar below: the channel
        // between them reaches the top margin but holds no corner
        let e = Region::new(
            vec![
                Shape::Rect {
                    x0: -1.0,
                    y0: -3.0,
                    x1: -0.8,
                    y1: 4.0,
                },
                Shape::Rect {
                    x0: 0.8,
                    y0: -3.0,
                    x1: 1.0,
                    y1: 4.0,
                },
                Shape::Rect {
                    x0: -1.0,
                    y0: -3.0,
                    x1: 1.0,
                    y1: -2.8,
                },
            ],
            win(4.0),
            0.05,
        )
        .unwrap();
        let k = Region::empty(win(4.0), 0.05).unwrap();
        let r = check_beh_probe(&e, &k, None).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let w = r.witness.unwrap();
        assert!(w[0].abs() < 0.8 && w[1] > 3.5, "witness {w:?}");
    }

    #[test]
    fn beh_inconclusive_when_corners_covered() {
        let w = win(2.0);
        let e = Region::new(
            vec![
                Shape::Rect {
                    x0: -2.0,
                    y0: -2.0,
                    x1: 2.0,
                    y1: -1.5,
                },
                Shape::Rect {
                    x0: -2.0,
                    y0: 1.5,
                    x1: 2.0,
                    y1: 2.0,
                },
                Shape::Rect {
                    x0: -2.0,
                    y0: -2.0,
                    x1: -1.5,
                    y1: 2.0,
                },
                Shape::Rect {
                    x0: 1.5,
                    y0: -2.0,
                    x1: 2.0,
                    y1: 2.0,
                },
            ],
            w,
            0.05,
        )
        .unwrap();
        let k = Region::empty(w, 0.05).unwrap();
        let r = check_beh_probe(&e, &k, None).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn decompose_disc_plus_arc() {
        let e = Region::new(
            vec![
                disc(0.0, 0.0, 0.5),
                Shape::Polyline {
                    vertices: vec![c(0.5, 0.0), c(1.5, 0.0)],
                },
            ],
            win(2.0),
            0.05,
        )
        .unwrap();
        match decompose_semi_admissible(&e).unwrap() {
            DecomposeOutcome::Model(m) => {
                assert_eq!(m.h_components.len(), 1);
                assert!(m.s_part.cell_count() > 10);
            }
            DecomposeOutcome::Failed { reason, .. } => panic!("{reason}"),
        }
    }

    #[test]
    fn decompose_fails_when_component_hits_border() {
        let e = Region::new(vec![disc(1.8, 0.0, 0.5)], win(2.0), 0.05).unwrap();
        match decompose_semi_admissible(&e).unwrap() {
            DecomposeOutcome::Failed { reason, .. } => {
                assert!(reason.contains("border"), "{reason}");
            }
            DecomposeOutcome::Model(_) => panic!("should fail"),
        }
    }

    #[test]
    fn decompose_fails_when_arcs_pile_up() {
        // parallel arcs half a cell apart fake an interior
        let h = 0.05;
        let mut shapes = Vec::new();
        for k in 0..8 {
            let y = k as f64 * h / 2.0;
            shapes.push(Shape::Polyline {
                vertices: vec![c(-0.5, y), c(0.5, y)],
            });
        }
        let e = Region::new(shapes, win(2.0), h).unwrap();
        match decompose_semi_admissible(&e).unwrap() {
            DecomposeOutcome::Failed { reason, .. } => {
                assert!(reason.contains("thin part"), "{reason}");
            }
            DecomposeOutcome::Model(_) => panic!("should fail"),
        }
    }

    #[test]
    fn tangent_discs_stay_separate_interior_components() {
        let e = Region::new(
            vec![disc(0.0, 0.0, 0.5), disc(1.0, 0.0, 0.5)],
            win(2.0),
            0.05,
        )
        .unwrap();
        // raster-merged
        let g = e.rasterize().unwrap();
        assert_eq!(label_components(&g.mask, g.nx, g.ny, true).1, 1);
        // but interiors do not overlap
        let (model, _) = interior_model(&e).unwrap();
        // decomposition succeeds here (components are away from the
        // border), and sees one merged fat component
        assert!(model.from_decomposition);

        // push the chain onto the border so decomposition fails, then the
        // shape-level grouping takes over and keeps tangent discs apart
        let e2 = Region::new(
            vec![disc(0.0, 0.0, 0.5), disc(1.0, 0.0, 0.5), disc(2.0, 0.0, 0.5)],
            win(2.0),
            0.05,
        )
        .unwrap();
        let (model2, _) = interior_model(&e2).unwrap();
        assert!(!model2.from_decomposition);
        assert_eq!(model2.comp_masks.len(), 3);
    }

    #[test]
    fn overlapping_discs_group_together() {
        let e = Region::new(
            vec![disc(0.0, 0.0, 0.5), disc(0.6, 0.0, 0.5), disc(1.8, 0.0, 0.5)],
            win(2.0),
            0.05,
        )
        .unwrap();
        let (model, _) = interior_model(&e).unwrap();
        assert!(!model.from_decomposition);
        assert_eq!(model.comp_masks.len(), 2);
    }

    #[test]
    fn condition_g_bounded_probe() {
        let e = Region::new(
            vec![disc(0.0, 0.0, 0.5), disc(1.0, 0.0, 0.5), disc(1.8, 0.0, 0.5)],
            win(2.0),
            0.05,
        )
        .unwrap();
        let probe = Region::new(vec![disc(0.0, 0.0, 0.2)], win(2.0), 0.05).unwrap();
        let out = check_condition_g(&e, &probe).unwrap();
        assert_eq!(out.report.verdict, Verdict::Pass);
        assert_eq!(out.report.components_meeting, 1);
        // probe meeting the border disc drags the escape in
        let probe2 = Region::new(vec![disc(1.6, 0.0, 0.2)], win(2.0), 0.05).unwrap();
        let out2 = check_condition_g(&e, &probe2).unwrap();
        assert_eq!(out2.report.verdict, Verdict::Fail);
    }

    #[test]
    fn classify_annulus_fails_on_complement() {
        let e = Region::new(
            vec![Shape::Annulus {
                center: c(0.0, 0.0),
                inner: 1.0,
                outer: 2.0,
            }],
            win(4.0),
            0.05,
        )
        .unwrap();
        let r = classify_carleman(&e).unwrap();
        assert!(r.semi_admissible);
        assert_eq!(r.complement_connected, Verdict::Fail);
        assert_eq!(r.carleman, Verdict::Fail);
        assert_eq!(r.holes, 1);
    }

    #[test]
    fn classify_single_disc_passes() {
        let e = Region::new(vec![disc(0.0, 0.0, 0.8)], win(4.0), 0.05).unwrap();
        let r = classify_carleman(&e).unwrap();
        assert!(r.semi_admissible);
        assert_eq!(r.carleman, Verdict::Pass);
    }

    #[test]
    fn exhaustion_absorbs_components_and_nests() {
        let e = Region::new(
            vec![disc(1.0, 0.0, 0.3), disc(-1.2, 0.5, 0.2)],
            win(4.0),
            0.05,
        )
        .unwrap();
        let ex = build_exhaustion(&e, 3).unwrap();
        assert_eq!(ex.len(), 3);
        assert!(ex.radii.windows(2).all(|w| w[1] > w[0]));
        // nesting at raster level
        for n in 1..3 {
            let a = ex.stage(n).unwrap().rasterize().unwrap();
            let b = ex.stage(n + 1).unwrap().rasterize().unwrap();
            for (x, y) in a.mask.iter().zip(b.mask.iter()) {
                assert!(!x || *y);
            }
        }
        // the disc at 1.0 is met by stage 1 (radius 1) and must be inside
        let k1 = ex.stage(1).unwrap();
        assert!(k1.contains(c(1.25, 0.0)));
    }

    #[test]
    fn exhaustion_rejects_border_component() {
        let e = Region::new(vec![disc(3.8, 0.0, 0.5)], win(4.0), 0.05).unwrap();
        // the disc leaks out of the window; once a stage meets it the build
        // must abort
        match build_exhaustion(&e, 6) {
            Err(Error::ExhaustionFailed { .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exhaustion_fills_annulus_hole() {
        let e = Region::new(
            vec![Shape::Annulus {
                center: c(0.0, 0.0),
                inner: 1.0,
                outer: 1.5,
            }],
            win(4.0),
            0.05,
        )
        .unwrap();
        let ex = build_exhaustion(&e, 3).unwrap();
        // every stage union the set is hole-free, checked during the build;
        // additionally the final stage covers the ring and its hole
        let k = ex.stage(3).unwrap();
        assert!(k.contains(c(0.0, 0.0)));
        assert!(k.contains(c(1.2, 0.0)));
    }

    #[test]
    fn neighborhood_radius_splits_margins() {
        let w = win(4.0);
        let part = Region::new(vec![disc(0.0, 0.0, 0.5)], w, 0.05).unwrap();
        let within = Region::new(vec![disc(0.0, 0.0, 2.0)], w, 0.05).unwrap();
        let avoid = Region::new(vec![disc(1.5, 0.0, 0.2)], w, 0.05).unwrap();
        let rho = neighborhood_radius(&part, Some(&avoid), &within).unwrap();
        // separation 0.8 beats depth 1.5; within grid slack
        assert!((rho - 0.4).abs() < 3.0 * raster_tolerance(0.05), "{rho}");
        let rho2 = neighborhood_radius(&part, None, &within).unwrap();
        assert!((rho2 - 0.75).abs() < 3.0 * raster_tolerance(0.05), "{rho2}");
    }

    #[test]
    fn neighborhood_radius_too_coarse() {
        let w = win(4.0);
        let part = Region::new(vec![disc(0.0, 0.0, 0.5)], w, 0.05).unwrap();
        let within = Region::new(vec![disc(0.0, 0.0, 0.55)], w, 0.05).unwrap();
        match neighborhood_radius(&part, None, &within) {
            Err(Error::ResolutionTooCoarse(_)) => {}
            other => panic!("{other:?}"),
        }
    }
}
