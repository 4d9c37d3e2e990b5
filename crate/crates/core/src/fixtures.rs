//! Reference sets used by the test-suite and the bundled scenarios.

use num_complex::Complex64;

use crate::error::Result;
use crate::geom::{Region, Shape, Window};

pub fn standard_window() -> Window {
    Window::new(-4.0, -4.0, 4.0, 4.0).unwrap()
}

/// Shrinking discs `B(1/n, 1/(2n(n+1)))` for `n = 1..=80` together with
/// their accumulation point at the origin.
///
/// Consecutive discs stay `1/(n(n+1)(n+2))` apart, so the family is
/// pairwise disjoint; how many raster components it splits into depends on
/// the spacing, since the gaps shrink below any fixed resolution.
pub fn e1_region(resolution: f64) -> Result<Region> {
    let mut shapes = vec![Shape::Point {
        at: Complex64::new(0.0, 0.0),
    }];
    for n in 1..=80u32 {
        let nf = n as f64;
        shapes.push(Shape::Disc {
            center: Complex64::new(1.0 / nf, 0.0),
            radius: 1.0 / (2.0 * nf * (nf + 1.0)),
        });
    }
    Region::new(shapes, standard_window(), resolution)
}

/// Unit-diameter closed discs centered at every integer on the real line,
/// each tangent to the next; the window truncates the chain mid-disc.
pub fn e2_region(window: Window, resolution: f64) -> Result<Region> {
    let lo = (window.x0 - 1.0).floor() as i64;
    let hi = (window.x1 + 1.0).ceil() as i64;
    let shapes = (lo..=hi)
        .map(|n| Shape::Disc {
            center: Complex64::new(n as f64, 0.0),
            radius: 0.5,
        })
        .collect();
    Region::new(shapes, window, resolution)
}

/// The closed annulus with radii 1 and 2 about the origin.
pub fn annulus_region(resolution: f64) -> Result<Region> {
    Region::new(
        vec![Shape::Annulus {
            center: Complex64::new(0.0, 0.0),
            inner: 1.0,
            outer: 2.0,
        }],
        standard_window(),
        resolution,
    )
}

/// The real segment `[-5, 5]`, on a window leaving a unit margin.
pub fn segment_region(resolution: f64) -> Result<Region> {
    Region::new(
        vec![Shape::Polyline {
            vertices: vec![Complex64::new(-5.0, 0.0), Complex64::new(5.0, 0.0)],
        }],
        Window::new(-6.0, -6.0, 6.0, 6.0)?,
        resolution,
    )
}

/// Graph of `sin(1/x) / x` for `x` in `(0, 1.2]`, truncated where the
/// oscillation outruns the resolution.
///
/// Drawn in the substitution `u = 1/x` (so `y = u sin u`), with steps that
/// keep each chord shorter than a quarter cell while `|y|` is within one
/// unit of the window and take unit-length strides when the curve is far
/// above or below; far vertices are clamped to `|y| = 5` so every crossing
/// stroke stays sealed without dragging the bounding boxes out.  The chain
/// is chunked into short polylines so rasterization only visits cells near
/// each piece.
pub fn graph_region(resolution: f64) -> Result<Region> {
    let window = standard_window();
    let y_lim = window.y1 + 1.0;
    let u_end = 50.0;
    let mut u: f64 = 1.0 / 1.2;
    let mut shapes: Vec<Shape> = Vec::new();
    let mut vertices: Vec<Complex64> = Vec::new();
    loop {
        let y_raw = u * u.sin();
        vertices.push(Complex64::new(1.0 / u, y_raw.clamp(-y_lim, y_lim)));
        if vertices.len() == 40 {
            shapes.push(Shape::Polyline {
                vertices: vertices.clone(),
            });
            let last = *vertices.last().unwrap();
            vertices.clear();
            vertices.push(last);
        }
        if u >= u_end {
            break;
        }
        let du = if y_raw.abs() <= y_lim {
            // |dy/du| <= 1 + u, so this keeps chords under a quarter cell
            (resolution / 4.0) / (1.0 + u)
        } else {
            // jumps land at |y| >= 4: they can reach the fine band but
            // never the window itself
            (1.0 / (1.0 + u)).min(0.5)
        };
        u = (u + du).min(u_end);
    }
    if vertices.len() >= 2 {
        shapes.push(Shape::Polyline { vertices });
    }
    Region::new(shapes, window, resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{
        check_beh_probe, classify_carleman, decompose_semi_admissible, holes, is_runge,
        DecomposeOutcome, Verdict,
    };

    #[test]
    fn e1_is_semi_admissible_with_empty_thin_part() {
        let e = e1_region(0.02).unwrap();
        match decompose_semi_admissible(&e).unwrap() {
            DecomposeOutcome::Model(m) => {
                assert!(!m.h_components.is_empty());
                // the accumulation point's raster trace can stick out of
                // the disc chain by a cell or two; anything more means the
                // discs were lost
                assert!(m.s_part.cell_count() <= 4, "{}", m.s_part.cell_count());
            }
            DecomposeOutcome::Failed { reason, .. } => panic!("decompose failed: {reason}"),
        }
        assert!(is_runge(&e).unwrap());
    }

    #[test]
    fn e2_fails_decompose_but_classifies_as_carleman() {
        let e = e2_region(standard_window(), 0.02).unwrap();
        let report = classify_carleman(&e).unwrap();
        assert!(!report.semi_admissible);
        assert!(report.decompose_reason.is_some());
        assert_eq!(report.carleman, Verdict::Pass, "{report:?}");
    }

    #[test]
    fn annulus_is_not_runge() {
        let e = annulus_region(0.02).unwrap();
        assert!(!is_runge(&e).unwrap());
        assert_eq!(holes(&e).unwrap().len(), 1);
    }

    #[test]
    fn segment_has_no_holes() {
        let e = segment_region(0.05).unwrap();
        assert!(is_runge(&e).unwrap());
    }

    #[test]
    fn graph_strokes_seal_the_band() {
        // at a coarse spacing the fixture rasterizes quickly and the
        // full-height strokes touch both borders
        let e = graph_region(0.04).unwrap();
        let g = e.rasterize().unwrap();
        assert!(g.true_count() > 500);
        let top = (0..g.nx).any(|i| g.mask[g.idx(i, g.ny - 1)]);
        let bottom = (0..g.nx).any(|i| g.mask[g.idx(i, 0)]);
        assert!(top && bottom, "strokes should reach the window border");
    }

    #[test]
    fn graph_escape_fails_at_fine_resolution() {
        let e = graph_region(0.01).unwrap();
        let k = Region::new(
            vec![Shape::Disc {
                center: Complex64::new(0.0, 0.0),
                radius: 0.2,
            }],
            standard_window(),
            0.01,
        )
        .unwrap();
        let report = check_beh_probe(&e, &k, None).unwrap();
        assert_eq!(report.verdict, Verdict::Fail, "{report:?}");
        assert!(report.witness.is_some());
    }
}
