//! Deterministic SVG rendering: set raster, sample error heat, and
//! critical-point markers, drawn in window units with the y axis flipped
//! into screen orientation.

use anyhow::Result;
use num_complex::Complex64;

use carleman_core::geom::Region;

/// Fixed four decimals: plenty at any raster spacing the toolkit accepts,
/// and stable across runs.
fn n(v: f64) -> String {
    format!("{:.4}", v)
}

/// Error-over-tolerance ratio to fill color: cold blue at 0, warm amber at
/// the tolerance, red beyond it.
fn heat_color(ratio: f64) -> String {
    if ratio > 1.0 {
        return "#d01010".to_string();
    }
    let t = ratio.clamp(0.0, 1.0);
    let lerp = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(0x20, 0xf0),
        lerp(0x60, 0xa0),
        lerp(0xc0, 0x00)
    )
}

/// Compose the plot.  `heat` pairs a sample with its error/tolerance
/// ratio; `critical` marks points with an X.
pub fn render(
    region: &Region,
    heat: &[(Complex64, f64)],
    critical: &[Complex64],
) -> Result<String> {
    let w = region.window;
    let h = region.resolution;
    let grid = region.rasterize()?;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\">\n",
        n(w.x0),
        n(-w.y1),
        n(w.width()),
        n(w.height())
    ));
    svg.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#ffffff\" \
         stroke=\"#000000\" stroke-width=\"{}\"/>\n",
        n(w.x0),
        n(-w.y1),
        n(w.width()),
        n(w.height()),
        n(h / 2.0)
    ));

    svg.push_str("<g fill=\"#b2b2c5\">\n");
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if !grid.mask[grid.idx(i, j)] {
                continue;
            }
            let c = grid.center(i, j);
            svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>\n",
                n(c.re - h / 2.0),
                n(-c.im - h / 2.0),
                n(h),
                n(h)
            ));
        }
    }
    svg.push_str("</g>\n");

    if !heat.is_empty() {
        svg.push_str("<g stroke=\"none\">\n");
        for (z, ratio) in heat {
            svg.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>\n",
                n(z.re),
                n(-z.im),
                n(h / 2.0),
                heat_color(*ratio)
            ));
        }
        svg.push_str("</g>\n");
    }

    if !critical.is_empty() {
        let arm = 1.5 * h;
        svg.push_str(&format!(
            "<g stroke=\"#000000\" stroke-width=\"{}\">\n",
            n(h / 2.0)
        ));
        for z in critical {
            let (x, y) = (z.re, -z.im);
            svg.push_str(&format!(
                "<path d=\"M {} {} L {} {} M {} {} L {} {}\"/>\n",
                n(x - arm),
                n(y - arm),
                n(x + arm),
                n(y + arm),
                n(x - arm),
                n(y + arm),
                n(x + arm),
                n(y - arm)
            ));
        }
        svg.push_str("</g>\n");
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}
