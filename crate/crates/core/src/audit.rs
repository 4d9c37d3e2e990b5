//! Independent checks on finished models: argument-principle zero counts
//! on explicit contours, pointwise error audits against a tolerance
//! profile, and derivative floors.
//!
//! Nothing here reuses the algebra that produced a model.  A zero count
//! samples the function on a curve and watches the phase; an error audit
//! compares two columns of numbers.  That is what makes a pass here worth
//! something.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{min_derivative, DerivFloor};
use crate::func::AnalyticMap;
use crate::geom::{Region, Window};

/// A closed curve the audits can walk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Contour {
    Circle { center: [f64; 2], radius: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
}

impl Contour {
    /// Point at parameter `t` in `[0, 1)`, counterclockwise.
    pub fn point(&self, t: f64) -> Complex64 {
        match self {
            Contour::Circle { center, radius } => {
                let th = 2.0 * std::f64::consts::PI * t;
                Complex64::new(center[0], center[1]) + Complex64::from_polar(*radius, th)
            }
            Contour::Rect { x0, y0, x1, y1 } => {
                let (w, h) = (x1 - x0, y1 - y0);
                let per = 2.0 * (w + h);
                let mut s = t.rem_euclid(1.0) * per;
                if s < w {
                    return Complex64::new(x0 + s, *y0);
                }
                s -= w;
                if s < h {
                    return Complex64::new(*x1, y0 + s);
                }
                s -= h;
                if s < w {
                    return Complex64::new(x1 - s, *y1);
                }
                s -= w;
                Complex64::new(*x0, y1 - s)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Contour::Circle { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::NonPositive("contour radius", *radius));
                }
            }
            Contour::Rect { x0, y0, x1, y1 } => {
                if !(x1 > x0) || !(y1 > y0) {
                    return Err(Error::DegenerateWindow((x1 - x0).min(y1 - y0)));
                }
            }
        }
        Ok(())
    }
}

const MAX_CONTOUR_SAMPLES: usize = 1 << 20;

/// Number of zeros of `f` inside the contour, counted with multiplicity by
/// the argument principle.
///
/// The phase is summed over a sample of the curve, doubling the sample
/// until no single step turns by `pi / 2` or more and the total winds to
/// within a quarter turn of an integer.  A function value within `1e-12`
/// of zero relative to the contour maximum aborts instead: a zero on the
/// curve makes the count meaningless, and for the models audited here it
/// is precisely the defect being hunted.
pub fn count_zeros(f: &dyn Fn(Complex64) -> Complex64, contour: &Contour) -> Result<usize> {
    contour.validate()?;
    let mut n = 64usize;
    loop {
        let points: Vec<Complex64> = (0..n).map(|k| contour.point(k as f64 / n as f64)).collect();
        let values: Vec<Complex64> = points.iter().map(|z| f(*z)).collect();
        let max_mag = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut min_mag = f64::INFINITY;
        let mut min_at = points[0];
        for (z, v) in points.iter().zip(&values) {
            if v.norm() < min_mag {
                min_mag = v.norm();
                min_at = *z;
            }
        }
        if !(min_mag > 1e-12 * max_mag) {
            return Err(Error::CriticalPointSuspected {
                at: min_at,
                mag: min_mag,
            });
        }

        let mut total = 0.0;
        let mut worst_step = 0.0f64;
        for k in 0..n {
            let step = (values[(k + 1) % n] / values[k]).arg();
            worst_step = worst_step.max(step.abs());
            total += step;
        }
        let winding = total / (2.0 * std::f64::consts::PI);
        let near = winding.round();
        if worst_step < std::f64::consts::FRAC_PI_2 && (winding - near).abs() < 0.25 {
            if near < 0.0 {
                // an analytic function cannot wind backwards; this sample
                // is lying
                return Err(Error::ContourTooCoarse);
            }
            return Ok(near as usize);
        }
        n *= 2;
        if n > MAX_CONTOUR_SAMPLES {
            return Err(Error::ContourTooCoarse);
        }
    }
}

/// The standard battery for a window: three concentric circles well inside
/// it and a near-border rectangle, so a zero anywhere in the working area
/// lands inside at least one curve.
pub fn default_contours(window: &Window, resolution: f64) -> Vec<Contour> {
    let c = window.center();
    let r = window.inradius();
    let inset = 2.0 * resolution;
    vec![
        Contour::Circle {
            center: [c.re, c.im],
            radius: 0.3 * r,
        },
        Contour::Circle {
            center: [c.re, c.im],
            radius: 0.6 * r,
        },
        Contour::Circle {
            center: [c.re, c.im],
            radius: 0.9 * r,
        },
        Contour::Rect {
            x0: window.x0 + inset,
            y0: window.y0 + inset,
            x1: window.x1 - inset,
            y1: window.y1 - inset,
        },
    ]
}

/// Outcome of comparing measured errors against a tolerance profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub total: usize,
    pub violations: usize,
    /// Min over samples of `tolerance - error`; negative exactly when some
    /// sample violates.
    pub worst_margin: f64,
    /// Distribution of `error / tolerance`: bin `k` holds samples with the
    /// ratio in `[k / 8, (k + 1) / 8)`, the last bin everything at 15/8 and
    /// beyond.  Passing audits live entirely in the first eight bins.
    pub histogram: [usize; 16],
    pub pass: bool,
}

/// Compare pointwise errors against pointwise tolerances.
pub fn error_audit(errors: &[f64], tolerances: &[f64]) -> Result<AuditReport> {
    let n = errors.len();
    if n == 0 || tolerances.len() != n {
        return Err(Error::BadSamples);
    }
    let mut violations = 0usize;
    let mut worst_margin = f64::INFINITY;
    let mut histogram = [0usize; 16];
    for (e, t) in errors.iter().zip(tolerances) {
        if !(*t > 0.0) {
            return Err(Error::NonPositive("audit tolerance", *t));
        }
        if !e.is_finite() || *e < 0.0 {
            return Err(Error::Precondition(format!(
                "audit error values must be finite and nonnegative, got {e}"
            )));
        }
        if e > t {
            violations += 1;
        }
        worst_margin = worst_margin.min(t - e);
        let bin = ((8.0 * e / t).floor() as usize).min(15);
        histogram[bin] += 1;
    }
    Ok(AuditReport {
        total: n,
        violations,
        worst_margin,
        histogram,
        pass: violations == 0,
    })
}

/// Audit-facing name for the derivative floor scan: min of `|f'|` over the
/// region's raster at the working resolution and at half of it.
pub fn derivative_floor(f: &dyn AnalyticMap, region: &Region) -> Result<DerivFloor> {
    min_derivative(f, region)
}
