//! Dense complex polynomials in one variable.
//!
//! Used for exponent polynomials, fitted local models and their critical
//! points.  Root finding goes through the companion matrix (realified so a
//! real Schur decomposition applies) followed by one Newton polish per
//! candidate.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Polynomial with ascending coefficients: `c[0] + c[1] w + c[2] w^2 + ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct CPoly {
    pub coeffs: Vec<Complex64>,
}

impl CPoly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        CPoly { coeffs }
    }

    pub fn zero() -> Self {
        CPoly { coeffs: vec![] }
    }

    pub fn degree(&self) -> usize {
        self.trimmed_len().saturating_sub(1)
    }

    fn trimmed_len(&self) -> usize {
        let mut n = self.coeffs.len();
        while n > 0 && self.coeffs[n - 1].norm() == 0.0 {
            n -= 1;
        }
        n
    }

    pub fn eval(&self, w: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * w + c;
        }
        acc
    }

    pub fn derivative(&self) -> CPoly {
        if self.coeffs.len() <= 1 {
            return CPoly::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * k as f64)
            .collect();
        CPoly { coeffs }
    }

    /// Taylor shift: returns `q` with `q(w) = p(w + delta)`, exactly the
    /// same polynomial written around a shifted origin.
    pub fn shifted(&self, delta: Complex64) -> CPoly {
        let n = self.coeffs.len();
        if n == 0 {
            return CPoly::zero();
        }
        // repeated synthetic division by (w - (-delta))
        let mut work = self.coeffs.clone();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            let mut carry = Complex64::new(0.0, 0.0);
            for c in work.iter_mut().rev() {
                carry = carry * delta + *c;
                *c = carry;
            }
            out[k] = work[0];
            work.remove(0);
        }
        CPoly { coeffs: out }
    }

    /// Scale of the coefficient vector, used for relative thresholds.
    pub fn coeff_scale(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// All eigenvalues of the realified companion matrix.  The spectrum of
    /// the returned list is the multiset of roots together with their
    /// conjugates, so it has `2 * degree` entries.
    pub fn companion_spectrum(&self) -> Result<Vec<Complex64>> {
        let n = self.trimmed_len();
        if n <= 1 {
            return Ok(vec![]);
        }
        let d = n - 1;
        let lead = self.coeffs[d];
        if lead.norm() == 0.0 {
            return Err(Error::Precondition("zero leading coefficient".into()));
        }
        // Companion matrix C of the monic polynomial, realified block-wise:
        // each complex entry a+bi becomes [[a, -b], [b, a]].
        let mut m = DMatrix::<f64>::zeros(2 * d, 2 * d);
        for k in 0..d {
            let c = -(self.coeffs[k] / lead);
            // entry (k, d-1) of the companion is c; subdiagonal ones below.
            m[(2 * k, 2 * (d - 1))] = c.re;
            m[(2 * k, 2 * (d - 1) + 1)] = -c.im;
            m[(2 * k + 1, 2 * (d - 1))] = c.im;
            m[(2 * k + 1, 2 * (d - 1) + 1)] = c.re;
        }
        for k in 1..d {
            m[(2 * k, 2 * (k - 1))] = 1.0;
            m[(2 * k + 1, 2 * (k - 1) + 1)] = 1.0;
        }
        let eig = m.complex_eigenvalues();
        Ok(eig.iter().map(|e| Complex64::new(e.re, e.im)).collect())
    }

    /// Number of roots (with multiplicity) strictly inside the disc
    /// `|z - center| < radius` for a real center.  Realification doubles the
    /// spectrum by conjugation; a real-centered disc is conjugation
    /// invariant, so halving the inside count is exact.
    pub fn root_count_in_disc(&self, center: f64, radius: f64) -> Result<usize> {
        let spec = self.companion_spectrum()?;
        let c = Complex64::new(center, 0.0);
        let inside = spec.iter().filter(|z| (*z - c).norm() < radius).count();
        Ok(inside / 2)
    }

    /// Distinct root locations: companion spectrum candidates, one Newton
    /// polish each, then residual filtering and clustering.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let n = self.trimmed_len();
        if n <= 1 {
            return Ok(vec![]);
        }
        let deriv = self.derivative();
        let scale = self.coeff_scale();
        let mut out: Vec<Complex64> = Vec::new();
        for cand in self.companion_spectrum()? {
            let mut z = cand;
            for _ in 0..2 {
                let d = deriv.eval(z);
                if d.norm() > 0.0 {
                    let step = self.eval(z) / d;
                    if step.norm() < 1.0 + z.norm() {
                        z -= step;
                    }
                }
            }
            let local = scale * (1.0 + z.norm().powi(n as i32 - 1));
            if self.eval(z).norm() > 1e-8 * local {
                continue; // conjugate ghost that did not polish into a root
            }
            let tol = 1e-6 * (1.0 + z.norm());
            if !out.iter().any(|r| (r - z).norm() < tol) {
                out.push(z);
            }
        }
        Ok(out)
    }
}

/// A polynomial in the normalized variable `w = (z - center) / scale`.
///
/// Keeping fitted models in a centered, scaled variable is what makes
/// degree 40 workable in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPoly {
    pub center: Complex64,
    pub scale: f64,
    pub poly: CPoly,
}

impl ScaledPoly {
    pub fn new(center: Complex64, scale: f64, poly: CPoly) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::NonPositive("scale", scale));
        }
        Ok(ScaledPoly {
            center,
            scale,
            poly,
        })
    }

    pub fn to_w(&self, z: Complex64) -> Complex64 {
        (z - self.center) / self.scale
    }

    pub fn from_w(&self, w: Complex64) -> Complex64 {
        self.center + w * self.scale
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.poly.eval(self.to_w(z))
    }

    /// Derivative with respect to `z` (chain rule through the scaling).
    pub fn deriv(&self, z: Complex64) -> Complex64 {
        self.poly.derivative().eval(self.to_w(z)) / self.scale
    }

    pub fn degree(&self) -> usize {
        self.poly.degree()
    }

    /// Precompose with the translation `z -> z - t0`.  The result `q`
    /// satisfies `q(z) = p(z - t0)`, so every feature of `p` (roots of any
    /// derivative included) moves by exactly `+t0`.
    pub fn translate_arg(&self, t0: Complex64) -> ScaledPoly {
        ScaledPoly {
            center: self.center,
            scale: self.scale,
            poly: self.poly.shifted(-t0 / self.scale),
        }
    }

    /// Roots of the derivative, mapped back to the `z` plane.
    pub fn critical_points(&self) -> Result<Vec<Complex64>> {
        let dw = self.poly.derivative();
        Ok(dw.roots()?.into_iter().map(|w| self.from_w(w)).collect())
    }

    /// Unfiltered companion spectrum of the derivative in the `z` plane.
    /// A superset of the critical points (conjugate ghosts included), which
    /// is the right thing to keep clear of when a miss would be fatal.
    pub fn critical_spectrum(&self) -> Result<Vec<Complex64>> {
        let dw = self.poly.derivative();
        Ok(dw
            .companion_spectrum()?
            .into_iter()
            .map(|w| self.from_w(w))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;

    fn c(x: f64, y: f64) -> C {
        C::new(x, y)
    }

    #[test]
    fn eval_and_derivative() {
        // p = 1 + 2w + 3w^2
        let p = CPoly::new(vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(p.eval(c(2.0, 0.0)), c(17.0, 0.0));
        let d = p.derivative();
        assert_eq!(d.eval(c(2.0, 0.0)), c(14.0, 0.0));
    }

    #[test]
    fn taylor_shift_exact() {
        let p = CPoly::new(vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, -1.0), c(0.5, 0.0)]);
        let delta = c(0.7, -0.3);
        let q = p.shifted(delta);
        for k in 0..10 {
            let w = c(0.1 * k as f64 - 0.4, 0.05 * k as f64);
            assert!((q.eval(w) - p.eval(w + delta)).norm() < 1e-12);
        }
    }

    #[test]
    fn companion_roots_of_known_polynomial() {
        // (w - 1)(w - 2i)(w + 3) = w^3 + (3 - 2i) w^2 ... build by convolution
        let roots = [c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0)];
        let mut coeffs = vec![c(1.0, 0.0)];
        for r in roots {
            let mut next = vec![c(0.0, 0.0); coeffs.len() + 1];
            for (k, a) in coeffs.iter().enumerate() {
                next[k + 1] += *a;
                next[k] -= *a * r;
            }
            coeffs = next;
        }
        let p = CPoly::new(coeffs);
        let mut found = p.roots().unwrap();
        assert_eq!(found.len(), 3);
        found.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((found[0] - c(-3.0, 0.0)).norm() < 1e-8);
        assert!((found[1] - c(0.0, 2.0)).norm() < 1e-8);
        assert!((found[2] - c(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn root_count_in_disc_with_multiplicity() {
        // w^2 (w - 5): double root at 0, single at 5
        let p = CPoly::new(vec![c(0.0, 0.0), c(0.0, 0.0), c(-5.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(p.root_count_in_disc(0.0, 1.0).unwrap(), 2);
        assert_eq!(p.root_count_in_disc(0.0, 6.0).unwrap(), 3);
    }

    #[test]
    fn translate_arg_moves_critical_points() {
        // p(w) = w^3 - 3w has critical points at w = ±1
        let p = CPoly::new(vec![c(0.0, 0.0), c(-3.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let sp = ScaledPoly::new(c(0.0, 0.0), 1.0, p).unwrap();
        let t0 = c(0.25, 0.4);
        let moved = sp.translate_arg(t0);
        let mut crit: Vec<C> = moved.critical_points().unwrap();
        crit.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((crit[0] - (c(-1.0, 0.0) + t0)).norm() < 1e-9);
        assert!((crit[1] - (c(1.0, 0.0) + t0)).norm() < 1e-9);
        // values match the translation identity
        let z = c(0.3, -0.2);
        assert!((moved.eval(z) - sp.eval(z - t0)).norm() < 1e-12);
    }
}
