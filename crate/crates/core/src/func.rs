//! Function traits shared by fitted models, exponential integrals and
//! user-supplied targets.

use num_complex::Complex64;

/// A map that is holomorphic wherever the toolkit evaluates its derivative.
pub trait AnalyticMap {
    fn eval(&self, z: Complex64) -> Complex64;
    fn deriv(&self, z: Complex64) -> Complex64;
}

/// Closure adapter, mostly for tests and built-in targets.
pub struct FnMap<F, G>
where
    F: Fn(Complex64) -> Complex64,
    G: Fn(Complex64) -> Complex64,
{
    pub f: F,
    pub df: G,
}

impl<F, G> AnalyticMap for FnMap<F, G>
where
    F: Fn(Complex64) -> Complex64,
    G: Fn(Complex64) -> Complex64,
{
    fn eval(&self, z: Complex64) -> Complex64 {
        (self.f)(z)
    }

    fn deriv(&self, z: Complex64) -> Complex64 {
        (self.df)(z)
    }
}

impl AnalyticMap for crate::poly::ScaledPoly {
    fn eval(&self, z: Complex64) -> Complex64 {
        ScaledPoly::eval(self, z)
    }

    fn deriv(&self, z: Complex64) -> Complex64 {
        ScaledPoly::deriv(self, z)
    }
}

use crate::poly::ScaledPoly;

/// A target that may be merely continuous on part of its domain.  `deriv`
/// returns `None` where the map is not known to be holomorphic; samplers
/// treat such points as continuous-part samples.
pub trait Target {
    fn eval(&self, z: Complex64) -> Complex64;
    fn deriv(&self, z: Complex64) -> Option<Complex64>;
}

impl<T: AnalyticMap> Target for T {
    fn eval(&self, z: Complex64) -> Complex64 {
        AnalyticMap::eval(self, z)
    }

    fn deriv(&self, z: Complex64) -> Option<Complex64> {
        Some(AnalyticMap::deriv(self, z))
    }
}
