use serde::{Deserialize, Serialize};

use super::measure::{gcd, ScaledMeasure, DEFAULT_SUPPORT_CAP};
use crate::error::{Error, Result};
use crate::group::{GroupDescriptor, GroupElement};

/// Which storage strategy backs a power table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Keyed map per level, any group.
    Generic,
    /// Dense box on `Z^d`.
    Lattice,
    /// Values indexed by tree distance on `F_s`.
    Radial,
    /// Tree distance times a dense box, on `F_s × Z^d`.
    Cartesian,
}

/// Read access to convolution powers `μ^{*n}` for `n = 0..=depth()`.
pub trait PowerTable: Send + Sync {
    fn group(&self) -> &GroupDescriptor;

    /// The step measure `μ`.
    fn step(&self) -> &ScaledMeasure;

    /// Largest level available.
    fn depth(&self) -> usize;

    fn engine(&self) -> Engine;

    /// Natural log of `μ^{*n}(g)`; `Ok(None)` when `g` is outside the support.
    fn log_mass(&self, n: usize, g: &GroupElement) -> Result<Option<f64>>;

    /// Natural log of the total mass at level `n`.
    fn log_total(&self, n: usize) -> Result<f64>;

    /// Set when the build stopped early on a budget; the table holds every level
    /// before the failing one.
    fn exhausted(&self) -> Option<&Error> {
        None
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n > self.depth() {
            Err(Error::DepthExceeded {
                requested: n,
                available: self.depth(),
            })
        } else {
            Ok(())
        }
    }

    /// Plain value of `μ^{*n}(g)`; zero outside the support.
    fn mass(&self, n: usize, g: &GroupElement) -> Result<f64> {
        Ok(self.log_mass(n, g)?.map_or(0.0, f64::exp))
    }

    fn present(&self, n: usize, g: &GroupElement) -> Result<bool> {
        match self.log_mass(n, g) {
            Ok(v) => Ok(v.is_some()),
            Err(Error::Underflow { .. }) => Ok(true),
            Err(e) => Err(e),
        }
    }

    /// Log return probability `μ^{*n}(e)`.
    fn log_return(&self, n: usize) -> Result<Option<f64>> {
        self.log_mass(n, &self.group().identity())
    }
}

/// Natural log of `P^{(n)}_{x,y} = μ^{*n}(x⁻¹y)`.
pub fn transition(
    table: &dyn PowerTable,
    n: usize,
    x: &GroupElement,
    y: &GroupElement,
) -> Result<Option<f64>> {
    let g = table.group().left_quotient(x, y)?;
    table.log_mass(n, &g)
}

/// gcd of `{n ≤ depth : μ^{*n}(e) > 0}`, ignoring `n = 0`.
pub fn period(table: &dyn PowerTable) -> Result<usize> {
    let mut d = 0;
    for n in 1..=table.depth() {
        let e = table.group().identity();
        if table.present(n, &e)? {
            d = gcd(d, n);
            if d == 1 {
                break;
            }
        }
    }
    if d == 0 {
        Err(Error::PeriodInconclusive {
            depth: table.depth(),
        })
    } else {
        Ok(d)
    }
}

pub fn is_aperiodic(table: &dyn PowerTable) -> Result<bool> {
    Ok(period(table)? == 1)
}

pub fn require_aperiodic(table: &dyn PowerTable) -> Result<()> {
    match period(table)? {
        1 => Ok(()),
        p => Err(Error::Periodic { period: p }),
    }
}

/// Every level kept as a keyed map. Works for any group.
#[derive(Debug, Serialize, Deserialize)]
pub struct PowersCache {
    step: ScaledMeasure,
    levels: Vec<ScaledMeasure>,
    #[serde(skip)]
    exhausted: Option<Error>,
}

impl PowersCache {
    pub fn build(step: &ScaledMeasure, depth: usize) -> Self {
        Self::build_capped(step, depth, DEFAULT_SUPPORT_CAP)
    }

    pub fn build_capped(step: &ScaledMeasure, depth: usize, support_cap: usize) -> Self {
        let mut levels = vec![ScaledMeasure::point_mass(step.group())];
        let mut exhausted = None;
        for _ in 0..depth {
            match levels.last().expect("level 0").convolve_capped(step, support_cap) {
                Ok(next) => levels.push(next),
                Err(e) => {
                    exhausted = Some(e);
                    break;
                }
            }
        }
        PowersCache {
            step: step.clone(),
            levels,
            exhausted,
        }
    }

    /// Like [`PowersCache::build`] but fails instead of truncating.
    pub fn build_strict(step: &ScaledMeasure, depth: usize, support_cap: usize) -> Result<Self> {
        let mut cache = Self::build_capped(step, depth, support_cap);
        match cache.exhausted.take() {
            Some(e) => Err(e),
            None => Ok(cache),
        }
    }

    pub fn level(&self, n: usize) -> Result<&ScaledMeasure> {
        self.check_level(n)?;
        Ok(&self.levels[n])
    }
}

impl PowerTable for PowersCache {
    fn group(&self) -> &GroupDescriptor {
        self.step.group()
    }

    fn step(&self) -> &ScaledMeasure {
        &self.step
    }

    fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    fn engine(&self) -> Engine {
        Engine::Generic
    }

    fn log_mass(&self, n: usize, g: &GroupElement) -> Result<Option<f64>> {
        self.level(n)?.log_value(g)
    }

    fn log_total(&self, n: usize) -> Result<f64> {
        Ok(self.level(n)?.log_total())
    }

    fn exhausted(&self) -> Option<&Error> {
        self.exhausted.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lazy_z() -> ScaledMeasure {
        ScaledMeasure::parse(&GroupDescriptor::lattice(1), "0 1/2\n1 1/4\n-1 1/4").unwrap()
    }

    #[test]
    fn depth_zero_is_point_mass() {
        let c = PowersCache::build(&lazy_z(), 0);
        assert_eq!(c.depth(), 0);
        let e = c.group().identity();
        assert_eq!(c.mass(0, &e).unwrap(), 1.0);
        assert_eq!(c.level(0).unwrap().len(), 1);
    }

    #[test]
    fn lazy_z_two_step_values() {
        let c = PowersCache::build(&lazy_z(), 2);
        assert_relative_eq!(c.mass(2, &GroupElement::lattice([2])).unwrap(), 1.0 / 16.0);
        let zero = GroupElement::lattice([0]);
        assert_relative_eq!(
            transition(&c, 2, &zero, &zero).unwrap().unwrap().exp(),
            3.0 / 8.0,
            max_relative = 1e-15
        );
        assert_eq!(transition(&c, 0, &zero, &zero).unwrap(), Some(0.0));
    }

    #[test]
    fn g_invariance_is_exact() {
        let c = PowersCache::build(&lazy_z(), 5);
        let (x, y, g) = (
            GroupElement::lattice([1]),
            GroupElement::lattice([-2]),
            GroupElement::lattice([7]),
        );
        let a = transition(&c, 5, &x, &y).unwrap();
        let b = transition(&c, 5, &g.mul(&x), &g.mul(&y)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chapman_kolmogorov() {
        let c = PowersCache::build(&lazy_z(), 4);
        let two = c.level(2).unwrap();
        let four = two.convolve(two).unwrap();
        for (g, _) in c.level(4).unwrap().mantissas() {
            assert_relative_eq!(four.value(g), c.mass(4, g).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn periods() {
        assert_eq!(period(&PowersCache::build(&lazy_z(), 4)).unwrap(), 1);
        let srw = ScaledMeasure::parse(&GroupDescriptor::lattice(1), "1 1/2\n-1 1/2").unwrap();
        let c = PowersCache::build(&srw, 6);
        assert_eq!(period(&c).unwrap(), 2);
        assert!(matches!(require_aperiodic(&c), Err(Error::Periodic { period: 2 })));
        let f2 = ScaledMeasure::simple(&GroupDescriptor::free(2), 0.0).unwrap();
        let c = PowersCache::build(&f2, 8);
        for n in 1..=8 {
            let e = c.group().identity();
            assert_eq!(c.present(n, &e).unwrap(), n % 2 == 0);
        }
        assert_eq!(period(&c).unwrap(), 2);
        assert!(matches!(
            period(&PowersCache::build(&srw, 1)),
            Err(Error::PeriodInconclusive { depth: 1 })
        ));
    }

    #[test]
    fn budget_truncates_and_flags() {
        let f3 = ScaledMeasure::simple(&GroupDescriptor::free(3), 0.0).unwrap();
        let c = PowersCache::build_capped(&f3, 10, 500);
        assert!(c.depth() < 10);
        assert!(matches!(c.exhausted(), Some(Error::Budget { .. })));
        assert!(PowersCache::build_strict(&f3, 10, 500).is_err());
    }
}
