//! Spectral radius, Green and ρ-Martin kernels, and the Martin metric.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accel::{aitken, tail_estimate};
use crate::error::{Error, Result};
use crate::group::{Ball, GroupElement};
use crate::ratio::{
    BoundTable, EstimateMethod, KernelEntry, KernelKind, KernelTable, KernelValue, RatioKernel,
};
use crate::walk::{period, transition, PowerTable};

/// Fewest ratio terms accepted for a spectral radius estimate.
pub const MIN_RATIO_TERMS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralMethod {
    /// Plain successive return ratios.
    SuccessiveRatio,
    /// Ratios `p_{n+d}/p_n` over multiples of the period `d`, then a `d`-th root.
    EvenSubsequence,
    /// Successive ratios with Richardson extrapolation.
    Extrapolated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub rho_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub method: SpectralMethod,
    pub m_range: (usize, usize),
    /// Oscillation of the accelerated tail.
    pub spread: f64,
    pub period: usize,
}

/// Estimates `ρ = lim p_{n+1}/p_n` (or its periodic analogue) from return probabilities.
pub fn spectral_radius(table: &dyn PowerTable) -> Result<SpectralEstimate> {
    let d = period(table)?;
    let depth = table.depth();
    let mut seq = Vec::new();
    for j in 1.. {
        let (n, next) = (j * d, (j + 1) * d);
        if next > depth {
            break;
        }
        if let (Some(a), Some(b)) = (table.log_return(n)?, table.log_return(next)?) {
            seq.push((j, (b - a).exp()));
        }
    }
    if seq.len() < MIN_RATIO_TERMS {
        return Err(Error::NotConverged(format!(
            "only {} return ratios up to depth {depth}",
            seq.len()
        )));
    }
    let tail = tail_estimate(&seq)?;
    let root = |v: f64| v.max(0.0).powf(1.0 / d as f64).min(1.0);
    let t = tail.map(root);
    let method = if d > 1 {
        SpectralMethod::EvenSubsequence
    } else if tail.accelerated {
        SpectralMethod::Extrapolated
    } else {
        SpectralMethod::SuccessiveRatio
    };
    Ok(SpectralEstimate {
        rho_hat: t.estimate,
        lo: t.lo,
        hi: t.hi,
        method,
        m_range: (tail.window.0 * d, tail.window.1 * d + d),
        spread: t.spread(),
        period: d,
    })
}

/// Fit of `log(p_n ρ̂^{-n}) ≈ c − α log n` over the upper half of the levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalLimitFit {
    pub alpha: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub m_range: (usize, usize),
}

pub fn local_limit_exponent(table: &dyn PowerTable, spec: &SpectralEstimate) -> Result<LocalLimitFit> {
    let depth = table.depth();
    let d = spec.period;
    let log_rho = spec.rho_hat.ln();
    let mut pts = Vec::new();
    for n in (depth / 2).max(1)..=depth {
        if n % d != 0 {
            continue;
        }
        if let Some(lp) = table.log_return(n)? {
            pts.push(((n as f64).ln(), lp - n as f64 * log_rho));
        }
    }
    if pts.len() < 3 {
        return Err(Error::NotConverged("too few return probabilities to fit".into()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    Ok(LocalLimitFit {
        alpha: -slope,
        intercept,
        residual,
        m_range: ((depth / 2).max(1), depth),
    })
}

/// Spectral data needed to evaluate Green-type series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub radius: SpectralEstimate,
    pub fit: LocalLimitFit,
}

impl Spectrum {
    pub fn estimate(table: &dyn PowerTable) -> Result<Self> {
        let radius = spectral_radius(table)?;
        let fit = local_limit_exponent(table, &radius)?;
        Ok(Spectrum { radius, fit })
    }

    pub fn rho(&self) -> f64 {
        self.radius.rho_hat
    }

    pub fn alpha(&self) -> f64 {
        self.fit.alpha
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenValue {
    /// Partial sum up to `terms_used`.
    pub value: f64,
    /// Modelled remainder of the series.
    pub tail_estimate: f64,
    /// Bound on the remainder under the tail model; infinite when the series
    /// is not expected to converge.
    pub truncation_bound: f64,
    pub terms_used: usize,
    pub z: f64,
    pub reliable: bool,
}

impl GreenValue {
    pub fn corrected(&self) -> f64 {
        self.value + self.tail_estimate
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Remainder model `Σ_{k≥1} t_N r^{kd} (1 + kd/N)^{-α}` relative to the last
/// term `t_N`, with its bound.
fn tail_model(r: f64, alpha: f64, last: usize, d: usize) -> (f64, f64, bool) {
    let n = last.max(1) as f64;
    let dd = d as f64;
    if r < 1.0 {
        let q = r.powf(dd);
        let bound = q / (1.0 - q);
        let mut est = 0.0;
        let mut k = 1.0;
        loop {
            let term = q.powf(k) * (1.0 + k * dd / n).powf(-alpha);
            est += term;
            if term < 1e-17 * est || k > 1e7 {
                break;
            }
            k += 1.0;
        }
        (est, bound, true)
    } else if r == 1.0 && alpha > 1.0 {
        let est = (n / (dd * (alpha - 1.0)) - 0.5).max(0.0);
        (est, est, true)
    } else {
        (f64::INFINITY, f64::INFINITY, false)
    }
}

/// `G(x,y|z) = Σ_n P^{(n)}_{x,y} z^n`, summed to `terms` (capped at the table depth).
pub fn green(
    table: &dyn PowerTable,
    spectrum: &Spectrum,
    x: &GroupElement,
    y: &GroupElement,
    z: f64,
    terms: usize,
) -> Result<GreenValue> {
    if z.is_nan() || z < 0.0 {
        return Err(Error::InvalidArgument(format!("z = {z} must be nonnegative")));
    }
    let terms = terms.min(table.depth());
    if z == 0.0 {
        let v = transition(table, 0, x, y)?.map_or(0.0, f64::exp);
        return Ok(GreenValue {
            value: v,
            tail_estimate: 0.0,
            truncation_bound: 0.0,
            terms_used: 0,
            z,
            reliable: true,
        });
    }
    let log_z = z.ln();
    let mut logs = Vec::with_capacity(terms + 1);
    let mut last = None;
    for n in 0..=terms {
        if let Some(lp) = transition(table, n, x, y)? {
            let t = lp + n as f64 * log_z;
            logs.push(t);
            last = Some((n, t));
        }
    }
    let value = log_sum_exp(&logs).exp();
    let r = (z * spectrum.rho()).min(1.0 + 1e-12);
    let r = if (r - 1.0).abs() <= 1e-12 { 1.0 } else { r };
    let (tail_estimate, truncation_bound, reliable) = match last {
        None => (0.0, 0.0, true),
        Some((n, t)) => {
            let (est, bound, ok) = if z * spectrum.rho() > 1.0 + 1e-12 {
                (f64::INFINITY, f64::INFINITY, false)
            } else {
                tail_model(r, spectrum.alpha(), n, spectrum.radius.period)
            };
            let tn = t.exp();
            (tn * est, tn * bound, ok)
        }
    };
    Ok(GreenValue {
        value: if value.is_finite() { value } else { 0.0 },
        tail_estimate,
        truncation_bound,
        terms_used: terms,
        z,
        reliable,
    })
}

/// `F(x,y|z) = G(x,y|z) / G(y,y|z)` from tail-corrected series.
pub fn f_kernel(
    table: &dyn PowerTable,
    spectrum: &Spectrum,
    x: &GroupElement,
    y: &GroupElement,
    z: f64,
) -> Result<f64> {
    let num = green(table, spectrum, x, y, z, table.depth())?;
    let den = green(table, spectrum, y, y, z, table.depth())?;
    Ok(num.corrected() / den.corrected())
}

/// Options for ρ-Martin kernel evaluation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MartinOptions {
    /// Exponent above which the series is summed at the radius itself.
    pub radius_alpha: f64,
    /// Relative spread above which a ladder estimate is rejected.
    pub ladder_tolerance: f64,
}

impl Default for MartinOptions {
    fn default() -> Self {
        MartinOptions {
            radius_alpha: 1.0,
            ladder_tolerance: 0.1,
        }
    }
}

/// `K(x,y) = lim_{z→1/ρ} G(x,y|z) / G(e,y|z)`.
pub fn martin_kernel(
    table: &dyn PowerTable,
    spectrum: &Spectrum,
    x: &GroupElement,
    y: &GroupElement,
    options: MartinOptions,
) -> Result<KernelEntry> {
    let group = table.group();
    let depth = table.depth();
    if group.is_identity(x) {
        return Ok(KernelEntry::exact(1.0, (0, depth)));
    }
    let e = group.identity();
    let rho = spectrum.rho();
    if spectrum.alpha() > options.radius_alpha {
        let num = green(table, spectrum, x, y, 1.0 / rho, depth)?;
        let den = green(table, spectrum, &e, y, 1.0 / rho, depth)?;
        let estimate = num.corrected() / den.corrected();
        let lo = num.value / (den.value + den.tail_estimate + den.truncation_bound);
        let hi = (num.corrected() + num.truncation_bound) / den.value;
        return Ok(KernelEntry {
            value: KernelValue {
                estimate,
                lo: lo.min(estimate),
                hi: hi.max(estimate),
            },
            window: (0, depth),
            accelerated: true,
            method: EstimateMethod::AtRadius,
            raw_last: num.value / den.value,
        });
    }
    // z_k = (1 − 2^{-k})/ρ̂ while 2^k stays well below the depth
    let rungs = ((depth as f64 / 16.0).log2().floor() as usize).max(3);
    let mut values = Vec::with_capacity(rungs);
    for k in 1..=rungs {
        let z = (1.0 - 0.5f64.powi(k as i32)) / rho;
        let num = green(table, spectrum, x, y, z, depth)?;
        let den = green(table, spectrum, &e, y, z, depth)?;
        values.push(num.corrected() / den.corrected());
    }
    let n = values.len();
    let (a, b, c) = (values[n - 3], values[n - 2], values[n - 1]);
    let estimate = aitken(a, b, c).unwrap_or(c);
    let lo = [a, b, c, estimate].into_iter().fold(f64::INFINITY, f64::min);
    let hi = [a, b, c, estimate].into_iter().fold(f64::NEG_INFINITY, f64::max);
    if !estimate.is_finite() || (hi - lo) > options.ladder_tolerance * estimate.abs() {
        return Err(Error::NotConverged(format!(
            "Martin ladder for ({}, {}) spreads over [{lo}, {hi}]",
            group.format(x),
            group.format(y)
        )));
    }
    Ok(KernelEntry {
        value: KernelValue { estimate, lo, hi },
        window: (1, rungs),
        accelerated: true,
        method: EstimateMethod::Ladder,
        raw_last: c,
    })
}

/// Martin kernel estimates for every pair in `xs × ys`.
pub fn martin_table(
    table: &dyn PowerTable,
    spectrum: &Spectrum,
    xs: &[GroupElement],
    ys: &[GroupElement],
    options: MartinOptions,
) -> Result<KernelTable> {
    let pairs: Vec<(&GroupElement, &GroupElement)> =
        xs.iter().flat_map(|x| ys.iter().map(move |y| (x, y))).collect();
    let entries: Vec<KernelEntry> = pairs
        .par_iter()
        .map(|(x, y)| martin_kernel(table, spectrum, x, y, options))
        .collect::<Result<_>>()?;
    let mut out = KernelTable::new(KernelKind::Martin, table.group(), spectrum.rho(), table.depth());
    for ((x, y), e) in pairs.into_iter().zip(entries) {
        out.insert(x.clone(), y.clone(), e);
    }
    Ok(out)
}

/// A truncated metric value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    /// Sum over the enumeration prefix.
    pub value: f64,
    /// Bound on the omitted terms.
    pub tail_bound: f64,
    /// Propagated kernel uncertainty of `value`.
    pub uncertainty: f64,
}

/// `d(j₁,j₂) = Σ_i (|K(i,j₁) − K(i,j₂)| + |δ_{ij₁} − δ_{ij₂}|) / (C_i 2^{φ(i)})` over
/// the ball, with the omitted terms bounded via `K(i,·) ≤ C_i`.
pub fn martin_metric(
    kernel: &dyn RatioKernel,
    prefix: &Ball,
    bounds: &BoundTable,
    j1: &GroupElement,
    j2: &GroupElement,
) -> Result<MetricValue> {
    let mut value = 0.0;
    let mut uncertainty = 0.0;
    for (phi, i) in prefix.iter() {
        let w = 1.0 / (bounds.upper(i)? * 2f64.powi(phi as i32));
        let (a, b) = (kernel.value(i, j1)?, kernel.value(i, j2)?);
        let delta = ((i == j1) as i32 - (i == j2) as i32).abs() as f64;
        value += ((a.estimate - b.estimate).abs() + delta) * w;
        uncertainty += (a.uncertainty() + b.uncertainty()) * w;
    }
    let n = prefix.len() as i32;
    let mut tail_bound = 2f64.powi(1 - n);
    if j1 != j2 {
        for j in [j1, j2] {
            if !prefix.contains(j) {
                tail_bound += 2f64.powi(-n) / bounds.upper(j)?;
            }
        }
    }
    Ok(MetricValue {
        value,
        tail_bound,
        uncertainty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupDescriptor;
    use crate::walk::{build_powers, PowerOptions, PowersCache, ScaledMeasure};
    use approx::assert_relative_eq;

    fn lazy_z(depth: usize) -> Box<dyn PowerTable> {
        let mu = ScaledMeasure::parse(&GroupDescriptor::lattice(1), "0 1/2\n1 1/4\n-1 1/4").unwrap();
        build_powers(&mu, depth, PowerOptions::default()).unwrap()
    }

    #[test]
    fn lazy_z_radius_is_one() {
        let s = spectral_radius(lazy_z(400).as_ref()).unwrap();
        assert!((s.rho_hat - 1.0).abs() <= 0.02);
        assert!(s.rho_hat <= 1.0);
        assert_eq!(s.period, 1);
    }

    #[test]
    fn srw_free_group_radius() {
        let g = GroupDescriptor::free(2);
        let mu = ScaledMeasure::simple(&g, 0.0).unwrap();
        let t = build_powers(&mu, 2000, PowerOptions::default()).unwrap();
        let s = spectral_radius(t.as_ref()).unwrap();
        assert_eq!(s.method, SpectralMethod::EvenSubsequence);
        assert!((s.rho_hat - 3f64.sqrt() / 2.0).abs() <= 0.01, "{}", s.rho_hat);
    }

    #[test]
    fn trivial_radius_is_exactly_one() {
        let g = GroupDescriptor::Trivial;
        let mu = ScaledMeasure::from_weights(&g, [(g.identity(), 1.0)]).unwrap();
        let t = PowersCache::build(&mu, 20);
        assert_eq!(spectral_radius(&t).unwrap().rho_hat, 1.0);
    }

    #[test]
    fn green_at_zero_and_monotone() {
        let t = lazy_z(120);
        let spec = Spectrum::estimate(t.as_ref()).unwrap();
        let (o, one) = (GroupElement::lattice([0]), GroupElement::lattice([1]));
        let g0 = green(t.as_ref(), &spec, &o, &o, 0.0, 50).unwrap();
        assert_eq!((g0.value, g0.truncation_bound), (1.0, 0.0));
        assert_eq!(green(t.as_ref(), &spec, &o, &one, 0.0, 50).unwrap().value, 0.0);
        let mut prev = 0.0;
        for terms in [10, 20, 40, 60, 80, 100] {
            let g = green(t.as_ref(), &spec, &o, &o, 0.5, terms).unwrap();
            assert!(g.value >= prev);
            prev = g.value;
        }
        // oracle: partial sums of exact return probabilities
        let g100 = green(t.as_ref(), &spec, &o, &o, 0.5, 100).unwrap();
        let g120 = green(t.as_ref(), &spec, &o, &o, 0.5, 120).unwrap();
        assert!((g120.value - g100.value).abs() < 1e-8);
        assert!(green(t.as_ref(), &spec, &o, &o, -1.0, 10).is_err());
    }

    #[test]
    fn f_kernel_diagonal_is_one() {
        let t = lazy_z(100);
        let spec = Spectrum::estimate(t.as_ref()).unwrap();
        let x = GroupElement::lattice([3]);
        assert_relative_eq!(f_kernel(t.as_ref(), &spec, &x, &x, 0.7).unwrap(), 1.0);
    }

    #[test]
    fn martin_base_point_and_diagonal() {
        let g = GroupDescriptor::free(2);
        let mu = ScaledMeasure::simple(&g, 0.2).unwrap();
        let t = build_powers(&mu, 600, PowerOptions::default()).unwrap();
        let spec = Spectrum::estimate(t.as_ref()).unwrap();
        let y = GroupElement::free_word([1, 1]);
        let k = martin_kernel(t.as_ref(), &spec, &g.identity(), &y, MartinOptions::default()).unwrap();
        assert_eq!(k.value.estimate, 1.0);
        let a = GroupElement::free_word([1]);
        let kxx = martin_kernel(t.as_ref(), &spec, &a, &a, MartinOptions::default()).unwrap();
        let f = f_kernel(t.as_ref(), &spec, &g.identity(), &a, 1.0 / spec.rho()).unwrap();
        assert_relative_eq!(kxx.value.estimate, 1.0 / f, max_relative = 1e-9);
    }
}
