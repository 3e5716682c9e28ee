use serde::{Deserialize, Serialize};

use super::table::RatioKernel;
use crate::error::{Error, Result};
use crate::group::{GroupDescriptor, GroupElement};
use crate::report::DiagnosticsReport;
use crate::walk::ScaledMeasure;

/// A residual together with the uncertainty propagated from kernel bands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelResidual {
    pub residual: f64,
    pub uncertainty: f64,
}

/// `|H(x,gy)·H(g⁻¹,y) − H(g⁻¹x,y)|`.
pub fn cocycle_check(
    kernel: &dyn RatioKernel,
    group: &GroupDescriptor,
    g: &GroupElement,
    x: &GroupElement,
    y: &GroupElement,
) -> Result<KernelResidual> {
    let gi = group.inverse(g)?;
    let a = kernel.value(x, &group.multiply(g, y)?)?;
    let b = kernel.value(&gi, y)?;
    let c = kernel.value(&group.multiply(&gi, x)?, y)?;
    Ok(KernelResidual {
        residual: (a.estimate * b.estimate - c.estimate).abs(),
        uncertainty: a.estimate.abs() * b.uncertainty()
            + b.estimate.abs() * a.uncertainty()
            + a.uncertainty() * b.uncertainty()
            + c.uncertainty(),
    })
}

/// `|Σ_s μ(s) H(xs,y) − ρ H(x,y)|`.
pub fn rho_harmonicity_check(
    kernel: &dyn RatioKernel,
    step: &ScaledMeasure,
    rho: f64,
    x: &GroupElement,
    y: &GroupElement,
) -> Result<KernelResidual> {
    let group = step.group();
    let mut sum = 0.0;
    let mut uncertainty = 0.0;
    for (s, _) in step.mantissas() {
        let p = step.value(s);
        let v = kernel.value(&group.multiply(x, s)?, y)?;
        sum += p * v.estimate;
        uncertainty += p * v.uncertainty();
    }
    let own = kernel.value(x, y)?;
    Ok(KernelResidual {
        residual: (sum - rho * own.estimate).abs(),
        uncertainty: uncertainty + rho * own.uncertainty(),
    })
}

/// Exact spectral radius `p₀ + 2μ₁√(2s−1)` of a nearest-neighbour isotropic
/// walk on `F_s`; `None` for any other measure.
pub fn nearest_neighbour_rho(step: &ScaledMeasure) -> Option<f64> {
    let GroupDescriptor::Free { rank } = *step.group() else {
        return None;
    };
    let group = step.group();
    let gens = group.generators();
    let mu1 = step.value(&gens[0]);
    let isotropic = gens.iter().all(|g| (step.value(g) - mu1).abs() <= 1e-12 * mu1);
    let local = step
        .mantissas()
        .all(|(g, _)| group.is_identity(g) || gens.contains(g));
    if !(isotropic && local && mu1 > 0.0) {
        return None;
    }
    Some(step.value(&group.identity()) + 2.0 * mu1 * (2.0 * rank as f64 - 1.0).sqrt())
}

/// Relative comparison `|K̂(x,y_k) − Ĥ(x,y_k)| / Ĥ(x,y_k)` along a sequence.
pub fn martin_vs_ratio(
    martin: &dyn RatioKernel,
    ratio: &dyn RatioKernel,
    group: &GroupDescriptor,
    xs: &[GroupElement],
    sequence: &[GroupElement],
    tolerance: f64,
) -> Result<DiagnosticsReport> {
    if sequence.is_empty() {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    let mut worst = 0.0f64;
    let mut worst_abs = 0.0f64;
    let mut combined = 0.0f64;
    let mut rows = Vec::new();
    for x in xs {
        for y in sequence {
            let k = martin.value(x, y)?;
            let h = ratio.value(x, y)?;
            let diff = (k.estimate - h.estimate).abs();
            let rel = diff / h.estimate.abs();
            worst = worst.max(rel);
            worst_abs = worst_abs.max(diff);
            combined = combined.max(k.uncertainty() + h.uncertainty());
            rows.push(serde_json::json!({
                "x": group.format(x),
                "y": group.format(y),
                "martin": k.estimate,
                "ratio": h.estimate,
                "relative": rel,
            }));
        }
    }
    let mut report = DiagnosticsReport::new("martin-vs-ratio")
        .input("group", group.to_string())
        .input("martin", martin.label())
        .input("ratio", ratio.label())
        .tolerance("relative", tolerance)
        .data(rows);
    report.check("max relative difference", worst, tolerance);
    report.note("max absolute difference", worst_abs);
    report.note("max combined uncertainty", combined);
    Ok(report.finish("kernels agree along the sequence", "kernels differ"))
}
