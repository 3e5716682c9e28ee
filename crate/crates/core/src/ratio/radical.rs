use serde::{Deserialize, Serialize};

use super::table::RatioKernel;
use crate::error::Result;
use crate::group::{GroupDescriptor, GroupElement};
use crate::report::DiagnosticsReport;

/// Smallest tolerance used when every kernel value is exact.
pub const MIN_RADICAL_TOLERANCE: f64 = 1e-9;

/// Band used to decide `Ĥ(x,y) = Ĥ(x,e)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum RadicalTolerance {
    /// `factor` times the largest kernel uncertainty over the tested pairs.
    Auto { factor: f64 },
    Absolute { value: f64 },
}

impl Default for RadicalTolerance {
    fn default() -> Self {
        RadicalTolerance::Auto { factor: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadicalReport {
    pub ball_radius: usize,
    pub probe_radius: usize,
    pub tolerance: f64,
    /// Elements `y` of the tested ball with `max_x |Ĥ(x,y) − Ĥ(x,e)| ≤ tol`.
    pub flagged: Vec<GroupElement>,
    /// `max_x |Ĥ(x,y) − Ĥ(x,e)|` for every tested `y`, in ball order.
    pub deviations: Vec<(GroupElement, f64)>,
    pub product_residual: f64,
    pub inverse_residual: f64,
    pub report: DiagnosticsReport,
}

impl RadicalReport {
    pub fn is_flagged(&self, g: &GroupElement) -> bool {
        self.flagged.contains(g)
    }
}

/// Flags the elements of a ball on which `Ĥ(x,·)` agrees with `Ĥ(x,e)` for
/// every `x` of the probe ball, then checks closure of the flagged set.
pub fn detect_radical(
    kernel: &dyn RatioKernel,
    group: &GroupDescriptor,
    ball_radius: usize,
    probe_radius: usize,
    tolerance: RadicalTolerance,
) -> Result<RadicalReport> {
    let ball = group.ball(ball_radius)?;
    let probe = group.ball(probe_radius)?;
    let e = group.identity();
    let mut base = Vec::with_capacity(probe.len());
    let mut max_unc = 0.0f64;
    for x in probe.elements() {
        let v = kernel.value(x, &e)?;
        max_unc = max_unc.max(v.uncertainty());
        base.push(v.estimate);
    }
    let mut deviations = Vec::with_capacity(ball.len());
    for y in ball.elements() {
        let mut dev = 0.0f64;
        for (x, b) in probe.elements().iter().zip(&base) {
            let v = kernel.value(x, y)?;
            max_unc = max_unc.max(v.uncertainty());
            dev = dev.max((v.estimate - b).abs());
        }
        deviations.push((y.clone(), dev));
    }
    let tol = match tolerance {
        RadicalTolerance::Auto { factor } => (factor * max_unc).max(MIN_RADICAL_TOLERANCE),
        RadicalTolerance::Absolute { value } => value,
    };
    let flagged: Vec<GroupElement> = deviations
        .iter()
        .filter(|(y, d)| group.is_identity(y) || *d <= tol)
        .map(|(y, _)| y.clone())
        .collect();

    let closure = |g: &GroupElement| -> Result<f64> {
        let mut r = 0.0f64;
        for (x, b) in probe.elements().iter().zip(&base) {
            r = r.max((kernel.value(x, g)?.estimate - b).abs());
        }
        Ok(r)
    };
    let mut product_residual = 0.0f64;
    let mut inverse_residual = 0.0f64;
    for y in &flagged {
        let inv = group.inverse(y)?;
        if ball.contains(&inv) {
            inverse_residual = inverse_residual.max(closure(&inv)?);
        }
        for z in &flagged {
            let yz = group.multiply(y, z)?;
            if ball.contains(&yz) {
                product_residual = product_residual.max(closure(&yz)?);
            }
        }
    }

    let mut report = DiagnosticsReport::new("radical")
        .input("group", group.to_string())
        .input("kernel", kernel.label())
        .input("ball_radius", ball_radius)
        .input("probe_radius", probe_radius)
        .tolerance("flag", tol)
        .tolerance("closure", 3.0 * tol)
        .data(serde_json::json!({
            "flagged": flagged.iter().map(|g| group.format(g)).collect::<Vec<_>>(),
        }));
    report.note("flagged elements", flagged.len() as f64);
    report.note("max kernel uncertainty", max_unc);
    report.check("product closure residual", product_residual, 3.0 * tol);
    report.check("inverse closure residual", inverse_residual, 3.0 * tol);
    let report = report.finish(
        &format!("{} of {} elements flagged, closed under products and inverses", flagged.len(), ball.len()),
        "flagged set not closed",
    );
    Ok(RadicalReport {
        ball_radius,
        probe_radius,
        tolerance: tol,
        flagged,
        deviations,
        product_residual,
        inverse_residual,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::{FreeClosedForm, UnitKernel};

    #[test]
    fn unit_kernel_flags_everything() {
        let g = GroupDescriptor::lattice(2);
        let r = detect_radical(&UnitKernel, &g, 3, 2, RadicalTolerance::default()).unwrap();
        assert_eq!(r.flagged.len(), 25);
        assert!(r.report.passed());
    }

    #[test]
    fn free_closed_form_flags_only_identity() {
        let g = GroupDescriptor::free(2);
        let r = detect_radical(&FreeClosedForm { rank: 2 }, &g, 2, 2, RadicalTolerance::default()).unwrap();
        assert_eq!(r.flagged, vec![g.identity()]);
        assert!(r.is_flagged(&g.identity()));
        let min_dev = r.deviations[1..].iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
        assert!(min_dev > 0.1);
    }
}
