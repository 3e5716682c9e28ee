use serde::{Deserialize, Serialize};

use super::estimate::BoundTable;
use super::table::RatioKernel;
use crate::error::Result;
use crate::group::{Ball, GroupDescriptor, GroupElement};
use crate::report::DiagnosticsReport;
use crate::spectral::MetricValue;

/// `d(y,z) = Σ_x |H(x,y) − H(x,z)| / (C_x 2^{φ(x)})` over the enumeration prefix.
/// Each omitted summand is at most `2^{−φ(x)}`, so the tail is at most `2^{1−N}`
/// for a prefix of `N` elements.
pub fn ratio_metric(
    kernel: &dyn RatioKernel,
    prefix: &Ball,
    bounds: &BoundTable,
    y: &GroupElement,
    z: &GroupElement,
) -> Result<MetricValue> {
    let mut value = 0.0;
    let mut uncertainty = 0.0;
    for (phi, x) in prefix.iter() {
        let w = 1.0 / (bounds.upper(x)? * 2f64.powi(phi as i32));
        if y == z {
            continue;
        }
        let (a, b) = (kernel.value(x, y)?, kernel.value(x, z)?);
        value += (a.estimate - b.estimate).abs() * w;
        uncertainty += (a.uncertainty() + b.uncertainty()) * w;
    }
    Ok(MetricValue {
        value,
        tail_bound: if y == z { 0.0 } else { 2f64.powi(1 - prefix.len() as i32) },
        uncertainty,
    })
}

/// Per-`x` traces of `H(x, y_k)` along a sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub x: String,
    pub values: Vec<f64>,
}

/// Follows `H(·, y_k)` along a sequence and tests it for Cauchy-ness in the
/// ratio metric over the second half of the sequence.
pub fn boundary_trace(
    kernel: &dyn RatioKernel,
    group: &GroupDescriptor,
    prefix: &Ball,
    bounds: &BoundTable,
    sequence: &[GroupElement],
    tolerance: f64,
) -> Result<DiagnosticsReport> {
    let mut traces = Vec::with_capacity(prefix.len());
    for x in prefix.elements() {
        let values = sequence
            .iter()
            .map(|y| kernel.value(x, y).map(|v| v.estimate))
            .collect::<Result<Vec<_>>>()?;
        traces.push(Trace {
            x: group.format(x),
            values,
        });
    }
    let half = sequence.len() / 2;
    let tail = &sequence[half..];
    let mut diameter = 0.0f64;
    let mut uncertainty = 0.0f64;
    let mut tail_bound = 0.0f64;
    for (i, a) in tail.iter().enumerate() {
        for b in &tail[i + 1..] {
            let d = ratio_metric(kernel, prefix, bounds, a, b)?;
            diameter = diameter.max(d.value);
            uncertainty = uncertainty.max(d.uncertainty);
            tail_bound = tail_bound.max(d.tail_bound);
        }
    }
    let residual = diameter + tail_bound;
    let limit: Vec<(String, f64)> = traces
        .iter()
        .map(|t| (t.x.clone(), t.values.last().copied().unwrap_or(f64::NAN)))
        .collect();
    let mut report = DiagnosticsReport::new("boundary-trace")
        .input("group", group.to_string())
        .input("kernel", kernel.label())
        .input(
            "sequence",
            sequence.iter().map(|g| group.format(g)).collect::<Vec<_>>(),
        )
        .input("prefix", prefix.len())
        .tolerance("cauchy", tolerance)
        .data(serde_json::json!({ "traces": traces, "limit": limit }));
    report.check("cauchy residual", residual, tolerance);
    report.note("metric tail bound", tail_bound);
    report.note("kernel uncertainty", uncertainty);
    Ok(report.finish("converging", "not Cauchy"))
}

/// Zero diagonal, symmetry and the triangle inequality of a distance matrix.
pub fn pseudometric_report(name: &str, labels: &[String], d: &[Vec<f64>], tolerance: f64) -> DiagnosticsReport {
    let n = d.len();
    let (mut diag, mut sym, mut tri) = (0.0f64, 0.0f64, 0.0f64);
    for a in 0..n {
        diag = diag.max(d[a][a].abs());
        for b in 0..n {
            sym = sym.max((d[a][b] - d[b][a]).abs());
            for c in 0..n {
                tri = tri.max(d[a][c] - d[a][b] - d[b][c]);
            }
        }
    }
    let mut report = DiagnosticsReport::new(name)
        .input("points", labels)
        .tolerance("exact", tolerance)
        .data(serde_json::json!({ "matrix": d }));
    report.check("max d(y,y)", diag, tolerance);
    report.check("max |d(y,z) - d(z,y)|", sym, tolerance);
    report.check("max triangle excess", tri.max(0.0), tolerance);
    report.finish("pseudometric axioms hold", "pseudometric axiom violated")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::{FreeClosedForm, UnitKernel};

    fn a_pow(k: usize, letter: i32) -> GroupElement {
        GroupElement::free_word(std::iter::repeat_n(letter, k))
    }

    #[test]
    fn metric_zero_on_diagonal_and_unit_kernel() {
        let g = GroupDescriptor::free(2);
        let ball = g.ball(2).unwrap();
        let bounds = BoundTable::unit(ball.elements());
        let y = a_pow(3, 1);
        let d = ratio_metric(&FreeClosedForm { rank: 2 }, &ball, &bounds, &y, &y).unwrap();
        assert_eq!((d.value, d.tail_bound), (0.0, 0.0));
        let d = ratio_metric(&UnitKernel, &ball, &bounds, &y, &a_pow(2, 2)).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn geodesic_ray_converges_and_alternation_does_not() {
        let g = GroupDescriptor::free(2);
        let ball = g.ball(2).unwrap();
        let bounds = BoundTable::unit(ball.elements());
        let k = FreeClosedForm { rank: 2 };
        let ray: Vec<GroupElement> = (6..=24).map(|n| a_pow(n, 1)).collect();
        let r = boundary_trace(&k, &g, &ball, &bounds, &ray, 0.05).unwrap();
        assert!(r.passed(), "{:?}", r.residuals);
        let alt: Vec<GroupElement> = (6..=12).map(|n| a_pow(n, if n % 2 == 0 { 1 } else { 2 })).collect();
        let r = boundary_trace(&k, &g, &ball, &bounds, &alt, 0.05).unwrap();
        assert!(!r.passed());
    }
}
