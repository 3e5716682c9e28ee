use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::table::{EstimateMethod, KernelEntry, KernelKind, KernelTable, KernelValue};
use crate::accel::tail_estimate;
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::report::{DiagnosticsReport, Provenance};
use crate::walk::{require_aperiodic, PowerTable};

/// `r_m = μ^{*m}(x⁻¹y) / μ^{*m}(y)` for the levels where the denominator is present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSequence {
    pub terms: Vec<(usize, f64)>,
    /// Levels `m ≥ 1` where `μ^{*m}(y) = 0`.
    pub gaps: Vec<usize>,
}

impl RatioSequence {
    /// The last run of consecutive levels.
    pub fn tail_run(&self) -> &[(usize, f64)] {
        let t = &self.terms;
        let mut start = t.len().saturating_sub(1);
        while start > 0 && t[start - 1].0 + 1 == t[start].0 {
            start -= 1;
        }
        &t[start..]
    }
}

fn read(table: &dyn PowerTable, m: usize, g: &GroupElement) -> Result<Option<f64>> {
    table.log_mass(m, g).map_err(|e| match e {
        Error::NotRetained { .. } | Error::Underflow { .. } => Error::Coverage(e.to_string()),
        other => other,
    })
}

pub fn ratio_sequence(table: &dyn PowerTable, x: &GroupElement, y: &GroupElement) -> Result<RatioSequence> {
    require_aperiodic(table)?;
    let group = table.group();
    let g = group.left_quotient(x, y)?;
    let mut terms = Vec::with_capacity(table.depth());
    let mut gaps = Vec::new();
    for m in 1..=table.depth() {
        match read(table, m, y)? {
            None => gaps.push(m),
            Some(den) => {
                let num = read(table, m, &g)?;
                terms.push((m, num.map_or(0.0, |n| (n - den).exp())));
            }
        }
    }
    if terms.is_empty() {
        return Err(Error::Unreachable {
            what: group.format(y),
            depth: table.depth(),
        });
    }
    Ok(RatioSequence { terms, gaps })
}

/// Extrapolated `H(x,y)` with its band.
pub fn estimate_h(table: &dyn PowerTable, x: &GroupElement, y: &GroupElement) -> Result<KernelEntry> {
    if table.group().is_identity(x) {
        table.group().left_quotient(x, y)?;
        return Ok(KernelEntry::exact(1.0, (1, table.depth())));
    }
    let seq = ratio_sequence(table, x, y)?;
    let t = tail_estimate(seq.tail_run())?;
    Ok(KernelEntry {
        value: KernelValue {
            estimate: t.estimate,
            lo: t.lo,
            hi: t.hi,
        },
        window: t.window,
        accelerated: t.accelerated,
        method: if t.accelerated {
            EstimateMethod::Richardson
        } else {
            EstimateMethod::Exact
        },
        raw_last: t.raw_last,
    })
}

/// `Ĥ(x,y)` for every pair in `xs × ys`, estimated in parallel.
pub fn estimate_table(
    table: &dyn PowerTable,
    rho_hat: f64,
    xs: &[GroupElement],
    ys: &[GroupElement],
) -> Result<KernelTable> {
    require_aperiodic(table)?;
    let mut pairs: Vec<(GroupElement, GroupElement)> = xs
        .iter()
        .flat_map(|x| ys.iter().map(move |y| (x.clone(), y.clone())))
        .collect();
    pairs.sort();
    pairs.dedup();
    let entries: Vec<KernelEntry> = pairs
        .par_iter()
        .map(|(x, y)| estimate_h(table, x, y))
        .collect::<Result<_>>()?;
    let mut out = KernelTable::new(KernelKind::Ratio, table.group(), rho_hat, table.depth());
    for ((x, y), e) in pairs.into_iter().zip(entries) {
        out.insert(x, y, e);
    }
    Ok(out)
}

/// `C_x = ρ^n / μ^{*n}(x)` and `c_x = μ^{*n'}(x⁻¹) / ρ^{n'}` at the first levels
/// where `x`, respectively `x⁻¹`, are charged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub n: usize,
    pub upper: f64,
    pub n_inverse: usize,
    pub lower: f64,
}

fn first_level(table: &dyn PowerTable, g: &GroupElement) -> Result<(usize, f64)> {
    for n in 0..=table.depth() {
        if let Some(lp) = read(table, n, g)? {
            return Ok((n, lp));
        }
    }
    Err(Error::Unreachable {
        what: table.group().format(g),
        depth: table.depth(),
    })
}

pub fn bound_constants(table: &dyn PowerTable, rho: f64, x: &GroupElement) -> Result<BoundConstants> {
    let (n, lp) = first_level(table, x)?;
    let (n_inverse, lq) = first_level(table, &table.group().inverse(x)?)?;
    let log_rho = rho.ln();
    Ok(BoundConstants {
        n,
        upper: (n as f64 * log_rho - lp).exp(),
        n_inverse,
        lower: (lq - n_inverse as f64 * log_rho).exp(),
    })
}

/// Bound constants for a set of elements.
#[derive(Clone, Debug, Default)]
pub struct BoundTable {
    entries: BTreeMap<GroupElement, BoundConstants>,
}

impl BoundTable {
    pub fn compute<'a>(
        table: &dyn PowerTable,
        rho: f64,
        elements: impl IntoIterator<Item = &'a GroupElement>,
    ) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for g in elements {
            if !entries.contains_key(g) {
                entries.insert(g.clone(), bound_constants(table, rho, g)?);
            }
        }
        Ok(BoundTable { entries })
    }

    /// Constants that are 1 everywhere, for kernels bounded by 1 in absolute difference.
    pub fn unit<'a>(elements: impl IntoIterator<Item = &'a GroupElement>) -> Self {
        BoundTable {
            entries: elements
                .into_iter()
                .map(|g| {
                    (
                        g.clone(),
                        BoundConstants {
                            n: 0,
                            upper: 1.0,
                            n_inverse: 0,
                            lower: 1.0,
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn get(&self, g: &GroupElement) -> Option<&BoundConstants> {
        self.entries.get(g)
    }

    pub fn upper(&self, g: &GroupElement) -> Result<f64> {
        self.entries
            .get(g)
            .map(|b| b.upper)
            .ok_or_else(|| Error::Coverage(format!("no bound constants for {g:?}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupElement, &BoundConstants)> {
        self.entries.iter()
    }
}

/// Oscillation of the accelerated ratio tails over a ball.
pub fn srlp_diagnostic(
    table: &dyn PowerTable,
    rho_hat: f64,
    ball_radius: usize,
    tolerance: f64,
) -> Result<DiagnosticsReport> {
    require_aperiodic(table)?;
    let ball = table.group().ball(ball_radius)?;
    let kt = estimate_table(table, rho_hat, ball.elements(), ball.elements())?;
    Ok(srlp_summary(&kt, tolerance).provenance(Provenance {
        depth: Some(table.depth()),
        rho_hat: Some(rho_hat),
        acceleration: Some(ACCELERATION.into()),
        engine: Some(format!("{:?}", table.engine())),
        window: None,
    }))
}

/// Label of the acceleration scheme used for ratio tails.
pub const ACCELERATION: &str = "richardson-2, band over last quarter";

/// SRLP verdict from an estimated ratio table.
pub fn srlp_summary(kt: &KernelTable, tolerance: f64) -> DiagnosticsReport {
    let group = &kt.group;
    let mut worst = 0.0f64;
    let mut worst_raw = 0.0f64;
    let mut offenders = Vec::new();
    for ((x, y), e) in &kt.entries {
        let osc = e.value.hi - e.value.lo;
        worst = worst.max(osc);
        worst_raw = worst_raw.max((e.raw_last - e.value.estimate).abs());
        if osc > tolerance {
            offenders.push(format!("({}, {})", group.format(x), group.format(y)));
        }
    }
    let mut report = DiagnosticsReport::new("srlp")
        .input("group", group.to_string())
        .input("pairs", kt.len())
        .tolerance("oscillation", tolerance)
        .provenance(Provenance {
            depth: Some(kt.depth),
            rho_hat: Some(kt.rho_hat),
            acceleration: Some(ACCELERATION.into()),
            ..Provenance::default()
        })
        .data(serde_json::json!({ "offenders": offenders }));
    report.check("max accelerated tail oscillation", worst, tolerance);
    report.note("max |raw - accelerated|", worst_raw);
    report.finish(
        &format!("consistent with SRLP at tol {tolerance}"),
        "tail oscillation above tolerance",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupDescriptor;
    use crate::walk::{build_powers, PowerOptions, ScaledMeasure};
    use approx::assert_relative_eq;

    fn lazy_z(depth: usize) -> Box<dyn PowerTable> {
        let mu = ScaledMeasure::parse(&GroupDescriptor::lattice(1), "0 1/2\n1 1/4\n-1 1/4").unwrap();
        build_powers(&mu, depth, PowerOptions::default()).unwrap()
    }

    #[test]
    fn identity_row_is_constant() {
        let t = lazy_z(50);
        let e = GroupElement::lattice([0]);
        let y = GroupElement::lattice([2]);
        let s = ratio_sequence(t.as_ref(), &e, &y).unwrap();
        assert!(s.terms.iter().all(|&(_, r)| r == 1.0));
        assert_eq!(s.gaps, vec![1]);
        assert_eq!(estimate_h(t.as_ref(), &e, &y).unwrap().value.estimate, 1.0);
    }

    #[test]
    fn lazy_z_ratio_tends_to_one() {
        let t = lazy_z(256);
        let s = ratio_sequence(t.as_ref(), &GroupElement::lattice([1]), &GroupElement::lattice([0])).unwrap();
        let tail: Vec<f64> = s.terms[200..].iter().map(|p| p.1).collect();
        assert!(tail.windows(2).all(|w| w[1] >= w[0]));
        let h = estimate_h(t.as_ref(), &GroupElement::lattice([1]), &GroupElement::lattice([0])).unwrap();
        assert!((h.value.estimate - 1.0).abs() < 1e-3);
    }

    #[test]
    fn periodic_walk_is_rejected() {
        let mu = ScaledMeasure::parse(&GroupDescriptor::lattice(1), "1 1/2\n-1 1/2").unwrap();
        let t = build_powers(&mu, 20, PowerOptions::default()).unwrap();
        let e = GroupElement::lattice([0]);
        assert!(matches!(ratio_sequence(t.as_ref(), &e, &e), Err(Error::Periodic { period: 2 })));
        assert!(matches!(srlp_diagnostic(t.as_ref(), 1.0, 2, 0.02), Err(Error::Periodic { .. })));
    }

    #[test]
    fn lazy_z_bound_constants() {
        let t = lazy_z(10);
        assert_eq!(
            bound_constants(t.as_ref(), 1.0, &GroupElement::lattice([0])).unwrap(),
            BoundConstants {
                n: 0,
                upper: 1.0,
                n_inverse: 0,
                lower: 1.0
            }
        );
        let b = bound_constants(t.as_ref(), 1.0, &GroupElement::lattice([1])).unwrap();
        assert_eq!(b.n, 1);
        assert_relative_eq!(b.upper, 4.0, max_relative = 1e-12);
        assert_relative_eq!(b.lower, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn srlp_lazy_z() {
        let t = lazy_z(256);
        let r = srlp_diagnostic(t.as_ref(), 1.0, 3, 0.02).unwrap();
        assert!(r.passed(), "{:?}", r.verdict);
    }
}
