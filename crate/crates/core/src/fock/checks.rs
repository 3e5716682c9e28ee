use std::collections::{BTreeSet, HashSet};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::build::{
    build_e, build_h, build_p, build_s, build_t, build_u, build_u_x, build_w, compose_e, compose_h,
    compose_u_x, minimal_n,
};
use super::operator::{Scalar, SparseOp, WindowedOperator};
use super::window::FockWindow;
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::ratio::RatioKernel;
use crate::report::{DiagnosticsReport, Provenance};
use crate::walk::{transition, PowerTable};

/// Tolerance for identities that hold exactly above their edge thresholds.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// Relative change between the last two ladder rungs accepted as stable.
pub const QUOTIENT_LADDER_TOLERANCE: f64 = 0.02;

/// Defect norm per interior input level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectProfile {
    pub threshold: usize,
    pub levels: Vec<(usize, f64)>,
    /// Largest defect at levels `≥ threshold`.
    pub above: f64,
    /// Largest defect below the threshold.
    pub below: f64,
}

fn last_interior(w: &FockWindow) -> Result<usize> {
    (w.max_level() + 1)
        .checked_sub(w.interior_margin() + 1)
        .and_then(|n| n.checked_sub(1))
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "window of depth {} has no interior with margin {}",
                w.max_level(),
                w.interior_margin()
            ))
        })
}

/// Norm of `d` restricted to interior inputs at each level and interior outputs.
pub fn level_profile<T: Scalar>(w: &FockWindow, d: &SparseOp<T>, threshold: usize) -> Result<DefectProfile> {
    let top = last_interior(w)?;
    let mut levels = Vec::with_capacity(top + 1);
    let (mut above, mut below) = (0.0f64, 0.0f64);
    for m in 0..=top {
        let block = d.restrict(|o| w.is_interior(o), |i| w.basis_at(i).level == m);
        let v = block.norm();
        levels.push((m, v));
        if m >= threshold {
            above = above.max(v);
        } else {
            below = below.max(v);
        }
    }
    Ok(DefectProfile {
        threshold,
        levels,
        above,
        below,
    })
}

fn require_threshold(w: &FockWindow, m0: usize) -> Result<()> {
    if m0 > last_interior(w)? {
        Err(Error::InvalidArgument(format!(
            "window interior ends before the edge threshold {m0}"
        )))
    } else {
        Ok(())
    }
}

fn provenance(w: &FockWindow) -> Provenance {
    Provenance {
        depth: Some(w.max_level()),
        window: Some(format!(
            "levels 0..={}, margin {}, rows {}, cols {}, basis {}",
            w.max_level(),
            w.interior_margin(),
            w.rows().radius(),
            w.cols().radius(),
            w.len()
        )),
        ..Provenance::default()
    }
}

fn rows_of(w: &FockWindow, elems: &[&GroupElement]) -> Result<Vec<usize>> {
    elems.iter().map(|g| w.row_of(g)).collect()
}

fn e_op(w: &FockWindow, x: &GroupElement, y: &GroupElement) -> Result<WindowedOperator> {
    build_e(w, x, y, minimal_n(w, &[(x, x), (x, y)])?)
}

/// Matrix-unit relations `E_{x,y}E_{y',z} = δ_{y,y'}E_{x,z}` and `E_{x,y}* = E_{y,x}`.
pub fn matrix_unit_defects(w: &FockWindow, quads: &[[GroupElement; 4]]) -> Result<DiagnosticsReport> {
    let fmt = |g: &GroupElement| w.group().format(g);
    let mut report = DiagnosticsReport::new("matrix-units")
        .input("group", w.group().to_string())
        .tolerance("exact", EXACT_TOLERANCE)
        .provenance(provenance(w));
    let mut profiles = Vec::new();
    for [x, y, y2, z] in quads {
        let m0 = w.presence_threshold(&rows_of(w, &[x, y, y2, z])?);
        require_threshold(w, m0)?;
        let mut lhs = e_op(w, x, y)?.compose(&e_op(w, y2, z)?);
        if y == y2 {
            lhs = lhs.sub(&e_op(w, x, z)?);
        }
        let p = level_profile(w, &lhs, m0)?;
        let tag = format!("({}, {}, {}, {})", fmt(x), fmt(y), fmt(y2), fmt(z));
        report.check(format!("matrix unit {tag} at m >= {m0}"), p.above, EXACT_TOLERANCE);
        report.note(format!("matrix unit {tag} below m0"), p.below);
        profiles.push(serde_json::json!({ "relation": format!("product {tag}"), "profile": p }));

        let m0 = w.presence_threshold(&rows_of(w, &[x, y])?);
        let adj = e_op(w, x, y)?.adjoint().sub(&e_op(w, y, x)?);
        let p = level_profile(w, &adj, m0)?;
        let tag = format!("({}, {})", fmt(x), fmt(y));
        report.check(format!("adjoint {tag} at m >= {m0}"), p.above, EXACT_TOLERANCE);
        report.note(format!("adjoint {tag} below m0"), p.below);
        profiles.push(serde_json::json!({ "relation": format!("adjoint {tag}"), "profile": p }));
    }
    Ok(report
        .data(profiles)
        .finish("matrix-unit relations exact above threshold", "matrix-unit defect"))
}

fn identity(w: &FockWindow) -> WindowedOperator {
    WindowedOperator::from_entries("I", (0..w.len()).map(|i| ((i, i), 1.0)))
}

/// `U*U = UU* = I` and the commutators of `U` with `E_{x,y}` and `H^{(e)}_{x,y}`.
pub fn unitary_and_commutation_defects(
    w: &FockWindow,
    pairs: &[(GroupElement, GroupElement)],
    kernel: &dyn RatioKernel,
) -> Result<DiagnosticsReport> {
    let u = build_u(w)?;
    let all_rows: Vec<usize> = (0..w.rows().len()).collect();
    let m0 = w.presence_threshold(&all_rows);
    require_threshold(w, m0 + 1)?;
    let id = identity(w);
    let mut report = DiagnosticsReport::new("unitary-commutation")
        .input("group", w.group().to_string())
        .input("m0", m0)
        .tolerance("exact", EXACT_TOLERANCE)
        .provenance(provenance(w));
    let mut profiles = Vec::new();
    let mut push = |report: &mut DiagnosticsReport, label: String, p: DefectProfile| {
        report.check(format!("{label} at m >= {}", p.threshold), p.above, EXACT_TOLERANCE);
        report.note(format!("{label} below threshold"), p.below);
        profiles.push(serde_json::json!({ "relation": label, "profile": p }));
    };
    let uu = u.adjoint().compose(&u).sub(&id);
    push(&mut report, "U*U - I".into(), level_profile(w, &uu, m0 + 1)?);
    let uu = u.compose(&u.adjoint()).sub(&id);
    push(&mut report, "UU* - I".into(), level_profile(w, &uu, m0 + 1)?);
    let e = w.group().identity();
    for (x, y) in pairs {
        let tag = format!("({}, {})", w.group().format(x), w.group().format(y));
        let ex = e_op(w, x, y)?;
        let c = ex.compose(&u).sub(&u.compose(&ex));
        push(&mut report, format!("[E{tag}, U]"), level_profile(w, &c, m0)?);
        let n = minimal_n(w, &[(y, y), (y, &e), (&e, &e), (&e, y)])?;
        let h = build_h(w, &e, x, y, n, kernel)?;
        let c = h.compose(&u).sub(&u.compose(&h));
        push(&mut report, format!("[H{tag}, U]"), level_profile(w, &c, m0)?);
    }
    Ok(report
        .data(profiles)
        .finish("unitarity and commutation exact above threshold", "unitary/commutation defect"))
}

/// `W^{(n)}_{x,y} − U_x^n E_{x,e} H^{(e)}_{x,y} E_{e,y}`.
pub fn generator_identity_defect(
    w: &FockWindow,
    n: usize,
    x: &GroupElement,
    y: &GroupElement,
    kernel: &dyn RatioKernel,
) -> Result<DiagnosticsReport> {
    let e = w.group().identity();
    let m0 = w.presence_threshold(&rows_of(w, &[x, y, &e])?);
    require_threshold(w, m0)?;
    let lhs = build_w(w, n, x, y, kernel)?;
    let nh = minimal_n(w, &[(y, y), (y, &e), (&e, &e), (&e, y)])?;
    let mut rhs = e_op(w, x, &e)?
        .compose(&build_h(w, &e, x, y, nh, kernel)?)
        .compose(&e_op(w, &e, y)?);
    let ux = build_u_x(w, x, minimal_n(w, &[(x, x)])?)?;
    for _ in 0..n {
        rhs = ux.compose(&rhs);
    }
    let p = level_profile(w, &lhs.sub(&rhs), m0)?;
    let mut report = DiagnosticsReport::new("generator-identity")
        .input("group", w.group().to_string())
        .input("n", n)
        .input("x", w.group().format(x))
        .input("y", w.group().format(y))
        .input("kernel", kernel.label())
        .tolerance("exact", EXACT_TOLERANCE)
        .provenance(provenance(w));
    report.check(format!("defect at m >= {m0}"), p.above, EXACT_TOLERANCE);
    report.note("defect below threshold", p.below);
    Ok(report
        .data(p)
        .finish("generator identity exact above threshold", "generator identity defect"))
}

/// Agreement of `E`, `U_x` and `H^{(z)}` built from their action formulas with
/// the same operators built as products of `V`s.
pub fn composition_agreement(
    w: &FockWindow,
    x: &GroupElement,
    y: &GroupElement,
    z: &GroupElement,
    kernel: &dyn RatioKernel,
) -> Result<DiagnosticsReport> {
    let ne = minimal_n(w, &[(x, x), (x, y)])?;
    let nu = minimal_n(w, &[(x, x)])?;
    let nh = minimal_n(w, &[(y, y), (y, z), (z, z), (z, y)])?;
    let need = ne.max(nu + 1).max(nh);
    if w.interior_margin() < need {
        return Err(Error::InvalidArgument(format!(
            "interior margin {} is below the largest shift {need}",
            w.interior_margin()
        )));
    }
    let interior = |i: usize| w.is_interior(i);
    let diff = |a: WindowedOperator, b: WindowedOperator| a.sub(&b).restrict(interior, interior).max_abs();
    let mut report = DiagnosticsReport::new("composition-agreement")
        .input("group", w.group().to_string())
        .input("x", w.group().format(x))
        .input("y", w.group().format(y))
        .input("z", w.group().format(z))
        .tolerance("exact", EXACT_TOLERANCE)
        .provenance(provenance(w));
    report.check("E formula vs product", diff(build_e(w, x, y, ne)?, compose_e(w, x, y, ne)?), EXACT_TOLERANCE);
    report.check("U formula vs product", diff(build_u_x(w, x, nu)?, compose_u_x(w, x, nu)?), EXACT_TOLERANCE);
    report.check(
        "H formula vs product",
        diff(build_h(w, z, x, y, nh, kernel)?, compose_h(w, z, x, y, nh, kernel)?),
        EXACT_TOLERANCE,
    );
    Ok(report.finish("formulas agree with products on the interior", "formula/product mismatch"))
}

/// `R^{(0)}_x = S^{(0)}_{x,x} − Σ_{(x,y) ∈ E(P)} S^{(1)}_{x,y} S^{(1)*}_{x,y}` fixes
/// `e^{(0)}_{x,x}` and annihilates everything else.
pub fn q0_projection_check(w: &FockWindow, x: &GroupElement) -> Result<DiagnosticsReport> {
    let group = w.group();
    let xr = w.row_of(x)?;
    let mut r0 = build_p(w, x)?;
    for (s, _) in w.step().mantissas() {
        let y = group.multiply(x, s)?;
        if !w.rows().contains(&y) {
            return Err(Error::Coverage(format!(
                "neighbour {} of {} is outside the row ball",
                group.format(&y),
                group.format(x)
            )));
        }
        let s1 = build_s(w, 1, x, &y)?;
        r0 = r0.sub(&s1.compose(&s1.adjoint()));
    }
    let r0 = r0.with_label(format!("R0[{}]", group.format(x)));
    let i0 = w
        .index(0, xr, w.col_of(x)?)
        .ok_or_else(|| Error::Coverage("e^(0)_{x,x} outside the window".into()))?;
    let fixed = r0
        .sub(&WindowedOperator::from_entries("", [((i0, i0), 1.0)]))
        .restrict(|_| true, |i| i == i0)
        .max_abs();
    let row_tail = r0.restrict(|_| true, |i| i != i0 && w.basis_at(i).row == xr).max_abs();
    let other = r0.restrict(|_| true, |i| w.basis_at(i).row != xr).max_abs();
    let mut report = DiagnosticsReport::new("q0-projection")
        .input("group", group.to_string())
        .input("x", group.format(x))
        .tolerance("exact", EXACT_TOLERANCE)
        .provenance(provenance(w));
    report.check("R0 e(0)_xx - e(0)_xx", fixed, EXACT_TOLERANCE);
    report.check("R0 on e(m+1)_xz", row_tail, EXACT_TOLERANCE);
    report.check("R0 on other rows", other, EXACT_TOLERANCE);
    Ok(report.finish("R0 is the projection onto e(0)_xx", "R0 defect"))
}

/// `U_{n,m} U_{n,m}* = I` on `span{e_{x,z} : (x,z) ∈ E(P^{n+m})}` over the balls.
pub fn subproduct_coisometry_check(
    table: &dyn PowerTable,
    n: usize,
    m: usize,
    row_radius: usize,
    col_radius: usize,
) -> Result<DiagnosticsReport> {
    table.check_level(n + m)?;
    let group = table.group();
    let rows = group.ball(row_radius)?;
    let cols = group.ball(col_radius)?;
    let reach = group.ball(n * table.step().radius()?)?;
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for x in rows.elements() {
        for z in cols.elements() {
            let Some(lxz) = transition(table, n + m, x, z)? else {
                continue;
            };
            let mut sum = 0.0;
            for s in reach.elements() {
                let Some(lxy) = table.log_mass(n, s)? else {
                    continue;
                };
                let y = group.multiply(x, s)?;
                if let Some(lyz) = transition(table, m, &y, z)? {
                    sum += (lxy + lyz - lxz).exp();
                }
            }
            worst = worst.max((sum - 1.0).abs());
            count += 1;
        }
    }
    let mut report = DiagnosticsReport::new("subproduct-coisometry")
        .input("group", group.to_string())
        .input("n", n)
        .input("m", m)
        .input("pairs", count)
        .tolerance("exact", EXACT_TOLERANCE)
        .provenance(Provenance {
            depth: Some(table.depth()),
            engine: Some(format!("{:?}", table.engine())),
            ..Provenance::default()
        });
    report.check("max |(U U*)_{xz,xz} - 1|", worst, EXACT_TOLERANCE);
    Ok(report.finish("U_{n,m} is a coisometry on the balls", "coisometry defect"))
}

/// `V_g` as a partial map of basis indices.
fn translate(w: &FockWindow, g: &GroupElement, i: usize) -> Result<Option<usize>> {
    let b = w.basis_at(i);
    let group = w.group();
    let gx = group.multiply(g, w.row_element(b.row))?;
    let gz = group.multiply(g, w.col_element(b.col))?;
    Ok(match (w.rows().phi(&gx), w.cols().phi(&gz)) {
        (Some(r), Some(c)) => w.index(b.level, r, c),
        _ => None,
    })
}

fn conjugate<T: Scalar>(op: &SparseOp<T>, map: &[Option<usize>], phase: &dyn Fn(usize, usize) -> T) -> SparseOp<T> {
    SparseOp::from_entries(
        format!("conj({})", op.label),
        op.entries().filter_map(|(o, i, c)| {
            let (mo, mi) = (map[o]?, map[i]?);
            Some(((mo, mi), phase(o, i) * c))
        }),
    )
}

fn covariance_defects<T: Scalar>(
    w: &FockWindow,
    map: &[Option<usize>],
    range: &HashSet<usize>,
    op: &SparseOp<T>,
    moved: &SparseOp<T>,
    zeta_pow: &dyn Fn(usize) -> T,
    zeta_n: T,
) -> (f64, f64) {
    let level = |i: usize| w.basis_at(i).level;
    let id_map: Vec<Option<usize>> = (0..w.len()).map(Some).collect();
    let in_range = |i: usize| range.contains(&i);
    let vg = conjugate(op, map, &|_, _| T::from_real(1.0));
    let vg_defect = vg.sub(&moved.restrict(in_range, in_range)).max_abs();
    let phased = conjugate(op, &id_map, &|o, i| zeta_pow(level(o)) * zeta_pow(level(i)).conj());
    let phase_defect = phased.sub(&op.scale(zeta_n)).max_abs();
    (vg_defect, phase_defect)
}

/// `V_g S V_g⁻¹ = S_{gx,gy}`, `U_ζ S U_ζ⁻¹ = ζ^n S`, and for `W` the combined
/// action `λ_{g,ζ}(W^{(n)}_{x,y}) = ζ^n W^{(n)}_{gx,gy}`.
#[allow(clippy::too_many_arguments)]
pub fn covariance_check(
    w: &FockWindow,
    g: &GroupElement,
    zeta: Complex64,
    n: usize,
    x: &GroupElement,
    y: &GroupElement,
    kernel: Option<&dyn RatioKernel>,
) -> Result<DiagnosticsReport> {
    if (zeta.norm() - 1.0).abs() > EXACT_TOLERANCE {
        return Err(Error::InvalidArgument(format!("|zeta| = {} must be 1", zeta.norm())));
    }
    let group = w.group();
    let (gx, gy) = (group.multiply(g, x)?, group.multiply(g, y)?);
    let map: Vec<Option<usize>> = (0..w.len()).map(|i| translate(w, g, i)).collect::<Result<_>>()?;
    let range: HashSet<usize> = map.iter().flatten().copied().collect();
    if range.is_empty() {
        return Err(Error::InvalidArgument("comparison region is empty".into()));
    }
    let s = build_s(w, n, x, y)?;
    let sg = build_s(w, n, &gx, &gy)?;
    let wk = match kernel {
        Some(k) => Some((build_w(w, n, x, y, k)?, build_w(w, n, &gx, &gy, k)?)),
        None => None,
    };
    let real = zeta.im == 0.0;
    let run = |a: &WindowedOperator, b: &WindowedOperator| -> (f64, f64) {
        if real {
            let z = zeta.re;
            covariance_defects(w, &map, &range, a, b, &|m| z.powi(m as i32), z.powi(n as i32))
        } else {
            covariance_defects(
                w,
                &map,
                &range,
                &a.to_complex(),
                &b.to_complex(),
                &|m| zeta.powu(m as u32),
                zeta.powu(n as u32),
            )
        }
    };
    let (s_vg, s_phase) = run(&s, &sg);
    let mut report = DiagnosticsReport::new("covariance")
        .input("group", group.to_string())
        .input("g", group.format(g))
        .input("zeta", [zeta.re, zeta.im])
        .input("n", n)
        .input("x", group.format(x))
        .input("y", group.format(y))
        .input("compared", range.len())
        .tolerance("exact", EXACT_TOLERANCE)
        .provenance(provenance(w));
    report.check("V_g S V_g^-1 - S(gx,gy)", s_vg, EXACT_TOLERANCE);
    report.check("U_zeta S U_zeta^-1 - zeta^n S", s_phase, EXACT_TOLERANCE);
    if let Some((wo, wg)) = &wk {
        let (w_vg, w_phase) = run(wo, wg);
        report.check("lambda(W) - zeta^n W(gx,gy)", w_vg + w_phase, EXACT_TOLERANCE);
    }
    Ok(report.finish("covariant on the comparison region", "covariance defect"))
}

/// Ladder of fiber-tail norms for one column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberLadder {
    pub z: String,
    pub ladder: Vec<(usize, f64)>,
    pub tail: f64,
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientNorm {
    /// Sup over the sampled fibers of the ladder tails; a lower bound for the
    /// sup over all fibers.
    pub estimate: f64,
    pub stable: bool,
    pub fibers: Vec<FiberLadder>,
}

/// Rungs `0, top/4, top/2, 3top/4` for an interior ending at `top`.
pub fn default_ladder(top: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..4).map(|k| top * k / 4).collect();
    v.dedup();
    v
}

/// `sup_z lim_m ‖T Q^{[m,∞)}|_{F_{P,z}}‖` over sampled fibers.
pub fn quotient_norm_estimate(
    w: &FockWindow,
    op: &WindowedOperator,
    z_samples: &[GroupElement],
    ladder: Option<&[usize]>,
) -> Result<QuotientNorm> {
    let top = last_interior(w)?;
    let ladder = ladder.map_or_else(|| default_ladder(top), <[usize]>::to_vec);
    if ladder.is_empty() || ladder.iter().any(|&m| m > top) {
        return Err(Error::InvalidArgument(format!("ladder must lie in 0..={top}")));
    }
    let mut fibers = Vec::with_capacity(z_samples.len());
    for z in z_samples {
        let col = w.col_of(z)?;
        let mut rungs = Vec::with_capacity(ladder.len());
        for &m in &ladder {
            let fiber: BTreeSet<usize> = w.fiber(col, m, top).into_iter().collect();
            let block = op.restrict(|o| w.is_interior(o), |i| fiber.contains(&i));
            rungs.push((m, block.norm()));
        }
        let tail = rungs.last().map_or(0.0, |r| r.1);
        let prev = if rungs.len() > 1 { rungs[rungs.len() - 2].1 } else { tail };
        let stable = (tail - prev).abs() <= QUOTIENT_LADDER_TOLERANCE * tail.max(prev);
        fibers.push(FiberLadder {
            z: w.group().format(z),
            ladder: rungs,
            tail,
            stable,
        });
    }
    Ok(QuotientNorm {
        estimate: fibers.iter().map(|f| f.tail).fold(0.0, f64::max),
        stable: fibers.iter().all(|f| f.stable),
        fibers,
    })
}

/// `|(T − W)^{(n)}_{x,y}|` on `e^{(m)}_{y,z}` for each level `m` of the `z` fiber.
pub fn t_w_level_defects(
    w: &FockWindow,
    n: usize,
    x: &GroupElement,
    y: &GroupElement,
    rho: f64,
    kernel: &dyn RatioKernel,
    z: &GroupElement,
) -> Result<Vec<(usize, f64)>> {
    let col = w.col_of(z)?;
    let d = build_t(w, n, x, y, rho)?.sub(&build_w(w, n, x, y, kernel)?);
    let d = d.restrict(|_| true, |i| w.basis_at(i).col == col);
    let mut out: Vec<(usize, f64)> = Vec::new();
    for (_, i, c) in d.entries() {
        out.push((w.basis_at(i).level, c.abs()));
    }
    out.sort_by_key(|p| p.0);
    Ok(out)
}

/// Quotient norms of products of `H^{(e)}_{x,y}` against `sup_z Π √Ĥ(x⁻¹y, x⁻¹z)`,
/// and their invariance under a level-0 rank-one perturbation.
pub fn monomial_quotient_check(
    w: &FockWindow,
    monomials: &[Vec<(GroupElement, GroupElement)>],
    kernel: &dyn RatioKernel,
    z_samples: &[GroupElement],
) -> Result<DiagnosticsReport> {
    let group = w.group();
    let e = group.identity();
    let er = w.row_of(&e)?;
    let probe = z_samples
        .iter()
        .find_map(|z| w.col_of(z).ok().and_then(|c| w.index(0, er, c)))
        .or_else(|| (0..w.len()).find(|&i| w.basis_at(i).level == 0))
        .ok_or_else(|| Error::InvalidArgument("window has no level-0 vector".into()))?;
    let mut report = DiagnosticsReport::new("quotient-norm")
        .input("group", group.to_string())
        .input("kernel", kernel.label())
        .input("fibers", z_samples.iter().map(|z| group.format(z)).collect::<Vec<_>>())
        .tolerance("relative", QUOTIENT_LADDER_TOLERANCE)
        .tolerance("perturbation", 1e-6)
        .provenance(provenance(w));
    let mut rows = Vec::new();
    for factors in monomials {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("empty monomial".into()));
        }
        let mut op: Option<WindowedOperator> = None;
        for (x, y) in factors {
            let n = minimal_n(w, &[(y, y), (y, &e), (&e, &e), (&e, y)])?;
            let h = build_h(w, &e, x, y, n, kernel)?;
            op = Some(match op {
                Some(acc) => acc.compose(&h),
                None => h,
            });
        }
        let op = op.expect("non-empty monomial");
        let mut expect = (0.0f64, 0.0f64, 0.0f64);
        for z in z_samples {
            let (mut est, mut lo, mut hi) = (1.0, 1.0, 1.0);
            for (x, y) in factors {
                let v = kernel.value(&group.left_quotient(x, y)?, &group.left_quotient(x, z)?)?;
                est *= v.estimate.max(0.0).sqrt();
                lo *= v.lo.max(0.0).sqrt();
                hi *= v.hi.max(0.0).sqrt();
            }
            if est > expect.0 {
                expect = (est, lo, hi);
            }
        }
        let q = quotient_norm_estimate(w, &op, z_samples, None)?;
        let perturbed = op.add(&WindowedOperator::from_entries("K", [((probe, probe), 1.0)]));
        let q2 = quotient_norm_estimate(w, &perturbed, z_samples, None)?;
        let label = factors
            .iter()
            .map(|(x, y)| format!("H[{}, {}]", group.format(x), group.format(y)))
            .collect::<Vec<_>>()
            .join(" ");
        let allowed = (expect.2 - expect.1) + QUOTIENT_LADDER_TOLERANCE * expect.0;
        report.check(format!("{label}: |norm - sup prod sqrt H|"), (q.estimate - expect.0).abs(), allowed);
        report.check(format!("{label}: perturbation shift"), (q2.estimate - q.estimate).abs(), 1e-6);
        report.require(format!("{label}: ladder stable"), q.stable);
        rows.push(serde_json::json!({
            "monomial": label,
            "estimate": q.estimate,
            "expected": expect.0,
            "expected_band": [expect.1, expect.2],
            "perturbed": q2.estimate,
            "fibers": q.fibers,
        }));
    }
    Ok(report
        .data(rows)
        .finish("quotient norms match the kernel products", "quotient norm mismatch"))
}

/// `|T − W|` at input levels `m ∈ {¼, ½, ¾}·max_level` must strictly decrease on
/// every sampled fiber.
#[allow(clippy::too_many_arguments)]
pub fn t_w_decay_check(
    w: &FockWindow,
    n: usize,
    x: &GroupElement,
    y: &GroupElement,
    rho: f64,
    kernel: &dyn RatioKernel,
    z_samples: &[GroupElement],
) -> Result<DiagnosticsReport> {
    let group = w.group();
    let top = w.max_level();
    let levels = [top / 4, top / 2, 3 * top / 4];
    let mut report = DiagnosticsReport::new("t-w-decay")
        .input("group", group.to_string())
        .input("n", n)
        .input("x", group.format(x))
        .input("y", group.format(y))
        .input("levels", levels)
        .provenance(Provenance {
            rho_hat: Some(rho),
            ..provenance(w)
        });
    let mut rows = Vec::new();
    for z in z_samples {
        let d = t_w_level_defects(w, n, x, y, rho, kernel, z)?;
        let at: Vec<Option<f64>> = levels
            .iter()
            .map(|&m| d.iter().find(|p| p.0 == m).map(|p| p.1))
            .collect();
        let zs = group.format(z);
        let Some(vals) = at.iter().copied().collect::<Option<Vec<f64>>>() else {
            report.require(format!("fiber {zs}: levels present"), false);
            continue;
        };
        report.require(
            format!("fiber {zs}: strictly decreasing"),
            vals[0] > vals[1] && vals[1] > vals[2],
        );
        rows.push(serde_json::json!({ "z": zs, "defects": vals }));
    }
    Ok(report
        .data(rows)
        .finish("T - W decays along the fibers", "T - W does not decay"))
}
