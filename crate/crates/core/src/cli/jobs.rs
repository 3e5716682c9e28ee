use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::context::Context;
use crate::config::{Job, KernelSource};
use crate::error::{Error, Result};
use crate::fock::{
    composition_agreement, covariance_check, generator_identity_defect, matrix_unit_defects, minimal_n,
    monomial_quotient_check, q0_projection_check, subproduct_coisometry_check, t_w_decay_check,
    unitary_and_commutation_defects, FockWindow, EXACT_TOLERANCE,
};
use crate::group::{Ball, GroupElement};
use crate::ratio::{
    boundary_trace, cocycle_check, detect_radical, martin_vs_ratio, pseudometric_report, ratio_metric,
    rho_harmonicity_check, srlp_summary, BoundTable, KernelTable, RadicalTolerance, RatioKernel,
};
use crate::report::DiagnosticsReport;
use crate::spectral::martin_metric;

/// Cocycle triples sampled per run.
const COCYCLE_SAMPLES: usize = 64;

/// Reports and files produced by one job.
#[derive(Debug)]
pub struct JobOutput {
    pub job: Job,
    pub reports: Vec<DiagnosticsReport>,
    pub files: Vec<(String, Vec<u8>)>,
}

impl JobOutput {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(DiagnosticsReport::passed)
    }
}

pub fn json_bytes(v: &impl Serialize) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

pub fn run_job(ctx: &Context, job: Job) -> Result<JobOutput> {
    let (reports, mut files) = match job {
        Job::Spectrum => spectrum(ctx)?,
        Job::Kernel => kernel(ctx)?,
        Job::Radical => radical(ctx)?,
        Job::Metric => metric(ctx)?,
        Job::Boundary => boundary(ctx)?,
        Job::Fock => fock(ctx)?,
        Job::Covariance => covariance(ctx)?,
    };
    let reports: Vec<DiagnosticsReport> = reports.into_iter().map(|r| ctx.stamp(r)).collect();
    let name = serde_json::to_value(job)?.as_str().unwrap_or("job").to_string();
    let mut csv = String::new();
    for (i, r) in reports.iter().enumerate() {
        let body = r.residuals_csv();
        csv.push_str(if i == 0 { &body } else { body.split_once('\n').map_or("", |p| p.1) });
    }
    files.push((format!("{name}-residuals.csv"), csv.into_bytes()));
    files.push((format!("{name}-reports.json"), json_bytes(&reports)?));
    Ok(JobOutput { job, reports, files })
}

type Parts = (Vec<DiagnosticsReport>, Vec<(String, Vec<u8>)>);

fn fmt_all(ctx: &Context, v: &[GroupElement]) -> Vec<String> {
    v.iter().map(|g| ctx.group().format(g)).collect()
}

fn union(sets: &[&[GroupElement]]) -> Vec<GroupElement> {
    let mut v: Vec<GroupElement> = sets.iter().flat_map(|s| s.iter().cloned()).collect();
    v.sort();
    v.dedup();
    v
}

/// `ρ` when it is known exactly for the walk.
fn exact_rho(ctx: &Context) -> Option<f64> {
    crate::ratio::nearest_neighbour_rho(&ctx.step).or_else(|| {
        matches!(ctx.closed_form(), Ok(super::context::ClosedKernel::Unit)).then_some(1.0)
    })
}

fn spectrum(ctx: &Context) -> Result<Parts> {
    let table = ctx.table()?;
    let spec = ctx.spectrum()?;
    let est = &spec.radius;
    let d = est.period.max(1);
    let mut csv = String::from("n,ratio,ratio_root\n");
    let mut n = 0;
    while n + d <= table.depth() {
        if let (Ok(Some(a)), Ok(Some(b))) = (table.log_return(n), table.log_return(n + d)) {
            let r = (b - a).exp();
            csv.push_str(&format!("{n},{r:.17e},{:.17e}\n", r.powf(1.0 / d as f64)));
        }
        n += d;
    }
    let tol = ctx.tolerance.unwrap_or(ctx.config.tolerances.srlp);
    let mut report = DiagnosticsReport::new("spectrum")
        .input("group", ctx.group().to_string())
        .input("method", est.method)
        .input("period", est.period)
        .tolerance("spread", tol)
        .data(json!({ "rhoHat": est.rho_hat, "mRange": est.m_range, "alpha": spec.alpha() }));
    report.check("spread", est.spread, tol);
    let mut closed = serde_json::Value::Null;
    if ctx.closed_form_compare {
        match exact_rho(ctx) {
            Some(rho) => {
                let rel = (est.rho_hat - rho).abs() / rho;
                let ctol = ctx.config.tolerances.closed_form;
                report.check("relative error against exact rho", rel, ctol);
                closed = json!({ "rho": rho, "relativeError": rel });
            }
            None => report.note("no exact rho for this walk", 0.0),
        }
    }
    let report = ctx.stamp(report.finish("spectral radius estimate settled", "spectral radius unsettled"));
    let out = json!({
        "rhoHat": est.rho_hat,
        "lo": est.lo,
        "hi": est.hi,
        "spread": est.spread,
        "mRange": est.m_range,
        "method": est.method,
        "period": est.period,
        "localLimit": spec.fit,
        "closedForm": closed,
        "provenance": report.provenance,
    });
    Ok((
        vec![report],
        vec![("spectrum.json".into(), json_bytes(&out)?), ("ratio-tail.csv".into(), csv.into_bytes())],
    ))
}

fn kernel(ctx: &Context) -> Result<Parts> {
    let group = ctx.group();
    let table = ctx.table()?;
    let r = ctx.config.balls.kernel;
    let inner = group.ball(r)?;
    let outer = group.ball(r + ctx.step.radius()?)?;
    let kt = ctx.ratio_table(outer.elements(), inner.elements())?;
    let tol = ctx.tolerance.unwrap_or(ctx.config.tolerances.srlp);
    let mut reports = vec![srlp_summary(&kt, tol)];

    let mut csv = kt.to_csv();
    if ctx.closed_form_compare {
        let cf = ctx.closed_form()?;
        let ctol = ctx.config.tolerances.closed_form;
        let mut lines = Vec::new();
        let mut worst = 0.0f64;
        for (line, ((x, y), e)) in csv.lines().skip(1).zip(&kt.entries) {
            let c = cf.value(x, y)?.estimate;
            let rel = (e.value.estimate - c).abs() / c.abs();
            worst = worst.max(rel);
            lines.push(format!("{line},{c:.17e},{rel:.17e}"));
        }
        csv = format!(
            "x,y,estimate,lower,upper,method,accelerated,m_first,m_last,raw_last,closed_form,rel_error\n{}\n",
            lines.join("\n")
        );
        let mut rep = DiagnosticsReport::new("closed-form")
            .input("kernel", cf.label())
            .input("pairs", kt.len())
            .tolerance("relative", ctol);
        rep.check("max relative error", worst, ctol);
        reports.push(rep.finish("estimates match the closed form", "estimates deviate from the closed form"));
    }

    let rho = ctx.spectrum()?.radius.clone();
    let bounds = BoundTable::compute(table, rho.rho_hat, outer.elements())?;
    reports.push(containment(ctx, &kt, &bounds, &inner));
    reports.push(cocycle_suite(ctx, &kt, &inner, &outer)?);
    reports.push(harmonicity_suite(ctx, &kt, &inner)?);

    let rows = kt.rows();
    Ok((
        reports,
        vec![
            ("kernel.csv".into(), csv.into_bytes()),
            ("kernel.json".into(), json_bytes(&json!({ "rhoHat": kt.rho_hat, "depth": kt.depth, "rows": rows }))?),
        ],
    ))
}

fn containment(ctx: &Context, kt: &KernelTable, bounds: &BoundTable, inner: &Ball) -> DiagnosticsReport {
    let mut violations = Vec::new();
    let mut checked = 0usize;
    for ((x, y), e) in &kt.entries {
        let (Some(b), true) = (bounds.get(x), inner.contains(y)) else {
            continue;
        };
        checked += 1;
        let slack = e.value.uncertainty() + 1e-9 * e.value.estimate.abs();
        if e.value.estimate > b.upper + slack || e.value.estimate < b.lower - slack {
            violations.push(json!({
                "x": ctx.group().format(x),
                "y": ctx.group().format(y),
                "estimate": e.value.estimate,
                "lower": b.lower,
                "upper": b.upper,
            }));
        }
    }
    let mut rep = DiagnosticsReport::new("bound-containment")
        .input("pairs", checked)
        .data(&violations);
    rep.require("c_x <= H(x,y) <= C_x for every pair", violations.is_empty());
    rep.finish("every estimate lies within its bound constants", "bound constants violated")
}

fn cocycle_suite(ctx: &Context, kt: &KernelTable, inner: &Ball, outer: &Ball) -> Result<DiagnosticsReport> {
    let group = ctx.group();
    let gens = group.ball(ctx.step.radius()?.max(1))?;
    let mut triples = Vec::new();
    for g in gens.elements() {
        for x in inner.elements() {
            for y in inner.elements() {
                let gi = group.inverse(g)?;
                let (gy, gix) = (group.multiply(g, y)?, group.multiply(&gi, x)?);
                if inner.contains(&gy) && outer.contains(&gi) && outer.contains(&gix) {
                    triples.push((g.clone(), x.clone(), y.clone()));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    triples.shuffle(&mut rng);
    triples.truncate(COCYCLE_SAMPLES);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for (g, x, y) in &triples {
        let r = cocycle_check(kt, group, g, x, y)?;
        worst = worst.max(r.residual);
        worst_excess = worst_excess.max(r.residual - 3.0 * r.uncertainty);
        rows.push(json!({
            "g": group.format(g),
            "x": group.format(x),
            "y": group.format(y),
            "residual": r.residual,
            "uncertainty": r.uncertainty,
        }));
    }
    let mut rep = DiagnosticsReport::new("cocycle")
        .input("samples", triples.len())
        .input("seed", ctx.seed)
        .tolerance("uncertainty_factor", 3.0)
        .data(rows);
    rep.note("max residual", worst);
    rep.check("max residual - 3 x uncertainty", worst_excess.max(0.0), EXACT_TOLERANCE);
    Ok(rep.finish("cocycle identity holds within 3x uncertainty", "cocycle identity violated"))
}

fn harmonicity_suite(ctx: &Context, kt: &KernelTable, inner: &Ball) -> Result<DiagnosticsReport> {
    let spec = ctx.spectrum()?;
    let (rho, band) = match crate::ratio::nearest_neighbour_rho(&ctx.step) {
        Some(r) => (r, 0.0),
        None => (spec.rho(), (spec.radius.hi - spec.radius.lo).max(0.0)),
    };
    let mut worst = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut count = 0usize;
    for x in inner.elements() {
        for y in inner.elements() {
            let r = rho_harmonicity_check(kt, &ctx.step, rho, x, y)?;
            let h = kt.value(x, y)?.estimate.abs();
            worst = worst.max(r.residual);
            worst_excess = worst_excess.max(r.residual - r.uncertainty - band * h);
            count += 1;
        }
    }
    let mut rep = DiagnosticsReport::new("rho-harmonicity")
        .input("pairs", count)
        .input("rho", rho)
        .tolerance("rho_band", band);
    rep.note("max residual", worst);
    rep.check("max residual - combined uncertainty", worst_excess.max(0.0), EXACT_TOLERANCE);
    Ok(rep.finish("H is rho-harmonic within uncertainty", "rho-harmonicity violated"))
}

fn radical_tolerance(ctx: &Context) -> RadicalTolerance {
    match ctx.tolerance.or(ctx.config.tolerances.radical) {
        Some(value) => RadicalTolerance::Absolute { value },
        None => RadicalTolerance::Auto {
            factor: ctx.config.tolerances.radical_factor,
        },
    }
}

fn radical(ctx: &Context) -> Result<Parts> {
    let group = ctx.group();
    let b = &ctx.config.balls;
    let ball = group.ball(b.kernel)?;
    let probe = group.ball(b.probe)?;
    let kt = ctx.ratio_table(probe.elements(), ball.elements())?;
    let rr = detect_radical(&kt, group, b.kernel, b.probe, radical_tolerance(ctx))?;
    let summary = if rr.flagged.len() == ball.len() {
        "flagged = entire tested ball".to_string()
    } else if rr.flagged.len() == 1 {
        "flagged = {e}".to_string()
    } else {
        format!("flagged = {} of {} elements", rr.flagged.len(), ball.len())
    };
    let mut report = rr.report.clone();
    report.verdict.message = format!("{summary}; {}", report.verdict.message);
    let out = json!({
        "summary": summary,
        "tolerance": rr.tolerance,
        "ballRadius": rr.ball_radius,
        "probeRadius": rr.probe_radius,
        "flagged": fmt_all(ctx, &rr.flagged),
        "deviations": rr.deviations.iter().map(|(g, d)| (group.format(g), *d)).collect::<Vec<_>>(),
        "productResidual": rr.product_residual,
        "inverseResidual": rr.inverse_residual,
        "provenance": ctx.provenance(),
    });
    Ok((vec![report], vec![("radical.json".into(), json_bytes(&out)?)]))
}

fn metric_points(ctx: &Context) -> Result<Vec<GroupElement>> {
    if ctx.config.metric.points.is_empty() {
        Ok(ctx.group().ball(1)?.elements().to_vec())
    } else {
        ctx.config.parse_elements(&ctx.config.metric.points)
    }
}

fn metric(ctx: &Context) -> Result<Parts> {
    let group = ctx.group();
    let table = ctx.table()?;
    let prefix = group.ball(ctx.config.balls.prefix)?;
    let points = metric_points(ctx)?;
    let labels = fmt_all(ctx, &points);
    let rho = ctx.spectrum()?.rho();
    let bounds = BoundTable::compute(table, rho, union(&[prefix.elements(), &points]).iter())?;
    let kt = ctx.ratio_table(prefix.elements(), &points)?;
    let mut reports = Vec::new();
    let mut out = json!({ "points": labels, "prefix": prefix.len() });

    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    let mut tails = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            let v = ratio_metric(&kt, &prefix, &bounds, &points[a], &points[b])?;
            d[a][b] = v.value;
            tails[a][b] = v.tail_bound;
        }
    }
    reports.push(pseudometric_report("ratio-metric", &labels, &d, EXACT_TOLERANCE));
    out["ratio"] = json!({ "matrix": d, "tailBound": tails });

    if ctx.config.metric.martin {
        let mt = ctx.martin_table(prefix.elements(), &points)?;
        let mut d = vec![vec![0.0; n]; n];
        let mut tails = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in 0..n {
                let v = martin_metric(&mt, &prefix, &bounds, &points[a], &points[b])?;
                d[a][b] = v.value;
                tails[a][b] = v.tail_bound;
            }
        }
        reports.push(pseudometric_report("martin-metric", &labels, &d, EXACT_TOLERANCE));
        out["martin"] = json!({ "matrix": d, "tailBound": tails });
    }
    out["provenance"] = serde_json::to_value(ctx.provenance())?;
    Ok((reports, vec![("metric.json".into(), json_bytes(&out)?)]))
}

fn boundary(ctx: &Context) -> Result<Parts> {
    if ctx.config.sequences.is_empty() {
        return Err(Error::Config("boundary needs at least one [[sequence]]".into()));
    }
    let group = ctx.group();
    let table = ctx.table()?;
    let prefix = group.ball(ctx.config.balls.prefix)?;
    let rho = ctx.spectrum()?.rho();
    let bounds = BoundTable::compute(table, rho, prefix.elements())?;
    let tol = ctx.tolerance.unwrap_or(ctx.config.tolerances.cauchy);
    let mut reports = Vec::new();
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for s in &ctx.config.sequences {
        let seq = ctx.config.parse_elements(&s.elements)?;
        let kt = ctx.ratio_table(prefix.elements(), &seq)?;
        let rep = boundary_trace(&kt, group, &prefix, &bounds, &seq, tol)?;
        let mut csv = String::from("k,y");
        for x in prefix.elements() {
            csv.push_str(&format!(",\"H({}, y)\"", group.format(x)));
        }
        csv.push('\n');
        for (k, y) in seq.iter().enumerate() {
            csv.push_str(&format!("{k},\"{}\"", group.format(y)));
            for x in prefix.elements() {
                csv.push_str(&format!(",{:.17e}", kt.value(x, y)?.estimate));
            }
            csv.push('\n');
        }
        files.push((format!("boundary-{}.csv", s.name), csv.into_bytes()));
        summary.push(json!({ "name": s.name, "verdict": rep.verdict, "data": rep.data }));
        reports.push(rep.input("name", &s.name));
        if ctx.closed_form_compare {
            let cf = ctx.closed_form()?;
            let rep = boundary_trace(&cf, group, &prefix, &bounds, &seq, tol)?;
            reports.push(rep.input("name", format!("{} (closed form)", s.name)));
        }
        if ctx.config.metric.martin {
            let xs = group.ball(ctx.config.balls.kernel)?;
            let mt = ctx.martin_table(xs.elements(), &seq)?;
            let ht = ctx.ratio_table(xs.elements(), &seq)?;
            let mtol = ctx.config.tolerances.martin_vs_ratio;
            let rep = martin_vs_ratio(&mt, &ht, group, xs.elements(), &seq, mtol)?;
            reports.push(rep.input("name", &s.name));
        }
    }
    let out = json!({ "sequences": summary, "provenance": ctx.provenance() });
    files.push(("boundary.json".into(), json_bytes(&out)?));
    Ok((reports, files))
}

/// Kernel for `W` and `H` on a window: needs `H(x⁻¹y, x⁻¹z)` for rows `x, y`
/// and columns `z`.
fn window_kernel(ctx: &Context, w: &FockWindow, extra: &[GroupElement]) -> Result<Box<dyn RatioKernel>> {
    let group = ctx.group();
    let rows = union(&[w.rows().elements(), extra]);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for x in &rows {
        for y in &rows {
            xs.push(group.left_quotient(x, y)?);
        }
        for z in w.cols().elements() {
            ys.push(group.left_quotient(x, z)?);
        }
    }
    ctx.kernel(ctx.config.window.kernel, &union(&[&xs]), &union(&[&ys]))
}

fn build_window(ctx: &Context) -> Result<FockWindow> {
    let wc = &ctx.config.window;
    FockWindow::build(ctx.table()?, wc.max_level, wc.row_radius, wc.col_radius, wc.margin)
}

fn fock(ctx: &Context) -> Result<Parts> {
    let group = ctx.group();
    let table = ctx.table()?;
    let wc = &ctx.config.window;
    let w = build_window(ctx)?;
    let kernel = window_kernel(ctx, &w, &[])?;
    let k = kernel.as_ref();
    let rows = w.rows().elements();
    let pick = |i: usize| rows[i.min(rows.len() - 1)].clone();
    let (r0, r1, r2) = (pick(0), pick(1), pick(2));
    let e = group.identity();
    let mut reports = Vec::new();

    reports.push(matrix_unit_defects(
        &w,
        &[
            [r0.clone(), r1.clone(), r1.clone(), r2.clone()],
            [r1.clone(), r0.clone(), r0.clone(), r1.clone()],
            [r0.clone(), r1.clone(), r2.clone(), r2.clone()],
            [r2.clone(), r1.clone(), r1.clone(), r0.clone()],
        ],
    )?);
    let pairs = [(r0.clone(), r1.clone()), (r1.clone(), r2.clone()), (r2.clone(), r0.clone())];
    reports.push(unitary_and_commutation_defects(&w, &pairs, k)?);
    let n = minimal_n(&w, &[(&r1, &r2)])?.max(1);
    reports.push(generator_identity_defect(&w, n, &r1, &r2, k)?);
    reports.push(composition_agreement(&w, &r0, &r1, &r2, k)?);
    if ctx.step.mantissas().all(|(s, _)| w.rows().contains(s)) {
        reports.push(q0_projection_check(&w, &e)?);
    }
    for &(n, m) in &wc.coisometry {
        reports.push(subproduct_coisometry_check(table, n, m, wc.row_radius, wc.col_radius)?);
    }
    let zs = w.cols().elements().to_vec();
    let monomials = vec![
        vec![(r1.clone(), r2.clone())],
        vec![(r0.clone(), r1.clone())],
        vec![(r1.clone(), r0.clone())],
        vec![(r1.clone(), r2.clone()), (r1.clone(), r2.clone())],
        vec![(r0.clone(), r1.clone()), (r2.clone(), r0.clone())],
    ];
    reports.push(monomial_quotient_check(&w, &monomials, k, &zs)?);
    let nt = minimal_n(&w, &[(&r0, &r1)])?.max(1);
    reports.push(t_w_decay_check(&w, nt, &r0, &r1, ctx.rho()?, k, std::slice::from_ref(&e))?);

    let window = json!({
        "basis": w.len(),
        "maxLevel": w.max_level(),
        "margin": w.interior_margin(),
        "rows": fmt_all(ctx, rows),
        "cols": fmt_all(ctx, w.cols().elements()),
        "kernel": k.label(),
    });
    let mut files = vec![("fock.json".into(), json_bytes(&json!({ "window": window, "provenance": ctx.provenance() }))?)];
    if matches!(wc.kernel, KernelSource::Estimated) {
        files.push(("fock-basis.json".into(), json_bytes(&w.dump())?));
    }
    Ok((reports, files))
}

fn covariance(ctx: &Context) -> Result<Parts> {
    let Some(c) = &ctx.config.covariance else {
        return Err(Error::Config("covariance needs a [covariance] section".into()));
    };
    let group = ctx.group();
    let g = group.parse_element(&c.g)?;
    let x = group.parse_element(&c.x)?;
    let y = group.parse_element(&c.y)?;
    let w = build_window(ctx)?;
    let extra = [group.multiply(&g, &x)?, group.multiply(&g, &y)?, x.clone(), y.clone()];
    let kernel = window_kernel(ctx, &w, &extra)?;
    let zeta = Complex64::new(c.zeta[0], c.zeta[1]);
    let rep = covariance_check(&w, &g, zeta, c.n, &x, &y, Some(kernel.as_ref()))?;
    let out = json!({ "verdict": rep.verdict, "residuals": rep.residuals, "provenance": rep.provenance });
    Ok((vec![rep], vec![("covariance.json".into(), json_bytes(&out)?)]))
}
