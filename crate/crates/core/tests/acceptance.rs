//! Acceptance suite: one PASS/FAIL line per criterion.

use num_complex::Complex64;
use ratiolimit::cli::{run_job, Context, Overrides};
use ratiolimit::config::{Job, RunConfig};
use ratiolimit::fock::{
    composition_agreement, covariance_check, generator_identity_defect, matrix_unit_defects, minimal_n,
    monomial_quotient_check, q0_projection_check, subproduct_coisometry_check, t_w_decay_check,
    unitary_and_commutation_defects, FockWindow,
};
use ratiolimit::ratio::{
    boundary_trace, detect_radical, estimate_h, estimate_table, martin_vs_ratio, nearest_neighbour_rho,
    BoundTable, KernelTable, RadicalTolerance,
};
use ratiolimit::report::DiagnosticsReport;
use ratiolimit::spectral::{martin_table, spectral_radius, MartinOptions, Spectrum};
use ratiolimit::walk::{build_powers, Engine, PowerOptions, PowerTable, ScaledMeasure};
use ratiolimit::{GroupDescriptor, GroupElement};

const EXACT: f64 = 1e-12;

fn verdict(n: usize, ok: bool, detail: &str) {
    println!("criterion {n}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
}

fn failures(reports: &[DiagnosticsReport]) -> Vec<String> {
    reports
        .iter()
        .filter(|r| !r.passed())
        .map(|r| format!("{}: {}", r.name, r.verdict.message))
        .collect()
}

fn lazy_z() -> ScaledMeasure {
    ScaledMeasure::parse(&GroupDescriptor::lattice(1), "0 1/2\n1 1/4\n-1 1/4").unwrap()
}

fn free2(hold: f64) -> ScaledMeasure {
    ScaledMeasure::simple(&GroupDescriptor::free(2), hold).unwrap()
}

fn powers(mu: &ScaledMeasure, depth: usize) -> Box<dyn PowerTable> {
    build_powers(mu, depth, PowerOptions::default()).unwrap()
}

fn word(s: &str) -> GroupElement {
    GroupDescriptor::free(2).parse_element(s).unwrap()
}

fn z(v: i64) -> GroupElement {
    GroupElement::lattice([v])
}

fn a_pow(k: usize) -> GroupElement {
    GroupElement::free_word(std::iter::repeat_n(1, k))
}

/// Reduced length and Gromov-style distance on `F_s`, from the letters alone.
fn free_len(g: &GroupElement) -> usize {
    match g {
        GroupElement::Free(w) => w.len(),
        _ => panic!("not a free word"),
    }
}

fn free_dist(x: &GroupElement, y: &GroupElement) -> usize {
    let (GroupElement::Free(a), GroupElement::Free(b)) = (x, y) else {
        panic!("not free words")
    };
    let common = a.iter().zip(b).take_while(|(p, q)| p == q).count();
    a.len() + b.len() - 2 * common
}

/// Closed form of `H` for isotropic walks on `F_s`.
fn free_oracle(s: usize, x: &GroupElement, y: &GroupElement) -> f64 {
    let q = 2.0 * s as f64 - 1.0;
    let c = (s as f64 - 1.0) / s as f64;
    let (d, l) = (free_dist(x, y) as f64, free_len(y) as f64);
    (1.0 + c * d) / (1.0 + c * l) * q.powf((l - d) / 2.0)
}

fn window_kernel(table: &dyn PowerTable, rho: f64, w: &FockWindow) -> KernelTable {
    let g = w.group();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for x in w.rows().elements() {
        for y in w.rows().elements() {
            xs.push(g.left_quotient(x, y).unwrap());
        }
        for c in w.cols().elements() {
            ys.push(g.left_quotient(x, c).unwrap());
        }
    }
    xs.sort();
    xs.dedup();
    ys.sort();
    ys.dedup();
    estimate_table(table, rho, &xs, &ys).unwrap()
}

#[test]
fn criterion_1_exact_identities() {
    let mut reports = Vec::new();
    let lz = powers(&lazy_z(), 16);
    let f2 = powers(&free2(0.2), 16);
    for t in [&lz, &f2] {
        for n in 0..=6 {
            for m in 0..=6 - n {
                reports.push(subproduct_coisometry_check(t.as_ref(), n, m, 1, 2).unwrap());
            }
        }
    }
    let wz = FockWindow::build(lz.as_ref(), 10, 3, 4, 1).unwrap();
    let wf = FockWindow::build(f2.as_ref(), 8, 2, 2, 1).unwrap();
    reports.push(q0_projection_check(&wz, &z(0)).unwrap());
    reports.push(q0_projection_check(&wf, &word("e")).unwrap());
    let zeta = Complex64::from_polar(1.0, std::f64::consts::PI / 3.0);
    reports.push(covariance_check(&wz, &z(1), Complex64::new(0.0, 1.0), 1, &z(0), &z(1), None).unwrap());
    reports.push(covariance_check(&wz, &z(-2), zeta, 2, &z(1), &z(0), None).unwrap());
    reports.push(covariance_check(&wf, &word("a"), zeta, 1, &word("e"), &word("b"), None).unwrap());
    reports.push(covariance_check(&wf, &word("B"), Complex64::new(-1.0, 0.0), 1, &word("a"), &word("e"), None).unwrap());

    // Chapman–Kolmogorov against sums over the previous level's support
    let mut ck = 0.0f64;
    for t in [&lz, &f2] {
        let g = t.group();
        for (n, m) in [(1, 1), (2, 3), (4, 4), (3, 7)] {
            let support = g.ball(n).unwrap();
            for y in g.ball(4).unwrap().elements() {
                let mut sum = 0.0;
                for h in support.elements() {
                    sum += t.mass(n, h).unwrap() * t.mass(m, &g.left_quotient(h, y).unwrap()).unwrap();
                }
                let direct = t.mass(n + m, y).unwrap();
                ck = ck.max((sum - direct).abs() / direct.max(f64::MIN_POSITIVE));
            }
        }
    }
    let failed = failures(&reports);
    let ok = failed.is_empty() && ck <= EXACT;
    verdict(1, ok, &format!("{} identity reports, CK rel {ck:.2e}, failures {failed:?}", reports.len()));
    assert!(ok);
}

fn relations_on(
    table: &dyn PowerTable,
    rho: f64,
    max_level: usize,
    rows: [GroupElement; 3],
) -> Vec<DiagnosticsReport> {
    let w = FockWindow::build(table, max_level, 1, 1, 2).unwrap();
    let k = window_kernel(table, rho, &w);
    let [r0, r1, r2] = rows;
    let mut out = vec![
        matrix_unit_defects(
            &w,
            &[
                [r0.clone(), r1.clone(), r1.clone(), r2.clone()],
                [r1.clone(), r0.clone(), r0.clone(), r1.clone()],
                [r0.clone(), r1.clone(), r2.clone(), r2.clone()],
            ],
        )
        .unwrap(),
        unitary_and_commutation_defects(&w, &[(r0.clone(), r1.clone()), (r1.clone(), r2.clone())], &k).unwrap(),
    ];
    for (x, y) in [(&r0, &r1), (&r1, &r2), (&r2, &r0)] {
        let n = minimal_n(&w, &[(x, y)]).unwrap().max(1);
        out.push(generator_identity_defect(&w, n, x, y, &k).unwrap());
    }
    out.push(composition_agreement(&w, &r0, &r1, &r2, &k).unwrap());
    let n = minimal_n(&w, &[(&r0, &r1)]).unwrap().max(1);
    out.push(t_w_decay_check(&w, n, &r0, &r1, rho, &k, &[r0.clone(), r1.clone()]).unwrap());
    out
}

#[test]
fn criterion_2_relations_modulo_compacts() {
    let lz = powers(&lazy_z(), 256);
    let f2 = powers(&free2(0.2), 2000);
    let rho_f = nearest_neighbour_rho(f2.step()).unwrap();
    let mut reports = relations_on(lz.as_ref(), 1.0, 24, [z(0), z(1), z(-1)]);
    reports.extend(relations_on(f2.as_ref(), rho_f, 16, [word("e"), word("a"), word("b")]));
    let failed = failures(&reports);
    verdict(2, failed.is_empty(), &format!("{} defect reports, failures {failed:?}", reports.len()));
    assert!(failed.is_empty());
}

#[test]
fn criterion_3_amenable_lattice() {
    let g = GroupDescriptor::lattice(2);
    let t = powers(&ScaledMeasure::simple(&g, 0.5).unwrap(), 256);
    let rho = spectral_radius(t.as_ref()).unwrap().rho_hat;
    let ball = g.ball(3).unwrap();
    let kt = estimate_table(t.as_ref(), rho, ball.elements(), ball.elements()).unwrap();
    let dev = kt.entries.values().map(|e| (e.value.estimate - 1.0).abs()).fold(0.0, f64::max);
    let rad = detect_radical(&kt, &g, 3, 3, RadicalTolerance::default()).unwrap();
    let whole = rad.flagged.len() == ball.len();
    let ok = dev <= 0.05 && (rho - 1.0).abs() <= 0.02 && whole;
    verdict(
        3,
        ok,
        &format!("max |H-1| {dev:.4}, |rho-1| {:.2e}, flagged {}/{}", (rho - 1.0).abs(), rad.flagged.len(), ball.len()),
    );
    assert!(ok);
}

#[test]
fn criterion_4_free_group_closed_form() {
    let g = GroupDescriptor::free(2);
    let t = powers(&free2(0.2), 2000);
    assert_eq!(t.engine(), Engine::Radial);
    let rho = spectral_radius(t.as_ref()).unwrap().rho_hat;
    let ball = g.ball(2).unwrap();
    let kt = estimate_table(t.as_ref(), rho, ball.elements(), ball.elements()).unwrap();
    let mut rel = 0.0f64;
    for ((x, y), e) in &kt.entries {
        let c = free_oracle(2, x, y);
        rel = rel.max((e.value.estimate - c).abs() / c);
    }
    let rad = detect_radical(&kt, &g, 2, 2, RadicalTolerance::default()).unwrap();
    let only_e = rad.flagged == vec![g.identity()];
    let ray: Vec<GroupElement> = (6..=12).map(a_pow).collect();
    let trace_kt = estimate_table(t.as_ref(), rho, ball.elements(), &ray).unwrap();
    let bounds = BoundTable::compute(t.as_ref(), rho, ball.elements()).unwrap();
    let trace = boundary_trace(&trace_kt, &g, &ball, &bounds, &ray, 0.01).unwrap();
    let residual = trace.residuals.iter().find(|r| r.label == "cauchy residual").unwrap().value;
    let ok = rel <= 0.01 && only_e && residual <= 0.01;
    verdict(
        4,
        ok,
        &format!("max rel err {rel:.2e}, flagged {}, Cauchy residual {residual:.4}", rad.flagged.len()),
    );
    assert!(ok);
}

#[test]
fn criterion_5_cartesian_factorisation() {
    let (f, l) = (GroupDescriptor::free(2), GroupDescriptor::lattice(1));
    let g = GroupDescriptor::product(f.clone(), l.clone());
    let text = "<e | 0> 0.2\n<a | 0> 0.1\n<A | 0> 0.1\n<b | 0> 0.1\n<B | 0> 0.1\n<e | 1> 0.2\n<e | -1> 0.2\n";
    let mu = ScaledMeasure::parse(&g, text).unwrap();
    let t = powers(&mu, 500);
    let marginal = ScaledMeasure::parse(&f, "e 0.6\na 0.1\nA 0.1\nb 0.1\nB 0.1").unwrap();
    let t1 = powers(&marginal, 500);
    let rho = spectral_radius(t.as_ref()).unwrap().rho_hat;
    let (fb, lb) = (f.ball(2).unwrap(), l.ball(2).unwrap());
    let elems: Vec<GroupElement> = fb
        .elements()
        .iter()
        .flat_map(|w| lb.elements().iter().map(move |v| GroupElement::pair(w.clone(), v.clone())))
        .collect();
    let kt = estimate_table(t.as_ref(), rho, &elems, &elems).unwrap();
    let mut h1 = std::collections::BTreeMap::new();
    for w1 in fb.elements() {
        for w2 in fb.elements() {
            h1.insert((w1.clone(), w2.clone()), estimate_h(t1.as_ref(), w1, w2).unwrap().value.estimate);
        }
    }
    let mut rel = 0.0f64;
    for ((x, y), e) in &kt.entries {
        let (GroupElement::Product(w1, _), GroupElement::Product(w2, _)) = (x, y) else { unreachable!() };
        let c = h1[&((**w1).clone(), (**w2).clone())];
        rel = rel.max((e.value.estimate - c).abs() / c);
    }
    let rad = detect_radical(&kt, &g, 2, 2, RadicalTolerance::default()).unwrap();
    let z_ball = lb.elements().iter().all(|v| rad.is_flagged(&GroupElement::pair(f.identity(), v.clone())));
    let no_free = rad.flagged.iter().all(|h| match h {
        GroupElement::Product(w, _) => f.is_identity(w),
        _ => false,
    });
    let ok = rel <= 0.02 && z_ball && no_free;
    verdict(
        5,
        ok,
        &format!("max rel |H - H1| {rel:.2e}, Z-ball flagged {z_ball}, F_2 excluded {no_free}"),
    );
    assert!(ok);
}

#[test]
fn criterion_6_martin_versus_ratio() {
    let g = GroupDescriptor::free(2);
    let t = powers(&free2(0.2), 2000);
    let spectrum = Spectrum::estimate(t.as_ref()).unwrap();
    let alpha = spectrum.alpha();
    let xs = g.ball(2).unwrap().elements().to_vec();
    let ys: Vec<GroupElement> = (6..=10).map(a_pow).collect();
    let h = estimate_table(t.as_ref(), spectrum.rho(), &xs, &ys).unwrap();
    let k = martin_table(t.as_ref(), &spectrum, &xs, &ys, MartinOptions::default()).unwrap();
    let r = martin_vs_ratio(&k, &h, &g, &xs, &ys, 0.05).unwrap();
    let worst = r.residuals[0].value;
    let (a, a8) = (word("a"), a_pow(8));
    let (k8, h8) = (k.get(&a, &a8).unwrap().value.estimate, h.get(&a, &a8).unwrap().value.estimate);
    let ok = r.passed() && (1.2..=1.8).contains(&alpha);
    verdict(
        6,
        ok,
        &format!(
            "max rel |K - H| {worst:.3}, K(a,a^8) {k8:.4} vs H(a,a^8) {h8:.4}, fitted exponent {alpha:.3}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_7_quotient_norm() {
    let t = powers(&free2(0.2), 2000);
    let rho = nearest_neighbour_rho(t.step()).unwrap();
    let w = FockWindow::build(t.as_ref(), 16, 1, 2, 2).unwrap();
    let k = window_kernel(t.as_ref(), rho, &w);
    let (e, a, b, ai) = (word("e"), word("a"), word("b"), word("A"));
    let monomials = vec![
        vec![(a.clone(), b.clone())],
        vec![(e.clone(), a.clone())],
        vec![(b.clone(), ai.clone())],
        vec![(a.clone(), b.clone()), (a.clone(), b.clone())],
        vec![(e.clone(), a.clone()), (b.clone(), e.clone())],
    ];
    let zs = w.cols().elements().to_vec();
    let r = monomial_quotient_check(&w, &monomials, &k, &zs).unwrap();
    let failed = failures(std::slice::from_ref(&r));
    verdict(7, r.passed(), &format!("{} monomials over {} fibers, failures {failed:?}", monomials.len(), zs.len()));
    assert!(r.passed());
}

#[test]
fn criterion_8_property_suites() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig::from_toml(
        r#"
depth = 2000
hold = 0.2
[group]
family = "free"
rank = 2
[balls]
kernel = 2
prefix = 2
[metric]
points = ["e", "a", "b", "ab", "aa", "Ba"]
martin = true
"#,
    )
    .unwrap();
    let ctx = Context::new(config, dir.path().to_path_buf(), &Overrides::default()).unwrap();
    let mut reports = run_job(&ctx, Job::Kernel).unwrap().reports;
    reports.extend(run_job(&ctx, Job::Metric).unwrap().reports);
    let names: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
    for want in ["ratio-metric", "martin-metric", "cocycle", "rho-harmonicity", "bound-containment"] {
        assert!(names.contains(&want), "missing {want}");
    }

    // radial engine against the generic keyed engine
    let mu = free2(0.2);
    let radial = powers(&mu, 8);
    let generic = build_powers(&mu, 8, PowerOptions { engine: Some(Engine::Generic), ..Default::default() }).unwrap();
    let ball = mu.group().ball(8).unwrap();
    let mut diff = 0.0f64;
    for m in 0..=8 {
        for y in ball.elements() {
            diff = diff.max((radial.mass(m, y).unwrap() - generic.mass(m, y).unwrap()).abs());
        }
    }
    let failed = failures(&reports);
    let ok = failed.is_empty() && diff <= EXACT;
    verdict(8, ok, &format!("{} suites, radial vs generic {diff:.2e}, failures {failed:?}", reports.len()));
    assert!(ok);
}
