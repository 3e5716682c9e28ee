use super::operator::WindowedOperator;
use super::window::FockWindow;
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::ratio::RatioKernel;

fn edge_log(w: &FockWindow, n: usize, xr: usize, yr: usize) -> Result<f64> {
    w.row_transition(n, xr, yr).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "({}, {}) is not an edge of P^{n}",
            w.group().format(w.row_element(xr)),
            w.group().format(w.row_element(yr))
        ))
    })
}

fn label(name: &str, w: &FockWindow, n: Option<usize>, args: &[&GroupElement]) -> String {
    let args: Vec<String> = args.iter().map(|g| w.group().format(g)).collect();
    match n {
        Some(n) => format!("{name}^({n})[{}]", args.join(", ")),
        None => format!("{name}[{}]", args.join(", ")),
    }
}

/// Shift `e^{(m)}_{y,z} ↦ c(m,z) e^{(m+n)}_{x,z}` over the `y` row.
fn row_shift(
    w: &FockWindow,
    name: String,
    n: usize,
    xr: usize,
    yr: usize,
    mut coef: impl FnMut(usize, usize) -> Result<f64>,
) -> Result<WindowedOperator> {
    let mut op = WindowedOperator::new(name);
    for i in 0..w.len() {
        let b = w.basis_at(i);
        if b.row != yr || b.level + n > w.max_level() {
            continue;
        }
        if let Some(out) = w.index(b.level + n, xr, b.col) {
            op.add_entry(out, i, coef(i, out)?);
        }
    }
    Ok(op)
}

/// `S^{(n)}_{x,y} e^{(m)}_{y,z} = √(P^{(n)}_{x,y} P^{(m)}_{y,z} / P^{(n+m)}_{x,z}) e^{(n+m)}_{x,z}`.
pub fn build_s(w: &FockWindow, n: usize, x: &GroupElement, y: &GroupElement) -> Result<WindowedOperator> {
    let (xr, yr) = (w.row_of(x)?, w.row_of(y)?);
    let lpn = edge_log(w, n, xr, yr)?;
    row_shift(w, label("S", w, Some(n), &[x, y]), n, xr, yr, |i, out| {
        Ok((0.5 * (lpn + w.log_p(i) - w.log_p(out))).exp())
    })
}

/// `T^{(n)}_{x,y} e^{(m)}_{y,z} = √(ρ^n P^{(m)}_{y,z} / P^{(n+m)}_{x,z}) e^{(n+m)}_{x,z}`.
pub fn build_t(
    w: &FockWindow,
    n: usize,
    x: &GroupElement,
    y: &GroupElement,
    rho: f64,
) -> Result<WindowedOperator> {
    let (xr, yr) = (w.row_of(x)?, w.row_of(y)?);
    edge_log(w, n, xr, yr)?;
    let log_rho_n = n as f64 * rho.ln();
    row_shift(w, label("T", w, Some(n), &[x, y]), n, xr, yr, |i, out| {
        Ok((0.5 * (log_rho_n + w.log_p(i) - w.log_p(out))).exp())
    })
}

/// `√H(x⁻¹y, x⁻¹z)` per column of the window.
fn sqrt_h_columns(
    w: &FockWindow,
    kernel: &dyn RatioKernel,
    x: &GroupElement,
    y: &GroupElement,
) -> Result<Vec<f64>> {
    let g = w.group();
    let a = g.left_quotient(x, y)?;
    w.cols()
        .elements()
        .iter()
        .map(|z| {
            let h = kernel.value(&a, &g.left_quotient(x, z)?)?.estimate;
            if h < 0.0 {
                return Err(Error::InvalidArgument(format!("negative kernel value {h}")));
            }
            Ok(h.sqrt())
        })
        .collect()
}

/// `W^{(n)}_{x,y} e^{(m)}_{y,z} = √H(x⁻¹y, x⁻¹z) e^{(m+n)}_{x,z}`.
pub fn build_w(
    w: &FockWindow,
    n: usize,
    x: &GroupElement,
    y: &GroupElement,
    kernel: &dyn RatioKernel,
) -> Result<WindowedOperator> {
    let (xr, yr) = (w.row_of(x)?, w.row_of(y)?);
    edge_log(w, n, xr, yr)?;
    let d = sqrt_h_columns(w, kernel, x, y)?;
    row_shift(w, label("W", w, Some(n), &[x, y]), n, xr, yr, |i, _| Ok(d[w.basis_at(i).col]))
}

/// `V^{(n)}_{x,y} e^{(m)}_{y,z} = e^{(m+n)}_{x,z}`.
pub fn build_v(w: &FockWindow, n: usize, x: &GroupElement, y: &GroupElement) -> Result<WindowedOperator> {
    let (xr, yr) = (w.row_of(x)?, w.row_of(y)?);
    edge_log(w, n, xr, yr)?;
    row_shift(w, label("V", w, Some(n), &[x, y]), n, xr, yr, |_, _| Ok(1.0))
}

/// `R_{x,y} e^{(m)}_{y,z} = √H(x⁻¹y, x⁻¹z) e^{(m)}_{y,z}`.
pub fn build_r(
    w: &FockWindow,
    x: &GroupElement,
    y: &GroupElement,
    kernel: &dyn RatioKernel,
) -> Result<WindowedOperator> {
    let yr = w.row_of(y)?;
    w.row_of(x)?;
    let d = sqrt_h_columns(w, kernel, x, y)?;
    row_shift(w, label("R", w, None, &[x, y]), 0, yr, yr, |i, _| Ok(d[w.basis_at(i).col]))
}

/// Smallest `n` with every listed pair an edge of `P^{n'}` for all `n ≤ n' ≤ max_level`.
pub fn minimal_n(w: &FockWindow, pairs: &[(&GroupElement, &GroupElement)]) -> Result<usize> {
    let mut n = 0;
    for (a, b) in pairs {
        n = n.max(w.edge_threshold(w.row_of(a)?, w.row_of(b)?)?);
    }
    Ok(n)
}

fn require_n(w: &FockWindow, n: usize, pairs: &[(&GroupElement, &GroupElement)]) -> Result<()> {
    let n0 = minimal_n(w, pairs)?;
    if n < n0 {
        Err(Error::InvalidArgument(format!("n = {n} is below the edge threshold {n0}")))
    } else {
        Ok(())
    }
}

/// `E_{x,y} = V^{(n)*}_{x,x} V^{(n)}_{x,y}`: `e^{(m)}_{y,z} ↦ e^{(m)}_{x,z}`.
pub fn build_e(w: &FockWindow, x: &GroupElement, y: &GroupElement, n: usize) -> Result<WindowedOperator> {
    require_n(w, n, &[(x, x), (x, y)])?;
    let (xr, yr) = (w.row_of(x)?, w.row_of(y)?);
    row_shift(w, label("E", w, None, &[x, y]), 0, xr, yr, |_, _| Ok(1.0))
}

/// `U_x = V^{(n)*}_{x,x} V^{(n+1)}_{x,x}`: `e^{(m)}_{x,z} ↦ e^{(m+1)}_{x,z}`.
pub fn build_u_x(w: &FockWindow, x: &GroupElement, n: usize) -> Result<WindowedOperator> {
    require_n(w, n, &[(x, x)])?;
    let xr = w.row_of(x)?;
    row_shift(w, label("U", w, None, &[x]), 1, xr, xr, |_, _| Ok(1.0))
}

/// `U = Σ_x U_x`, the level shift on every row.
pub fn build_u(w: &FockWindow) -> Result<WindowedOperator> {
    let mut op = WindowedOperator::new("U");
    for x in w.rows().elements() {
        let n = minimal_n(w, &[(x, x)])?;
        for (o, i, c) in build_u_x(w, x, n)?.entries() {
            op.add_entry(o, i, c);
        }
    }
    Ok(op)
}

/// `H^{(z)}_{x,y} = E_{z,y} R_{x,y} E_{y,z}`: diagonal on the `z` row.
pub fn build_h(
    w: &FockWindow,
    z: &GroupElement,
    x: &GroupElement,
    y: &GroupElement,
    n: usize,
    kernel: &dyn RatioKernel,
) -> Result<WindowedOperator> {
    require_n(w, n, &[(y, y), (y, z), (z, z), (z, y)])?;
    let (zr, yr) = (w.row_of(z)?, w.row_of(y)?);
    w.row_of(x)?;
    let d = sqrt_h_columns(w, kernel, x, y)?;
    let mut op = WindowedOperator::new(format!(
        "H^({})[{}, {}]",
        w.group().format(z),
        w.group().format(x),
        w.group().format(y)
    ));
    for i in 0..w.len() {
        let b = w.basis_at(i);
        if b.row == zr && w.index(b.level, yr, b.col).is_some() {
            op.add_entry(i, i, d[b.col]);
        }
    }
    Ok(op)
}

/// `S^{(0)}_{x,x}`, the projection onto the `x` row.
pub fn build_p(w: &FockWindow, x: &GroupElement) -> Result<WindowedOperator> {
    build_s(w, 0, x, x).map(|op| op.with_label(format!("p[{}]", w.group().format(x))))
}

/// `E_{x,y}` as the product `V^{(n)*}_{x,x} V^{(n)}_{x,y}`.
pub fn compose_e(w: &FockWindow, x: &GroupElement, y: &GroupElement, n: usize) -> Result<WindowedOperator> {
    Ok(build_v(w, n, x, x)?.adjoint().compose(&build_v(w, n, x, y)?))
}

/// `U_x` as the product `V^{(n)*}_{x,x} V^{(n+1)}_{x,x}`.
pub fn compose_u_x(w: &FockWindow, x: &GroupElement, n: usize) -> Result<WindowedOperator> {
    Ok(build_v(w, n, x, x)?.adjoint().compose(&build_v(w, n + 1, x, x)?))
}

/// `H^{(z)}_{x,y}` as the product of composed `E`s around `R_{x,y}`.
pub fn compose_h(
    w: &FockWindow,
    z: &GroupElement,
    x: &GroupElement,
    y: &GroupElement,
    n: usize,
    kernel: &dyn RatioKernel,
) -> Result<WindowedOperator> {
    let r = build_r(w, x, y, kernel)?;
    Ok(compose_e(w, z, y, n)?.compose(&r).compose(&compose_e(w, y, z, n)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupDescriptor;
    use crate::ratio::UnitKernel;
    use crate::walk::{build_powers, PowerOptions, ScaledMeasure};
    use approx::assert_relative_eq;

    fn lazy_z_window(max_level: usize, radius: usize, margin: usize) -> FockWindow {
        let g = GroupDescriptor::lattice(1);
        let mu = ScaledMeasure::parse(&g, "0 1/2\n1 1/4\n-1 1/4").unwrap();
        let t = build_powers(&mu, max_level, PowerOptions::default()).unwrap();
        FockWindow::build(t.as_ref(), max_level, radius, radius, margin).unwrap()
    }

    fn z(v: i64) -> GroupElement {
        GroupElement::lattice([v])
    }

    #[test]
    fn s_unique_path_coefficient() {
        let w = lazy_z_window(4, 2, 1);
        let s = build_s(&w, 1, &z(0), &z(1)).unwrap();
        let i = w.index(1, w.row_of(&z(1)).unwrap(), w.col_of(&z(2)).unwrap()).unwrap();
        let o = w.index(2, w.row_of(&z(0)).unwrap(), w.col_of(&z(2)).unwrap()).unwrap();
        assert_relative_eq!(s.get(o, i), 1.0, max_relative = 1e-12);
        assert!(s.norm() <= 1.0 + 1e-12);
        assert!(build_s(&w, 1, &z(0), &z(2)).is_err());
    }

    #[test]
    fn s0_is_row_projection() {
        let w = lazy_z_window(3, 2, 1);
        let p = build_p(&w, &z(1)).unwrap();
        let xr = w.row_of(&z(1)).unwrap();
        for i in 0..w.len() {
            let expect = if w.basis_at(i).row == xr { 1.0 } else { 0.0 };
            assert_relative_eq!(p.get(i, i), expect, epsilon = 1e-15);
        }
        assert_eq!(p.len(), (0..w.len()).filter(|&i| w.basis_at(i).row == xr).count());
    }

    #[test]
    fn trivial_group_t_and_w_are_shifts() {
        let g = GroupDescriptor::Trivial;
        let mu = ScaledMeasure::simple(&g, 1.0).unwrap();
        let t = build_powers(&mu, 6, PowerOptions::default()).unwrap();
        let w = FockWindow::build(t.as_ref(), 6, 0, 0, 1).unwrap();
        let e = g.identity();
        let top = build_t(&w, 1, &e, &e, 1.0).unwrap();
        let wop = build_w(&w, 1, &e, &e, &UnitKernel).unwrap();
        for m in 0..6 {
            assert_eq!(top.get(m + 1, m), 1.0);
            assert_eq!(wop.get(m + 1, m), 1.0);
        }
    }

    #[test]
    fn e_u_products_match_formulas_on_interior() {
        let w = lazy_z_window(12, 2, 4);
        let interior = |i: usize| w.is_interior(i);
        for (x, y) in [(z(0), z(1)), (z(1), z(-1)), (z(2), z(2))] {
            let n = minimal_n(&w, &[(&x, &x), (&x, &y)]).unwrap();
            let direct = build_e(&w, &x, &y, n).unwrap();
            let prod = compose_e(&w, &x, &y, n).unwrap();
            assert!(direct.sub(&prod).restrict(interior, interior).max_abs() <= 1e-12);
        }
        let u = build_u_x(&w, &z(1), 0).unwrap();
        let up = compose_u_x(&w, &z(1), 0).unwrap();
        assert!(u.sub(&up).restrict(interior, interior).is_empty());
        let h = build_h(&w, &z(0), &z(1), &z(-1), 2, &UnitKernel).unwrap();
        let hp = compose_h(&w, &z(0), &z(1), &z(-1), 2, &UnitKernel).unwrap();
        assert!(h.sub(&hp).restrict(interior, interior).max_abs() <= 1e-12);
        assert!(build_e(&w, &z(0), &z(2), 1).is_err());
    }
}
