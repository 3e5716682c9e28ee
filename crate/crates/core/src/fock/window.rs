use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Ball, GroupDescriptor, GroupElement};
use crate::walk::{transition, PowerTable, ScaledMeasure};

/// Largest basis a window may hold unless overridden.
pub const DEFAULT_BASIS_CAP: usize = 4_000_000;

/// A basis vector `e^{(m)}_{x,z}` by level and ball positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisIndex {
    pub level: usize,
    pub row: usize,
    pub col: usize,
}

/// The span of `e^{(m)}_{x,z}` with `m ≤ max_level`, `x` in the row ball, `z` in
/// the column ball and `P^{(m)}_{x,z} > 0`.
#[derive(Clone, Debug)]
pub struct FockWindow {
    group: GroupDescriptor,
    step: ScaledMeasure,
    max_level: usize,
    interior_margin: usize,
    rows: Ball,
    cols: Ball,
    basis: Vec<BasisIndex>,
    log_p: Vec<f64>,
    lookup: HashMap<BasisIndex, usize>,
    /// `log P^{(n)}_{a,b}` for rows `a, b`, flattened `n·R² + a·R + b`.
    row_log: Vec<Option<f64>>,
}

impl FockWindow {
    pub fn build(
        table: &dyn PowerTable,
        max_level: usize,
        row_radius: usize,
        col_radius: usize,
        interior_margin: usize,
    ) -> Result<Self> {
        Self::build_capped(table, max_level, row_radius, col_radius, interior_margin, DEFAULT_BASIS_CAP)
    }

    pub fn build_capped(
        table: &dyn PowerTable,
        max_level: usize,
        row_radius: usize,
        col_radius: usize,
        interior_margin: usize,
        cap: usize,
    ) -> Result<Self> {
        table.check_level(max_level)?;
        let group = table.group().clone();
        let rows = group.ball(row_radius)?;
        let cols = group.ball(col_radius)?;
        let worst = (max_level + 1)
            .saturating_mul(rows.len())
            .saturating_mul(cols.len());
        if worst > cap {
            let mut count = 0usize;
            for m in 0..=max_level {
                for x in rows.elements() {
                    for z in cols.elements() {
                        count += table.present(m, &group.left_quotient(x, z)?)? as usize;
                    }
                }
            }
            if count > cap {
                return Err(Error::Budget {
                    what: "Fock window basis",
                    needed: count,
                    cap,
                });
            }
        }
        let mut basis = Vec::new();
        let mut log_p = Vec::new();
        for level in 0..=max_level {
            for (row, x) in rows.elements().iter().enumerate() {
                for (col, z) in cols.elements().iter().enumerate() {
                    if let Some(lp) = transition(table, level, x, z)? {
                        basis.push(BasisIndex { level, row, col });
                        log_p.push(lp);
                    }
                }
            }
        }
        let lookup = basis.iter().enumerate().map(|(i, b)| (*b, i)).collect();
        let r = rows.len();
        let mut row_log = Vec::with_capacity((max_level + 1) * r * r);
        for n in 0..=max_level {
            for a in rows.elements() {
                for b in rows.elements() {
                    row_log.push(transition(table, n, a, b)?);
                }
            }
        }
        Ok(FockWindow {
            group,
            step: table.step().clone(),
            max_level,
            interior_margin,
            rows,
            cols,
            basis,
            log_p,
            lookup,
            row_log,
        })
    }

    pub fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    pub fn step(&self) -> &ScaledMeasure {
        &self.step
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn interior_margin(&self) -> usize {
        self.interior_margin
    }

    pub fn rows(&self) -> &Ball {
        &self.rows
    }

    pub fn cols(&self) -> &Ball {
        &self.cols
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[BasisIndex] {
        &self.basis
    }

    pub fn basis_at(&self, i: usize) -> BasisIndex {
        self.basis[i]
    }

    /// Levels at or above `max_level − interior_margin` are edge levels.
    pub fn is_edge_level(&self, level: usize) -> bool {
        level + self.interior_margin >= self.max_level
    }

    pub fn is_interior(&self, i: usize) -> bool {
        !self.is_edge_level(self.basis[i].level)
    }

    pub fn row_of(&self, x: &GroupElement) -> Result<usize> {
        self.rows.phi(x).ok_or_else(|| {
            Error::Coverage(format!("{} is outside the row ball", self.group.format(x)))
        })
    }

    pub fn col_of(&self, z: &GroupElement) -> Result<usize> {
        self.cols.phi(z).ok_or_else(|| {
            Error::Coverage(format!("{} is outside the column ball", self.group.format(z)))
        })
    }

    pub fn row_element(&self, row: usize) -> &GroupElement {
        &self.rows.elements()[row]
    }

    pub fn col_element(&self, col: usize) -> &GroupElement {
        &self.cols.elements()[col]
    }

    pub fn index(&self, level: usize, row: usize, col: usize) -> Option<usize> {
        self.lookup.get(&BasisIndex { level, row, col }).copied()
    }

    /// `log P^{(m)}_{x,z}` of a basis vector.
    pub fn log_p(&self, i: usize) -> f64 {
        self.log_p[i]
    }

    /// `log P^{(m)}_{x,z}` when `x` is a row and `z` a column.
    pub fn log_p_at(&self, level: usize, row: usize, col: usize) -> Option<f64> {
        self.index(level, row, col).map(|i| self.log_p[i])
    }

    /// `log P^{(n)}_{a,b}` between two rows.
    pub fn row_transition(&self, n: usize, a: usize, b: usize) -> Option<f64> {
        if n > self.max_level {
            return None;
        }
        let r = self.rows.len();
        self.row_log[n * r * r + a * r + b]
    }

    /// Smallest `n₀` such that `(a,b) ∈ E(P^n)` for every `n₀ ≤ n ≤ max_level`.
    pub fn edge_threshold(&self, a: usize, b: usize) -> Result<usize> {
        let mut n0 = None;
        for n in (0..=self.max_level).rev() {
            if self.row_transition(n, a, b).is_some() {
                n0 = Some(n);
            } else {
                break;
            }
        }
        n0.ok_or_else(|| Error::Unreachable {
            what: format!(
                "edge ({}, {})",
                self.group.format(self.row_element(a)),
                self.group.format(self.row_element(b))
            ),
            depth: self.max_level,
        })
    }

    /// First level from which every `e^{(m)}_{x,z}`, `x` among `rows`, `z` in the
    /// column ball, is present up to `max_level`.
    pub fn presence_threshold(&self, rows: &[usize]) -> usize {
        let mut m0 = 0;
        for &row in rows {
            for col in 0..self.cols.len() {
                for m in (0..=self.max_level).rev() {
                    if self.index(m, row, col).is_none() {
                        m0 = m0.max(m + 1);
                        break;
                    }
                }
            }
        }
        m0
    }

    /// Basis indices of a column fiber with `lo ≤ level ≤ hi`.
    pub fn fiber(&self, col: usize, lo: usize, hi: usize) -> Vec<usize> {
        (0..self.basis.len())
            .filter(|&i| {
                let b = self.basis[i];
                b.col == col && b.level >= lo && b.level <= hi
            })
            .collect()
    }

    pub fn dump(&self) -> WindowDump {
        WindowDump {
            group: self.group.to_string(),
            max_level: self.max_level,
            interior_margin: self.interior_margin,
            basis: self
                .basis
                .iter()
                .zip(&self.log_p)
                .map(|(b, &lp)| DumpEntry {
                    level: b.level,
                    x: self.group.format(self.row_element(b.row)),
                    z: self.group.format(self.col_element(b.col)),
                    p: lp.exp(),
                })
                .collect(),
        }
    }
}

/// Serialized basis listing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowDump {
    pub group: String,
    pub max_level: usize,
    pub interior_margin: usize,
    pub basis: Vec<DumpEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpEntry {
    pub level: usize,
    pub x: String,
    pub z: String,
    /// `P^{(m)}_{x,z}`.
    pub p: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::{build_powers, PowerOptions, ScaledMeasure};

    #[test]
    fn trivial_window() {
        let g = GroupDescriptor::Trivial;
        let mu = ScaledMeasure::simple(&g, 1.0).unwrap();
        let t = build_powers(&mu, 5, PowerOptions::default()).unwrap();
        let w = FockWindow::build(t.as_ref(), 3, 1, 1, 0).unwrap();
        assert_eq!(w.len(), 4);
        assert!((0..4).all(|m| w.index(m, 0, 0) == Some(m)));
    }

    #[test]
    fn lazy_z_edge_rule() {
        let g = GroupDescriptor::lattice(1);
        let mu = ScaledMeasure::parse(&g, "0 1/2\n1 1/4\n-1 1/4").unwrap();
        let t = build_powers(&mu, 5, PowerOptions::default()).unwrap();
        let w = FockWindow::build(t.as_ref(), 2, 2, 2, 0).unwrap();
        let (r0, c1, c2) = (
            w.row_of(&GroupElement::lattice([0])).unwrap(),
            w.col_of(&GroupElement::lattice([1])).unwrap(),
            w.col_of(&GroupElement::lattice([2])).unwrap(),
        );
        assert!(w.index(1, r0, c1).is_some());
        assert!(w.index(1, r0, c2).is_none());
        let brute: usize = (0..=2usize)
            .map(|m| {
                let mut c = 0;
                for x in -2i64..=2 {
                    for z in -2i64..=2 {
                        c += ((x - z).unsigned_abs() as usize <= m) as usize;
                    }
                }
                c
            })
            .sum();
        assert_eq!(w.len(), brute);
        assert_eq!(w.edge_threshold(r0, w.row_of(&GroupElement::lattice([2])).unwrap()).unwrap(), 2);
    }

    #[test]
    fn basis_cap() {
        let g = GroupDescriptor::lattice(1);
        let mu = ScaledMeasure::simple(&g, 0.5).unwrap();
        let t = build_powers(&mu, 20, PowerOptions::default()).unwrap();
        assert!(matches!(
            FockWindow::build_capped(t.as_ref(), 20, 3, 3, 0, 10),
            Err(Error::Budget { .. })
        ));
    }
}
