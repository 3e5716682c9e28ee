//! Dense power tables over a (tree distance, lattice box) state space.
//!
//! One engine serves three cases: `Z^d` (no tree axis), isotropic walks on
//! `F_s` (no lattice axis) and `F_s × Z^d` walks that are isotropic in the free
//! coordinate. Along the tree axis the engine stores the mass of the whole
//! sphere, which keeps the dynamic range of a level close to that of a
//! probability distribution; per-element values are recovered by dividing by
//! the sphere size.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::measure::{ScaledMeasure, UNDERFLOW_FLOOR};
use super::powers::{Engine, PowerTable};
use super::radial::{log_sphere_size, tree_sphere_count};
use crate::error::{Error, Result};
use crate::group::{GroupDescriptor, GroupElement};

const ISOTROPY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DenseOptions {
    /// Cap on the cells of the working state of a single level.
    pub cell_budget: usize,
    /// Levels are stored in full while the running total of stored cells stays
    /// below this; later levels keep only the tracked window.
    pub retain_budget: usize,
    /// Tree radius kept for windowed levels.
    pub track_radius: usize,
    /// Lattice half-width kept for windowed levels.
    pub track_width: usize,
}

impl Default for DenseOptions {
    fn default() -> Self {
        DenseOptions {
            cell_budget: 64_000_000,
            retain_budget: 24_000_000,
            track_radius: 12,
            track_width: 12,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct StepEntry {
    tree: usize,
    offset: Vec<i64>,
    value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Level {
    radius: usize,
    width: usize,
    windowed: bool,
    log_scale: f64,
    log_total: f64,
    values: Vec<f64>,
    present: Vec<bool>,
}

impl Level {
    fn cells(&self, dim: usize) -> usize {
        (2 * self.width + 1).pow(dim as u32)
    }

    fn index(&self, dim: usize, k: usize, v: &[i64]) -> Option<usize> {
        if k > self.radius {
            return None;
        }
        let side = 2 * self.width as i64 + 1;
        let mut idx = 0i64;
        for &x in v.iter().rev() {
            if x.unsigned_abs() as usize > self.width {
                return None;
            }
            idx = idx * side + x + self.width as i64;
        }
        Some(k * self.cells(dim) + idx as usize)
    }
}

/// Splits an element into (tree distance, lattice coordinates).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
enum Shape {
    Lattice,
    Free,
    FreeTimesLattice,
}

fn split(shape: Shape, g: &GroupElement) -> (usize, &[i64]) {
    match (shape, g) {
        (Shape::Lattice, GroupElement::Lattice(v)) => (0, v),
        (Shape::Free, GroupElement::Free(w)) => (w.len(), &[]),
        (Shape::FreeTimesLattice, GroupElement::Product(a, b)) => match (&**a, &**b) {
            (GroupElement::Free(w), GroupElement::Lattice(v)) => (w.len(), v),
            _ => unreachable!("element checked against descriptor"),
        },
        _ => unreachable!("element checked against descriptor"),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DensePowers {
    step: ScaledMeasure,
    shape: Shape,
    q: usize,
    dim: usize,
    kernel: Vec<StepEntry>,
    kernel_log_scale: f64,
    levels: Vec<Level>,
    #[serde(skip)]
    exhausted: Option<Error>,
}

impl DensePowers {
    /// Whether the dense engine accepts this group family.
    pub fn supports(group: &GroupDescriptor) -> bool {
        matches!(
            group,
            GroupDescriptor::Lattice { .. } | GroupDescriptor::Free { .. }
        ) || matches!(group, GroupDescriptor::Product { left, right }
            if matches!(**left, GroupDescriptor::Free { .. })
                && matches!(**right, GroupDescriptor::Lattice { .. }))
    }

    pub fn build(step: &ScaledMeasure, depth: usize, options: DenseOptions) -> Result<Self> {
        let group = step.group();
        let (shape, q, dim) = match group {
            GroupDescriptor::Lattice { dim } => (Shape::Lattice, 0, *dim),
            GroupDescriptor::Free { rank } => (Shape::Free, 2 * rank, 0),
            GroupDescriptor::Product { left, right } => match (&**left, &**right) {
                (GroupDescriptor::Free { rank }, GroupDescriptor::Lattice { dim }) => {
                    (Shape::FreeTimesLattice, 2 * rank, *dim)
                }
                _ => return Err(Error::InvalidArgument(format!("dense engine cannot handle {group}"))),
            },
            _ => return Err(Error::InvalidArgument(format!("dense engine cannot handle {group}"))),
        };
        let kernel = reduce_kernel(step, shape, q)?;
        let mut table = DensePowers {
            step: step.clone(),
            shape,
            q,
            dim,
            kernel,
            kernel_log_scale: step.log_scale(),
            levels: Vec::new(),
            exhausted: None,
        };
        table.run(depth, options);
        Ok(table)
    }

    pub fn build_strict(step: &ScaledMeasure, depth: usize, options: DenseOptions) -> Result<Self> {
        let mut t = Self::build(step, depth, options)?;
        match t.exhausted.take() {
            Some(e) => Err(e),
            None => Ok(t),
        }
    }

    fn tree_reach(&self) -> usize {
        self.kernel.iter().map(|e| e.tree).max().unwrap_or(0)
    }

    fn box_reach(&self) -> usize {
        self.kernel
            .iter()
            .flat_map(|e| e.offset.iter().map(|x| x.unsigned_abs() as usize))
            .max()
            .unwrap_or(0)
    }

    fn log_sphere(&self, k: usize) -> f64 {
        if self.q == 0 {
            0.0
        } else {
            log_sphere_size(k, self.q)
        }
    }

    fn run(&mut self, depth: usize, options: DenseOptions) {
        let dim = self.dim;
        let (lr, br) = (self.tree_reach(), self.box_reach());
        // coefficient lists: for a state at radius k and a step of tree length l,
        // the radii n reachable and how many elements land on each.
        let mut coeffs: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
        let mut state = Level {
            radius: 0,
            width: 0,
            windowed: false,
            log_scale: 0.0,
            log_total: 0.0,
            values: vec![1.0],
            present: vec![true],
        };
        let mut stored = 0usize;
        self.store(&state, &mut stored, options);
        for _ in 0..depth {
            let radius = state.radius + lr;
            let width = state.width + br;
            let side = 2 * width + 1;
            let cells = side.pow(dim as u32);
            let total = cells * (radius + 1);
            if total > options.cell_budget {
                self.exhausted = Some(Error::Budget {
                    what: "dense level cells",
                    needed: total,
                    cap: options.cell_budget,
                });
                return;
            }
            let mut values = vec![0.0; total];
            let mut present = vec![false; total];
            let strides: Vec<usize> = (0..dim).map(|i| side.pow(i as u32)).collect();
            let deltas: Vec<i64> = self
                .kernel
                .iter()
                .map(|e| e.offset.iter().zip(&strides).map(|(u, s)| u * *s as i64).sum())
                .collect();
            let old_cells = state.cells(dim);
            let mut coord = vec![0usize; dim];
            let mut base_of = Vec::with_capacity(old_cells);
            for _ in 0..old_cells {
                // old coordinate c maps to c + br in the new box
                base_of.push(
                    coord
                        .iter()
                        .zip(&strides)
                        .map(|(c, s)| (c + br) * s)
                        .sum::<usize>(),
                );
                for c in coord.iter_mut() {
                    *c += 1;
                    if *c < 2 * state.width + 1 {
                        break;
                    }
                    *c = 0;
                }
            }
            for k in 0..=state.radius {
                for (entry, delta) in self.kernel.iter().zip(&deltas) {
                    let list = coeffs.entry((k, entry.tree)).or_insert_with(|| {
                        transfer_counts(k, entry.tree, self.q)
                    });
                    for (cell, &base) in base_of.iter().enumerate() {
                        let i = k * old_cells + cell;
                        if !state.present[i] {
                            continue;
                        }
                        let x = state.values[i] * entry.value;
                        let nc = (base as i64 + delta) as usize;
                        for &(n, c) in list.iter() {
                            let j = n * cells + nc;
                            values[j] += x * c;
                            present[j] = true;
                        }
                    }
                }
            }
            let max = values.iter().copied().fold(0.0, f64::max);
            for v in &mut values {
                *v /= max;
            }
            let log_scale = state.log_scale + self.kernel_log_scale + max.ln();
            let sum: f64 = values.iter().sum();
            state = Level {
                radius,
                width,
                windowed: false,
                log_scale,
                log_total: log_scale + sum.ln(),
                values,
                present,
            };
            self.store(&state, &mut stored, options);
        }
    }

    fn store(&mut self, state: &Level, stored: &mut usize, options: DenseOptions) {
        let size = state.values.len();
        if *stored + size <= options.retain_budget {
            *stored += size;
            self.levels.push(state.clone());
            return;
        }
        let dim = self.dim;
        let radius = state.radius.min(options.track_radius);
        let width = state.width.min(options.track_width);
        let mut window = Level {
            radius,
            width,
            windowed: radius < state.radius || width < state.width,
            log_scale: state.log_scale,
            log_total: state.log_total,
            values: Vec::new(),
            present: Vec::new(),
        };
        let cells = window.cells(dim);
        window.values.reserve(cells * (radius + 1));
        let side = 2 * width + 1;
        let mut v = vec![0i64; dim];
        for k in 0..=radius {
            for cell in 0..cells {
                let mut rest = cell;
                for x in v.iter_mut() {
                    *x = (rest % side) as i64 - width as i64;
                    rest /= side;
                }
                let i = state.index(dim, k, &v).expect("window inside state");
                window.values.push(state.values[i]);
                window.present.push(state.present[i]);
            }
        }
        *stored += window.values.len();
        self.levels.push(window);
    }
}

/// For a state at tree radius `k` and a step of tree length `l`: the radii `n`
/// reached and the number of elements at each.
fn transfer_counts(k: usize, l: usize, q: usize) -> Vec<(usize, f64)> {
    if q == 0 {
        return vec![(0, 1.0)];
    }
    (k.saturating_sub(l)..=k + l)
        .filter_map(|n| {
            let c = tree_sphere_count(k, n, l, q);
            (c > 0).then_some((n, c as f64))
        })
        .collect()
}

fn reduce_kernel(step: &ScaledMeasure, shape: Shape, q: usize) -> Result<Vec<StepEntry>> {
    let mut groups: BTreeMap<(usize, Vec<i64>), Vec<f64>> = BTreeMap::new();
    for (g, m) in step.mantissas() {
        let (k, v) = split(shape, g);
        groups.entry((k, v.to_vec())).or_default().push(m);
    }
    let mut kernel = Vec::with_capacity(groups.len());
    for ((tree, offset), masses) in groups {
        let first = masses[0];
        if q > 0 {
            let size = log_sphere_size(tree, q).exp().round() as usize;
            let uniform = masses
                .iter()
                .all(|m| (m - first).abs() <= ISOTROPY_TOLERANCE * first);
            if masses.len() != size || !uniform {
                return Err(Error::NotIsotropic(format!(
                    "tree sphere {tree} with lattice offset {offset:?} is not uniformly weighted"
                )));
            }
        }
        kernel.push(StepEntry {
            tree,
            offset,
            value: first,
        });
    }
    Ok(kernel)
}

impl PowerTable for DensePowers {
    fn group(&self) -> &GroupDescriptor {
        self.step.group()
    }

    fn step(&self) -> &ScaledMeasure {
        &self.step
    }

    fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    fn engine(&self) -> Engine {
        match self.shape {
            Shape::Lattice => Engine::Lattice,
            Shape::Free => Engine::Radial,
            Shape::FreeTimesLattice => Engine::Cartesian,
        }
    }

    fn log_mass(&self, n: usize, g: &GroupElement) -> Result<Option<f64>> {
        self.check_level(n)?;
        if !self.group().contains(g) {
            return Err(Error::DescriptorMismatch {
                expected: self.group().to_string(),
            });
        }
        let level = &self.levels[n];
        let (k, v) = split(self.shape, g);
        match level.index(self.dim, k, v) {
            Some(i) if level.present[i] => {
                let m = level.values[i];
                if m >= UNDERFLOW_FLOOR {
                    Ok(Some(m.ln() + level.log_scale - self.log_sphere(k)))
                } else {
                    Err(Error::Underflow {
                        level: n,
                        element: self.group().format(g),
                    })
                }
            }
            Some(_) => Ok(None),
            None => {
                let reachable = k <= n * self.tree_reach()
                    && v.iter().all(|x| x.unsigned_abs() as usize <= n * self.box_reach());
                if level.windowed && reachable {
                    Err(Error::NotRetained {
                        level: n,
                        element: self.group().format(g),
                    })
                } else {
                    Ok(None)
                }
            }
        }
    }

    fn log_total(&self, n: usize) -> Result<f64> {
        self.check_level(n)?;
        Ok(self.levels[n].log_total)
    }

    fn exhausted(&self) -> Option<&Error> {
        self.exhausted.as_ref()
    }
}
